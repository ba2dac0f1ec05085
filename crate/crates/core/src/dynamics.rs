//! Time integration of the semi-classical spin equation.
//!
//! Unit-free equations per site `n` (with `sigma = sign(gamma)`, field
//! `h = e_B + b(t) + sum_m J(nm) s(m)`):
//!
//! * Ohmic bath, explicit Landau-Lifshitz form of the Gilbert equation:
//!   `ds/dt = sigma/(1+eta^2) s x h - eta/(1+eta^2) s x (s x h)`.
//! * Lorentzian bath, memory carried by the auxiliary field `v` and its
//!   rate `w`:
//!   `ds/dt = sigma s x (h + v)`, `dv/dt = w`,
//!   `dw/dt = -w0^2 v - gamma w + alpha s`.
//!
//! Noise is pre-generated on the output grid and linearly interpolated at
//! Runge-Kutta stages. Each grid step of length `dt` is split into
//! `substeps` classical RK4 steps.

use crate::coupling::PowerSpectrum;
use crate::error::{Error, Result};
use crate::model::{Bath, LorentzianParams, SpinSystem, Vec3};
use crate::noise::{generate, NoiseTrace, WhiteSeed};

pub const DEFAULT_DT: f64 = 0.15;
/// RK4 steps per grid step. Keeps `| |s| - 1 |` near 1e-7 over 10^4 grid
/// steps at `dt = 0.15` for the noise levels of interest.
pub const DEFAULT_SUBSTEPS: usize = 16;
/// Leading noise samples (in units of the inverse Larmor frequency)
/// discarded after circular colouring.
pub const DEFAULT_NOISE_MARGIN: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    pub substeps: usize,
    pub scheme: Scheme,
    /// Project every spin back to unit length after each grid step.
    pub renormalize: bool,
    pub bath: Bath,
    /// `None` integrates without noise.
    pub noise: Option<PowerSpectrum>,
    /// Wrap-around margin; at least ten kernel decay times are used.
    pub noise_margin: f64,
    /// Store the auxiliary field `v(t)` of a Lorentzian bath.
    pub record_bath_field: bool,
}

impl IntegratorConfig {
    pub fn new(bath: Bath, noise: Option<PowerSpectrum>, t_max: f64) -> Self {
        Self {
            dt: DEFAULT_DT,
            t_max,
            substeps: DEFAULT_SUBSTEPS,
            scheme: Scheme::Rk4,
            renormalize: false,
            bath,
            noise,
            noise_margin: DEFAULT_NOISE_MARGIN,
            record_bath_field: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Parameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return Err(Error::Parameter(format!(
                "t_max = {} must be at least dt = {}",
                self.t_max, self.dt
            )));
        }
        if self.substeps == 0 {
            return Err(Error::Parameter("substeps must be at least 1".into()));
        }
        if self.noise_margin.is_nan() || self.noise_margin < 0.0 {
            return Err(Error::Parameter("noise margin must be non-negative".into()));
        }
        if let Some(ps) = &self.noise {
            if ps.bath() != &self.bath {
                return Err(Error::Config(
                    "noise spectrum was built for a different bath".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    fn margin_samples(&self) -> usize {
        let margin = self.noise_margin.max(10.0 * self.bath.decay_time());
        (margin / self.dt).ceil() as usize
    }
}

/// Sampled spin trajectories of every site.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    /// `spins[site][step]`.
    pub spins: Vec<Vec<Vec3>>,
    /// `norms[site][step]`.
    pub norms: Vec<Vec<f64>>,
    /// Auxiliary bath field `v` per site and step, when recorded.
    pub bath_field: Option<Vec<Vec<Vec3>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sz(&self, site: usize) -> Vec<f64> {
        self.spins[site].iter().map(|s| s.z).collect()
    }

    /// `max_t | 1 - |s(t)| |` over every site.
    pub fn max_norm_deviation(&self) -> f64 {
        self.norms
            .iter()
            .flatten()
            .map(|n| (1.0 - n).abs())
            .fold(0.0, f64::max)
    }
}

/// Unit-free effective field at `site` and time `t`:
/// `e_B + b(t) + sum_m J(nm) s(m) + v`. Ohmic damping is not part of the
/// field; it enters the Landau-Lifshitz step directly.
pub fn effective_field(
    sys: &SpinSystem,
    site: usize,
    t: f64,
    noise: Option<&[NoiseTrace]>,
) -> Result<Vec3> {
    let mut h = sys.b_ext_dir + sys.aux_v[site];
    if sys.has_exchange() {
        h += sys.exchange_field(site, &sys.spins);
    }
    if let Some(traces) = noise {
        h += traces[site].at(t)?;
    }
    Ok(h)
}

/// Full phase-space state: spins and auxiliary bath variables.
#[derive(Debug, Clone)]
struct Phase {
    s: Vec<Vec3>,
    v: Vec<Vec3>,
    w: Vec<Vec3>,
}

impl Phase {
    fn zeros(n: usize) -> Self {
        Self {
            s: vec![Vec3::zeros(); n],
            v: vec![Vec3::zeros(); n],
            w: vec![Vec3::zeros(); n],
        }
    }

    fn from_system(sys: &SpinSystem) -> Self {
        Self {
            s: sys.spins.clone(),
            v: sys.aux_v.clone(),
            w: sys.aux_w.clone(),
        }
    }

    fn store(&self, sys: &mut SpinSystem) {
        sys.spins.clone_from(&self.s);
        sys.aux_v.clone_from(&self.v);
        sys.aux_w.clone_from(&self.w);
    }

    /// `self = base + h * k`.
    fn set_axpy(&mut self, base: &Phase, h: f64, k: &Phase) {
        for (dst, (b, d)) in [
            (&mut self.s, (&base.s, &k.s)),
            (&mut self.v, (&base.v, &k.v)),
            (&mut self.w, (&base.w, &k.w)),
        ] {
            for (x, (y, z)) in dst.iter_mut().zip(b.iter().zip(d)) {
                *x = y + z * h;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.s
            .iter()
            .chain(&self.v)
            .chain(&self.w)
            .all(|x| x.iter().all(|c| c.is_finite()))
    }
}

/// Right-hand side of the coupled spin/bath equations.
struct Rhs<'a> {
    sys: &'a SpinSystem,
    bath: Bath,
}

impl Rhs<'_> {
    fn eval(&self, x: &Phase, noise: &[Vec3], out: &mut Phase) {
        let sigma = self.sys.precession_sign;
        let exchange = self.sys.has_exchange();
        for (n, (&s, b)) in x.s.iter().zip(noise).enumerate() {
            let mut h = self.sys.b_ext_dir + b;
            if exchange {
                h += self.sys.exchange_field(n, &x.s);
            }
            match self.bath {
                Bath::Ohmic(p) => {
                    let denom = 1.0 + p.eta * p.eta;
                    let sxh = s.cross(&h);
                    out.s[n] = sxh * (sigma / denom) - s.cross(&sxh) * (p.eta / denom);
                    out.v[n] = Vec3::zeros();
                    out.w[n] = Vec3::zeros();
                }
                Bath::Lorentzian(p) => {
                    let v = x.v[n];
                    let w = x.w[n];
                    out.s[n] = s.cross(&(h + v)) * sigma;
                    out.v[n] = w;
                    out.w[n] = s * p.alpha - v * (p.omega0 * p.omega0) - w * p.gamma_width;
                }
            }
        }
    }
}

/// Scratch buffers for classical RK4.
struct Rk4 {
    k: [Phase; 4],
    stage: Phase,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| Phase::zeros(n)),
            stage: Phase::zeros(n),
        }
    }

    /// One step of length `h`; `noise` holds the field at the start, middle
    /// and end of the step.
    fn step(&mut self, rhs: &Rhs<'_>, x: &mut Phase, h: f64, noise: [&[Vec3]; 3]) {
        let [k1, k2, k3, k4] = &mut self.k;
        rhs.eval(x, noise[0], k1);
        self.stage.set_axpy(x, 0.5 * h, k1);
        rhs.eval(&self.stage, noise[1], k2);
        self.stage.set_axpy(x, 0.5 * h, k2);
        rhs.eval(&self.stage, noise[1], k3);
        self.stage.set_axpy(x, h, k3);
        rhs.eval(&self.stage, noise[2], k4);
        let c = h / 6.0;
        for (dst, parts) in [
            (&mut x.s, [&k1.s, &k2.s, &k3.s, &k4.s]),
            (&mut x.v, [&k1.v, &k2.v, &k3.v, &k4.v]),
            (&mut x.w, [&k1.w, &k2.w, &k3.w, &k4.w]),
        ] {
            for (i, y) in dst.iter_mut().enumerate() {
                *y += (parts[0][i] + parts[1][i] * 2.0 + parts[2][i] * 2.0 + parts[3][i]) * c;
            }
        }
    }
}

fn stage_noise(noise: Option<&[NoiseTrace]>, n: usize, t: f64, dt: f64) -> Result<[Vec<Vec3>; 3]> {
    let mut out: [Vec<Vec3>; 3] = std::array::from_fn(|_| vec![Vec3::zeros(); n]);
    if let Some(traces) = noise {
        if traces.len() < n {
            return Err(Error::Parameter(format!(
                "{} noise traces for {n} sites",
                traces.len()
            )));
        }
        for (stage, offset) in out.iter_mut().zip([0.0, 0.5, 1.0]) {
            for (site, b) in stage.iter_mut().enumerate() {
                *b = traces[site].at(t + offset * dt)?;
            }
        }
    }
    Ok(out)
}

fn single_step(
    sys: &mut SpinSystem,
    t: f64,
    dt: f64,
    noise: Option<&[NoiseTrace]>,
    bath: Bath,
) -> Result<()> {
    let n = sys.len();
    let b = stage_noise(noise, n, t, dt)?;
    let mut x = Phase::from_system(sys);
    let rhs = Rhs { sys, bath };
    Rk4::new(n).step(&rhs, &mut x, dt, [&b[0], &b[1], &b[2]]);
    x.store(sys);
    Ok(())
}

/// One RK4 step of the Landau-Lifshitz-Gilbert equation from time `t`.
pub fn step_llg(
    sys: &mut SpinSystem,
    t: f64,
    dt: f64,
    noise: Option<&[NoiseTrace]>,
    eta: f64,
) -> Result<()> {
    let params = crate::model::OhmicParams::new(eta)?;
    single_step(sys, t, dt, noise, Bath::Ohmic(params))
}

/// One RK4 step of the spin plus Lorentzian-bath embedding from time `t`.
pub fn step_lorentzian(
    sys: &mut SpinSystem,
    t: f64,
    dt: f64,
    noise: Option<&[NoiseTrace]>,
    params: &LorentzianParams,
) -> Result<()> {
    single_step(sys, t, dt, noise, Bath::Lorentzian(*params))
}

/// Seeded noise traces (one per site) covering `[0, t_max]` on the grid of
/// `cfg`. `None` when the configuration is noiseless.
pub fn noise_for(
    cfg: &IntegratorConfig,
    sites: usize,
    seed: u64,
) -> Result<Option<Vec<NoiseTrace>>> {
    let Some(spectrum) = cfg.noise.as_ref().filter(|s| !s.is_silent()) else {
        return Ok(None);
    };
    let margin = cfg.margin_samples();
    let n_samples = (cfg.n_steps() + 2 + margin).next_power_of_two();
    (0..sites)
        .map(|site| {
            let white = WhiteSeed::new(seed, n_samples, cfg.dt).with_stream(site as u64);
            generate(&white, spectrum, margin)
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Integrate `sys` over `[0, t_max]`, recording every grid step. The result
/// is a pure function of `(sys, cfg, seed)`.
pub fn integrate(sys: &SpinSystem, cfg: &IntegratorConfig, seed: u64) -> Result<Trajectory> {
    cfg.validate()?;
    let noise = noise_for(cfg, sys.len(), seed)?;
    integrate_with_noise(sys, cfg, noise.as_deref())
}

/// Integrate against explicitly supplied noise traces (sampled at `cfg.dt`).
pub fn integrate_with_noise(
    sys: &SpinSystem,
    cfg: &IntegratorConfig,
    noise: Option<&[NoiseTrace]>,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n_sites = sys.len();
    let n_steps = cfg.n_steps();
    if let Some(traces) = noise {
        if traces.len() < n_sites || traces.iter().any(|t| t.len() < n_steps + 1) {
            return Err(Error::Range {
                t: cfg.t_max,
                end: traces
                    .iter()
                    .map(NoiseTrace::end_time)
                    .fold(f64::INFINITY, f64::min),
            });
        }
    }
    let record_v = cfg.record_bath_field && matches!(cfg.bath, Bath::Lorentzian(_));

    let mut x = Phase::from_system(sys);
    let rhs = Rhs {
        sys,
        bath: cfg.bath,
    };
    let mut rk = Rk4::new(n_sites);
    let m = cfg.substeps;
    let h = cfg.dt / m as f64;

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut spins = vec![Vec::with_capacity(n_steps + 1); n_sites];
    let mut norms = vec![Vec::with_capacity(n_steps + 1); n_sites];
    let mut bath_field = record_v.then(|| vec![Vec::with_capacity(n_steps + 1); n_sites]);
    let mut record = |k: usize, x: &Phase| {
        times.push(k as f64 * cfg.dt);
        for n in 0..n_sites {
            spins[n].push(x.s[n]);
            norms[n].push(x.s[n].norm());
            if let Some(bf) = bath_field.as_mut() {
                bf[n].push(x.v[n]);
            }
        }
    };
    record(0, &x);

    let mut edges = [vec![Vec3::zeros(); n_sites], vec![Vec3::zeros(); n_sites]];
    let mut stages: [Vec<Vec3>; 3] = std::array::from_fn(|_| vec![Vec3::zeros(); n_sites]);
    for k in 0..n_steps {
        if let Some(traces) = noise {
            for (n, tr) in traces.iter().take(n_sites).enumerate() {
                edges[0][n] = tr.sample(k);
                edges[1][n] = tr.sample(k + 1);
            }
        }
        for j in 0..m {
            if noise.is_some() {
                for (stage, offset) in stages.iter_mut().zip([0.0, 0.5, 1.0]) {
                    let f = (j as f64 + offset) / m as f64;
                    for n in 0..n_sites {
                        stage[n] = edges[0][n] * (1.0 - f) + edges[1][n] * f;
                    }
                }
            }
            rk.step(&rhs, &mut x, h, [&stages[0], &stages[1], &stages[2]]);
        }
        if cfg.renormalize {
            for s in &mut x.s {
                *s /= s.norm();
            }
        }
        if !x.is_finite() {
            return Err(Error::Diverged { step: k + 1 });
        }
        record(k + 1, &x);
    }

    Ok(Trajectory {
        dt: cfg.dt,
        times,
        spins,
        norms,
        bath_field,
    })
}

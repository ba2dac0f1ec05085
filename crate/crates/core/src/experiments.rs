//! Ensemble statistics, steady-state extraction, temperature sweeps and
//! the Boltzmann reference curve.

use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::coupling::{power_spectrum, SpectrumKind, DEFAULT_OHMIC_CUTOFF};
use crate::dynamics::{integrate, IntegratorConfig, Trajectory, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{Bath, LorentzianParams, OhmicParams, SpinSystem, UnitFrame, HBAR, K_B};

/// Block length (inverse Larmor frequencies) for autocorrelation-robust
/// error bars.
pub const BLOCK_LENGTH: f64 = 50.0;
/// Fewest blocks a steady-state window may hold.
pub const MIN_BLOCKS: usize = 10;
/// Desk-scale sweep length, `2 pi x 500`.
pub const DESK_SWEEP_T_MAX: f64 = 2.0 * std::f64::consts::PI * 500.0;
/// Full-scale sweep length, `2 pi x 7200`.
pub const FULL_SWEEP_T_MAX: f64 = 2.0 * std::f64::consts::PI * 7200.0;
/// Largest tolerated fraction of diverged ensemble members.
pub const MAX_DIVERGED_FRACTION: f64 = 0.01;

/// The four dynamics/noise combinations compared throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Gilbert damping with classical white noise.
    LlgClassical,
    /// Gilbert damping with quantum (zero-point plus thermal) noise.
    LlgQuantum,
    /// Lorentzian bath, near-Ohmic parameters.
    LorentzianSet1,
    /// Lorentzian bath, resonance near the Larmor frequency.
    LorentzianSet2,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::LlgClassical,
        Method::LlgQuantum,
        Method::LorentzianSet1,
        Method::LorentzianSet2,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Method::LlgClassical => "llg-classical",
            Method::LlgQuantum => "llg-quantum",
            Method::LorentzianSet1 => "lorentzian-set1",
            Method::LorentzianSet2 => "lorentzian-set2",
        }
    }

    /// Bath of the method. Both LLG variants use the damping shared by the
    /// two Lorentzian sets.
    pub fn bath(&self) -> Bath {
        match self {
            Method::LlgClassical | Method::LlgQuantum => Bath::Ohmic(OhmicParams {
                eta: LorentzianParams::set1().eta(),
            }),
            Method::LorentzianSet1 => Bath::Lorentzian(LorentzianParams::set1()),
            Method::LorentzianSet2 => Bath::Lorentzian(LorentzianParams::set2()),
        }
    }

    pub fn spectrum_kind(&self) -> SpectrumKind {
        match self {
            Method::LlgClassical => SpectrumKind::ClassicalOhmic,
            Method::LlgQuantum => SpectrumKind::QuantumOhmic,
            Method::LorentzianSet1 | Method::LorentzianSet2 => SpectrumKind::QuantumLorentzian,
        }
    }

    pub fn is_quantum(&self) -> bool {
        self.spectrum_kind().is_quantum()
    }

    /// Integrator configuration for this method at temperature `T` (K).
    pub fn config(
        &self,
        frame: &UnitFrame,
        temperature: f64,
        t_max: f64,
    ) -> Result<IntegratorConfig> {
        let bath = self.bath();
        let cutoff = (*self == Method::LlgQuantum).then_some(DEFAULT_OHMIC_CUTOFF);
        let spectrum = power_spectrum(self.spectrum_kind(), bath, temperature, frame, cutoff)?;
        Ok(IntegratorConfig::new(bath, Some(spectrum), t_max))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Site-averaged `s_z` of a trajectory at each recorded time.
pub fn mean_sz(traj: &Trajectory) -> Vec<f64> {
    let sites = traj.spins.len() as f64;
    (0..traj.len())
        .map(|k| traj.spins.iter().map(|s| s[k].z).sum::<f64>() / sites)
        .collect()
}

/// Pointwise ensemble mean of `s_z(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTrace {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Trajectories that entered the average.
    pub used: usize,
    /// Seeds of trajectories dropped because they diverged.
    pub diverged: Vec<u64>,
}

/// Average `n_traj` trajectories with seeds `base_seed ^ i`.
pub fn ensemble_average(
    sys: &SpinSystem,
    cfg: &IntegratorConfig,
    n_traj: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<EnsembleTrace> {
    if n_traj < 2 {
        return Err(Error::Parameter(format!(
            "ensemble needs at least 2 trajectories, got {n_traj}"
        )));
    }
    cfg.validate()?;
    let runs = exec.map_indexed(n_traj, |i| {
        let seed = base_seed ^ i as u64;
        (
            seed,
            integrate(sys, cfg, seed).map(|t| (t.times.clone(), mean_sz(&t))),
        )
    });

    let mut diverged = Vec::new();
    let mut times = Vec::new();
    let mut traces = Vec::with_capacity(n_traj);
    for (seed, run) in runs {
        match run {
            Ok((t, sz)) => {
                if times.is_empty() {
                    times = t;
                }
                traces.push(sz);
            }
            Err(Error::Diverged { step }) => {
                warn!("trajectory with seed {seed} diverged at step {step}; excluded");
                diverged.push(seed);
            }
            Err(e) => return Err(e),
        }
    }
    if diverged.len() as f64 > MAX_DIVERGED_FRACTION * n_traj as f64 || traces.len() < 2 {
        return Err(Error::EnsembleDiverged {
            failed: diverged.len(),
            total: n_traj,
        });
    }

    let n = traces.len() as f64;
    let len = times.len();
    let mut mean = vec![0.0; len];
    let mut stderr = vec![0.0; len];
    for k in 0..len {
        let m = traces.iter().map(|t| t[k]).sum::<f64>() / n;
        let var = traces.iter().map(|t| (t[k] - m).powi(2)).sum::<f64>() / (n - 1.0);
        mean[k] = m;
        stderr[k] = (var / n).sqrt();
    }
    Ok(EnsembleTrace {
        times,
        mean,
        stderr,
        used: traces.len(),
        diverged,
    })
}

/// Late-time average of a sampled series over the final `window_fraction`
/// of its span, with the error from non-overlapping blocks of length
/// `BLOCK_LENGTH`.
pub fn late_time_average(series: &[f64], dt: f64, window_fraction: f64) -> Result<Estimate> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::Parameter(format!(
            "window fraction must lie in (0, 1], got {window_fraction}"
        )));
    }
    let len = series.len();
    let start = ((1.0 - window_fraction) * (len.saturating_sub(1)) as f64).round() as usize;
    let window = &series[start.min(len)..];
    let block = (BLOCK_LENGTH / dt).round().max(1.0) as usize;
    let blocks = window.len() / block;
    if blocks < MIN_BLOCKS {
        return Err(Error::Parameter(format!(
            "averaging window of {:.1} holds {blocks} blocks of {BLOCK_LENGTH}, need {MIN_BLOCKS}",
            window.len() as f64 * dt
        )));
    }
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let block_means: Vec<f64> = window
        .chunks_exact(block)
        .map(|c| c.iter().sum::<f64>() / block as f64)
        .collect();
    let bm = block_means.iter().sum::<f64>() / blocks as f64;
    let var = block_means.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (blocks as f64 - 1.0);
    Ok(Estimate {
        mean,
        stderr: (var / blocks as f64).sqrt(),
    })
}

/// Time-averaged `s_z` of a single trajectory over its final
/// `window_fraction`.
pub fn steady_state_sz(
    sys: &SpinSystem,
    cfg: &IntegratorConfig,
    seed: u64,
    window_fraction: f64,
) -> Result<Estimate> {
    let traj = integrate(sys, cfg, seed)?;
    late_time_average(&mean_sz(&traj), cfg.dt, window_fraction)
}

/// Boltzmann average `<s_z> = coth(a) - 1/a`, `a = n hbar omega_L / (2 k_B T)`.
pub fn statphys_oracle(spin_halves: u32, temperature: f64, frame: &UnitFrame) -> f64 {
    let a = f64::from(spin_halves) * frame.quantum_thermal_ratio(temperature);
    langevin(a)
}

/// `coth(a) - 1/a`, continued to 1 at infinity.
pub fn langevin(a: f64) -> f64 {
    if a.is_infinite() {
        1.0
    } else if a.abs() < 1e-4 {
        a / 3.0 - a.powi(3) / 45.0
    } else {
        crate::coupling::coth(a) - 1.0 / a
    }
}

/// Temperature whose classical white noise matches the zero-point noise at
/// the Larmor frequency: `hbar omega_L / (2 k_B)`.
pub fn equivalent_classical_temperature(frame: &UnitFrame) -> f64 {
    HBAR * frame.larmor() / (2.0 * K_B)
}

/// Settings shared by every point of a temperature sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub frame: UnitFrame,
    pub initial: crate::model::Vec3,
    pub dt: f64,
    pub t_max: f64,
    pub substeps: usize,
    /// Independent trajectories averaged per point.
    pub replicas: usize,
    pub window_fraction: f64,
    pub base_seed: u64,
}

impl SweepSpec {
    pub fn new(frame: UnitFrame) -> Self {
        Self {
            frame,
            initial: crate::model::Vec3::new(-1.0, 0.0, 0.0),
            dt: DEFAULT_DT,
            t_max: DESK_SWEEP_T_MAX,
            substeps: crate::dynamics::DEFAULT_SUBSTEPS,
            replicas: 16,
            window_fraction: 0.25,
            base_seed: 0,
        }
    }
}

/// Steady-state `s_z` against temperature for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub method: Method,
    pub temperatures: Vec<f64>,
    pub sz_mean: Vec<f64>,
    pub sz_stderr: Vec<f64>,
    /// Boltzmann reference at each temperature.
    pub oracle: Vec<f64>,
    /// `m(T) = s_z(T) / s_z(0)`, present when the grid starts at `T = 0`.
    pub rescaled: Option<Vec<f64>>,
}

/// Steady-state `s_z` of every method at every temperature. Each point
/// averages the late-time means of `spec.replicas` trajectories with seeds
/// `base_seed ^ r`; the error is the spread across replicas (or the block
/// error for a single replica).
pub fn temperature_sweep(
    methods: &[Method],
    temperatures: &[f64],
    spec: &SweepSpec,
    exec: Execution,
) -> Result<Vec<SweepResult>> {
    if temperatures.is_empty() || methods.is_empty() {
        return Err(Error::Parameter(
            "sweep needs at least one method and one temperature".into(),
        ));
    }
    if temperatures.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter(
            "sweep temperatures must be sorted ascending".into(),
        ));
    }
    if spec.replicas == 0 {
        return Err(Error::Parameter("sweep needs at least one replica".into()));
    }
    let sys = SpinSystem::single(spec.initial, &spec.frame)?;
    let configs = methods
        .iter()
        .flat_map(|m| temperatures.iter().map(move |&t| (m, t)))
        .map(|(m, t)| {
            let mut cfg = m.config(&spec.frame, t, spec.t_max)?;
            cfg.dt = spec.dt;
            cfg.substeps = spec.substeps;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let r = spec.replicas;
    let runs = exec.map_indexed(configs.len() * r, |i| {
        let seed = spec.base_seed ^ (i % r) as u64;
        steady_state_sz(&sys, &configs[i / r], seed, spec.window_fraction)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let n_t = temperatures.len();
    let results = methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let points: Vec<Estimate> = (0..n_t)
                .map(|ti| {
                    let reps = &runs[(mi * n_t + ti) * r..(mi * n_t + ti + 1) * r];
                    combine_replicas(reps)
                })
                .collect();
            let sz_mean: Vec<f64> = points.iter().map(|p| p.mean).collect();
            let rescaled =
                (temperatures[0] == 0.0).then(|| sz_mean.iter().map(|s| s / sz_mean[0]).collect());
            SweepResult {
                method,
                temperatures: temperatures.to_vec(),
                sz_stderr: points.iter().map(|p| p.stderr).collect(),
                oracle: temperatures
                    .iter()
                    .map(|&t| statphys_oracle(spec.frame.spin_halves(), t, &spec.frame))
                    .collect(),
                sz_mean,
                rescaled,
            }
        })
        .collect();
    Ok(results)
}

fn combine_replicas(reps: &[Estimate]) -> Estimate {
    if let [single] = reps {
        return *single;
    }
    let n = reps.len() as f64;
    let mean = reps.iter().map(|e| e.mean).sum::<f64>() / n;
    let var = reps.iter().map(|e| (e.mean - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        mean,
        stderr: (var / n).sqrt(),
    }
}

/// First time after which `trace` stays within `band` (relative) of its
/// plateau, the mean over the last quarter. A trace that never settles
/// reports its final time.
pub fn equilibration_time(times: &[f64], trace: &[f64], band: f64) -> Result<f64> {
    if times.len() != trace.len() || times.len() < 4 {
        return Err(Error::Parameter(
            "equilibration needs matching series of at least 4 samples".into(),
        ));
    }
    let tail = &trace[trace.len() * 3 / 4..];
    let plateau = tail.iter().sum::<f64>() / tail.len() as f64;
    let tol = band * plateau.abs();
    match trace.iter().rposition(|x| (x - plateau).abs() > tol) {
        None => Ok(times[0]),
        Some(k) if k + 1 < times.len() => Ok(times[k + 1]),
        Some(_) => Ok(*times.last().unwrap_or(&0.0)),
    }
}

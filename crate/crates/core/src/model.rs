//! Domain types shared by every other module.
//!
//! Everything downstream of configuration is unit-free: time in units of
//! the inverse Larmor frequency, fields in units of `|B_ext|`, spins as unit
//! vectors aligned with the external field. [`UnitFrame`] is the only place
//! SI quantities are converted.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};

use crate::error::{param, Result};

pub type Vec3 = Vector3<f64>;
pub type Tensor3 = Matrix3<f64>;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
/// Electron gyromagnetic ratio (1/(s T)).
pub const GAMMA_ELECTRON: f64 = -1.76e11;

/// Conversion context between SI and unit-free quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitFrame {
    b_ext: f64,
    gamma: f64,
    spin_halves: u32,
    larmor: f64,
}

impl UnitFrame {
    /// Field magnitude in tesla, signed gyromagnetic ratio, and spin length
    /// `S0 = n hbar / 2`.
    pub fn new(b_ext_tesla: f64, gamma_si: f64, spin_halves: u32) -> Result<Self> {
        if !(b_ext_tesla.is_finite() && b_ext_tesla > 0.0) {
            return Err(param(format!(
                "field magnitude must be positive, got {b_ext_tesla}"
            )));
        }
        if !(gamma_si.is_finite() && gamma_si != 0.0) {
            return Err(param("gyromagnetic ratio must be non-zero"));
        }
        if spin_halves == 0 {
            return Err(param("spin length must be at least hbar/2"));
        }
        Ok(Self {
            b_ext: b_ext_tesla,
            gamma: gamma_si,
            spin_halves,
            larmor: gamma_si.abs() * b_ext_tesla,
        })
    }

    pub fn b_ext(&self) -> f64 {
        self.b_ext
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn spin_halves(&self) -> u32 {
        self.spin_halves
    }

    /// Larmor angular frequency `|gamma| |B_ext|` in rad/s.
    pub fn larmor(&self) -> f64 {
        self.larmor
    }

    /// `sign(gamma)`, the precession sense carried by the unit-free equations.
    pub fn precession_sign(&self) -> f64 {
        self.gamma.signum()
    }

    /// Spin length `S0` in J s.
    pub fn s0(&self) -> f64 {
        f64::from(self.spin_halves) * HBAR / 2.0
    }

    pub fn time_to_si(&self, t: f64) -> f64 {
        t / self.larmor
    }

    pub fn time_from_si(&self, t_si: f64) -> f64 {
        t_si * self.larmor
    }

    pub fn frequency_to_si(&self, omega: f64) -> f64 {
        omega * self.larmor
    }

    pub fn frequency_from_si(&self, omega_si: f64) -> f64 {
        omega_si / self.larmor
    }

    pub fn field_to_si(&self, b: f64) -> f64 {
        b * self.b_ext
    }

    pub fn field_from_si(&self, b_si: f64) -> f64 {
        b_si / self.b_ext
    }

    /// `K = |B|^2 / S0 * k`.
    pub fn kernel_to_si(&self, k: f64) -> f64 {
        k * self.b_ext * self.b_ext / self.s0()
    }

    pub fn kernel_from_si(&self, k_si: f64) -> f64 {
        k_si * self.s0() / (self.b_ext * self.b_ext)
    }

    /// `C = |B| S0^{-1/2} c`.
    pub fn coupling_to_si(&self, c: f64) -> f64 {
        c * self.b_ext / self.s0().sqrt()
    }

    pub fn coupling_from_si(&self, c_si: f64) -> f64 {
        c_si * self.s0().sqrt() / self.b_ext
    }

    /// `P = hbar |B|^2 / (S0 omega_L) * p`.
    pub fn spectrum_to_si(&self, p: f64) -> f64 {
        p * HBAR * self.b_ext * self.b_ext / (self.s0() * self.larmor)
    }

    pub fn spectrum_from_si(&self, p_si: f64) -> f64 {
        p_si * self.s0() * self.larmor / (HBAR * self.b_ext * self.b_ext)
    }

    /// Power spectral density of the unit-free field `b / |B_ext|` in
    /// unit-free time per unit of `p`: `hbar / S0 = 2 / n`.
    pub fn field_noise_scale(&self) -> f64 {
        2.0 / f64::from(self.spin_halves)
    }

    /// `hbar omega_L / (2 k_B T)`, the factor multiplying a unit-free
    /// frequency inside the Bose-Einstein `coth`. Infinite at `T = 0`.
    pub fn quantum_thermal_ratio(&self, temperature: f64) -> f64 {
        HBAR * self.larmor / (2.0 * K_B * temperature)
    }

    /// `k_B T / (hbar omega_L)`.
    pub fn thermal_energy(&self, temperature: f64) -> f64 {
        K_B * temperature / (HBAR * self.larmor)
    }
}

/// Memory-free (Gilbert) bath with unit-free damping `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhmicParams {
    pub eta: f64,
}

impl OhmicParams {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(param(format!(
                "Gilbert damping must be positive, got {eta}"
            )));
        }
        Ok(Self { eta })
    }

    /// SI damping `eta_G = eta / (gamma^2 S0)`.
    pub fn gilbert_si(&self, frame: &UnitFrame) -> f64 {
        self.eta / (frame.gamma() * frame.gamma() * frame.s0())
    }
}

/// Lorentzian bath: resonance `omega0`, width `gamma_width`, amplitude
/// frequency `alpha`, all in units of the Larmor frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianParams {
    pub omega0: f64,
    pub gamma_width: f64,
    pub alpha: f64,
}

impl LorentzianParams {
    pub fn new(omega0: f64, gamma_width: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("omega0", omega0), ("gamma", gamma_width), ("alpha", alpha)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(param(format!(
                    "Lorentzian {name} must be positive, got {v}"
                )));
            }
        }
        if omega0 <= gamma_width / 2.0 {
            return Err(param(format!(
                "overdamped Lorentzian (omega0 = {omega0} <= gamma/2 = {}) has no real omega1",
                gamma_width / 2.0
            )));
        }
        Ok(Self {
            omega0,
            gamma_width,
            alpha,
        })
    }

    /// Near-Ohmic parameter set: `omega0 = 7, gamma = 5, alpha = 10`.
    pub fn set1() -> Self {
        Self {
            omega0: 7.0,
            gamma_width: 5.0,
            alpha: 10.0,
        }
    }

    /// Strongly non-Markovian set: `omega0 = 1.4, gamma = 0.5, alpha = 0.16`.
    pub fn set2() -> Self {
        Self {
            omega0: 1.4,
            gamma_width: 0.5,
            alpha: 0.16,
        }
    }

    /// Damped oscillation frequency of the kernel, `sqrt(omega0^2 - gamma^2/4)`.
    pub fn omega1(&self) -> f64 {
        (self.omega0 * self.omega0 - 0.25 * self.gamma_width * self.gamma_width).sqrt()
    }

    /// Equivalent Gilbert damping `alpha gamma / omega0^4`.
    pub fn eta(&self) -> f64 {
        self.alpha * self.gamma_width / self.omega0.powi(4)
    }

    /// Kernel decay time `2 / gamma`.
    pub fn decay_time(&self) -> f64 {
        2.0 / self.gamma_width
    }

    /// SI kernel amplitude `A = |B|^2 alpha omega_L / S0`.
    pub fn amplitude_si(&self, frame: &UnitFrame) -> f64 {
        frame.b_ext() * frame.b_ext() * self.alpha * frame.larmor() / frame.s0()
    }
}

/// Which reservoir the spin is coupled to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bath {
    Ohmic(OhmicParams),
    Lorentzian(LorentzianParams),
}

impl Bath {
    /// Effective Gilbert damping of the bath.
    pub fn eta(&self) -> f64 {
        match self {
            Bath::Ohmic(p) => p.eta,
            Bath::Lorentzian(p) => p.eta(),
        }
    }

    /// Memory time of the kernel; zero for the instantaneous Ohmic kernel.
    pub fn decay_time(&self) -> f64 {
        match self {
            Bath::Ohmic(_) => 0.0,
            Bath::Lorentzian(p) => p.decay_time(),
        }
    }
}

/// Exchange couplings keyed by ordered site pair `(n, m)`.
pub type ExchangeMap = BTreeMap<(usize, usize), Tensor3>;

/// Symmetrize raw exchange tensors: `J(nm) = (J(nm) + J(mn)^T) / 2`, with a
/// missing partner treated as zero. Self-exchange is rejected.
pub fn symmetrize_exchange(raw: &ExchangeMap) -> Result<ExchangeMap> {
    let mut out = ExchangeMap::new();
    for &(n, m) in raw.keys() {
        if n == m {
            return Err(param(format!(
                "self-exchange entry ({n}, {n}) is not allowed"
            )));
        }
        for (a, b) in [(n, m), (m, n)] {
            if out.contains_key(&(a, b)) {
                continue;
            }
            let forward = raw.get(&(a, b)).copied().unwrap_or_else(Tensor3::zeros);
            let backward = raw.get(&(b, a)).copied().unwrap_or_else(Tensor3::zeros);
            out.insert((a, b), (forward + backward.transpose()) * 0.5);
        }
    }
    Ok(out)
}

/// N classical unit spins in a common external field, with optional
/// exchange and the per-site auxiliary bath state `(V, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    pub spins: Vec<Vec3>,
    pub b_ext_dir: Vec3,
    pub precession_sign: f64,
    exchange: ExchangeMap,
    pub aux_v: Vec<Vec3>,
    pub aux_w: Vec<Vec3>,
}

const UNIT_TOL: f64 = 1e-9;

impl SpinSystem {
    pub fn new(spins: Vec<Vec3>, b_ext_dir: Vec3, precession_sign: f64) -> Result<Self> {
        if spins.is_empty() {
            return Err(param("spin system needs at least one site"));
        }
        for (i, s) in spins.iter().enumerate() {
            if (s.norm() - 1.0).abs() > UNIT_TOL {
                return Err(param(format!(
                    "spin {i} is not a unit vector (|s| = {})",
                    s.norm()
                )));
            }
        }
        if (b_ext_dir.norm() - 1.0).abs() > UNIT_TOL {
            return Err(param("field direction must be a unit vector"));
        }
        if precession_sign != 1.0 && precession_sign != -1.0 {
            return Err(param("precession sign must be +1 or -1"));
        }
        let n = spins.len();
        Ok(Self {
            spins,
            b_ext_dir,
            precession_sign,
            exchange: ExchangeMap::new(),
            aux_v: vec![Vec3::zeros(); n],
            aux_w: vec![Vec3::zeros(); n],
        })
    }

    /// One spin in a field along `e_z` with the precession sense of `frame`.
    pub fn single(spin: Vec3, frame: &UnitFrame) -> Result<Self> {
        Self::new(vec![spin], Vec3::z(), frame.precession_sign())
    }

    /// Attach exchange couplings; the raw map is symmetrized once here.
    pub fn with_exchange(mut self, raw: &ExchangeMap) -> Result<Self> {
        let n = self.spins.len();
        if let Some(&(a, b)) = raw.keys().find(|&&(a, b)| a >= n || b >= n) {
            return Err(param(format!(
                "exchange entry ({a}, {b}) refers to a missing site"
            )));
        }
        self.exchange = symmetrize_exchange(raw)?;
        Ok(self)
    }

    pub fn exchange(&self) -> &ExchangeMap {
        &self.exchange
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    /// Exchange field `sum_{m != n} J(nm) s(m)` at site `n` for the given spins.
    pub(crate) fn exchange_field(&self, site: usize, spins: &[Vec3]) -> Vec3 {
        self.exchange
            .range((site, 0)..(site + 1, 0))
            .map(|(&(_, m), j)| j * spins[m])
            .sum()
    }

    pub(crate) fn has_exchange(&self) -> bool {
        !self.exchange.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn larmor_for_ten_tesla() {
        let f = UnitFrame::new(10.0, GAMMA_ELECTRON, 1).unwrap();
        assert_relative_eq!(f.larmor(), 1.76e12, max_relative = 1e-12);
        let inv = f.time_to_si(1.0);
        assert!((inv - 0.57e-12).abs() < 0.005e-12, "{inv}");
    }

    #[test]
    fn spin_length_does_not_change_larmor() {
        let a = UnitFrame::new(10.0, GAMMA_ELECTRON, 1).unwrap();
        let b = UnitFrame::new(10.0, GAMMA_ELECTRON, 200).unwrap();
        assert_eq!(a.larmor(), b.larmor());
        assert_relative_eq!(b.s0(), 200.0 * HBAR / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn larmor_linear_in_field() {
        let f = UnitFrame::new(1.0, GAMMA_ELECTRON, 1).unwrap();
        assert_relative_eq!(f.larmor(), 1.76e11, max_relative = 1e-12);
    }

    #[test]
    fn frame_rejects_bad_input() {
        assert!(UnitFrame::new(0.0, GAMMA_ELECTRON, 1).is_err());
        assert!(UnitFrame::new(-1.0, GAMMA_ELECTRON, 1).is_err());
        assert!(UnitFrame::new(1.0, 0.0, 1).is_err());
        assert!(UnitFrame::new(1.0, GAMMA_ELECTRON, 0).is_err());
    }

    #[test]
    fn lorentzian_validation() {
        assert!(LorentzianParams::new(1.0, 2.0, 1.0).is_err());
        assert!(LorentzianParams::new(1.0, 1.9, 1.0).is_ok());
        assert!(LorentzianParams::new(0.0, 1.0, 1.0).is_err());
        assert!(LorentzianParams::new(1.0, 1.0, -1.0).is_err());
        assert!(OhmicParams::new(0.0).is_err());
    }

    #[test]
    fn preset_sets_share_eta() {
        assert_relative_eq!(
            LorentzianParams::set1().eta(),
            50.0 / 2401.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            LorentzianParams::set2().eta(),
            50.0 / 2401.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(LorentzianParams::set2().omega1(), (1.96f64 - 0.0625).sqrt());
    }

    #[test]
    fn symmetrize_missing_partner() {
        let mut raw = ExchangeMap::new();
        raw.insert((0, 1), Tensor3::identity());
        let out = symmetrize_exchange(&raw).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[&(0, 1)], Tensor3::identity() * 0.5);
        assert_eq!(out[&(1, 0)], Tensor3::identity() * 0.5);
    }

    #[test]
    fn symmetrize_fixed_point() {
        let t = Tensor3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.5);
        let mut raw = ExchangeMap::new();
        raw.insert((0, 1), t);
        raw.insert((1, 0), t.transpose());
        let out = symmetrize_exchange(&raw).unwrap();
        assert_eq!(out[&(0, 1)], t);
        assert_eq!(out[&(1, 0)], t.transpose());
    }

    #[test]
    fn symmetrize_rejects_self_exchange() {
        let mut raw = ExchangeMap::new();
        raw.insert((2, 2), Tensor3::identity());
        assert!(symmetrize_exchange(&raw).is_err());
    }

    #[test]
    fn spin_system_validates() {
        assert!(SpinSystem::new(vec![Vec3::new(1.0, 1.0, 0.0)], Vec3::z(), -1.0).is_err());
        assert!(SpinSystem::new(vec![], Vec3::z(), -1.0).is_err());
        assert!(SpinSystem::new(vec![Vec3::x()], Vec3::z(), 0.5).is_err());
        let sys = SpinSystem::new(vec![Vec3::x(), Vec3::y()], Vec3::z(), 1.0).unwrap();
        let mut raw = ExchangeMap::new();
        raw.insert((0, 5), Tensor3::identity());
        assert!(sys.with_exchange(&raw).is_err());
    }
}

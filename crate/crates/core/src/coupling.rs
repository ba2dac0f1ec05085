//! Coupling functions, memory kernels, kernel moments and the noise power
//! spectra fixed by the fluctuation-dissipation relation.
//!
//! All quantities are unit-free: frequencies in units of the Larmor
//! frequency, kernels and spectra in the scaled forms defined by
//! [`UnitFrame`]. Fourier convention: `f(w) = int dt e^{+i w t} f(t)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Bath, LorentzianParams, UnitFrame, HBAR, K_B};

/// Default hard cutoff for the quantum Ohmic spectrum, in units of the
/// Larmor frequency.
pub const DEFAULT_OHMIC_CUTOFF: f64 = 10.0;

/// Ohmic coupling `c(w) = sqrt(2 eta / pi) w` (the `eps -> 0+` limit).
pub fn ohmic_coupling(omega: f64, eta: f64) -> Result<f64> {
    if omega < 0.0 || omega.is_nan() {
        return Err(Error::Domain(format!(
            "coupling frequency must be >= 0, got {omega}"
        )));
    }
    Ok((2.0 * eta / PI).sqrt() * omega)
}

/// Lorentzian coupling
/// `c(w) = sqrt((2 alpha gamma / pi) w^2 / ((w0^2 - w^2)^2 + w^2 gamma^2))`.
pub fn lorentzian_coupling(omega: f64, p: &LorentzianParams) -> Result<f64> {
    if omega < 0.0 || omega.is_nan() {
        return Err(Error::Domain(format!(
            "coupling frequency must be >= 0, got {omega}"
        )));
    }
    let w2 = omega * omega;
    Ok((2.0 * p.alpha * p.gamma_width / PI * w2 / lorentz_denominator(omega, p)).sqrt())
}

fn lorentz_denominator(omega: f64, p: &LorentzianParams) -> f64 {
    let w2 = omega * omega;
    let detune = p.omega0 * p.omega0 - w2;
    detune * detune + w2 * p.gamma_width * p.gamma_width
}

/// Causal Lorentzian kernel `Theta(t) alpha e^{-gamma t/2} sin(w1 t) / w1`.
pub fn lorentzian_kernel_time(tau: f64, p: &LorentzianParams) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let w1 = p.omega1();
    p.alpha * (-0.5 * p.gamma_width * tau).exp() * (w1 * tau).sin() / w1
}

/// Lorentzian kernel in frequency space, `alpha / (w0^2 - w^2 - i w gamma)`.
pub fn lorentzian_kernel_freq(omega: f64, p: &LorentzianParams) -> Complex64 {
    let denom = Complex64::new(p.omega0 * p.omega0 - omega * omega, -omega * p.gamma_width);
    Complex64::from(p.alpha) / denom
}

/// Ohmic kernel in frequency space, `i eta w` (transform of `-eta delta'`).
pub fn ohmic_kernel_freq(omega: f64, eta: f64) -> Complex64 {
    Complex64::new(0.0, eta * omega)
}

/// Kernel moments `kappa_m = (-1)^m / m! int_0^inf t^m K(t) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMoments {
    /// `kappa[0]` is `kappa_1`.
    pub kappa: Vec<f64>,
    /// Inertial timescale `kappa_2 / kappa_1`.
    pub tau_in: f64,
    /// Kernel decay time `2 / gamma`.
    pub tau_d: f64,
}

impl KernelMoments {
    /// `kappa_m` for `m >= 1`.
    pub fn kappa(&self, m: usize) -> f64 {
        self.kappa[m - 1]
    }

    pub fn max_order(&self) -> usize {
        self.kappa.len()
    }
}

/// Closed-form Lorentzian moments
/// `kappa_m = (-1)^m alpha / (w1 w0^{2(m+1)}) Im[(gamma/2 + i w1)^{m+1}]`.
pub fn kernel_moments(p: &LorentzianParams, max_m: usize) -> Result<KernelMoments> {
    if max_m < 2 {
        return Err(Error::Parameter(format!(
            "need at least two moments, got {max_m}"
        )));
    }
    let w1 = p.omega1();
    let root = Complex64::new(0.5 * p.gamma_width, w1);
    let w0sq = p.omega0 * p.omega0;
    let kappa: Vec<f64> = (1..=max_m)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let exp = i32::try_from(m + 1).expect("moment order fits in i32");
            sign * p.alpha / (w1 * w0sq.powi(exp)) * root.powi(exp).im
        })
        .collect();
    let tau_in = kappa[1] / kappa[0];
    Ok(KernelMoments {
        kappa,
        tau_in,
        tau_d: p.decay_time(),
    })
}

/// Supremum over `grid` of `|c(w)^2 - (2 w / pi) Im K(w)|`.
pub fn fdt_check<C, K>(coupling: C, kernel: K, grid: &[f64]) -> f64
where
    C: Fn(f64) -> f64,
    K: Fn(f64) -> Complex64,
{
    grid.iter()
        .map(|&w| {
            let c = coupling(w);
            (c * c - 2.0 * w / PI * kernel(w).im).abs()
        })
        .fold(0.0, f64::max)
}

/// `coth(x)` for `x != 0` through `expm1`, accurate near the origin and
/// saturating cleanly for large arguments.
pub fn coth(x: f64) -> f64 {
    let a = x.abs();
    let v = 1.0 + 2.0 / (2.0 * a).exp_m1();
    v.copysign(x)
}

/// `w coth(ratio w)` with its removable value `1 / ratio` at `w = 0`.
/// An infinite `ratio` (zero temperature) gives `|w|`.
pub fn omega_coth(omega: f64, ratio: f64) -> f64 {
    if ratio.is_infinite() {
        return omega.abs();
    }
    let x = ratio * omega;
    if x.abs() < 1e-6 {
        return (1.0 + x * x / 3.0) / ratio;
    }
    omega * coth(x)
}

/// Reservoir statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpectrumKind {
    ClassicalOhmic,
    QuantumOhmic,
    QuantumLorentzian,
    ClassicalLorentzian,
}

impl SpectrumKind {
    pub fn name(&self) -> &'static str {
        match self {
            SpectrumKind::ClassicalOhmic => "classical-ohmic",
            SpectrumKind::QuantumOhmic => "quantum-ohmic",
            SpectrumKind::QuantumLorentzian => "quantum-lorentzian",
            SpectrumKind::ClassicalLorentzian => "classical-lorentzian",
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(
            self,
            SpectrumKind::QuantumOhmic | SpectrumKind::QuantumLorentzian
        )
    }

    fn is_ohmic(&self) -> bool {
        matches!(
            self,
            SpectrumKind::ClassicalOhmic | SpectrumKind::QuantumOhmic
        )
    }
}

impl std::fmt::Display for SpectrumKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SpectrumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "classical-ohmic" => SpectrumKind::ClassicalOhmic,
            "quantum-ohmic" => SpectrumKind::QuantumOhmic,
            "quantum-lorentzian" => SpectrumKind::QuantumLorentzian,
            "classical-lorentzian" => SpectrumKind::ClassicalLorentzian,
            other => return Err(Error::Config(format!("unknown spectrum kind '{other}'"))),
        })
    }
}

/// Symmetrized noise power spectrum `p(w) = Im K(w) * thermal factor`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    kind: SpectrumKind,
    bath: Bath,
    temperature: f64,
    cutoff: Option<f64>,
    /// `hbar omega_L / (2 k_B T)`.
    ratio: f64,
    /// `k_B T / (hbar omega_L)`.
    thermal: f64,
    /// `4 k_B (T / n) / (hbar omega_L)`: classical field-noise level per unit
    /// of `Im K / w`. Depends on `T` and `n` only through `T / n`.
    classical_level: f64,
    field_scale: f64,
}

/// Build the noise spectrum of `kind` for `bath` at temperature `T` (K).
pub fn power_spectrum(
    kind: SpectrumKind,
    bath: Bath,
    temperature: f64,
    frame: &UnitFrame,
    cutoff: Option<f64>,
) -> Result<PowerSpectrum> {
    if temperature.is_nan() || temperature < 0.0 || temperature.is_infinite() {
        return Err(Error::Domain(format!(
            "temperature must be >= 0 K, got {temperature}"
        )));
    }
    match (kind.is_ohmic(), bath) {
        (true, Bath::Ohmic(_)) | (false, Bath::Lorentzian(_)) => {}
        _ => {
            return Err(Error::Config(format!(
                "spectrum {kind} does not match bath {bath:?}"
            )));
        }
    }
    if let Some(wc) = cutoff {
        if !(wc.is_finite() && wc > 0.0) {
            return Err(Error::Config(format!("cutoff must be positive, got {wc}")));
        }
    } else if kind == SpectrumKind::QuantumOhmic {
        return Err(Error::Config(
            "quantum-ohmic spectrum requires a finite cutoff".into(),
        ));
    }
    let t_per_half = temperature / f64::from(frame.spin_halves());
    Ok(PowerSpectrum {
        kind,
        bath,
        temperature,
        cutoff,
        ratio: frame.quantum_thermal_ratio(temperature),
        thermal: frame.thermal_energy(temperature),
        classical_level: 4.0 * K_B * t_per_half / (HBAR * frame.larmor()),
        field_scale: frame.field_noise_scale(),
    })
}

impl PowerSpectrum {
    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn bath(&self) -> &Bath {
        &self.bath
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    /// `Im K(w) / w`, the frequency-resolved damping strength.
    fn damping_weight(&self, omega: f64) -> f64 {
        match &self.bath {
            Bath::Ohmic(p) => p.eta,
            Bath::Lorentzian(p) => p.alpha * p.gamma_width / lorentz_denominator(omega, p),
        }
    }

    fn in_band(&self, omega: f64) -> bool {
        self.cutoff.is_none_or(|wc| omega.abs() <= wc)
    }

    /// Unit-free spectral function `p(w)`.
    pub fn density(&self, omega: f64) -> f64 {
        if !self.in_band(omega) {
            return 0.0;
        }
        let weight = self.damping_weight(omega);
        if self.kind.is_quantum() {
            weight * omega_coth(omega, self.ratio)
        } else {
            2.0 * weight * self.thermal
        }
    }

    /// Power spectral density of the unit-free noise field `b / |B_ext|`
    /// on the unit-free time axis: `(hbar / S0) p(w)`.
    pub fn field_density(&self, omega: f64) -> f64 {
        if !self.in_band(omega) {
            return 0.0;
        }
        if self.kind.is_quantum() {
            self.field_scale * self.density(omega)
        } else {
            self.damping_weight(omega) * self.classical_level
        }
    }

    /// True when the spectrum vanishes at every frequency (classical noise
    /// at zero temperature).
    pub fn is_silent(&self) -> bool {
        !self.kind.is_quantum() && self.temperature == 0.0
    }
}

/// Low-frequency expansion of the quantum Lorentzian spectrum,
/// `sum (-1)^{m+1} w^{2m+1} kappa_{2m+1} coth(...)`, keeping every odd
/// moment `kappa_j` with `j <= max(order, 1)`.
pub fn psd_expansion(
    p: &LorentzianParams,
    order: usize,
    omega: f64,
    temperature: f64,
    frame: &UnitFrame,
) -> Result<f64> {
    if temperature.is_nan() || temperature < 0.0 {
        return Err(Error::Domain(format!(
            "temperature must be >= 0 K, got {temperature}"
        )));
    }
    let top = order.max(1);
    let moments = kernel_moments(p, top.max(2))?;
    let w2 = omega * omega;
    let mut series = 0.0;
    let mut power = 1.0;
    for (m, j) in (1..=top).step_by(2).enumerate() {
        let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
        series += sign * power * moments.kappa(j);
        power *= w2;
    }
    Ok(series * omega_coth(omega, frame.quantum_thermal_ratio(temperature)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OhmicParams, GAMMA_ELECTRON};
    use approx::assert_relative_eq;

    fn frame(n: u32) -> UnitFrame {
        UnitFrame::new(10.0, GAMMA_ELECTRON, n).unwrap()
    }

    #[test]
    fn ohmic_coupling_values() {
        assert_eq!(ohmic_coupling(0.0, 0.02).unwrap(), 0.0);
        let one = ohmic_coupling(1.0, 0.02).unwrap();
        assert_relative_eq!(one, (0.04 / PI).sqrt(), max_relative = 1e-15);
        assert!((one - 0.11284).abs() < 1e-5);
        assert_relative_eq!(
            ohmic_coupling(2.0, 0.02).unwrap(),
            2.0 * one,
            max_relative = 1e-15
        );
        assert!(ohmic_coupling(-1.0, 0.02).is_err());
    }

    #[test]
    fn lorentzian_coupling_limits() {
        let s1 = LorentzianParams::set1();
        assert_eq!(lorentzian_coupling(0.0, &s1).unwrap(), 0.0);
        assert!(lorentzian_coupling(1e6, &s1).unwrap() < 1e-5);
        let s2 = LorentzianParams::set2();
        let res = lorentzian_coupling(s2.omega0, &s2).unwrap();
        assert_relative_eq!(
            res,
            (2.0 * s2.alpha / (PI * s2.gamma_width)).sqrt(),
            max_relative = 1e-14
        );
        assert!(lorentzian_coupling(-0.1, &s1).is_err());
    }

    #[test]
    fn set1_coupling_is_ohmic_at_low_frequency() {
        let s1 = LorentzianParams::set1();
        for i in 1..=50 {
            let w = 0.01 * f64::from(i);
            let lor = lorentzian_coupling(w, &s1).unwrap();
            let ohm = ohmic_coupling(w, s1.eta()).unwrap();
            assert!((lor / ohm - 1.0).abs() < 0.02, "w = {w}: {}", lor / ohm);
        }
    }

    #[test]
    fn kernel_is_causal() {
        let s1 = LorentzianParams::set1();
        assert_eq!(lorentzian_kernel_time(-1.0, &s1), 0.0);
        assert_eq!(lorentzian_kernel_time(0.0, &s1), 0.0);
        assert!(lorentzian_kernel_time(0.1, &s1) > 0.0);
    }

    #[test]
    fn moments_closed_form() {
        let m1 = kernel_moments(&LorentzianParams::set1(), 4).unwrap();
        assert_relative_eq!(m1.kappa(1), -50.0 / 2401.0, max_relative = 1e-12);
        assert_relative_eq!(
            m1.kappa(2),
            10.0 * (25.0 - 49.0) / 7f64.powi(6),
            max_relative = 1e-12
        );
        assert_relative_eq!(m1.tau_in, 24.0 / 245.0, max_relative = 1e-12);
        assert_relative_eq!(m1.tau_d, 0.4);
        let m2 = kernel_moments(&LorentzianParams::set2(), 2).unwrap();
        assert_relative_eq!(
            m2.tau_in,
            (1.96 - 0.25) / (1.96 * 0.5),
            max_relative = 1e-12
        );
        assert!((m2.tau_in - 1.745).abs() < 1e-3);
        assert_relative_eq!(m2.tau_d, 4.0);
        assert!(kernel_moments(&LorentzianParams::set1(), 1).is_err());
    }

    #[test]
    fn eta_matches_first_moment() {
        for p in [LorentzianParams::set1(), LorentzianParams::set2()] {
            let k = kernel_moments(&p, 2).unwrap();
            assert_relative_eq!(p.eta(), -k.kappa(1), max_relative = 1e-10);
        }
    }

    #[test]
    fn fdt_identity_and_negative_control() {
        let grid: Vec<f64> = (0..=2000).map(|i| f64::from(i) * 0.01).collect();
        let s1 = LorentzianParams::set1();
        let r = fdt_check(
            |w| lorentzian_coupling(w, &s1).unwrap(),
            |w| lorentzian_kernel_freq(w, &s1),
            &grid,
        );
        assert!(r < 1e-10, "{r}");
        let r = fdt_check(
            |w| ohmic_coupling(w, 0.02).unwrap(),
            |w| ohmic_kernel_freq(w, 0.02),
            &grid,
        );
        assert!(r < 1e-10, "{r}");
        let s2 = LorentzianParams::set2();
        let r = fdt_check(
            |w| lorentzian_coupling(w, &s1).unwrap(),
            |w| lorentzian_kernel_freq(w, &s2),
            &grid,
        );
        assert!(r > 0.1, "{r}");
    }

    #[test]
    fn coth_behaviour() {
        assert_relative_eq!(coth(1.0), 1.0 / 1f64.tanh(), max_relative = 1e-14);
        assert_relative_eq!(coth(-2.0), -1.0 / 2f64.tanh(), max_relative = 1e-14);
        assert_eq!(coth(800.0), 1.0);
        assert_relative_eq!(omega_coth(0.0, 2.0), 0.5);
        assert_relative_eq!(omega_coth(1e-9, 2.0), 0.5, max_relative = 1e-12);
        assert_eq!(omega_coth(-3.0, f64::INFINITY), 3.0);
    }

    #[test]
    fn classical_ohmic_is_white() {
        let f = frame(1);
        let ohm = Bath::Ohmic(OhmicParams::new(0.02).unwrap());
        let ps = power_spectrum(SpectrumKind::ClassicalOhmic, ohm, 200.0, &f, None).unwrap();
        let v0 = ps.density(0.0);
        for w in [0.3, 1.0, 5.0, -7.0, 100.0] {
            assert_eq!(ps.density(w), v0);
        }
        assert_relative_eq!(
            v0,
            2.0 * 0.02 * f.thermal_energy(200.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn quantum_ohmic_zero_temperature_is_linear() {
        let f = frame(1);
        let ohm = Bath::Ohmic(OhmicParams::new(0.02).unwrap());
        let ps = power_spectrum(SpectrumKind::QuantumOhmic, ohm, 0.0, &f, Some(10.0)).unwrap();
        for w in [-3.0, 0.0, 0.5, 2.0, 9.99] {
            assert_relative_eq!(ps.density(w), 0.02 * w.abs());
        }
        assert_eq!(ps.density(10.5), 0.0);
        assert!(power_spectrum(SpectrumKind::QuantumOhmic, ohm, 0.0, &f, None).is_err());
        assert!(power_spectrum(SpectrumKind::QuantumOhmic, ohm, -1.0, &f, Some(10.0)).is_err());
    }

    #[test]
    fn lorentzian_low_frequency_matches_classical_ohmic() {
        let f = frame(1);
        let s1 = LorentzianParams::set1();
        let lor = power_spectrum(
            SpectrumKind::QuantumLorentzian,
            Bath::Lorentzian(s1),
            200.0,
            &f,
            None,
        )
        .unwrap();
        let ohm = Bath::Ohmic(OhmicParams::new(s1.eta()).unwrap());
        let cl = power_spectrum(SpectrumKind::ClassicalOhmic, ohm, 200.0, &f, None).unwrap();
        let ratio = lor.density(1e-3) / cl.density(1e-3);
        assert!((ratio - 1.0).abs() < 1e-4, "{ratio}");
    }

    #[test]
    fn mismatched_kind_is_rejected() {
        let f = frame(1);
        let r = power_spectrum(
            SpectrumKind::ClassicalOhmic,
            Bath::Lorentzian(LorentzianParams::set1()),
            1.0,
            &f,
            None,
        );
        assert!(r.is_err());
    }

    #[test]
    fn expansion_orders() {
        let f = frame(1);
        let s2 = LorentzianParams::set2();
        let k = kernel_moments(&s2, 2).unwrap();
        let w = 0.05;
        let zeroth = psd_expansion(&s2, 0, w, 1.0, &f).unwrap();
        assert_relative_eq!(
            zeroth,
            -k.kappa(1) * omega_coth(w, f.quantum_thermal_ratio(1.0)),
            max_relative = 1e-14
        );
        for odd in [1usize, 3, 5] {
            let a = psd_expansion(&s2, odd, 0.3, 5.0, &f).unwrap();
            let b = psd_expansion(&s2, odd + 1, 0.3, 5.0, &f).unwrap();
            assert_eq!(a, b);
        }
        let exact = power_spectrum(
            SpectrumKind::QuantumLorentzian,
            Bath::Lorentzian(s2),
            1.0,
            &f,
            None,
        )
        .unwrap()
        .density(0.1);
        let approx3 = psd_expansion(&s2, 3, 0.1, 1.0, &f).unwrap();
        assert!((approx3 / exact - 1.0).abs() < 0.01);
    }
}

mod common;

use approx::assert_relative_eq;
use memspin_core::coupling::*;
use memspin_core::model::{Bath, LorentzianParams, OhmicParams, UnitFrame, GAMMA_ELECTRON};
use proptest::prelude::*;

fn frame(n: u32) -> UnitFrame {
    UnitFrame::new(10.0, GAMMA_ELECTRON, n).unwrap()
}

#[test]
fn moments_match_quadrature() {
    for p in [LorentzianParams::set1(), LorentzianParams::set2()] {
        let closed = kernel_moments(&p, 4).unwrap();
        for m in 1..=4 {
            assert_relative_eq!(
                common::moment_by_quadrature(&p, m),
                closed.kappa(m as usize),
                max_relative = 1e-9
            );
        }
    }
}

#[test]
fn inertial_times_are_exact() {
    assert_relative_eq!(
        kernel_moments(&LorentzianParams::set1(), 2).unwrap().tau_in,
        24.0 / 245.0,
        epsilon = 1e-15
    );
    let set2 = kernel_moments(&LorentzianParams::set2(), 2).unwrap();
    assert_relative_eq!(set2.tau_in, 1.71 / 0.98, epsilon = 1e-12);
    assert_relative_eq!(set2.tau_d, 4.0, epsilon = 1e-15);
}

#[test]
fn first_moment_is_minus_eta() {
    for p in [LorentzianParams::set1(), LorentzianParams::set2()] {
        assert_relative_eq!(
            kernel_moments(&p, 2).unwrap().kappa(1),
            -50.0 / 2401.0,
            max_relative = 1e-13
        );
    }
}

#[test]
fn kernel_transform_matches_time_domain() {
    let p = LorentzianParams::set2();
    for w in [0.0, 0.5, 1.0, 1.4, 3.0] {
        let re = common::integrate(
            |t| lorentzian_kernel_time(t, &p) * (w * t).cos(),
            0.0,
            200.0,
            4000,
            10,
        );
        let im = common::integrate(
            |t| lorentzian_kernel_time(t, &p) * (w * t).sin(),
            0.0,
            200.0,
            4000,
            10,
        );
        let k = lorentzian_kernel_freq(w, &p);
        assert_relative_eq!(re, k.re, epsilon = 1e-10);
        assert_relative_eq!(im, k.im, epsilon = 1e-10);
    }
}

#[test]
fn psd_expansion_converges_at_low_frequency() {
    let f = frame(1);
    let p = LorentzianParams::set1();
    let bath = Bath::Lorentzian(p);
    let exact = power_spectrum(SpectrumKind::QuantumLorentzian, bath, 1.0, &f, None).unwrap();
    let w = 0.5;
    let e1 = (psd_expansion(&p, 1, w, 1.0, &f).unwrap() - exact.density(w)).abs();
    let e3 = (psd_expansion(&p, 3, w, 1.0, &f).unwrap() - exact.density(w)).abs();
    let e7 = (psd_expansion(&p, 7, w, 1.0, &f).unwrap() - exact.density(w)).abs();
    assert!(e3 < e1 && e7 < e3, "{e1} {e3} {e7}");
    assert!(e7 < 1e-6 * exact.density(w));
}

#[test]
fn zero_point_equals_classical_at_tcl() {
    let f = frame(1);
    let bath = Bath::Ohmic(OhmicParams::new(0.02).unwrap());
    let tcl = memspin_core::experiments::equivalent_classical_temperature(&f);
    let qu = power_spectrum(SpectrumKind::QuantumOhmic, bath, 0.0, &f, Some(10.0)).unwrap();
    let cl = power_spectrum(SpectrumKind::ClassicalOhmic, bath, tcl, &f, None).unwrap();
    assert_relative_eq!(
        qu.field_density(1.0),
        cl.field_density(1.0),
        max_relative = 1e-12
    );
}

#[test]
fn spectrum_errors() {
    let f = frame(1);
    let bath = Bath::Ohmic(OhmicParams::new(0.02).unwrap());
    assert!(matches!(
        power_spectrum(SpectrumKind::ClassicalOhmic, bath, -1.0, &f, None),
        Err(memspin_core::Error::Domain(_))
    ));
    assert!(matches!(
        power_spectrum(SpectrumKind::QuantumOhmic, bath, 1.0, &f, None),
        Err(memspin_core::Error::Config(_))
    ));
    assert!(power_spectrum(SpectrumKind::QuantumLorentzian, bath, 1.0, &f, None).is_err());
}

proptest! {
    #[test]
    fn fdt_holds_for_any_lorentzian(w0 in 0.5f64..10.0, frac in 0.05f64..1.9, alpha in 0.01f64..20.0) {
        let p = LorentzianParams::new(w0, frac * w0, alpha).unwrap();
        let grid: Vec<f64> = (0..=400).map(|k| k as f64 * 0.05).collect();
        let r = fdt_check(|w| lorentzian_coupling(w, &p).unwrap(), |w| lorentzian_kernel_freq(w, &p), &grid);
        let scale = alpha / (frac * w0);
        prop_assert!(r <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn quantum_spectrum_dominates_classical_zero_point(w in 0.01f64..20.0, t in 0.0f64..300.0) {
        // coth(x) >= 1/x and coth(x) >= 1 for x > 0.
        let f = frame(1);
        let bath = Bath::Lorentzian(LorentzianParams::set2());
        let qu = power_spectrum(SpectrumKind::QuantumLorentzian, bath, t, &f, None).unwrap();
        let cl = power_spectrum(SpectrumKind::ClassicalLorentzian, bath, t, &f, None).unwrap();
        prop_assert!(qu.density(w) >= cl.density(w) * (1.0 - 1e-12));
        let lossy = lorentzian_kernel_freq(w, &LorentzianParams::set2()).im;
        prop_assert!(qu.density(w) >= lossy * (1.0 - 1e-12));
    }

    #[test]
    fn spectra_are_even(w in -20.0f64..20.0, t in 0.0f64..300.0) {
        let f = frame(3);
        let bath = Bath::Lorentzian(LorentzianParams::set1());
        let ps = power_spectrum(SpectrumKind::QuantumLorentzian, bath, t, &f, None).unwrap();
        prop_assert!((ps.field_density(w) - ps.field_density(-w)).abs() <= 1e-14 * ps.field_density(w).abs().max(1e-300));
    }
}

//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use memspin_core::model::{LorentzianParams, Vec3};

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            x.iter()
                .zip(&w)
                .map(|(xi, wi)| wi * f(mid + 0.5 * h * xi))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// `kappa_m = (-1)^m / m! int_0^inf t^m K(t) dt` by quadrature over
/// `[0, 100 / gamma]`, where the kernel envelope has fallen to `e^-50`.
pub fn moment_by_quadrature(p: &LorentzianParams, m: u32) -> f64 {
    let w1 = (p.omega0 * p.omega0 - 0.25 * p.gamma_width * p.gamma_width).sqrt();
    let kernel = |t: f64| p.alpha * (-0.5 * p.gamma_width * t).exp() * (w1 * t).sin() / w1;
    let end = 100.0 / p.gamma_width;
    let panels = (end / 0.05).ceil() as usize;
    let raw = integrate(|t| t.powi(m as i32) * kernel(t), 0.0, end, panels, 12);
    let factorial: f64 = (1..=m).map(f64::from).product();
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * raw / factorial
}

/// Value at `t` of the Lagrange polynomial through the `width` samples of
/// `ys` (spacing `dt`) nearest to `t`.
pub fn lagrange(ys: &[Vec3], dt: f64, t: f64, width: usize) -> Vec3 {
    let x = t / dt;
    let half = width / 2;
    let centre = x.floor() as isize;
    let start = (centre - half as isize + 1).clamp(0, (ys.len() - width) as isize) as usize;
    let mut out = Vec3::zeros();
    for (j, y) in ys.iter().enumerate().skip(start).take(width) {
        let mut l = 1.0;
        for k in start..start + width {
            if k != j {
                l *= (x - k as f64) / (j as f64 - k as f64);
            }
        }
        out += y * l;
    }
    out
}

/// `V(t_k) = int_0^{t_k} K(t_k - t') s(t') dt'` for every grid time, with
/// `s` interpolated from its samples.
pub fn lorentzian_convolution(p: &LorentzianParams, s: &[Vec3], dt: f64) -> Vec<Vec3> {
    let w1 = (p.omega0 * p.omega0 - 0.25 * p.gamma_width * p.gamma_width).sqrt();
    let kernel = |tau: f64| p.alpha * (-0.5 * p.gamma_width * tau).exp() * (w1 * tau).sin() / w1;
    let (x, w) = gauss_legendre(10);
    // Interpolated spin at the quadrature nodes of every interval, reused
    // for all output times.
    let nodes: Vec<Vec<(f64, Vec3)>> = (0..s.len().saturating_sub(1))
        .map(|i| {
            let mid = (i as f64 + 0.5) * dt;
            x.iter()
                .zip(&w)
                .map(|(xi, wi)| {
                    let t = mid + 0.5 * dt * xi;
                    (t, lagrange(s, dt, t, 8) * (wi * 0.5 * dt))
                })
                .collect()
        })
        .collect();
    (0..s.len())
        .map(|k| {
            let t = k as f64 * dt;
            nodes[..k]
                .iter()
                .flatten()
                .map(|&(tp, sw)| sw * kernel(t - tp))
                .sum()
        })
        .collect()
}

/// Boltzmann average `coth(a) - 1/a` from the partition function
/// `Z(a) = sinh(a) / a` by numerical differentiation of `ln Z`.
pub fn boltzmann_sz(a: f64) -> f64 {
    let ln_z = |a: f64| integrate(|u| (a * u).exp(), -1.0, 1.0, 64, 12).ln();
    let h = 1e-4 * a.max(1.0);
    (ln_z(a + h) - ln_z(a - h)) / (2.0 * h)
}

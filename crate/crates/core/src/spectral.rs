//! Welch power-spectrum estimation for checking generated noise.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Averaged periodogram on the non-negative frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    /// Angular frequencies `2 pi k / (L dt)`, `k = 0..=L/2`.
    pub omega: Vec<f64>,
    /// Two-sided density `S(w)` (same convention as the target spectra).
    pub density: Vec<f64>,
    pub segments: usize,
}

/// Welch estimate with a Hann window and 50% overlap.
pub fn welch(x: &[f64], dt: f64, segment_len: usize) -> Result<Periodogram> {
    if segment_len < 8 || segment_len > x.len() {
        return Err(Error::Parameter(format!(
            "segment length {segment_len} invalid for {} samples",
            x.len()
        )));
    }
    let hop = segment_len / 2;
    let window: Vec<f64> = (0..segment_len)
        .map(|i| {
            let phase = 2.0 * std::f64::consts::PI * i as f64 / segment_len as f64;
            0.5 * (1.0 - phase.cos())
        })
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let bins = segment_len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buffer = vec![Complex64::default(); segment_len];
    let mut segments = 0;
    let mut start = 0;
    while start + segment_len <= x.len() {
        let seg = &x[start..start + segment_len];
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        for ((b, &v), &w) in buffer.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buffer);
        for (a, b) in acc.iter_mut().zip(&buffer) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = dt / (window_power * segments as f64);
    let omega = (0..bins)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / (segment_len as f64 * dt))
        .collect();
    let density = acc.into_iter().map(|a| a * scale).collect();
    Ok(Periodogram {
        omega,
        density,
        segments,
    })
}

impl Periodogram {
    /// Mean of the estimate over bins with `lo <= w < hi`, together with
    /// the mean of `target` over the same bins.
    pub fn band_mean<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, target: F) -> Option<(f64, f64)> {
        let mut n = 0usize;
        let (mut est, mut tgt) = (0.0, 0.0);
        for (&w, &d) in self.omega.iter().zip(&self.density) {
            if w >= lo && w < hi {
                est += d;
                tgt += target(w);
                n += 1;
            }
        }
        (n > 0).then(|| (est / n as f64, tgt / n as f64))
    }

    /// Frequency of the largest estimate, skipping the DC bin.
    pub fn peak_frequency(&self) -> f64 {
        let (k, _) =
            self.density
                .iter()
                .enumerate()
                .skip(1)
                .fold(
                    (1, f64::MIN),
                    |best, (k, &d)| if d > best.1 { (k, d) } else { best },
                );
        self.omega[k]
    }

    pub fn resolution(&self) -> f64 {
        self.omega.get(1).copied().unwrap_or(0.0)
    }
}

/// Relative mismatch of a trace's Welch spectrum against `target` over
/// bands of width `band` in `[0, w_max)`, considering only bands whose
/// mean target exceeds `floor_fraction` of the target's maximum on the
/// same bins. Returns the worst relative error and the number of bands
/// checked.
pub fn band_fidelity<F: Fn(f64) -> f64>(
    estimate: &Periodogram,
    target: F,
    band: f64,
    w_max: f64,
    floor_fraction: f64,
) -> (f64, usize) {
    let peak = estimate
        .omega
        .iter()
        .filter(|&&w| w < w_max)
        .map(|&w| target(w))
        .fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut lo = 0.0;
    while lo < w_max {
        let hi = (lo + band).min(w_max);
        if let Some((est, tgt)) = estimate.band_mean(lo, hi, &target) {
            if tgt > floor_fraction * peak {
                worst = worst.max((est / tgt - 1.0).abs());
                checked += 1;
            }
        }
        lo = hi;
    }
    (worst, checked)
}

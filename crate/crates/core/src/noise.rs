//! Seeded white Gaussian noise and its spectral colouring into stationary
//! magnetic-noise traces.
//!
//! White samples come from ChaCha8 (one stream per site) through the
//! ziggurat normal sampler of `rand_distr`. Colouring multiplies the
//! discrete Fourier transform of each component by `sqrt(S(w_k))` and
//! transforms back, i.e. a circular convolution with the filter whose
//! transform is the square root of the target spectrum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::coupling::PowerSpectrum;
use crate::error::{Error, Result};
use crate::model::Vec3;

/// Seed and grid of a white-noise draw. Identical seeds give bit-identical
/// samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhiteSeed {
    pub seed: u64,
    /// ChaCha stream, used to give each lattice site its own sequence.
    pub stream: u64,
    pub n_samples: usize,
    pub dt: f64,
}

impl WhiteSeed {
    pub fn new(seed: u64, n_samples: usize, dt: f64) -> Self {
        Self {
            seed,
            stream: 0,
            n_samples,
            dt,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }
}

/// Three components of i.i.d. Gaussian samples with variance `1 / dt`, the
/// discrete form of delta-correlated unit white noise.
pub fn white_gaussian(seed: &WhiteSeed) -> Result<[Vec<f64>; 3]> {
    let dt = seed.dt;
    if seed.n_samples < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 samples, got {}",
            seed.n_samples
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Parameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.seed);
    rng.set_stream(seed.stream);
    let scale = dt.recip().sqrt();
    let mut draw = || -> Vec<f64> {
        (0..seed.n_samples)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect()
    };
    let x = draw();
    let y = draw();
    let z = draw();
    Ok([x, y, z])
}

/// Anything that can report a two-sided power spectral density for the
/// unit-free noise field.
pub trait SpectralDensity {
    fn field_density(&self, omega: f64) -> f64;

    fn describe(&self) -> String;
}

impl SpectralDensity for PowerSpectrum {
    fn field_density(&self, omega: f64) -> f64 {
        PowerSpectrum::field_density(self, omega)
    }

    fn describe(&self) -> String {
        let cutoff = self
            .cutoff()
            .map_or_else(|| "none".to_string(), |c| c.to_string());
        format!(
            "{} T={}K cutoff={} bath={:?}",
            self.kind(),
            self.temperature(),
            cutoff,
            self.bath()
        )
    }
}

/// Frequency-independent spectrum of the given level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatSpectrum(pub f64);

impl SpectralDensity for FlatSpectrum {
    fn field_density(&self, _omega: f64) -> f64 {
        self.0
    }

    fn describe(&self) -> String {
        format!("flat {}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub white: Option<WhiteSeed>,
    pub spectrum: String,
}

/// Stationary coloured noise sampled on a uniform grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    pub components: [Vec<f64>; 3],
    pub dt: f64,
    pub provenance: Provenance,
    /// Largest imaginary residue of the inverse transform relative to the
    /// RMS amplitude.
    pub imag_residue: f64,
}

/// Discrete angular frequency of FFT bin `k` out of `n`, mapped to
/// `[-n/2, n/2)`.
pub fn bin_frequency(k: usize, n: usize, dt: f64) -> f64 {
    let signed = if 2 * k < n {
        k as f64
    } else {
        k as f64 - n as f64
    };
    2.0 * std::f64::consts::PI * signed / (n as f64 * dt)
}

/// Colour white samples to the target spectrum: `IFFT(sqrt(S(w_k)) FFT(xi))`.
pub fn colour<S: SpectralDensity + ?Sized>(
    white: &[Vec<f64>; 3],
    psd: &S,
    dt: f64,
) -> Result<NoiseTrace> {
    let n = white[0].len();
    if white.iter().any(|c| c.len() != n) {
        return Err(Error::Parameter(
            "white noise components differ in length".into(),
        ));
    }
    if n < 2 {
        return Err(Error::Parameter(
            "noise trace needs at least 2 samples".into(),
        ));
    }
    let filter: Vec<f64> = (0..n)
        .map(|k| {
            let w = bin_frequency(k, n, dt);
            let s = psd.field_density(w);
            if s.is_nan() || s < 0.0 {
                Err(Error::Internal(format!("spectral density {s} at w = {w}")))
            } else {
                Ok(s.sqrt())
            }
        })
        .collect::<Result<_>>()?;

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let norm = 1.0 / n as f64;

    let mut worst_residue: f64 = 0.0;
    let mut components: [Vec<f64>; 3] = Default::default();
    let mut buffer = vec![Complex64::default(); n];
    for (out, xi) in components.iter_mut().zip(white) {
        for (b, &x) in buffer.iter_mut().zip(xi) {
            *b = Complex64::new(x, 0.0);
        }
        forward.process(&mut buffer);
        for (b, &g) in buffer.iter_mut().zip(&filter) {
            *b *= g;
        }
        inverse.process(&mut buffer);
        let mut max_im: f64 = 0.0;
        let mut sum_sq = 0.0;
        *out = buffer
            .iter()
            .map(|c| {
                let re = c.re * norm;
                max_im = max_im.max((c.im * norm).abs());
                sum_sq += re * re;
                re
            })
            .collect();
        let rms = (sum_sq / n as f64).sqrt();
        if rms > 0.0 {
            worst_residue = worst_residue.max(max_im / rms);
        }
    }
    Ok(NoiseTrace {
        components,
        dt,
        provenance: Provenance {
            white: None,
            spectrum: psd.describe(),
        },
        imag_residue: worst_residue,
    })
}

/// Draw white noise for `seed`, colour it, and drop the first
/// `margin` samples affected by the periodic wrap-around.
pub fn generate<S: SpectralDensity + ?Sized>(
    seed: &WhiteSeed,
    psd: &S,
    margin: usize,
) -> Result<NoiseTrace> {
    if margin + 2 > seed.n_samples {
        return Err(Error::Parameter(format!(
            "margin of {margin} samples leaves nothing of a {}-sample trace",
            seed.n_samples
        )));
    }
    let white = white_gaussian(seed)?;
    let mut trace = colour(&white, psd, seed.dt)?;
    for c in &mut trace.components {
        c.drain(..margin);
    }
    trace.provenance.white = Some(*seed);
    Ok(trace)
}

impl NoiseTrace {
    /// Silent trace of `len` samples.
    pub fn zeros(len: usize, dt: f64) -> Self {
        Self {
            components: [vec![0.0; len], vec![0.0; len], vec![0.0; len]],
            dt,
            provenance: Provenance {
                white: None,
                spectrum: "none".into(),
            },
            imag_residue: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.components[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.components[0].is_empty()
    }

    /// Time of the last sample.
    pub fn end_time(&self) -> f64 {
        (self.len().saturating_sub(1)) as f64 * self.dt
    }

    pub fn sample(&self, k: usize) -> Vec3 {
        Vec3::new(
            self.components[0][k],
            self.components[1][k],
            self.components[2][k],
        )
    }

    /// Linear interpolation between grid samples.
    pub fn at(&self, t: f64) -> Result<Vec3> {
        let end = self.end_time();
        let slack = 1e-9 * self.dt;
        if !(t >= -slack && t <= end + slack) {
            return Err(Error::Range { t, end });
        }
        let x = (t / self.dt).max(0.0);
        let k = (x.floor() as usize).min(self.len() - 2);
        let frac = (x - k as f64).min(1.0);
        Ok(self.sample(k) * (1.0 - frac) + self.sample(k + 1) * frac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_is_deterministic_and_stream_separated() {
        let s = WhiteSeed::new(7, 1000, 0.15);
        assert_eq!(white_gaussian(&s).unwrap(), white_gaussian(&s).unwrap());
        let other = white_gaussian(&s.with_stream(1)).unwrap();
        assert_ne!(white_gaussian(&s).unwrap()[0], other[0]);
    }

    #[test]
    fn white_rejects_bad_grid() {
        assert!(white_gaussian(&WhiteSeed::new(1, 1, 0.1)).is_err());
        assert!(white_gaussian(&WhiteSeed::new(1, 10, 0.0)).is_err());
    }

    #[test]
    fn bin_frequencies_are_symmetric() {
        assert_eq!(bin_frequency(0, 8, 1.0), 0.0);
        assert!(bin_frequency(3, 8, 1.0) > 0.0);
        assert!(bin_frequency(4, 8, 1.0) < 0.0);
        assert_eq!(bin_frequency(1, 8, 1.0), -bin_frequency(7, 8, 1.0));
    }

    #[test]
    fn flat_filter_is_scaled_identity() {
        let s = WhiteSeed::new(3, 64, 0.5);
        let white = white_gaussian(&s).unwrap();
        let trace = colour(&white, &FlatSpectrum(4.0), 0.5).unwrap();
        for (a, b) in trace.components[1].iter().zip(&white[1]) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_density_is_an_invariant_violation() {
        let white = white_gaussian(&WhiteSeed::new(3, 16, 0.5)).unwrap();
        assert!(matches!(
            colour(&white, &FlatSpectrum(-1.0), 0.5),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn interpolation_and_range() {
        let mut tr = NoiseTrace::zeros(3, 0.5);
        tr.components[0] = vec![0.0, 1.0, 3.0];
        assert_eq!(tr.at(0.25).unwrap().x, 0.5);
        assert_eq!(tr.at(0.75).unwrap().x, 2.0);
        assert_eq!(tr.at(1.0).unwrap().x, 3.0);
        assert!(matches!(tr.at(1.2), Err(Error::Range { .. })));
        assert!(tr.at(-0.1).is_err());
    }

    #[test]
    fn margin_is_discarded() {
        let seed = WhiteSeed::new(1, 32, 0.1);
        let full = generate(&seed, &FlatSpectrum(1.0), 0).unwrap();
        let cut = generate(&seed, &FlatSpectrum(1.0), 10).unwrap();
        assert_eq!(cut.len(), 22);
        assert_eq!(cut.components[2][0], full.components[2][10]);
        assert!(generate(&seed, &FlatSpectrum(1.0), 31).is_err());
    }
}

//! Welch-averaged periodogram normalized like the intensity-noise spectrum:
//! (1/π)∫₀^∞ S(ω) dω equals the variance of the series.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::stats::compensated_mean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    /// Samples per segment.
    pub segment_len: usize,
    /// Fractional overlap between consecutive segments, in [0, 1).
    pub overlap: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        WelchConfig {
            segment_len: 4096,
            overlap: 0.5,
        }
    }
}

impl WelchConfig {
    /// Segment length giving angular-frequency resolution `resolution` at
    /// sampling interval `dt`, rounded up to a power of two.
    pub fn for_resolution(resolution: f64, dt: f64) -> Self {
        let n = (2.0 * PI / (resolution * dt)).ceil() as usize;
        WelchConfig {
            segment_len: n.next_power_of_two().max(8),
            overlap: 0.5,
        }
    }
}

/// One-sided estimate on ω_k = 2πk/(L·dt), k = 0..=L/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
    pub segments: usize,
    pub segment_len: usize,
    pub dt: f64,
}

impl Periodogram {
    /// (1/π)∫₀^{π/dt} S dω as a sum over bins, half weight at DC and Nyquist.
    pub fn integral(&self) -> f64 {
        let dw = 2.0 * PI / (self.segment_len as f64 * self.dt);
        let last = self.values.len() - 1;
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| if k == 0 || k == last { 0.5 * v } else { *v })
            .sum();
        s * dw / PI
    }

    /// Angular frequency of the largest non-DC bin.
    pub fn peak_omega(&self) -> f64 {
        let (k, _) = self
            .values
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap_or((0, &0.0));
        self.omega[k]
    }

    pub fn resolution(&self) -> f64 {
        2.0 * PI / (self.segment_len as f64 * self.dt)
    }
}

/// Welch estimate with a Hann window, after removing the series mean.
pub fn estimate_spectrum(x: &[f64], dt: f64, cfg: &WelchConfig) -> Result<Periodogram> {
    let l = cfg.segment_len;
    if l < 8 {
        return Err(Error::InvalidParameter {
            name: "segment_len",
            value: l as f64,
            reason: "segments need at least 8 samples",
        });
    }
    if !(0.0..1.0).contains(&cfg.overlap) || !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "overlap",
            value: cfg.overlap,
            reason: "overlap must lie in [0, 1) and dt must be positive",
        });
    }
    if x.len() < l {
        return Err(Error::SegmentTooShort { len: x.len(), min: l });
    }
    let mean = compensated_mean(x);
    let window: Vec<f64> = (0..l).map(|j| 0.5 - 0.5 * (2.0 * PI * j as f64 / l as f64).cos()).collect();
    let u = window.iter().map(|w| w * w).sum::<f64>() / l as f64;
    let hop = ((l as f64) * (1.0 - cfg.overlap)).round().max(1.0) as usize;
    let fft = FftPlanner::new().plan_fft_forward(l);
    let half = l / 2;
    let mut acc = vec![0.0; half + 1];
    let mut segments = 0;
    let mut buf = vec![Complex::new(0.0, 0.0); l];
    let mut start = 0;
    while start + l <= x.len() {
        for j in 0..l {
            buf[j] = Complex::new((x[start + j] - mean) * window[j], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..=half {
            acc[k] += buf[k].norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let norm = dt / (l as f64 * u * segments as f64);
    Ok(Periodogram {
        omega: (0..=half).map(|k| 2.0 * PI * k as f64 / (l as f64 * dt)).collect(),
        values: acc.iter().map(|a| a * norm).collect(),
        segments,
        segment_len: l,
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn white_noise_is_flat_and_integrates_to_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sigma = 2.5;
        let x: Vec<f64> = (0..1 << 18).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let dt = 1e-3;
        let p = estimate_spectrum(&x, dt, &WelchConfig { segment_len: 1024, overlap: 0.5 }).unwrap();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((p.integral() / var - 1.0).abs() < 0.01);
        // Flat at σ²·dt.
        let mid = &p.values[10..500];
        let m = mid.iter().sum::<f64>() / mid.len() as f64;
        assert!((m / (sigma * sigma * dt) - 1.0).abs() < 0.02);
    }

    #[test]
    fn sinusoid_peak_located() {
        let dt = 0.01;
        let w0 = 7.0;
        let x: Vec<f64> = (0..20_000).map(|i| (w0 * i as f64 * dt).sin()).collect();
        let p = estimate_spectrum(&x, dt, &WelchConfig { segment_len: 2048, overlap: 0.5 }).unwrap();
        assert!((p.peak_omega() - w0).abs() <= p.resolution());
    }

    #[test]
    fn short_series_rejected_with_hint() {
        let e = estimate_spectrum(&[0.0; 100], 1.0, &WelchConfig { segment_len: 256, overlap: 0.5 });
        assert_eq!(e, Err(Error::SegmentTooShort { len: 100, min: 256 }));
    }
}

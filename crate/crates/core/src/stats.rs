//! Statistics of correlated time series: integrated autocorrelation time and
//! batch-means error bars.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Kahan–Babuška–Neumaier summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

pub fn compensated_mean(x: &[f64]) -> f64 {
    let mut s = CompensatedSum::default();
    for &v in x {
        s.add(v);
    }
    s.value() / x.len() as f64
}

/// Normalized autocorrelation ρ(k), k = 0..len, by zero-padded FFT.
pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = compensated_mean(x);
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(m, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    if c0 == 0.0 {
        let mut out = vec![0.0; n];
        out[0] = 1.0;
        return out;
    }
    buf[..n].iter().map(|z| z.re / c0).collect()
}

/// Integrated autocorrelation time τ = ½ + Σ_{k≥1} ρ(k), in samples, with
/// Sokal's self-consistent window (stop at the first M ≥ 5τ(M)). White noise
/// gives τ = ½, so N_eff = N/(2τ).
pub fn integrated_autocorrelation_time(x: &[f64]) -> f64 {
    let rho = autocorrelation(x);
    let mut tau = 0.5;
    for (m, r) in rho.iter().enumerate().skip(1) {
        tau += r;
        if m as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub batches: usize,
    pub batch_len: usize,
}

/// Batch length used for a series with integrated autocorrelation time τ.
pub fn batch_length(tau: f64) -> usize {
    (20.0 * tau).ceil().max(1.0) as usize
}

/// Means of consecutive non-overlapping batches; a trailing partial batch is dropped.
pub fn batch_means(x: &[f64], batch_len: usize) -> Vec<f64> {
    x.chunks_exact(batch_len.max(1)).map(compensated_mean).collect()
}

/// Mean and batch-means standard error from batch means pooled over
/// independent series.
pub fn pooled_batch_estimate(batches: &[f64], batch_len: usize) -> MeanEstimate {
    let b = batches.len();
    let mean = compensated_mean(batches);
    let var = if b > 1 {
        batches.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64
    } else {
        f64::INFINITY
    };
    MeanEstimate {
        mean,
        stderr: (var / b as f64).sqrt(),
        batches: b,
        batch_len,
    }
}

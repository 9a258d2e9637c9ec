//! Damped-cosine fit of a transient: x(t) = A·e^{−Γt/2}·cos(Ω′t + φ).
//!
//! Initial values come from zero crossings (frequency) and a linear fit of
//! the logarithm of the half-period extrema (decay); amplitude and phase
//! from linear least squares; then Levenberg–Marquardt on all four.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OscillationFit {
    Oscillatory {
        /// Ω′, rad/s.
        omega: f64,
        /// Γ (the envelope decays as e^{−Γt/2}), s⁻¹.
        gamma: f64,
        amplitude: f64,
        /// φ, relative to the first sample.
        phase: f64,
        /// RMS residual over RMS signal.
        rel_residual: f64,
    },
    NonOscillatory {
        reason: String,
    },
}

impl OscillationFit {
    pub fn is_oscillatory(&self) -> bool {
        matches!(self, OscillationFit::Oscillatory { .. })
    }
}

/// Residual above which a damped cosine is not an adequate description.
pub const MAX_REL_RESIDUAL: f64 = 0.05;
/// Samples whose deviation is below this fraction of the maximum are dropped
/// from the tail, where integrator noise dominates.
const FLOOR: f64 = 1e-3;

/// Fits n(t) − n_s of a trajectory relaxing onto `n_s`.
pub fn oscillation_fit(traj: &Trajectory, n_s: f64) -> Result<OscillationFit> {
    let x: Vec<f64> = traj.n.iter().map(|n| n - n_s).collect();
    fit_damped_cosine(&traj.t, &x)
}

fn zero_crossings(t: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..x.len() {
        let (a, b) = (x[i - 1], x[i]);
        if a == 0.0 && i > 1 {
            continue;
        }
        if a * b < 0.0 || (b == 0.0 && a != 0.0) {
            out.push(t[i - 1] + (t[i] - t[i - 1]) * a / (a - b));
        }
    }
    out
}

/// Ordinary least-squares slope and intercept.
fn line_fit(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mt)
}

fn model(p: &Vector4<f64>, u: f64) -> f64 {
    p[0] * (-0.5 * p[1] * u).exp() * (p[2] * u + p[3]).cos()
}

fn sum_sq(p: &Vector4<f64>, u: &[f64], y: &[f64]) -> f64 {
    u.iter().zip(y).map(|(&ui, &yi)| (yi - model(p, ui)).powi(2)).sum()
}

fn levenberg_marquardt(mut p: Vector4<f64>, u: &[f64], y: &[f64]) -> Result<Vector4<f64>> {
    let mut lambda = 1e-3;
    let mut cost = sum_sq(&p, u, y);
    for _ in 0..500 {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&ui, &yi) in u.iter().zip(y) {
            let env = (-0.5 * p[1] * ui).exp();
            let ph = p[2] * ui + p[3];
            let (s, c) = ph.sin_cos();
            let f = p[0] * env * c;
            let j = Vector4::new(env * c, -0.5 * ui * f, -p[0] * env * s * ui, -p[0] * env * s);
            jtj += j * j.transpose();
            jtr += j * (yi - f);
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let c = sum_sq(&trial, u, y);
            if c.is_finite() && c < cost {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-14 || step.norm() < 1e-13 * p.norm() {
                    return Ok(p);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left: at a minimum to working precision.
            return Ok(p);
        }
    }
    if p.iter().all(|v| v.is_finite()) {
        Ok(p)
    } else {
        Err(Error::FitFailed("Levenberg-Marquardt diverged".into()))
    }
}

/// Fits x(t) ≈ A·e^{−Γt/2}·cos(Ω′t + φ) with t measured from t[0].
pub fn fit_damped_cosine(t: &[f64], x: &[f64]) -> Result<OscillationFit> {
    if t.len() != x.len() || t.len() < 8 {
        return Err(Error::FitFailed(format!("need at least 8 samples, got {}", t.len().min(x.len()))));
    }
    let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::FitFailed("signal is identically zero or not finite".into()));
    }
    let last = x.iter().rposition(|v| v.abs() > FLOOR * peak).unwrap_or(0);
    let t = &t[..=last];
    let x = &x[..=last];
    let crossings = zero_crossings(t, x);
    if crossings.len() < 3 {
        return Ok(OscillationFit::NonOscillatory {
            reason: format!("{} zero crossing(s) above the noise floor", crossings.len()),
        });
    }
    let k = crossings.len();
    let omega0 = std::f64::consts::PI * (k - 1) as f64 / (crossings[k - 1] - crossings[0]);

    // Extremum of |x| in each half period.
    let mut et = Vec::new();
    let mut ey = Vec::new();
    let mut bounds = vec![t[0]];
    bounds.extend(&crossings);
    bounds.push(t[t.len() - 1]);
    for w in bounds.windows(2) {
        let best = t
            .iter()
            .zip(x)
            .filter(|(ti, _)| **ti >= w[0] && **ti <= w[1])
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
        if let Some((ti, xi)) = best {
            if xi.abs() > 0.0 {
                et.push(*ti);
                ey.push(xi.abs().ln());
            }
        }
    }
    let gamma0 = if et.len() >= 2 { -2.0 * line_fit(&et, &ey).0 } else { 0.0 };

    // Work in u = ω0(t − t0) and y = x/peak.
    let t0 = t[0];
    let u: Vec<f64> = t.iter().map(|ti| omega0 * (ti - t0)).collect();
    let y: Vec<f64> = x.iter().map(|xi| xi / peak).collect();
    let g0 = (gamma0 / omega0).max(0.0);

    // Amplitude and phase by linear least squares on cos and sin.
    let mut ata = Matrix2::zeros();
    let mut atb = Vector2::zeros();
    for (&ui, &yi) in u.iter().zip(&y) {
        let env = (-0.5 * g0 * ui).exp();
        let row = Vector2::new(env * ui.cos(), -env * ui.sin());
        ata += row * row.transpose();
        atb += row * yi;
    }
    let cs = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::FitFailed("degenerate amplitude/phase system".into()))?;
    let start = Vector4::new(cs.norm(), g0, 1.0, cs[1].atan2(cs[0]));
    let p = levenberg_marquardt(start, &u, &y)?;

    let ss: f64 = y.iter().map(|v| v * v).sum();
    let rel_residual = (sum_sq(&p, &u, &y) / ss).sqrt();
    let omega = p[2].abs() * omega0;
    let gamma = p[1] * omega0;
    if rel_residual > MAX_REL_RESIDUAL {
        return Ok(OscillationFit::NonOscillatory {
            reason: format!("damped-cosine residual {rel_residual:.3} exceeds {MAX_REL_RESIDUAL}"),
        });
    }
    if !(omega > 0.0) {
        return Ok(OscillationFit::NonOscillatory {
            reason: "fitted frequency is not positive".into(),
        });
    }
    // A sign flip of the frequency is absorbed in the phase.
    let mut phase = if p[2] < 0.0 { -p[3] } else { p[3] };
    let mut amplitude = p[0] * peak;
    if amplitude < 0.0 {
        amplitude = -amplitude;
        phase += std::f64::consts::PI;
    }
    Ok(OscillationFit::Oscillatory {
        omega,
        gamma,
        amplitude,
        phase,
        rel_residual,
    })
}

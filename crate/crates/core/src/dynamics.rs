//! Deterministic mean-field transients and the eigenvalues of the linearized
//! dynamics.

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::model::{self, SteadyState};
use crate::ode::{self, Method, OdeOptions, OdeStats};
use crate::params::LaserParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub integrator: String,
    pub rtol: f64,
    pub atol: f64,
    pub params_hash: String,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Sampled photon number and inversion, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub n: Vec<f64>,
    pub s: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> Option<(f64, f64, f64)> {
        let i = self.t.len().checked_sub(1)?;
        Some((self.t[i], self.n[i], self.s[i]))
    }

    /// Writes `t,n,S` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,n,S")?;
        for i in 0..self.t.len() {
            writeln!(w, "{:e},{:e},{:e}", self.t[i], self.n[i], self.s[i])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldOptions {
    /// Relative tolerance.
    pub rtol: f64,
    /// Absolute tolerance in units of the scaled photon number and inversion.
    pub atol: f64,
    pub method: Method,
    /// Number of output samples including t = 0.
    pub samples: usize,
    pub max_steps: usize,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        MeanFieldOptions {
            rtol: 1e-8,
            atol: 1e-12,
            method: Method::Dopri5,
            samples: 2001,
            max_steps: 5_000_000,
        }
    }
}

/// Scales used for integration: time in 1/κ, photons in Λ/κ (the β = 0
/// steady state far above threshold), inversion in κ/R_sp,max.
#[derive(Debug, Clone, Copy)]
struct Scales {
    n_ref: f64,
    s_ref: f64,
}

impl Scales {
    fn new(p: &LaserParams) -> Self {
        Scales {
            n_ref: p.pump / p.kappa,
            s_ref: p.kappa / model::peak_rate(p),
        }
    }
}

/// Right-hand side of the noise-free rate equations in scaled variables.
fn scaled_rhs(p: &LaserParams, sc: Scales, y: &Vector2<f64>) -> Vector2<f64> {
    let n = y[0] * sc.n_ref;
    let rho = model::spontaneous_rate(p, n) / model::peak_rate(p);
    let x = y[0];
    let s = y[1];
    // R_sp·n/κ = ρ·(R_max n_ref/κ)·x and Λ/(κ S_ref) = Λ R_max/κ².
    let rn = rho * model::peak_rate(p) * sc.n_ref / p.kappa * x;
    Vector2::new(
        (rho * s - 1.0) * x,
        p.pump / (p.kappa * sc.s_ref) - (p.gamma_par / p.kappa + rn) * s,
    )
}

/// Integrates ṅ = (R_sp(n)S − κ)n, Ṡ = Λ − (γ∥ + R_sp(n)n)S from (n0, S0)
/// up to t_end, sampled uniformly.
pub fn integrate_mean_field(
    p: &LaserParams,
    n0: f64,
    s0: f64,
    t_end: f64,
    opts: &MeanFieldOptions,
) -> Result<Trajectory> {
    p.validate()?;
    for (name, v) in [("n0", n0), ("s0", s0)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter {
                name,
                value: v,
                reason: "initial state must be finite and non-negative",
            });
        }
    }
    if !(t_end > 0.0 && opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            value: t_end,
            reason: "t_end and tolerances must be positive",
        });
    }
    let sc = Scales::new(p);
    let tau_end = t_end * p.kappa;
    let taus = ode::uniform_times(0.0, tau_end, opts.samples);
    let ode_opts = OdeOptions {
        max_steps: opts.max_steps,
        ..OdeOptions::new(opts.rtol, opts.atol).nonnegative()
    };
    let y0 = Vector2::new(n0 / sc.n_ref, s0 / sc.s_ref);
    let sol = ode::solve(opts.method, |_, y| scaled_rhs(p, sc, y), 0.0, y0, &taus, &ode_opts).map_err(|e| match e {
        Error::StepSizeUnderflow { t, h } => Error::StepSizeUnderflow {
            t: t / p.kappa,
            h: h / p.kappa,
        },
        Error::TooManySteps { t, max_steps } => Error::TooManySteps {
            t: t / p.kappa,
            max_steps,
        },
        other => other,
    })?;
    let mut t = Vec::with_capacity(sol.t.len() + 1);
    let mut n = Vec::with_capacity(sol.t.len() + 1);
    let mut s = Vec::with_capacity(sol.t.len() + 1);
    t.push(0.0);
    n.push(n0);
    s.push(s0);
    for (tau, y) in sol.t.iter().zip(&sol.y) {
        t.push(tau / p.kappa);
        n.push(y[0] * sc.n_ref);
        s.push(y[1] * sc.s_ref);
    }
    Ok(Trajectory {
        t,
        n,
        s,
        meta: meta(opts, p, &sol.stats),
    })
}

fn meta(opts: &MeanFieldOptions, p: &LaserParams, st: &OdeStats) -> TrajectoryMeta {
    TrajectoryMeta {
        integrator: opts.method.name().to_string(),
        rtol: opts.rtol,
        atol: opts.atol,
        params_hash: p.fingerprint(),
        accepted_steps: st.accepted,
        rejected_steps: st.rejected,
    }
}

/// Initial condition of a transient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TransientStart {
    /// The stable steady state of the same parameters with n scaled by (1 + δ).
    Displaced { relative: f64 },
    /// The steady state of the β = 0 laser scaled by (1 + δ), after which the
    /// Kerr term is switched on at t = 0.
    LinearSteadyState { relative: f64 },
}

impl TransientStart {
    pub fn initial_state(&self, p: &LaserParams) -> Result<(f64, f64)> {
        let (base, rel) = match *self {
            TransientStart::Displaced { relative } => (*p, relative),
            TransientStart::LinearSteadyState { relative } => (p.with_beta(0.0), relative),
        };
        let sol = model::solve_steady(&base);
        let ss = sol.stable().ok_or(Error::NoStableState)?;
        Ok((ss.n_s * (1.0 + rel), ss.s_s))
    }
}

/// Eigenvalues of the linearized dynamics at a steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityEigen {
    pub s_plus: Complex64,
    pub s_minus: Complex64,
    pub stable: bool,
    /// The closed inequality n_s > Δ0/β − g²γ⊥/(γ∥β²); `None` for β = 0.
    pub decreasing_gain_side: Option<bool>,
}

impl StabilityEigen {
    /// Smallest decay rate min |Re s|, the time scale of the final approach.
    pub fn slowest_rate(&self) -> f64 {
        self.s_plus.re.abs().min(self.s_minus.re.abs())
    }

    pub fn is_oscillatory(&self) -> bool {
        self.s_plus.im != 0.0
    }
}

/// s = −Γ/2 ± √(−Ω²), computed from Γ and det M without cancellation.
pub fn stability_eigen(p: &LaserParams, ss: &SteadyState) -> StabilityEigen {
    let n = ss.n_s;
    let r = model::spontaneous_rate(p, n);
    let l = model::log_rate_derivative(p, n);
    let gamma = p.pump * r / p.kappa - l * n * p.kappa;
    let det = n * p.kappa * (r - l * p.gamma_par);
    let omega2 = det - 0.25 * gamma * gamma;
    let (s_plus, s_minus) = if omega2 > 0.0 {
        let w = omega2.sqrt();
        (Complex64::new(-0.5 * gamma, w), Complex64::new(-0.5 * gamma, -w))
    } else {
        let q = (-omega2).sqrt();
        // s₊s₋ = det; take the larger-magnitude root directly.
        let big = -0.5 * gamma - gamma.signum() * q;
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (a, b) = if small >= big { (small, big) } else { (big, small) };
        (Complex64::new(a, 0.0), Complex64::new(b, 0.0))
    };
    StabilityEigen {
        s_plus,
        s_minus,
        stable: gamma > 0.0 && det > 0.0,
        decreasing_gain_side: model::on_decreasing_gain_side(p, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Preset;
    use crate::response;

    fn stable_ss(p: &LaserParams) -> SteadyState {
        *model::solve_steady(p).stable().unwrap()
    }

    #[test]
    fn fixed_point_stays_put() {
        let p = Preset::Fig2NdYag.params();
        let ss = stable_ss(&p);
        for method in [Method::Dopri5, Method::Rosenbrock23] {
            let opts = MeanFieldOptions {
                method,
                samples: 50,
                ..Default::default()
            };
            let tr = integrate_mean_field(&p, ss.n_s, ss.s_s, 1e-4, &opts).unwrap();
            for (n, s) in tr.n.iter().zip(&tr.s) {
                assert!((n / ss.n_s - 1.0).abs() < 1e-7, "{method:?}");
                assert!((s / ss.s_s - 1.0).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn eigenvalues_match_numeric_decomposition() {
        for beta in [0.0, 0.05, 0.5, 50.0] {
            let p = Preset::Fig2NdYag.params().with_beta(beta);
            let ss = stable_ss(&p);
            let rc = response::linearize(&p, &ss).unwrap();
            let e = stability_eigen(&p, &ss);
            let ev = rc.m.complex_eigenvalues();
            let mut num: Vec<Complex64> = ev.iter().cloned().collect();
            num.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
            let mut ana = [e.s_plus, e.s_minus];
            ana.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
            let scale = rc.det.sqrt().max(rc.gamma);
            for (a, b) in ana.iter().zip(&num) {
                assert!((a - b).norm() / scale < 1e-10, "beta {beta}: {a} vs {b}");
            }
            assert!(e.stable);
        }
    }

    #[test]
    fn two_root_case_lower_unstable() {
        let p = Preset::Fig3OffResonant.params().with_beta(10.0).with_relative_pump(30.0);
        let sol = model::solve_steady(&p);
        let lo = stability_eigen(&p, &sol.positive[0]);
        let hi = stability_eigen(&p, &sol.positive[1]);
        assert!(!lo.stable);
        assert!(hi.stable);
        assert_eq!(lo.decreasing_gain_side, Some(false));
        assert_eq!(hi.decreasing_gain_side, Some(true));
    }

    #[test]
    fn linear_laser_is_underdamped() {
        let p = Preset::Fig2NdYag.params();
        let e = stability_eigen(&p, &stable_ss(&p));
        assert!(e.is_oscillatory());
        assert!((e.s_plus.re + 6.51e5 / 2.0).abs() / 3.255e5 < 1e-3);
        assert!(e.decreasing_gain_side.is_none());
    }

    #[test]
    fn csv_layout() {
        let p = Preset::DeskScale.params();
        let ss = stable_ss(&p);
        let opts = MeanFieldOptions {
            samples: 3,
            ..Default::default()
        };
        let tr = integrate_mean_field(&p, ss.n_s, ss.s_s, 1e-3, &opts).unwrap();
        let mut out = Vec::new();
        tr.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,n,S");
        assert_eq!(lines.len(), 4);
        let back: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, ss.n_s);
    }

    #[test]
    fn rejects_negative_start() {
        let p = Preset::DeskScale.params();
        assert!(integrate_mean_field(&p, -1.0, 1.0, 1.0, &MeanFieldOptions::default()).is_err());
    }
}

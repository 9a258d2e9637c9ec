//! Three-variable semiclassical model (field b, polarization α, inversion S)
//! in the frame rotating at the gain-line frequency:
//!
//! ḃ = (−i(Δ0 − β|b|²) − κ/2)b − igα
//! α̇ = −γ⊥α + igbS
//! Ṡ = γ∥(S0 − S) + i(gαb* − gα*b),  S0 = Λ/γ∥.
//!
//! Eliminating α adiabatically gives the mean-field rate equations, up to
//! corrections of order κ/γ⊥ and γ∥/γ⊥; comparing the two is the point of
//! this module.

use nalgebra::SVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::ode::{self, Method, OdeOptions};
use crate::params::{LaserParams, ParamWarning};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullModelState {
    /// Field amplitude, √photon.
    pub b: Complex64,
    pub alpha: Complex64,
    pub s: f64,
    /// Frequency of the rotating frame relative to the gain line, s⁻¹.
    pub frame: f64,
}

impl FullModelState {
    /// Field with photon number n and zero phase, no polarization, inversion s.
    pub fn from_photons(n: f64, s: f64) -> Self {
        FullModelState {
            b: Complex64::new(n.sqrt(), 0.0),
            alpha: Complex64::new(0.0, 0.0),
            s,
            frame: 0.0,
        }
    }

    pub fn photons(&self) -> f64 {
        self.b.norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullModelOptions {
    pub rtol: f64,
    pub atol: f64,
    pub method: Method,
    pub samples: usize,
    pub max_steps: usize,
}

impl Default for FullModelOptions {
    fn default() -> Self {
        FullModelOptions {
            rtol: 1e-8,
            atol: 1e-10,
            method: Method::Dopri5,
            samples: 1001,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullModelRun {
    /// Photon number |b|² and inversion S.
    pub trajectory: Trajectory,
    pub final_state: FullModelState,
    /// Relative change of |b|² over the last tenth of the run.
    pub tail_drift: f64,
    pub warnings: Vec<ParamWarning>,
}

/// Scales: τ = κt, B = b/√n_ref, A = α/√n_ref, Σ = S/S0 with n_ref = Λ/κ.
/// None of them involves g, so the decoupled limit g = 0 is representable.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    n_ref: f64,
    s0: f64,
    /// γ⊥/κ, γ∥/κ, g/κ, gS0/κ, g n_ref/(κS0).
    perp: f64,
    par: f64,
    g_field: f64,
    g_pol: f64,
    g_inv: f64,
    delta0: f64,
    beta_n: f64,
    frame: f64,
}

impl Scaled {
    fn new(p: &LaserParams, frame: f64) -> Self {
        let n_ref = p.pump / p.kappa;
        let s0 = p.pump / p.gamma_par;
        Scaled {
            n_ref,
            s0,
            perp: p.gamma_perp / p.kappa,
            par: p.gamma_par / p.kappa,
            g_field: p.g / p.kappa,
            g_pol: p.g * s0 / p.kappa,
            g_inv: p.g * n_ref / (p.kappa * s0),
            delta0: p.delta0 / p.kappa,
            beta_n: p.beta * n_ref / p.kappa,
            frame: frame / p.kappa,
        }
    }

    fn rhs(&self, y: &SVector<f64, 5>) -> SVector<f64, 5> {
        let b = Complex64::new(y[0], y[1]);
        let a = Complex64::new(y[2], y[3]);
        let sig = y[4];
        let i = Complex64::i();
        let delta = self.delta0 - self.beta_n * b.norm_sqr() - self.frame;
        let db = (-i * delta - 0.5) * b - i * self.g_field * a;
        let da = -(self.perp - i * self.frame) * a + i * self.g_pol * sig * b;
        // i(αb* − α*b) = −2 Im(αb*).
        let ds = self.par * (1.0 - sig) - 2.0 * self.g_inv * (a * b.conj()).im;
        SVector::<f64, 5>::new(db.re, db.im, da.re, da.im, ds)
    }
}

/// Integrates the three-variable model from `state0` up to `t_end`.
pub fn integrate_full_model(
    p: &LaserParams,
    state0: &FullModelState,
    t_end: f64,
    opts: &FullModelOptions,
) -> Result<FullModelRun> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            value: t_end,
            reason: "must be positive",
        });
    }
    if !(state0.s >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "s",
            value: state0.s,
            reason: "inversion must be non-negative",
        });
    }
    let sc = Scaled::new(p, state0.frame);
    let y0 = SVector::<f64, 5>::new(
        state0.b.re / sc.n_ref.sqrt(),
        state0.b.im / sc.n_ref.sqrt(),
        state0.alpha.re / sc.n_ref.sqrt(),
        state0.alpha.im / sc.n_ref.sqrt(),
        state0.s / sc.s0,
    );
    let taus = ode::uniform_times(0.0, t_end * p.kappa, opts.samples);
    let mut ode_opts = OdeOptions::<5> {
        max_steps: opts.max_steps,
        ..OdeOptions::new(opts.rtol, opts.atol)
    };
    ode_opts.nonnegative[4] = true;
    let sol = ode::solve(opts.method, |_, y| sc.rhs(y), 0.0, y0, &taus, &ode_opts).map_err(|e| match e {
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

    let mut t = vec![0.0];
    let mut n = vec![state0.photons()];
    let mut s = vec![state0.s];
    for (tau, y) in sol.t.iter().zip(&sol.y) {
        t.push(tau / p.kappa);
        n.push((y[0] * y[0] + y[1] * y[1]) * sc.n_ref);
        s.push(y[4] * sc.s0);
    }
    let y = sol.y.last().copied().unwrap_or(y0);
    let root = sc.n_ref.sqrt();
    let final_state = FullModelState {
        b: Complex64::new(y[0], y[1]) * root,
        alpha: Complex64::new(y[2], y[3]) * root,
        s: y[4] * sc.s0,
        frame: state0.frame,
    };
    let k = n.len() - 1 - (n.len() - 1) / 10;
    let tail = &n[k..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let last = *n.last().unwrap();
    let tail_drift = if last > 0.0 { (hi - lo) / last } else { hi - lo };
    Ok(FullModelRun {
        trajectory: Trajectory {
            t,
            n,
            s,
            meta: TrajectoryMeta {
                integrator: opts.method.name().to_string(),
                rtol: opts.rtol,
                atol: opts.atol,
                params_hash: p.fingerprint(),
                accepted_steps: sol.stats.accepted,
                rejected_steps: sol.stats.rejected,
            },
        },
        final_state,
        tail_drift,
        warnings: p.warnings(),
    })
}

/// Lasing frequency relative to the gain line for a cavity detuned by
/// δ = Δ0 − βn: ν = δ/(1 + κ/(2γ⊥)) (mode pulling).
pub fn pulled_frequency(p: &LaserParams, n: f64) -> f64 {
    (p.delta0 - p.beta * n) / (1.0 + p.kappa / (2.0 * p.gamma_perp))
}

/// Steady photon number of the full model for a lasing state rotating at
/// the pulled frequency, obtained without adiabatic elimination: the gain is
/// Lorentzian in ν rather than in the cavity detuning. Solved by fixed-point
/// iteration on n = Λ/κ − γ∥(γ⊥² + ν²)/(2g²γ⊥).
pub fn full_model_steady_photons(p: &LaserParams, n_guess: f64) -> f64 {
    let mut n = n_guess;
    for _ in 0..200 {
        let nu = pulled_frequency(p, n);
        let next = p.pump / p.kappa - p.gamma_par * (p.gamma_perp.powi(2) + nu * nu) / (2.0 * p.g * p.g * p.gamma_perp);
        if (next - n).abs() <= 1e-15 * n.abs() {
            return next;
        }
        n = 0.5 * (n + next);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model;
    use crate::params::Preset;

    #[test]
    fn decoupled_limit() {
        let mut p = Preset::DeskScale.params();
        p.g = 0.0;
        let n0 = 1e6;
        let st = FullModelState::from_photons(n0, 0.0);
        let t_end = 4.0 / p.kappa;
        let run = integrate_full_model(&p, &st, t_end, &FullModelOptions { samples: 41, ..Default::default() }).unwrap();
        for (t, n) in run.trajectory.t.iter().zip(&run.trajectory.n) {
            let expect = n0 * (-p.kappa * t).exp();
            assert!((n - expect).abs() / expect < 1e-7);
        }
        for (t, s) in run.trajectory.t.iter().zip(&run.trajectory.s) {
            let s0 = p.pump / p.gamma_par;
            assert!((s - s0 * (1.0 - (-p.gamma_par * t).exp())).abs() / s0 < 1e-7);
        }
    }

    #[test]
    fn resonant_desk_steady_state_matches_rate_equations() {
        let p = Preset::DeskScale.params();
        let ss = *model::solve_steady(&p).stable().unwrap();
        let st = FullModelState::from_photons(0.8 * ss.n_s, ss.s_s);
        let run = integrate_full_model(&p, &st, 0.05, &FullModelOptions { samples: 201, ..Default::default() }).unwrap();
        let n = run.final_state.photons();
        assert!((n / ss.n_s - 1.0).abs() < 1e-2, "{n} vs {}", ss.n_s);
        assert!(run.tail_drift < 1e-4);
        assert!(run.warnings.is_empty());
    }

    #[test]
    fn pulling_reduces_to_cavity_detuning_for_fast_polarization() {
        let p = Preset::Fig2NdYag.params().with_beta(0.5);
        let ss = *model::solve_steady(&p).stable().unwrap();
        let nu = pulled_frequency(&p, ss.n_s);
        assert!((nu / -ss.detuning - 1.0).abs() < 1e-4);
        let n_full = full_model_steady_photons(&p, ss.n_s);
        assert!((n_full / ss.n_s - 1.0).abs() < 1e-4);
    }
}

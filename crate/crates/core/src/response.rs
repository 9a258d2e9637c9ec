//! Linear response around a steady state: the fluctuation matrix, the
//! intensity-noise spectrum and the Fano factor.
//!
//! The Fano factor is computed by three routes that must agree: the closed
//! form, adaptive quadrature of the spectrum, and the stationary covariance
//! from the Lyapunov equation. The closed form is the canonical value.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lyapunov::solve_lyapunov_2x2;
use crate::model::{self, SteadyState};
use crate::params::LaserParams;
use crate::quadrature;

/// Largest relative residual accepted for a state passed to [`linearize`].
pub const STEADY_RESIDUAL_TOL: f64 = 1e-8;

/// Linearization of the rate equations about one steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseCoeffs {
    pub n_s: f64,
    pub s_s: f64,
    pub kappa: f64,
    /// Fluctuation matrix acting on (δn, δS).
    pub m: Matrix2<f64>,
    /// Γ0 = ΛR_sp/κ, the decay rate without the Kerr term.
    pub gamma0: f64,
    /// Relaxation decay rate Γ = Γ0 − (R_sp′/R_sp)n_sκ.
    pub gamma: f64,
    /// Ω², possibly negative (overdamped).
    pub omega2: f64,
    /// det M = Ω² + Γ²/4.
    pub det: f64,
    /// Diffusion matrix with entries ⟨2D_nn⟩, ⟨2D_nS⟩, ⟨2D_SS⟩.
    pub diffusion: Matrix2<f64>,
}

impl ResponseCoeffs {
    /// True when both eigenvalues of M have negative real part.
    pub fn is_stable(&self) -> bool {
        self.gamma > 0.0 && self.det > 0.0
    }

    fn require_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Unstable {
                gamma: self.gamma,
                det: self.det,
            })
        }
    }

    /// Returns a copy with the diffusion matrix multiplied by `c`.
    pub fn with_scaled_diffusion(mut self, c: f64) -> Self {
        self.diffusion *= c;
        self
    }
}

/// Γ and det M at a steady photon number n, using the clamping identities
/// R_sp S = κ and Λ − κn = κγ∥/R_sp.
fn rates_at_steady(p: &LaserParams, n: f64) -> (f64, f64, f64) {
    let r = model::spontaneous_rate(p, n);
    let l = model::log_rate_derivative(p, n);
    let gamma0 = p.pump * r / p.kappa;
    let gamma = gamma0 - l * n * p.kappa;
    let det = n * p.kappa * (r - l * p.gamma_par);
    (gamma0, gamma, det)
}

/// Stability of the steady state with photon number n (Hurwitz test on M).
pub fn is_stable(p: &LaserParams, n: f64) -> bool {
    let (_, gamma, det) = rates_at_steady(p, n);
    gamma > 0.0 && det > 0.0
}

/// Diffusion matrix ⟨2D⟩ at an arbitrary state (n, S).
pub fn diffusion_at(p: &LaserParams, n: f64, s: f64) -> Matrix2<f64> {
    let rns = model::spontaneous_rate(p, n) * n * s;
    Matrix2::new(
        rns + p.kappa * n,
        -rns,
        -rns,
        p.pump + p.gamma_par * s + rns,
    )
}

/// Diffusion matrix evaluated at a steady state.
pub fn diffusion(p: &LaserParams, ss: &SteadyState) -> Matrix2<f64> {
    diffusion_at(p, ss.n_s, ss.s_s)
}

/// Ω² exactly as written in terms of R_sp and its derivative, without using
/// the steady-state identities. Used as an algebraic cross-check.
pub fn omega2_expanded(p: &LaserParams, n: f64) -> f64 {
    let r = model::spontaneous_rate(p, n);
    let l = model::log_rate_derivative(p, n);
    let t = p.pump * r / p.kappa + n * p.kappa * l;
    r * n * p.kappa * (n * l + 1.0) - 0.25 * t * t
}

/// Linearizes the rate equations about `ss`. Fails if `ss` does not satisfy
/// the steady-state equations of `p`.
pub fn linearize(p: &LaserParams, ss: &SteadyState) -> Result<ResponseCoeffs> {
    let n = ss.n_s;
    let r = model::spontaneous_rate(p, n);
    let residual = if n > 0.0 {
        model::quadratic_residual(p, n).max((r * ss.s_s / p.kappa - 1.0).abs())
    } else {
        f64::INFINITY
    };
    if !(residual <= STEADY_RESIDUAL_TOL) {
        return Err(Error::NotSteadyState {
            n,
            s: ss.s_s,
            residual,
        });
    }
    let l = model::log_rate_derivative(p, n);
    let m = Matrix2::new(
        n * p.kappa * l,
        r * n,
        -n * p.kappa * l - p.kappa,
        -p.pump * r / p.kappa,
    );
    let (gamma0, gamma, det) = rates_at_steady(p, n);
    Ok(ResponseCoeffs {
        n_s: n,
        s_s: ss.s_s,
        kappa: p.kappa,
        m,
        gamma0,
        gamma,
        omega2: det - 0.25 * gamma * gamma,
        det,
        diffusion: diffusion(p, ss),
    })
}

/// Sampled intensity-noise spectrum with its integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrum {
    pub omega: Vec<f64>,
    /// ⟨δn†(ω)δn(ω)⟩ in photon²·s.
    pub values: Vec<f64>,
    /// Integrated (Δn)².
    pub variance: f64,
    pub fano: f64,
}

/// Spectrum in units where frequencies are measured in κ and photon numbers
/// in n_s: returns ⟨δn†δn⟩·κ/n_s at u = ω/κ.
#[inline]
fn scaled_spectrum(rc: &ResponseCoeffs, u: f64) -> f64 {
    let k2 = rc.kappa * rc.kappa;
    let g0 = rc.gamma0 / rc.kappa;
    let g = rc.gamma / rc.kappa;
    let d = rc.det / k2;
    let u2 = u * u;
    let a = d - u2;
    2.0 * (u2 + g0 * g0) / (a * a + g * g * u2)
}

/// ⟨δn†(ω)δn(ω)⟩ at one angular frequency.
pub fn spectral_density(rc: &ResponseCoeffs, omega: f64) -> f64 {
    scaled_spectrum(rc, omega / rc.kappa) * rc.n_s / rc.kappa
}

/// Samples the noise spectrum on `omega_grid`; variance and Fano factor come
/// from the closed form.
pub fn spectrum(rc: &ResponseCoeffs, omega_grid: &[f64]) -> Result<NoiseSpectrum> {
    let fano = fano_closed_form(rc)?;
    Ok(NoiseSpectrum {
        omega: omega_grid.to_vec(),
        values: omega_grid.iter().map(|&w| spectral_density(rc, w)).collect(),
        variance: fano * rc.n_s,
        fano,
    })
}

/// Log-spaced angular frequencies over [10⁻²Γ, 10³·max(Γ, √|Ω²|)].
pub fn default_omega_grid(rc: &ResponseCoeffs, points: usize) -> Vec<f64> {
    let lo = 1e-2 * rc.gamma.abs();
    let hi = 1e3 * rc.gamma.abs().max(rc.omega2.abs().sqrt());
    log_space(lo, hi, points)
}

pub fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (points - 1) as f64;
    (0..points).map(|i| lo * (step * i as f64).exp()).collect()
}

/// F = (κ/Γ)(Γ0²/(Γ²/4 + Ω²) + 1).
pub fn fano_closed_form(rc: &ResponseCoeffs) -> Result<f64> {
    rc.require_stable()?;
    Ok(rc.kappa / rc.gamma * (rc.gamma0 * rc.gamma0 / rc.det + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureFano {
    pub fano: f64,
    /// Error estimate of the finite part, in units of F.
    pub error: f64,
    /// Cutoff frequency W, s⁻¹.
    pub cutoff: f64,
    pub evaluations: usize,
}

/// Default quadrature cutoff factor: W = 10³·max(Γ, √max(Ω², 0), Γ0).
pub const QUADRATURE_CUTOFF_FACTOR: f64 = 1e3;

/// F from (1/π)∫₀^∞ ⟨δn†δn⟩dω / n_s: adaptive quadrature on [0, W] plus the
/// analytic ω⁻² tail beyond W.
pub fn fano_quadrature(rc: &ResponseCoeffs) -> Result<QuadratureFano> {
    fano_quadrature_with_cutoff(rc, QUADRATURE_CUTOFF_FACTOR)
}

pub fn fano_quadrature_with_cutoff(rc: &ResponseCoeffs, cutoff_factor: f64) -> Result<QuadratureFano> {
    rc.require_stable()?;
    let k = rc.kappa;
    let g = rc.gamma / k;
    let scale = rc.gamma.max(rc.omega2.max(0.0).sqrt()).max(rc.gamma0) / k;
    let upper = cutoff_factor * scale;
    // Breakpoints at every decade between the smallest and the largest
    // feature of the spectrum, so the adaptive refinement starts resolved.
    let features = [rc.gamma / k, rc.gamma0 / k, rc.det.sqrt() / k];
    let lo = features.iter().cloned().fold(f64::INFINITY, f64::min) * 1e-2;
    let mut breaks = vec![0.0];
    let mut x = lo.min(upper * 1e-3);
    while x < upper {
        breaks.push(x);
        x *= 10.0;
    }
    // A sharp resonance near √det gets its own brackets.
    let peak = rc.det.sqrt() / k;
    let width = g.max(f64::MIN_POSITIVE);
    for m in [1.0, 10.0, 100.0] {
        for b in [peak - m * width, peak + m * width] {
            if b > 0.0 && b < upper {
                breaks.push(b);
            }
        }
    }
    breaks.push(upper);
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    let res = quadrature::integrate(|u| scaled_spectrum(rc, u), &breaks, 1e-11, 0.0, 20_000)?;
    // Tail: S ≈ (2/u²)(1 + c/u² + …) with c = g0² − g² + 2d.
    let g0 = rc.gamma0 / k;
    let d = rc.det / (k * k);
    let c = g0 * g0 - g * g + 2.0 * d;
    let tail = 2.0 * (1.0 / upper + c / (3.0 * upper.powi(3)));
    Ok(QuadratureFano {
        fano: (res.value + tail) / PI,
        error: res.error / PI,
        cutoff: upper * k,
        evaluations: res.evaluations,
    })
}

/// Stationary covariance of (δn, δS) from MC + CMᵀ + 2D = 0.
pub fn lyapunov_covariance(rc: &ResponseCoeffs) -> Result<Matrix2<f64>> {
    rc.require_stable()?;
    // Similarity scaling by diag(n_s, S_s) and time in 1/κ.
    let t = Matrix2::new(rc.n_s, 0.0, 0.0, rc.s_s);
    let t_inv = Matrix2::new(1.0 / rc.n_s, 0.0, 0.0, 1.0 / rc.s_s);
    let m = t_inv * rc.m * t / rc.kappa;
    let q = t_inv * rc.diffusion * t_inv / rc.kappa;
    let c = solve_lyapunov_2x2(&m, &q)?;
    Ok(t * c * t)
}

/// F = C_nn/n_s from the Lyapunov covariance.
pub fn fano_lyapunov(rc: &ResponseCoeffs) -> Result<f64> {
    rc.require_stable()?;
    let t = Matrix2::new(rc.n_s, 0.0, 0.0, rc.s_s);
    let t_inv = Matrix2::new(1.0 / rc.n_s, 0.0, 0.0, 1.0 / rc.s_s);
    let m = t_inv * rc.m * t / rc.kappa;
    let q = t_inv * rc.diffusion * t_inv / rc.kappa;
    let c = solve_lyapunov_2x2(&m, &q)?;
    Ok(c[(0, 0)] * rc.n_s)
}

/// Off-resonant asymptotic Fano factor, undefined where the cavity is
/// resonant with the gain (R_sp′ = 0), which is a local maximum of F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OffResonantFano {
    Value(f64),
    ResonantLocalMaximum,
}

/// Asymptotic and limiting Fano-factor formulas at one steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FanoApproximations {
    /// |R_sp/(R_sp′n_s)|; `None` when R_sp′ = 0.
    pub sharp_gain: Option<f64>,
    /// (γ⊥² + β²n_s²)/(2β²n_s²) for the resonant laser.
    pub resonant_kerr: Option<f64>,
    /// (γ⊥² + Δ²)/(2βn_s|Δ|) with Δ = βn_s − Δ0.
    pub off_resonant_kerr: Option<OffResonantFano>,
    /// The two extremal values γ⊥/(Δ0 + γ⊥) and γ⊥/(Δ0 − γ⊥).
    pub extremal: Option<(f64, f64)>,
    /// κ/Γ, the large-Ω limit of the closed form.
    pub kappa_over_gamma: f64,
    /// κ²γ⊥/(2Λg²), the resonant linear-laser estimate.
    pub linear_resonant: f64,
    /// κ²Δ0²/(2Λg²γ⊥), the detuned linear-laser estimate.
    pub linear_off_resonant: Option<f64>,
}

impl FanoApproximations {
    /// The Kerr asymptote matching the configuration: the resonant form when
    /// Δ0 = 0, otherwise the off-resonant one.
    pub fn kerr_asymptote(&self) -> Option<f64> {
        match (self.resonant_kerr, self.off_resonant_kerr) {
            (Some(v), _) => Some(v),
            (None, Some(OffResonantFano::Value(v))) => Some(v),
            _ => None,
        }
    }
}

pub fn fano_approximations(p: &LaserParams, ss: &SteadyState) -> Result<FanoApproximations> {
    let n = ss.n_s;
    if !(n > 0.0) {
        return Err(Error::InvalidParameter {
            name: "n_s",
            value: n,
            reason: "approximations need a lasing steady state",
        });
    }
    let (_, gamma, _) = rates_at_steady(p, n);
    let l = model::log_rate_derivative(p, n);
    let gp = p.gamma_perp;
    let kerr = p.beta > 0.0;
    let shift = p.beta * n;
    let delta = model::detuning(p, n);
    let g2 = p.g * p.g;
    Ok(FanoApproximations {
        sharp_gain: (l != 0.0).then(|| (1.0 / (l * n)).abs()),
        resonant_kerr: (kerr && p.delta0 == 0.0).then(|| (gp * gp + shift * shift) / (2.0 * shift * shift)),
        off_resonant_kerr: (kerr && p.delta0 > 0.0).then(|| {
            if delta == 0.0 {
                OffResonantFano::ResonantLocalMaximum
            } else {
                OffResonantFano::Value((gp * gp + delta * delta) / (2.0 * shift * delta.abs()))
            }
        }),
        extremal: (p.delta0 > 0.0).then(|| (gp / (p.delta0 + gp), gp / (p.delta0 - gp))),
        kappa_over_gamma: p.kappa / gamma,
        linear_resonant: p.kappa * p.kappa * gp / (2.0 * p.pump * g2),
        linear_off_resonant: (p.delta0 > 0.0)
            .then(|| p.kappa * p.kappa * p.delta0 * p.delta0 / (2.0 * p.pump * g2 * gp)),
    })
}

/// |Δ| at which the off-resonant asymptotic Fano factor is extremal: the
/// positive root of Δ0Δ² − 2γ⊥²|Δ| − Δ0γ⊥² = 0.
pub fn extremal_detuning(p: &LaserParams) -> Option<f64> {
    (p.delta0 > 0.0).then(|| {
        let gp = p.gamma_perp;
        (gp * gp + gp * (gp * gp + p.delta0 * p.delta0).sqrt()) / p.delta0
    })
}

//! Stochastic simulation of the Langevin rate equations and of their
//! linearization, with autocorrelation-aware error bars.
//!
//! Noise is Itô with ⟨F_μ(t)F_ν(t′)⟩ = ⟨2D_μν⟩δ(t − t′), the diffusion matrix
//! evaluated at the pre-step state. Ensemble members run in parallel with
//! per-member ChaCha8 streams and are reduced in member order, so results are
//! bit-identical for a given seed regardless of the thread count.

use nalgebra::{Matrix2, Matrix4, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model;
use crate::params::LaserParams;
use crate::response::{self, ResponseCoeffs};
use crate::spectral::{estimate_spectrum, Periodogram, WelchConfig};
use crate::stats::{self, CompensatedSum};

/// Rejection rate above which nonlinear statistics are flagged unreliable.
pub const MAX_REJECTION_RATE: f64 = 1e-3;
/// Redraws allowed for a single step before giving up.
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearScheme {
    /// Exact Gaussian transition over each step (Van Loan discretization).
    Exact,
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochasticRun {
    pub seed: u64,
    /// Time step, s.
    pub dt: f64,
    pub members: usize,
    /// Recorded duration per member after burn-in, s.
    pub duration: f64,
    pub burn_in: f64,
    /// Record every k-th step.
    pub sample_every: usize,
    /// Force D = 0 (deterministic Euler integration).
    pub zero_noise: bool,
    pub linear_scheme: LinearScheme,
    /// Averaged periodogram of δn over all members.
    pub spectrum: Option<WelchConfig>,
}

/// The fastest rate that the step size must resolve: max(κ, Γ, |Ω|).
pub fn fastest_rate(rc: &ResponseCoeffs) -> f64 {
    rc.kappa.max(rc.gamma.abs()).max(rc.omega2.abs().sqrt())
}

impl StochasticRun {
    /// A run satisfying the step-size and burn-in invariants with margin:
    /// dt = 0.05/max(κ, Γ, |Ω|), burn-in 20/Γ.
    pub fn suggested(rc: &ResponseCoeffs, seed: u64, members: usize, duration: f64) -> Self {
        StochasticRun {
            seed,
            dt: 0.05 / fastest_rate(rc),
            members,
            duration,
            burn_in: 20.0 / rc.gamma,
            sample_every: 1,
            zero_noise: false,
            linear_scheme: LinearScheme::Exact,
            spectrum: None,
        }
    }

    /// As `suggested` with dt = 0.005/max(κ, Γ, |Ω|). Euler–Maruyama biases the
    /// variance by about rate·dt/2, so the nonlinear scheme needs the finer step
    /// for that bias to sit below the statistical error.
    pub fn suggested_nonlinear(rc: &ResponseCoeffs, seed: u64, members: usize, duration: f64) -> Self {
        StochasticRun {
            dt: 0.005 / fastest_rate(rc),
            ..Self::suggested(rc, seed, members, duration)
        }
    }

    pub fn steps_per_member(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn burn_in_steps(&self) -> usize {
        (self.burn_in / self.dt).ceil() as usize
    }

    pub fn samples_per_member(&self) -> usize {
        self.steps_per_member() / self.sample_every.max(1)
    }

    fn check_shape(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.duration > 0.0 && self.burn_in >= 0.0) {
            return Err(Error::InvalidRun("dt and duration must be positive, burn-in non-negative".into()));
        }
        if self.members == 0 || self.sample_every == 0 {
            return Err(Error::InvalidRun("members and sample_every must be at least 1".into()));
        }
        if self.samples_per_member() < 2 {
            return Err(Error::InvalidRun("fewer than two recorded samples per member".into()));
        }
        Ok(())
    }

    /// Enforces burn-in ≥ 10/Γ and dt ≤ 0.1/max(κ, Γ, |Ω|).
    pub fn validate(&self, rc: &ResponseCoeffs) -> Result<()> {
        self.check_shape()?;
        let min_burn = 10.0 / rc.gamma;
        if self.burn_in < min_burn * (1.0 - 1e-12) {
            return Err(Error::InvalidRun(format!(
                "burn-in {:e} s is shorter than 10/Gamma = {min_burn:e} s",
                self.burn_in
            )));
        }
        let max_dt = 0.1 / fastest_rate(rc);
        if self.dt > max_dt * (1.0 + 1e-12) {
            return Err(Error::InvalidRun(format!(
                "dt = {:e} s exceeds 0.1/max(kappa, Gamma, |Omega|) = {max_dt:e} s",
                self.dt
            )));
        }
        Ok(())
    }

    fn member_rng(&self, member: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(member as u64);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseStats {
    pub mean_n: f64,
    pub var_n: f64,
    pub fano_estimate: f64,
    pub fano_stderr: f64,
    /// Batch-means standard error of var_n.
    pub var_stderr: f64,
    /// Sample covariance of (n, S).
    pub covariance: [[f64; 2]; 2],
    /// Integrated autocorrelation time of n, s.
    pub tau_int: f64,
    /// N/(2τ_int) summed over members.
    pub n_eff: f64,
    pub samples: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub reliable: bool,
    pub seed: u64,
    pub params_hash: String,
    pub spectrum_estimate: Option<Periodogram>,
}

/// Recorded series of one ensemble member.
struct Member {
    n: Vec<f64>,
    s: Vec<f64>,
    rejections: usize,
    steps: usize,
}

/// Lower-triangular (or, when the leading entry vanishes, symmetric) L with
/// LLᵀ = A for a symmetric positive semidefinite 2×2 A.
pub fn sqrt_psd_2x2(a: &Matrix2<f64>) -> Matrix2<f64> {
    let (p, q, r) = (a[(0, 0)], 0.5 * (a[(0, 1)] + a[(1, 0)]), a[(1, 1)]);
    if p > 0.0 {
        let l11 = p.sqrt();
        let l21 = q / l11;
        let l22 = (r - l21 * l21).max(0.0).sqrt();
        return Matrix2::new(l11, 0.0, l21, l22);
    }
    let eig = Matrix2::new(p, q, q, r).symmetric_eigen();
    let mut out = Matrix2::zeros();
    for k in 0..2 {
        let v = eig.eigenvectors.column(k);
        out += v * v.transpose() * eig.eigenvalues[k].max(0.0).sqrt();
    }
    out
}

fn normal_pair(rng: &mut ChaCha8Rng) -> Vector2<f64> {
    Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn nonlinear_member(p: &LaserParams, start: (f64, f64), run: &StochasticRun, member: usize) -> Result<Member> {
    let mut rng = run.member_rng(member);
    let (mut n, mut s) = start;
    let dt = run.dt;
    let sq = dt.sqrt();
    let burn = run.burn_in_steps();
    let total = burn + run.steps_per_member();
    let cap = run.samples_per_member();
    let mut out_n = Vec::with_capacity(cap);
    let mut out_s = Vec::with_capacity(cap);
    let mut rejections = 0;
    for step in 0..total {
        let r = model::spontaneous_rate(p, n);
        let dn = (r * s - p.kappa) * n * dt;
        let ds = (p.pump - (p.gamma_par + r * n) * s) * dt;
        let (nn, ns) = if run.zero_noise {
            (n + dn, s + ds)
        } else {
            let l = sqrt_psd_2x2(&response::diffusion_at(p, n, s)) * sq;
            let mut tries = 0;
            loop {
                let xi = l * normal_pair(&mut rng);
                let (a, b) = (n + dn + xi[0], s + ds + xi[1]);
                if a >= 0.0 && b >= 0.0 {
                    break (a, b);
                }
                rejections += 1;
                tries += 1;
                if tries >= MAX_REDRAWS {
                    return Err(Error::InvalidRun(format!(
                        "{MAX_REDRAWS} consecutive negative excursions at n = {n:e}, S = {s:e}"
                    )));
                }
            }
        };
        n = nn;
        s = ns;
        if step >= burn && (step - burn + 1) % run.sample_every == 0 && out_n.len() < cap {
            out_n.push(n);
            out_s.push(s);
        }
    }
    Ok(Member {
        n: out_n,
        s: out_s,
        rejections,
        steps: total,
    })
}

/// Euler–Maruyama integration of the nonlinear Langevin rate equations,
/// started at the stable steady state; statistics after burn-in.
pub fn simulate_nonlinear(p: &LaserParams, run: &StochasticRun) -> Result<NoiseStats> {
    p.validate()?;
    let sol = model::solve_steady(p);
    let ss = *sol.stable().ok_or(Error::NoStableState)?;
    let rc = response::linearize(p, &ss)?;
    run.validate(&rc)?;
    simulate_nonlinear_from(p, (ss.n_s, ss.s_s), run)
}

/// As [`simulate_nonlinear`] from an arbitrary start, without the
/// steady-state based run validation.
pub fn simulate_nonlinear_from(p: &LaserParams, start: (f64, f64), run: &StochasticRun) -> Result<NoiseStats> {
    run.check_shape()?;
    let members: Vec<Member> = (0..run.members)
        .into_par_iter()
        .map(|m| nonlinear_member(p, start, run, m))
        .collect::<Result<_>>()?;
    let dt_sample = run.dt * run.sample_every as f64;
    assemble(&members, 0.0, 1.0, 1.0, dt_sample, run, p.fingerprint(), true)
}

/// Recorded mean photon number path of a zero-noise run, for comparison with
/// the deterministic integrators.
pub fn zero_noise_path(p: &LaserParams, start: (f64, f64), run: &StochasticRun) -> Result<Vec<(f64, f64)>> {
    let r = StochasticRun {
        zero_noise: true,
        members: 1,
        burn_in: 0.0,
        ..*run
    };
    r.check_shape()?;
    let m = nonlinear_member(p, start, &r, 0)?;
    Ok(m.n.into_iter().zip(m.s).collect())
}

/// Per-step transition for the linear SDE dV = MV dt + dW, ⟨dW dWᵀ⟩ = Q dt.
#[derive(Debug, Clone, Copy)]
struct LinearStep {
    phi: Matrix2<f64>,
    chol: Matrix2<f64>,
}

impl LinearStep {
    fn new(m: &Matrix2<f64>, q: &Matrix2<f64>, dt: f64, scheme: LinearScheme) -> Self {
        match scheme {
            LinearScheme::EulerMaruyama => LinearStep {
                phi: Matrix2::identity() + m * dt,
                chol: sqrt_psd_2x2(q) * dt.sqrt(),
            },
            LinearScheme::Exact => {
                // exp([[−M, Q], [0, Mᵀ]]dt) = [[·, E12], [0, E22]]:
                // Φ = E22ᵀ, Q_d = Φ·E12.
                let mut c = Matrix4::zeros();
                c.fixed_view_mut::<2, 2>(0, 0).copy_from(&(-m));
                c.fixed_view_mut::<2, 2>(0, 2).copy_from(q);
                c.fixed_view_mut::<2, 2>(2, 2).copy_from(&m.transpose());
                let e = (c * dt).exp();
                let e12: Matrix2<f64> = e.fixed_view::<2, 2>(0, 2).into();
                let e22: Matrix2<f64> = e.fixed_view::<2, 2>(2, 2).into();
                let phi = e22.transpose();
                let qd = phi * e12;
                LinearStep {
                    phi,
                    chol: sqrt_psd_2x2(&(0.5 * (qd + qd.transpose()))),
                }
            }
        }
    }
}

fn linear_member(step: &LinearStep, run: &StochasticRun, member: usize) -> Member {
    let mut rng = run.member_rng(member);
    let burn = run.burn_in_steps();
    let total = burn + run.steps_per_member();
    let cap = run.samples_per_member();
    let mut v = Vector2::zeros();
    let mut out_n = Vec::with_capacity(cap);
    let mut out_s = Vec::with_capacity(cap);
    for k in 0..total {
        v = step.phi * v;
        if !run.zero_noise {
            v += step.chol * normal_pair(&mut rng);
        }
        if k >= burn && (k - burn + 1) % run.sample_every == 0 && out_n.len() < cap {
            out_n.push(v[0]);
            out_s.push(v[1]);
        }
    }
    Member {
        n: out_n,
        s: out_s,
        rejections: 0,
        steps: total,
    }
}

/// Simulates dV = MV dt + dW with ⟨dW dWᵀ⟩ = Q dt in the caller's units.
/// NoiseStats fields refer to the first component; `fano_estimate` and
/// `fano_stderr` carry its variance and the variance's error (there is no
/// mean to divide by).
pub fn simulate_linear_system(m: &Matrix2<f64>, q: &Matrix2<f64>, run: &StochasticRun) -> Result<NoiseStats> {
    run.check_shape()?;
    let step = LinearStep::new(m, q, run.dt, run.linear_scheme);
    let members: Vec<Member> = (0..run.members).into_par_iter().map(|k| linear_member(&step, run, k)).collect();
    let dt_sample = run.dt * run.sample_every as f64;
    let mut st = assemble(&members, 0.0, 1.0, 1.0, dt_sample, run, String::new(), false)?;
    st.fano_estimate = st.var_n;
    st.fano_stderr = st.var_stderr;
    Ok(st)
}

/// Simulates the linearized fluctuation equations δV̇ = MδV + F about the
/// steady state described by `rc`; integration is done in δn/n_s, δS/S_s
/// and time in 1/κ, then mapped back.
pub fn simulate_linearized(p: &LaserParams, rc: &ResponseCoeffs, run: &StochasticRun) -> Result<NoiseStats> {
    if !rc.is_stable() {
        return Err(Error::Unstable {
            gamma: rc.gamma,
            det: rc.det,
        });
    }
    run.validate(rc)?;
    let t = Matrix2::new(rc.n_s, 0.0, 0.0, rc.s_s);
    let t_inv = Matrix2::new(1.0 / rc.n_s, 0.0, 0.0, 1.0 / rc.s_s);
    let m = t_inv * rc.m * t / rc.kappa;
    let q = t_inv * rc.diffusion * t_inv / rc.kappa;
    let step = LinearStep::new(&m, &q, run.dt * rc.kappa, run.linear_scheme);
    let members: Vec<Member> = (0..run.members).into_par_iter().map(|k| linear_member(&step, run, k)).collect();
    let dt_sample = run.dt * run.sample_every as f64;
    assemble(&members, rc.n_s, rc.n_s, rc.s_s, dt_sample, run, p.fingerprint(), false)
}

/// Reduces member series (scaled by `scale_n`, `scale_s` and offset by
/// `offset_n`) to statistics, in member order.
#[allow(clippy::too_many_arguments)]
fn assemble(
    members: &[Member],
    offset_n: f64,
    scale_n: f64,
    scale_s: f64,
    dt_sample: f64,
    run: &StochasticRun,
    params_hash: String,
    nonlinear: bool,
) -> Result<NoiseStats> {
    let samples: usize = members.iter().map(|m| m.n.len()).sum();
    let steps: usize = members.iter().map(|m| m.steps).sum();
    let rejections: usize = members.iter().map(|m| m.rejections).sum();

    // Means of the raw (scaled) series in member order.
    let mut sn = CompensatedSum::default();
    let mut ss = CompensatedSum::default();
    for m in members {
        for (&a, &b) in m.n.iter().zip(&m.s) {
            sn.add(a);
            ss.add(b);
        }
    }
    let mn = sn.value() / samples as f64;
    let ms = ss.value() / samples as f64;
    let mut cnn = CompensatedSum::default();
    let mut cns = CompensatedSum::default();
    let mut css = CompensatedSum::default();
    let mut batches = Vec::new();
    let mut tau_sum = 0.0;
    let mut n_eff = 0.0;
    // Batch length from the first member's squared deviations.
    let dev2_first: Vec<f64> = members[0].n.iter().map(|v| (v - mn).powi(2)).collect();
    let tau_y = stats::integrated_autocorrelation_time(&dev2_first);
    let batch_len = stats::batch_length(tau_y).min(members[0].n.len() / 2).max(1);
    for m in members {
        let tau = stats::integrated_autocorrelation_time(&m.n);
        tau_sum += tau;
        n_eff += m.n.len() as f64 / (2.0 * tau);
        let dev2: Vec<f64> = m.n.iter().map(|v| (v - mn).powi(2)).collect();
        batches.extend(stats::batch_means(&dev2, batch_len));
        for (&a, &b) in m.n.iter().zip(&m.s) {
            let (da, db) = (a - mn, b - ms);
            cnn.add(da * da);
            cns.add(da * db);
            css.add(db * db);
        }
    }
    let denom = (samples - 1) as f64;
    let var_raw = cnn.value() / denom;
    let est = stats::pooled_batch_estimate(&batches, batch_len);
    let mean_n = offset_n + scale_n * mn;
    let var_n = var_raw * scale_n * scale_n;
    let fano_estimate = var_n / mean_n;
    let var_stderr = est.stderr * samples as f64 / denom * scale_n * scale_n;
    let fano_stderr = var_stderr / mean_n.abs();

    let spectrum_estimate = match &run.spectrum {
        None => None,
        Some(cfg) => {
            let mut acc: Option<Periodogram> = None;
            for m in members {
                let x: Vec<f64> = m.n.iter().map(|v| v * scale_n).collect();
                let pg = estimate_spectrum(&x, dt_sample, cfg)?;
                acc = Some(match acc {
                    None => pg,
                    Some(mut a) => {
                        for (v, w) in a.values.iter_mut().zip(&pg.values) {
                            *v += w;
                        }
                        a.segments += pg.segments;
                        a
                    }
                });
            }
            acc.map(|mut a| {
                let k = members.len() as f64;
                for v in a.values.iter_mut() {
                    *v /= k;
                }
                a
            })
        }
    };

    let rejection_rate = rejections as f64 / steps.max(1) as f64;
    Ok(NoiseStats {
        mean_n,
        var_n,
        fano_estimate,
        fano_stderr,
        var_stderr,
        covariance: [
            [var_n, cns.value() / denom * scale_n * scale_s],
            [cns.value() / denom * scale_n * scale_s, css.value() / denom * scale_s * scale_s],
        ],
        tau_int: tau_sum / members.len() as f64 * dt_sample,
        n_eff,
        samples,
        rejections,
        rejection_rate,
        reliable: !nonlinear || rejection_rate <= MAX_REJECTION_RATE,
        seed: run.seed,
        params_hash,
        spectrum_estimate,
    })
}

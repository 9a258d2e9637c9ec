//! Parameter scans: Fano factor by every route at each point, with
//! refinement toward stability edges where F diverges.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{self, SteadyState};
use crate::params::LaserParams;
use crate::response::{self, OffResonantFano};

/// One row of a Fano-factor scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanoRow {
    pub beta: f64,
    /// Relative pump Λ/Λ_th.
    pub r: f64,
    pub pump: f64,
    pub n_s: f64,
    pub s_s: f64,
    /// Δ(n_s) = βn_s − Δ0.
    pub detuning: f64,
    pub gamma: f64,
    pub omega2: f64,
    pub stable: bool,
    pub fano_closed: Option<f64>,
    pub fano_quadrature: Option<f64>,
    pub fano_lyapunov: Option<f64>,
    pub fano_eq4: Option<f64>,
    /// Resonant Kerr asymptote when Δ0 = 0, off-resonant one otherwise.
    pub fano_s12_or_s13: Option<f64>,
    /// β → 0 estimate: κ²γ⊥/(2Λg²), or κ²Δ0²/(2Λg²γ⊥) when detuned.
    pub fano_linear_ref: f64,
    /// κ/Γ, the dashed-line approximation of the resonant scan.
    pub kappa_over_gamma: Option<f64>,
}

fn linear_reference(p: &LaserParams) -> f64 {
    let base = p.kappa * p.kappa / (2.0 * p.pump * p.g * p.g);
    if p.delta0 > 0.0 {
        base * p.delta0 * p.delta0 / p.gamma_perp
    } else {
        base * p.gamma_perp
    }
}

/// The operating point of a parameter set: the stable lasing state if one
/// exists, else the largest lasing root (unstable), else none.
pub fn operating_point(p: &LaserParams) -> Option<SteadyState> {
    let sol = model::solve_steady(p);
    sol.stable().or(sol.positive.last()).copied()
}

/// Evaluates every Fano route at one parameter set. Quadrature is skipped
/// when `with_quadrature` is false.
pub fn fano_row(p: &LaserParams, with_quadrature: bool) -> FanoRow {
    let mut row = FanoRow {
        beta: p.beta,
        r: p.relative_pump(),
        pump: p.pump,
        n_s: 0.0,
        s_s: p.pump / p.gamma_par,
        detuning: -p.delta0,
        gamma: f64::NAN,
        omega2: f64::NAN,
        stable: false,
        fano_closed: None,
        fano_quadrature: None,
        fano_lyapunov: None,
        fano_eq4: None,
        fano_s12_or_s13: None,
        fano_linear_ref: linear_reference(p),
        kappa_over_gamma: None,
    };
    let Some(ss) = operating_point(p) else {
        return row;
    };
    row.n_s = ss.n_s;
    row.s_s = ss.s_s;
    row.detuning = ss.detuning;
    let Ok(rc) = response::linearize(p, &ss) else {
        return row;
    };
    row.gamma = rc.gamma;
    row.omega2 = rc.omega2;
    row.stable = rc.is_stable();
    if !row.stable {
        return row;
    }
    row.fano_closed = response::fano_closed_form(&rc).ok();
    row.fano_lyapunov = response::fano_lyapunov(&rc).ok();
    if with_quadrature {
        row.fano_quadrature = response::fano_quadrature(&rc).ok().map(|q| q.fano);
    }
    if let Ok(a) = response::fano_approximations(p, &ss) {
        row.fano_eq4 = a.sharp_gain;
        row.fano_s12_or_s13 = match (a.resonant_kerr, a.off_resonant_kerr) {
            (Some(v), _) => Some(v),
            (None, Some(OffResonantFano::Value(v))) => Some(v),
            _ => None,
        };
        row.kappa_over_gamma = Some(a.kappa_over_gamma);
    }
    row
}

/// Rows for each β, in input order.
pub fn fano_sweep(p: &LaserParams, betas: &[f64], with_quadrature: bool) -> Vec<FanoRow> {
    betas
        .par_iter()
        .map(|&b| fano_row(&p.with_beta(b), with_quadrature))
        .collect()
}

/// `points` log-spaced values in [lo, hi].
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    response::log_space(lo, hi, points)
}

pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

fn has_stable_state(p: &LaserParams, beta: f64) -> bool {
    model::solve_steady(&p.with_beta(beta)).stable().is_some()
}

/// β values at which a stable lasing state appears or disappears between
/// consecutive grid points, located by bisection.
pub fn stability_edges(p: &LaserParams, betas: &[f64]) -> Vec<(f64, f64)> {
    let flags: Vec<bool> = betas.par_iter().map(|&b| has_stable_state(p, b)).collect();
    let mut out = Vec::new();
    for i in 1..betas.len() {
        if flags[i] != flags[i - 1] {
            // (stable side, unstable side)
            let (mut s, mut u) = if flags[i - 1] {
                (betas[i - 1], betas[i])
            } else {
                (betas[i], betas[i - 1])
            };
            for _ in 0..200 {
                let m = 0.5 * (s + u);
                if m == s || m == u {
                    break;
                }
                if has_stable_state(p, m) {
                    s = m;
                } else {
                    u = m;
                }
            }
            out.push((s, u));
        }
    }
    out
}

/// Adds points approaching each stability edge geometrically from the stable
/// side, β_edge + (β_s − β_edge)·10^{−k}, k = 0..depth, so that a divergence
/// of F at the edge is resolved. Returns a sorted, de-duplicated grid.
pub fn refine_toward_edges(p: &LaserParams, betas: &[f64], depth: u32) -> Vec<f64> {
    let mut out = betas.to_vec();
    for (s, u) in stability_edges(p, betas) {
        let edge = 0.5 * (s + u);
        // Start from the nearest original grid point on the stable side.
        let anchor = betas
            .iter()
            .copied()
            .filter(|&b| has_stable_state(p, b) && (b - edge).signum() == (s - edge).signum())
            .min_by(|a, b| (a - edge).abs().total_cmp(&(b - edge).abs()))
            .unwrap_or(s);
        for k in 0..=depth {
            let b = edge + (anchor - edge) * 10f64.powi(-(k as i32));
            if has_stable_state(p, b) {
                out.push(b);
            }
        }
        out.push(s);
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup();
    out
}

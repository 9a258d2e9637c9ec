//! Number-dependent gain, steady states and the operating-regime classifier.

use serde::{Deserialize, Serialize};

use crate::params::LaserParams;
use crate::response;

/// Detuning between the number-dependent cavity resonance and the gain line,
/// Δ(n) = βn − Δ0.
#[inline]
pub fn detuning(p: &LaserParams, n: f64) -> f64 {
    p.beta * n - p.delta0
}

/// R_sp(n) = 2g²γ⊥ / (γ⊥² + Δ(n)²).
#[inline]
pub fn spontaneous_rate(p: &LaserParams, n: f64) -> f64 {
    let d = detuning(p, n);
    2.0 * p.g * p.g * p.gamma_perp / (p.gamma_perp * p.gamma_perp + d * d)
}

/// Peak value 2g²/γ⊥ of the Lorentzian, reached at n = Δ0/β.
#[inline]
pub fn peak_rate(p: &LaserParams) -> f64 {
    2.0 * p.g * p.g / p.gamma_perp
}

/// dR_sp/dn = −4g²γ⊥β Δ(n) / (γ⊥² + Δ(n)²)².
#[inline]
pub fn spontaneous_rate_derivative(p: &LaserParams, n: f64) -> f64 {
    let d = detuning(p, n);
    let den = p.gamma_perp * p.gamma_perp + d * d;
    -4.0 * p.g * p.g * p.gamma_perp * p.beta * d / (den * den)
}

/// Logarithmic derivative R_sp′/R_sp = −2βΔ / (γ⊥² + Δ²), free of the 2g²γ⊥ prefactor.
#[inline]
pub fn log_rate_derivative(p: &LaserParams, n: f64) -> f64 {
    let d = detuning(p, n);
    -2.0 * p.beta * d / (p.gamma_perp * p.gamma_perp + d * d)
}

/// Λ_th = κγ∥γ⊥/(2g²).
pub fn threshold_pump(p: &LaserParams) -> f64 {
    p.threshold_pump()
}

/// Pump above which the empty cavity has net gain, Λ_th(1 + Δ0²/γ⊥²).
pub fn lasing_onset(p: &LaserParams) -> f64 {
    p.threshold_pump() * p.onset_factor()
}

/// Saturated gain G(n) = R_sp(n)Λ / (γ∥ + R_sp(n)n).
pub fn gain_curve(p: &LaserParams, n: f64) -> f64 {
    let r = spontaneous_rate(p, n);
    r * p.pump / (p.gamma_par + r * n)
}

/// Which root of the steady-state equation a solution is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Smaller root of the quadratic (positive differential gain side).
    Lower,
    /// Larger root.
    Upper,
    /// β = 0: the equation is linear and has a single root.
    Linear,
    /// The non-lasing state n = 0.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub n_s: f64,
    pub s_s: f64,
    /// Δ(n_s) = βn_s − Δ0.
    pub detuning: f64,
    pub stable: bool,
    pub branch: Branch,
}

impl SteadyState {
    pub fn is_lasing(&self) -> bool {
        self.n_s > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    /// Number of positive steady solutions (0, 1 or 2).
    pub count: u8,
    pub lasing: bool,
}

impl Regime {
    fn from_count(count: u8) -> Self {
        Regime {
            count,
            lasing: count > 0,
        }
    }
}

/// Steady solutions of one parameter set. Positive roots are ordered by
/// increasing photon number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadySolutions {
    pub positive: Vec<SteadyState>,
    /// The n = 0 solution, reported only when no positive root exists.
    pub non_lasing: Option<SteadyState>,
}

impl SteadySolutions {
    pub fn regime(&self) -> Regime {
        Regime::from_count(self.positive.len() as u8)
    }

    /// The stable lasing state, if any. When both roots are stable the larger one is returned.
    pub fn stable(&self) -> Option<&SteadyState> {
        self.positive.iter().rev().find(|s| s.stable)
    }
}

/// Coefficients of the steady-state quadratic in the scaled photon number
/// x = βn/γ⊥: x² + bx + c = 0 with b = 2g²/(γ∥β) − 2Δ0/γ⊥ and
/// c = 1 + Δ0²/γ⊥² − Λ/Λ_th.
#[derive(Debug, Clone, Copy)]
struct ScaledQuadratic {
    b: f64,
    c: f64,
}

impl ScaledQuadratic {
    fn new(p: &LaserParams) -> Self {
        let d = p.delta0 / p.gamma_perp;
        ScaledQuadratic {
            b: p.saturation_ratio() - 2.0 * d,
            c: p.onset_factor() - p.relative_pump(),
        }
    }

    /// Real roots in ascending order.
    fn roots(&self) -> Vec<f64> {
        let ScaledQuadratic { b, c } = *self;
        let disc = b * b - 4.0 * c;
        if disc < 0.0 {
            return Vec::new();
        }
        if disc == 0.0 {
            return vec![-0.5 * b];
        }
        let sq = disc.sqrt();
        // Cancellation-free pair: q carries the sign of b.
        let q = -0.5 * (b + b.signum() * sq);
        let (x1, x2) = if q == 0.0 {
            (-0.5 * sq, 0.5 * sq)
        } else {
            (q, c / q)
        };
        let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        vec![lo, hi]
    }
}

/// Relative residual of the steady-state quadratic at photon number n, scaled
/// by the largest individual term.
pub fn quadratic_residual(p: &LaserParams, n: f64) -> f64 {
    let gp = p.gamma_perp;
    let terms = [
        (p.beta * n / gp).powi(2),
        -2.0 * p.delta0 * p.beta * n / (gp * gp),
        2.0 * p.g * p.g * n / (p.gamma_par * gp),
        1.0,
        (p.delta0 / gp).powi(2),
        -p.relative_pump(),
    ];
    let sum: f64 = terms.iter().sum();
    let scale = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    sum.abs() / scale
}

fn make_state(p: &LaserParams, n: f64, branch: Branch) -> SteadyState {
    let r = spontaneous_rate(p, n);
    SteadyState {
        n_s: n,
        s_s: p.kappa / r,
        detuning: detuning(p, n),
        stable: response::is_stable(p, n),
        branch,
    }
}

fn non_lasing_state(p: &LaserParams) -> SteadyState {
    // Below onset the n = 0 solution is the attractor.
    let stable = p.pump * spontaneous_rate(p, 0.0) / p.gamma_par < p.kappa;
    SteadyState {
        n_s: 0.0,
        s_s: p.pump / p.gamma_par,
        detuning: -p.delta0,
        stable,
        branch: Branch::Off,
    }
}

/// All positive steady states, each with S_s = κ/R_sp(n_s) and a stability verdict.
pub fn solve_steady(p: &LaserParams) -> SteadySolutions {
    let mut positive = Vec::with_capacity(2);
    if p.beta == 0.0 {
        // Linear laser: n_s = Λ/κ − γ∥(γ⊥² + Δ0²)/(2g²γ⊥).
        let n = (p.threshold_pump() / p.kappa) * (p.relative_pump() - p.onset_factor());
        if n > 0.0 {
            positive.push(make_state(p, n, Branch::Linear));
        }
    } else {
        let quad = ScaledQuadratic::new(p);
        let roots = quad.roots();
        let two = roots.iter().filter(|x| **x > 0.0).count() == 2;
        for x in roots.into_iter().filter(|x| *x > 0.0) {
            let x = polish_root(&quad, x);
            let branch = if two && positive.is_empty() {
                Branch::Lower
            } else {
                Branch::Upper
            };
            let n = x * p.gamma_perp / p.beta;
            positive.push(make_state(p, n, branch));
        }
    }
    let non_lasing = if positive.is_empty() {
        Some(non_lasing_state(p))
    } else {
        None
    };
    SteadySolutions {
        positive,
        non_lasing,
    }
}

/// One Newton correction; the closed form is already accurate to a few ulps
/// away from a double root, so this only helps near tangency.
fn polish_root(q: &ScaledQuadratic, x: f64) -> f64 {
    let f = x * x + q.b * x + q.c;
    let df = 2.0 * x + q.b;
    if df.abs() > 1e-8 * (x.abs() + q.b.abs()) {
        let next = x - f / df;
        let fn_ = next * next + q.b * next + q.c;
        if next > 0.0 && fn_.abs() < f.abs() {
            return next;
        }
    }
    x
}

/// Number of positive steady solutions from the closed-form pump windows:
/// one above the lasing onset, two inside the bistable wedge, none otherwise.
///
/// The lower edge of the wedge is Λ_th[1 + 2Δ0g²/(βγ∥γ⊥) − g⁴/(β²γ∥²)], the
/// pump at which the discriminant of the steady-state quadratic vanishes.
pub fn classify_regime(p: &LaserParams) -> Regime {
    // Work with r = Λ/Λ_th so that the onset comparison is literally the sign
    // of the quadratic's constant term.
    let r = p.relative_pump();
    let onset = p.onset_factor();
    if r > onset {
        return Regime::from_count(1);
    }
    if p.beta == 0.0 {
        return Regime::from_count(0);
    }
    // Sign of −2Δ0β + 2g²γ⊥/γ∥, divided through by βγ⊥.
    let linear_coeff = p.saturation_ratio() - 2.0 * p.delta0 / p.gamma_perp;
    if linear_coeff >= 0.0 {
        return Regime::from_count(0);
    }
    if r == onset {
        // Roots 0 and a positive one.
        return Regime::from_count(1);
    }
    let g2 = p.g * p.g;
    let lower = 1.0 + 2.0 * p.delta0 * g2 / (p.beta * p.gamma_par * p.gamma_perp)
        - g2 * g2 / (p.beta * p.beta * p.gamma_par * p.gamma_par);
    Regime::from_count(if r > lower { 2 } else { 0 })
}

/// Sign of G(n) − κ, evaluated in the overflow-free form R(Λ − κn) − κγ∥.
fn net_gain_sign(p: &LaserParams, n: f64) -> f64 {
    let r = spontaneous_rate(p, n);
    (r * (p.pump - p.kappa * n) - p.kappa * p.gamma_par).signum()
}

/// Brute-force root count: sign changes of G(n) − κ over n = 0 followed by a
/// logarithmic grid of `points` values ending at Λ/κ, beyond which G < κ always.
pub fn count_roots_bruteforce(p: &LaserParams, points: usize) -> usize {
    let n_hi = p.pump / p.kappa;
    let n_lo = n_hi * 1e-12;
    let ratio = (n_hi / n_lo).ln() / (points.max(2) - 1) as f64;
    let mut prev = net_gain_sign(p, 0.0);
    let mut count = 0;
    for i in 0..points {
        let n = n_lo * (ratio * i as f64).exp();
        let s = net_gain_sign(p, n);
        if s != 0.0 && prev != 0.0 && s != prev {
            count += 1;
        }
        if s != 0.0 {
            prev = s;
        }
    }
    count
}

/// The closed stability inequality n_s > Δ0/β − g²γ⊥/(γ∥β²) (the steady state
/// lies on the decreasing-gain side of the quadratic's vertex). `None` for β = 0.
pub fn on_decreasing_gain_side(p: &LaserParams, n: f64) -> Option<bool> {
    if p.beta == 0.0 {
        return None;
    }
    let vertex = p.delta0 / p.beta - p.g * p.g * p.gamma_perp / (p.gamma_par * p.beta * p.beta);
    Some(n > vertex)
}

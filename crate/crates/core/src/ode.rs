//! Adaptive integrators for small autonomous or time-dependent systems:
//! Dormand–Prince 5(4) for non-stiff problems and a 2(3) Rosenbrock pair
//! (L-stable, W-method with a finite-difference Jacobian) for stiff ones.
//!
//! Both integrators step exactly onto every requested output time and reject
//! steps that drive a component flagged non-negative below zero.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Dopri5,
    Rosenbrock23,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Dopri5 => "dopri5",
            Method::Rosenbrock23 => "rosenbrock23",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions<const N: usize> {
    pub rtol: f64,
    pub atol: [f64; N],
    /// Components that must stay ≥ 0.
    pub nonnegative: [bool; N],
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl<const N: usize> OdeOptions<N> {
    pub fn new(rtol: f64, atol: f64) -> Self {
        OdeOptions {
            rtol,
            atol: [atol; N],
            nonnegative: [false; N],
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }

    pub fn nonnegative(mut self) -> Self {
        self.nonnegative = [true; N];
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Steps rejected because they produced a negative component.
    pub negativity_rejections: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<SVector<f64, N>>,
    pub stats: OdeStats,
}

type Vector<const N: usize> = SVector<f64, N>;

fn error_norm<const N: usize>(
    err: &Vector<N>,
    y0: &Vector<N>,
    y1: &Vector<N>,
    opts: &OdeOptions<N>,
) -> f64 {
    let mut s = 0.0;
    for i in 0..N {
        let sc = opts.atol[i] + opts.rtol * y0[i].abs().max(y1[i].abs());
        let e = err[i] / sc;
        s += e * e;
    }
    (s / N as f64).sqrt()
}

fn violates_sign<const N: usize>(y: &Vector<N>, opts: &OdeOptions<N>) -> bool {
    (0..N).any(|i| (opts.nonnegative[i] && y[i] < 0.0) || !y[i].is_finite())
}

fn initial_step<const N: usize>(f0: &Vector<N>, y0: &Vector<N>, span: f64, opts: &OdeOptions<N>) -> f64 {
    if let Some(h) = opts.h_init {
        return h.min(span);
    }
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = opts.atol[i] + opts.rtol * y0[i].abs();
        d0 += (y0[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * span
    } else {
        0.01 * d0 / d1
    };
    h.min(span).min(opts.h_max)
}

fn check_outputs(t0: f64, t_out: &[f64]) -> Result<()> {
    let mut prev = t0;
    for &t in t_out {
        if !(t >= prev) || !t.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t_out",
                value: t,
                reason: "output times must be finite, non-decreasing and not before t0",
            });
        }
        prev = t;
    }
    Ok(())
}

/// Integrates y′ = f(t, y) from (t0, y0), returning the state at each time in
/// `t_out` (non-decreasing, ≥ t0).
pub fn solve<F, const N: usize>(
    method: Method,
    f: F,
    t0: f64,
    y0: Vector<N>,
    t_out: &[f64],
    opts: &OdeOptions<N>,
) -> Result<OdeSolution<N>>
where
    F: FnMut(f64, &Vector<N>) -> Vector<N>,
{
    check_outputs(t0, t_out)?;
    match method {
        Method::Dopri5 => dopri5(f, t0, y0, t_out, opts),
        Method::Rosenbrock23 => rosenbrock23(f, t0, y0, t_out, opts),
    }
}

/// Shared driver: `step` attempts one step of size h from (t, y) with
/// derivative f0 and returns (y_new, f_new, error norm).
fn drive<S, const N: usize>(
    mut step: S,
    f0: Vector<N>,
    t0: f64,
    y0: Vector<N>,
    t_out: &[f64],
    opts: &OdeOptions<N>,
    order: i32,
    stats: &mut OdeStats,
) -> Result<OdeSolution<N>>
where
    S: FnMut(f64, &Vector<N>, &Vector<N>, f64, &mut OdeStats) -> (Vector<N>, Vector<N>, f64),
{
    let mut t = t0;
    let mut y = y0;
    let mut fy = f0;
    let mut out_t = Vec::with_capacity(t_out.len());
    let mut out_y = Vec::with_capacity(t_out.len());
    let span = t_out.last().map_or(0.0, |&te| te - t0);
    let mut h = initial_step(&fy, &y, span.max(f64::MIN_POSITIVE), opts);
    let expo = 1.0 / (order as f64 + 1.0);
    let mut steps = 0usize;
    let mut last_rejected = false;
    for &target in t_out {
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::TooManySteps {
                    t,
                    max_steps: opts.max_steps,
                });
            }
            steps += 1;
            let remaining = target - t;
            let h_try = h.min(remaining).min(opts.h_max);
            let lands = h_try >= remaining;
            if h_try <= 16.0 * f64::EPSILON * t.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::StepSizeUnderflow { t, h: h_try });
            }
            let (y_new, f_new, err) = step(t, &y, &fy, h_try, stats);
            if violates_sign(&y_new, opts) {
                stats.rejected += 1;
                stats.negativity_rejections += 1;
                h = 0.25 * h_try;
                last_rejected = true;
                continue;
            }
            if err <= 1.0 {
                t = if lands { target } else { t + h_try };
                y = y_new;
                fy = f_new;
                stats.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-expo)).clamp(0.2, 5.0) };
                let fac = if last_rejected { fac.min(1.0) } else { fac };
                // Do not let a short landing step shrink the proposal.
                h = if lands { h.max(h_try * fac) } else { h_try * fac };
                last_rejected = false;
            } else {
                stats.rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-expo)).max(0.1) } else { 0.1 };
                h = h_try * fac.min(0.9);
                last_rejected = true;
            }
        }
        out_t.push(target);
        out_y.push(y);
    }
    Ok(OdeSolution {
        t: out_t,
        y: out_y,
        stats: *stats,
    })
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn dopri5<F, const N: usize>(
    mut f: F,
    t0: f64,
    y0: Vector<N>,
    t_out: &[f64],
    opts: &OdeOptions<N>,
) -> Result<OdeSolution<N>>
where
    F: FnMut(f64, &Vector<N>) -> Vector<N>,
{
    let mut stats = OdeStats::default();
    let f0 = f(t0, &y0);
    stats.evaluations += 1;
    let step = |t: f64, y: &Vector<N>, k1: &Vector<N>, h: f64, st: &mut OdeStats| {
        let k2 = f(t + C2 * h, &(y + k1 * (h * A21)));
        let k3 = f(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h));
        let k4 = f(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
        let k5 = f(t + C5 * h, &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
        let k6 = f(t + h, &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h));
        let y_new = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
        let k7 = f(t + h, &y_new);
        st.evaluations += 6;
        let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let en = error_norm(&err, y, &y_new, opts);
        (y_new, k7, en)
    };
    drive(step, f0, t0, y0, t_out, opts, 4, &mut stats)
}

/// Dense LU with partial pivoting; nalgebra's generic LU needs dimension
/// bounds that const-generic callers cannot name.
struct Lu<const N: usize> {
    a: SMatrix<f64, N, N>,
    perm: [usize; N],
}

impl<const N: usize> Lu<N> {
    fn new(mut a: SMatrix<f64, N, N>) -> Option<Self> {
        let mut perm = [0usize; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        for k in 0..N {
            let piv = (k..N).max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))?;
            if a[(piv, k)] == 0.0 || !a[(piv, k)].is_finite() {
                return None;
            }
            if piv != k {
                a.swap_rows(piv, k);
                perm.swap(piv, k);
            }
            for i in k + 1..N {
                let l = a[(i, k)] / a[(k, k)];
                a[(i, k)] = l;
                for j in k + 1..N {
                    a[(i, j)] -= l * a[(k, j)];
                }
            }
        }
        Some(Lu { a, perm })
    }

    fn solve(&self, b: Vector<N>) -> Vector<N> {
        let mut x = Vector::<N>::zeros();
        for i in 0..N {
            x[i] = b[self.perm[i]];
        }
        for i in 0..N {
            for j in 0..i {
                x[i] -= self.a[(i, j)] * x[j];
            }
        }
        for i in (0..N).rev() {
            for j in i + 1..N {
                x[i] -= self.a[(i, j)] * x[j];
            }
            x[i] /= self.a[(i, i)];
        }
        x
    }
}

fn jacobian<F, const N: usize>(f: &mut F, t: f64, y: &Vector<N>, fy: &Vector<N>) -> SMatrix<f64, N, N>
where
    F: FnMut(f64, &Vector<N>) -> Vector<N>,
{
    let mut j = SMatrix::<f64, N, N>::zeros();
    let sq = f64::EPSILON.sqrt();
    for c in 0..N {
        let delta = sq * y[c].abs().max(1e-8);
        let mut yp = *y;
        yp[c] += delta;
        let col = (f(t, &yp) - fy) / delta;
        j.set_column(c, &col);
    }
    j
}

fn rosenbrock23<F, const N: usize>(
    mut f: F,
    t0: f64,
    y0: Vector<N>,
    t_out: &[f64],
    opts: &OdeOptions<N>,
) -> Result<OdeSolution<N>>
where
    F: FnMut(f64, &Vector<N>) -> Vector<N>,
{
    let d = 1.0 / (2.0 + std::f64::consts::SQRT_2);
    let e32 = 6.0 + std::f64::consts::SQRT_2;
    let mut stats = OdeStats::default();
    let f0 = f(t0, &y0);
    stats.evaluations += 1;
    let step = |t: f64, y: &Vector<N>, fy: &Vector<N>, h: f64, st: &mut OdeStats| {
        let jac = jacobian(&mut f, t, y, fy);
        let dt = (h * 1e-7).max(f64::EPSILON * t.abs());
        let ft = (f(t + dt, y) - fy) / dt;
        st.evaluations += N + 1;
        let w = SMatrix::<f64, N, N>::identity() - jac * (h * d);
        let Some(lu) = Lu::new(w) else {
            return (*y, *fy, f64::INFINITY);
        };
        let solve = |b: Vector<N>| lu.solve(b);
        let k1 = solve(fy + ft * (h * d));
        let f1 = f(t + 0.5 * h, &(y + k1 * (0.5 * h)));
        let k2 = solve(f1 - k1) + k1;
        let y_new = y + k2 * h;
        let f2 = f(t + h, &y_new);
        let k3 = solve(f2 - (k2 - f1) * e32 - (k1 - fy) * 2.0 + ft * (h * d));
        st.evaluations += 2;
        let err = (k1 - k2 * 2.0 + k3) * (h / 6.0);
        let en = error_norm(&err, y, &y_new, opts);
        (y_new, f2, en)
    };
    drive(step, f0, t0, y0, t_out, opts, 2, &mut stats)
}

/// Evenly spaced output times t0 + (t_end − t0)·i/(points − 1), i ≥ 1.
pub fn uniform_times(t0: f64, t_end: f64, points: usize) -> Vec<f64> {
    let m = points.max(2) - 1;
    (1..=m).map(|i| t0 + (t_end - t0) * i as f64 / m as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    fn oscillator(_t: f64, y: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(y[1], -y[0])
    }

    #[test]
    fn harmonic_oscillator_both_methods() {
        let ts = uniform_times(0.0, 10.0, 11);
        for (m, tol) in [(Method::Dopri5, 1e-8), (Method::Rosenbrock23, 1e-4)] {
            let opts = OdeOptions::new(1e-10, 1e-12);
            let sol = solve(m, oscillator, 0.0, Vector2::new(1.0, 0.0), &ts, &opts).unwrap();
            for (t, y) in sol.t.iter().zip(&sol.y) {
                assert!((y[0] - t.cos()).abs() < tol, "{m:?} t={t}");
            }
            assert_eq!(*sol.t.last().unwrap(), 10.0);
        }
    }

    #[test]
    fn stiff_decay_rosenbrock_is_cheap() {
        // y1 relaxes at rate 1e6 onto the slow manifold y1 = cos t.
        let f = |t: f64, y: &Vector2<f64>| Vector2::new(-1e6 * (y[0] - t.cos()), -y[1]);
        let opts = OdeOptions::new(1e-6, 1e-9);
        let ts = [1.0];
        let rb = solve(Method::Rosenbrock23, f, 0.0, Vector2::new(0.0, 1.0), &ts, &opts).unwrap();
        assert!((rb.y[0][0] - 1f64.cos()).abs() < 1e-5);
        assert!((rb.y[0][1] - (-1f64).exp()).abs() < 1e-5);
        let dp = solve(Method::Dopri5, f, 0.0, Vector2::new(0.0, 1.0), &ts, &opts).unwrap();
        assert!(rb.stats.accepted * 20 < dp.stats.accepted);
    }

    #[test]
    fn negative_excursions_rejected() {
        // Exact solution stays positive; a large first step would overshoot.
        let f = |_t: f64, y: &SVector<f64, 1>| SVector::<f64, 1>::new(-50.0 * y[0]);
        let opts = OdeOptions {
            h_init: Some(1.0),
            ..OdeOptions::new(1e-3, 1e-12).nonnegative()
        };
        let ts = uniform_times(0.0, 1.0, 50);
        let sol = solve(Method::Dopri5, f, 0.0, SVector::<f64, 1>::new(1.0), &ts, &opts).unwrap();
        assert!(sol.y.iter().all(|y| y[0] >= 0.0));
        assert!(sol.stats.rejected > 0);
    }

    #[test]
    fn too_many_steps_reported() {
        let opts = OdeOptions {
            max_steps: 5,
            ..OdeOptions::new(1e-12, 1e-14)
        };
        let e = solve(Method::Dopri5, oscillator, 0.0, Vector2::new(1.0, 0.0), &[100.0], &opts);
        assert!(matches!(e, Err(Error::TooManySteps { .. })));
    }

    #[test]
    fn rejects_unordered_outputs() {
        let opts = OdeOptions::new(1e-6, 1e-9);
        assert!(solve(Method::Dopri5, oscillator, 0.0, Vector2::new(1.0, 0.0), &[2.0, 1.0], &opts).is_err());
    }
}

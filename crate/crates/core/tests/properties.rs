use kerr_laser::langevin::sqrt_psd_2x2;
use kerr_laser::model::{self, quadratic_residual, spontaneous_rate, spontaneous_rate_derivative};
use kerr_laser::response::{self, diffusion_at, spectral_density};
use kerr_laser::*;
use nalgebra::Matrix2;
use proptest::prelude::*;

fn pow10(e: f64) -> f64 {
    10f64.powf(e)
}

/// Parameters spanning many decades; the pump is drawn relative to the lasing onset.
fn params() -> impl Strategy<Value = LaserParams> {
    (
        0.0..3.0f64,
        6.0..13.0f64,
        0.0..4.0f64,
        -6.0..-2.0f64,
        prop_oneof![Just(None), (-4.0..3.0f64).prop_map(Some)],
        prop_oneof![Just(None), (-1.0..1.5f64).prop_map(Some)],
        -1.0..4.0f64,
    )
        .prop_map(|(g, gp, gpar, k, beta, d0, r)| {
            let gamma_perp = pow10(gp);
            let p = LaserParams {
                g: pow10(g),
                gamma_perp,
                gamma_par: pow10(gpar),
                kappa: gamma_perp * pow10(k),
                beta: beta.map_or(0.0, pow10),
                delta0: d0.map_or(0.0, |e| gamma_perp * pow10(e)),
                pump: 1.0,
            };
            p.with_relative_pump(p.onset_factor() * pow10(r))
        })
}

fn stable_point() -> impl Strategy<Value = (LaserParams, SteadyState, ResponseCoeffs)> {
    params().prop_filter_map("no stable lasing state", |p| {
        let ss = *solve_steady(&p).stable()?;
        let rc = linearize(&p, &ss).ok()?;
        rc.is_stable().then_some((p, ss, rc))
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn gain_clamps_to_cavity_loss((p, ss, _) in stable_point()) {
        let r = spontaneous_rate(&p, ss.n_s);
        prop_assert!(rel(r * ss.s_s, p.kappa) <= 1e-10, "{}", rel(r * ss.s_s, p.kappa));
    }

    #[test]
    fn roots_satisfy_quadratic(p in params()) {
        for s in solve_steady(&p).positive.iter().filter(|s| s.branch != Branch::Linear) {
            prop_assert!(quadratic_residual(&p, s.n_s) <= 1e-10, "{}", quadratic_residual(&p, s.n_s));
        }
    }

    #[test]
    fn classification_matches_root_count(p in params()) {
        let sol = solve_steady(&p);
        let reg = classify_regime(&p);
        prop_assert_eq!(reg.count as usize, sol.positive.len());
        prop_assert_eq!(reg.lasing, !sol.positive.is_empty());
    }

    #[test]
    fn gain_is_lorentzian_about_its_peak(p in params(), beta in -4.0..3.0f64, d0 in 0.0..1.5f64, m in 0.0..1.0f64) {
        let p = p.with_beta(pow10(beta)).with_delta0(p.gamma_perp * pow10(d0));
        let c = p.delta0 / p.beta;
        let dm = m * c;
        let (hi, lo) = (spontaneous_rate(&p, c + dm), spontaneous_rate(&p, c - dm));
        prop_assert!(rel(hi, lo) <= 1e-9, "{hi} {lo}");
        prop_assert!(spontaneous_rate(&p, c) >= hi);
    }

    #[test]
    fn gain_derivative_matches_finite_difference(p in params(), x in 0.05..20.0f64) {
        prop_assume!(p.beta > 0.0);
        let n = x * p.gamma_perp / p.beta + p.delta0 / p.beta;
        let h = 1e-5 * p.gamma_perp / p.beta;
        let fd = (spontaneous_rate(&p, n + h) - spontaneous_rate(&p, n - h)) / (2.0 * h);
        let an = spontaneous_rate_derivative(&p, n);
        prop_assert!(rel(fd, an) <= 1e-6, "{fd} {an}");
    }

    #[test]
    fn fano_routes_agree((_, _, rc) in stable_point()) {
        let closed = fano_closed_form(&rc).unwrap();
        let quad = fano_quadrature(&rc).unwrap().fano;
        let lyap = fano_lyapunov(&rc).unwrap();
        prop_assert!(rel(quad, closed) <= 1e-6, "quadrature {quad} closed {closed}");
        prop_assert!(rel(lyap, closed) <= 1e-6, "lyapunov {lyap} closed {closed}");
    }

    #[test]
    fn spectrum_is_positive((_, _, rc) in stable_point()) {
        for w in response::default_omega_grid(&rc, 64) {
            prop_assert!(spectral_density(&rc, w) >= 0.0);
        }
    }

    #[test]
    fn eigenvalues_match_gamma_and_omega((_, _, rc) in stable_point()) {
        let m = rc.m / rc.kappa;
        let ev = m.complex_eigenvalues();
        let root = num_complex::Complex::new(-rc.omega2, 0.0).sqrt() / rc.kappa;
        let expect = [
            num_complex::Complex::new(-0.5 * rc.gamma / rc.kappa, 0.0) + root,
            num_complex::Complex::new(-0.5 * rc.gamma / rc.kappa, 0.0) - root,
        ];
        let scale = expect[0].norm().max(expect[1].norm());
        for e in ev.iter() {
            let d = expect.iter().map(|x| (x - e).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d <= 1e-8 * scale, "{e} vs {expect:?}");
        }
    }

    #[test]
    fn diffusion_is_psd(p in params(), fn_ in 0.0..2.0f64, fs in 0.0..2.0f64) {
        let n = fn_ * p.pump / p.kappa;
        let s = fs * p.pump / p.gamma_par;
        let d = diffusion_at(&p, n, s);
        let norm = d.norm();
        prop_assert!(d[(0, 0)] >= 0.0 && d[(1, 1)] >= 0.0);
        prop_assert!(d.determinant() >= -f64::EPSILON * norm * norm);
    }

    #[test]
    fn psd_square_root_reproduces(a in 0.0..10.0f64, b in 0.0..10.0f64, c in -1.0..1.0f64) {
        let off = c * (a * b).sqrt();
        let q = Matrix2::new(a, off, off, b);
        let r = sqrt_psd_2x2(&q);
        let back = r * r.transpose();
        prop_assert!((back - q).norm() <= 1e-12 * q.norm().max(1e-300));
    }

    #[test]
    fn determinant_sign_matches_closed_inequality(p in params()) {
        prop_assume!(p.beta > 0.0);
        // det M > 0 exactly when n_s > Δ0/β − g²γ⊥/(γ∥β²).
        let bound = p.delta0 / p.beta - p.g * p.g * p.gamma_perp / (p.gamma_par * p.beta * p.beta);
        for ss in &solve_steady(&p).positive {
            let Ok(rc) = linearize(&p, ss) else { continue };
            if rel(ss.n_s, bound) > 1e-6 {
                prop_assert_eq!(rc.det > 0.0, ss.n_s > bound, "n_s {} bound {}", ss.n_s, bound);
            }
        }
    }
}

#[test]
fn derivative_vanishes_at_gain_peak() {
    let p = Preset::Fig3OffResonant.params().with_beta(0.3);
    let peak = p.delta0 / p.beta;
    let max_slope = spontaneous_rate_derivative(&p, peak + p.gamma_perp / (3f64.sqrt() * p.beta)).abs();
    assert!(spontaneous_rate_derivative(&p, peak).abs() <= 1e-12 * max_slope);
    assert_eq!(model::peak_rate(&p), spontaneous_rate(&p, peak));
}

use kerr_laser::full_model::{self, pulled_frequency};
use kerr_laser::langevin::zero_noise_path;
use kerr_laser::*;

fn stable(p: &LaserParams) -> (SteadyState, ResponseCoeffs) {
    let ss = *solve_steady(p).stable().expect("stable state");
    (ss, linearize(p, &ss).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn displaced_start_returns_to_fixed_point() {
    let mut cases: Vec<LaserParams> = DEFAULT_BETAS.iter().map(|&b| Preset::Fig2NdYag.params().with_beta(b)).collect();
    cases.push(Preset::DeskScale.params());
    cases.push(Preset::Fig3OffResonant.params().with_beta(0.3));
    for p in cases {
        let (ss, rc) = stable(&p);
        let e = stability_eigen(&p, &ss);
        let opts = MeanFieldOptions::default();
        // 20 e-folds of the slowest mode; equals 20/Γ·2 when underdamped.
        let t_end = 20.0 / e.slowest_rate().min(rc.gamma);
        for method in [Method::Dopri5, Method::Rosenbrock23] {
            let tr = integrate_mean_field(&p, ss.n_s * (1.0 + 1e-3), ss.s_s, t_end, &MeanFieldOptions { method, ..opts }).unwrap();
            let (_, n, s) = tr.last().unwrap();
            assert!(rel(n, ss.n_s) <= 10.0 * opts.rtol, "beta {} {method:?}: {}", p.beta, rel(n, ss.n_s));
            assert!(rel(s, ss.s_s) <= 10.0 * opts.rtol, "beta {} {method:?}: {}", p.beta, rel(s, ss.s_s));
        }
    }
}

#[test]
fn trajectories_stay_non_negative_from_near_empty_cavity() {
    let p = Preset::DeskScale.params().with_beta(1e-3);
    let (ss, rc) = stable(&p);
    for method in [Method::Dopri5, Method::Rosenbrock23] {
        let opts = MeanFieldOptions {
            method,
            ..Default::default()
        };
        let tr = integrate_mean_field(&p, 1.0, 0.0, 40.0 / rc.gamma, &opts).unwrap();
        assert!(tr.n.iter().chain(&tr.s).all(|v| *v >= 0.0));
        assert!(tr.t.windows(2).all(|w| w[0] < w[1]));
        let (_, n, _) = tr.last().unwrap();
        assert!(rel(n, ss.n_s) < 1e-3, "{method:?} {n} vs {}", ss.n_s);
    }
}

#[test]
fn small_displacement_fit_matches_linear_response() {
    let p = Preset::Fig2NdYag.params();
    let (ss, rc) = stable(&p);
    let opts = MeanFieldOptions {
        samples: 4001,
        ..Default::default()
    };
    let tr = integrate_mean_field(&p, ss.n_s * (1.0 + 1e-4), ss.s_s, 16.0 / rc.gamma, &opts).unwrap();
    match oscillation_fit(&tr, ss.n_s).unwrap() {
        OscillationFit::Oscillatory { omega, gamma, .. } => {
            assert!(rel(omega, rc.omega2.sqrt()) < 0.05);
            assert!(rel(gamma, rc.gamma) < 0.05);
        }
        other => panic!("expected oscillation, got {other:?}"),
    }
}

#[test]
fn kerr_switch_on_transient_settles_on_kerr_state() {
    let p = Preset::Fig2NdYag.params().with_beta(0.5);
    let (ss, rc) = stable(&p);
    let (n0, s0) = TransientStart::LinearSteadyState { relative: 0.0 }.initial_state(&p).unwrap();
    let e = stability_eigen(&p, &ss);
    let tr = integrate_mean_field(&p, n0, s0, 30.0 / e.slowest_rate().min(rc.gamma), &MeanFieldOptions::default()).unwrap();
    let (_, n, _) = tr.last().unwrap();
    assert!(rel(n, ss.n_s) < 1e-6);
}

#[test]
fn zero_noise_sde_follows_mean_field() {
    let p = Preset::DeskScale.params();
    let (ss, rc) = stable(&p);
    let run = StochasticRun {
        dt: 0.002 / langevin::fastest_rate(&rc),
        sample_every: 50,
        ..StochasticRun::suggested(&rc, 0, 1, 4.0 / rc.gamma)
    };
    let start = (ss.n_s * 1.05, ss.s_s);
    let path = zero_noise_path(&p, start, &run).unwrap();
    let dt_sample = run.dt * run.sample_every as f64;
    let opts = MeanFieldOptions {
        samples: path.len() + 1,
        ..Default::default()
    };
    let tr = integrate_mean_field(&p, start.0, start.1, dt_sample * path.len() as f64, &opts).unwrap();
    let mut worst: f64 = 0.0;
    for (k, (n, _)) in path.iter().enumerate() {
        worst = worst.max((n - tr.n[k + 1]).abs() / ss.n_s);
    }
    // Euler is first order: the error is O(dt·rate) of the initial displacement.
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn oscillations_suppressed_by_kerr_damping() {
    let p0 = Preset::Fig2NdYag.params();
    let p1 = p0.with_beta(0.05);
    let (_, r0) = stable(&p0);
    let (_, r1) = stable(&p1);
    assert!(r1.gamma >= 10.0 * r0.gamma, "{} vs {}", r1.gamma, r0.gamma);
}

#[test]
fn full_model_error_grows_as_adiabaticity_fails() {
    let base = Preset::DeskScale.params();
    let mut errs = Vec::new();
    for ratio in [1e3, 30.0, 3.0] {
        // Keep γ⊥ and lower it relative to κ by raising κ; r fixed.
        let p = LaserParams {
            kappa: base.gamma_perp / ratio,
            ..base
        }
        .with_relative_pump(RESONANT_RELATIVE_PUMP);
        let (ss, rc) = stable(&p);
        let e = stability_eigen(&p, &ss);
        let t_end = 30.0 / e.slowest_rate().min(rc.gamma);
        let run = integrate_full_model(&p, &FullModelState::from_photons(0.9 * ss.n_s, ss.s_s), t_end, &FullModelOptions::default())
            .unwrap();
        let exact = full_model::full_model_steady_photons(&p, ss.n_s);
        assert!(rel(run.final_state.photons(), exact) < 1e-4, "ratio {ratio}");
        errs.push(rel(run.final_state.photons(), ss.n_s));
    }
    assert!(errs[0] < 0.01, "{errs:?}");
    assert!(errs[0] < errs[1] && errs[1] < errs[2], "{errs:?}");
}

#[test]
fn full_model_off_resonant_two_root_window_upper_branch() {
    let source = Preset::Fig3OffResonant.params().with_beta(10.0).with_relative_pump(30.0);
    assert_eq!(classify_regime(&source).count, 2);
    let p = source.rescaled(&Preset::DeskScale.params());
    assert_eq!(classify_regime(&p).count, 2);
    let sol = solve_steady(&p);
    let upper = sol.positive[1];
    assert!(upper.stable && !sol.positive[0].stable);
    let rc = linearize(&p, &upper).unwrap();
    let e = stability_eigen(&p, &upper);
    let t_end = 30.0 / e.slowest_rate().min(rc.gamma);
    let mut start = FullModelState::from_photons(1.02 * upper.n_s, upper.s_s);
    start.frame = pulled_frequency(&p, upper.n_s);
    let opts = FullModelOptions {
        max_steps: 500_000_000,
        ..Default::default()
    };
    let run = integrate_full_model(&p, &start, t_end, &opts).unwrap();
    assert!(rel(run.final_state.photons(), upper.n_s) < 0.01);
}

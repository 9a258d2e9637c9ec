use kerr_laser::response::spectral_density;
use kerr_laser::*;

fn stable(p: &LaserParams) -> (SteadyState, ResponseCoeffs) {
    let ss = *solve_steady(p).stable().expect("stable state");
    (ss, linearize(p, &ss).unwrap())
}

fn desk() -> (LaserParams, ResponseCoeffs) {
    let p = Preset::DeskScale.params();
    let (_, rc) = stable(&p);
    (p, rc)
}

/// Spectrum band averages (estimate, analytic) over log-spaced bands in [lo, hi].
fn bands(pg: &Periodogram, rc: &ResponseCoeffs, lo: f64, hi: f64, count: usize) -> Vec<(f64, f64)> {
    let edges = response::log_space(lo, hi, count + 1);
    edges
        .windows(2)
        .map(|w| {
            let idx: Vec<usize> = (0..pg.omega.len()).filter(|&k| pg.omega[k] >= w[0] && pg.omega[k] < w[1]).collect();
            assert!(idx.len() >= 4, "band [{}, {}] too narrow for resolution {}", w[0], w[1], pg.resolution());
            let est = idx.iter().map(|&k| pg.values[k]).sum::<f64>() / idx.len() as f64;
            let ana = idx.iter().map(|&k| spectral_density(rc, pg.omega[k])).sum::<f64>() / idx.len() as f64;
            (est, ana)
        })
        .collect()
}

#[test]
fn linearized_estimate_converges_like_inverse_root_n() {
    let (p, rc) = desk();
    let lyap = fano_lyapunov(&rc).unwrap();
    let mut errs = Vec::new();
    for duration in [0.2, 2.0, 20.0] {
        let mut run = StochasticRun::suggested(&rc, 77, 8, duration);
        run.sample_every = 4;
        let st = langevin::simulate_linearized(&p, &rc, &run).unwrap();
        let z = (st.fano_estimate - lyap) / st.fano_stderr;
        assert!(z.abs() <= 3.5, "duration {duration}: z = {z}");
        errs.push((st.n_eff, st.fano_stderr));
    }
    assert!(errs[0].0 >= 1e3 * 0.8 && errs[2].0 >= 1e5 * 0.8, "{errs:?}");
    for w in errs.windows(2) {
        let ratio = w[0].1 / w[1].1;
        let expect = (w[1].0 / w[0].0).sqrt();
        assert!((ratio / expect - 1.0).abs() < 0.5, "{ratio} vs {expect}");
    }
}

#[test]
fn step_halving_moves_estimate_within_noise() {
    let (p, rc) = desk();
    let base = StochasticRun {
        sample_every: 4,
        ..StochasticRun::suggested_nonlinear(&rc, 5, 8, 4.0)
    };
    let coarse = simulate_nonlinear(&p, &base).unwrap();
    let fine = simulate_nonlinear(
        &p,
        &StochasticRun {
            dt: base.dt / 2.0,
            sample_every: 8,
            seed: 6,
            ..base
        },
    )
    .unwrap();
    // Independent noise in the two runs: compare against their joint error.
    let joint = coarse.fano_stderr.hypot(fine.fano_stderr);
    let d = (coarse.fano_estimate - fine.fano_estimate).abs();
    assert!(d <= 3.0 * joint, "{} vs {} (joint error {joint})", coarse.fano_estimate, fine.fano_estimate);
}

#[test]
fn nonlinear_ensemble_agrees_with_linear_response() {
    let (p, rc) = desk();
    let lyap = fano_lyapunov(&rc).unwrap();
    let run = StochasticRun {
        sample_every: 4,
        ..StochasticRun::suggested_nonlinear(&rc, 11, 8, 4.0)
    };
    let st = simulate_nonlinear(&p, &run).unwrap();
    assert!(st.reliable);
    assert!(st.rejection_rate <= langevin::MAX_REJECTION_RATE);
    assert!(((st.mean_n - rc.n_s) / rc.n_s).abs() < 1e-3);
    let z = (st.fano_estimate - lyap) / st.fano_stderr;
    // Nonlinear corrections are O(1/n_s) and far below the noise here.
    assert!(z.abs() <= 4.0, "F = {} ± {} vs {lyap}", st.fano_estimate, st.fano_stderr);
}

#[test]
fn periodogram_matches_relaxation_oscillation_spectrum() {
    // Slower inversion than the desk preset keeps the oscillation underdamped.
    let p = LaserParams {
        gamma_par: 1.0,
        ..Preset::DeskScale.params()
    }
    .with_relative_pump(RESONANT_RELATIVE_PUMP);
    let (_, rc) = stable(&p);
    assert!(rc.omega2 > rc.gamma * rc.gamma);
    let mut run = StochasticRun::suggested(&rc, 3, 4, 100.0);
    run.sample_every = 10;
    run.spectrum = Some(WelchConfig::for_resolution(5.0, run.dt * 10.0));
    let st = langevin::simulate_linearized(&p, &rc, &run).unwrap();
    let pg = st.spectrum_estimate.unwrap();
    for (est, ana) in bands(&pg, &rc, 60.0, 1000.0, 10) {
        assert!((est / ana - 1.0).abs() < 0.1, "{est} vs {ana}");
    }
    // The analytic peak near the damped oscillation frequency is resolved.
    let grid = response::log_space(1.0, 3000.0, 20_000);
    let w_peak = grid.iter().copied().max_by(|a, b| spectral_density(&rc, *a).total_cmp(&spectral_density(&rc, *b))).unwrap();
    assert!(w_peak > 30.0);
    let est_peak = pg.peak_omega();
    assert!((est_peak - w_peak).abs() < 0.2 * w_peak, "{est_peak} vs {w_peak}");
}

#[test]
fn kerr_damped_periodogram_has_no_oscillation_peak() {
    let p = Preset::Fig2NdYag.params().with_beta(0.5).rescaled(&Preset::DeskScale.params());
    let (ss, rc) = stable(&p);
    assert!(!stability_eigen(&p, &ss).is_oscillatory());
    let grid = response::log_space(1e-2 * rc.gamma, 1e3 * rc.gamma, 2000);
    let vals: Vec<f64> = grid.iter().map(|&w| spectral_density(&rc, w)).collect();
    assert!(vals.windows(2).all(|w| w[1] <= w[0]));
    let mut run = StochasticRun::suggested(&rc, 4, 4, 40.0);
    run.sample_every = 10;
    run.spectrum = Some(WelchConfig::for_resolution(1.0, run.dt * 10.0));
    let st = langevin::simulate_linearized(&p, &rc, &run).unwrap();
    let b = bands(&st.spectrum_estimate.unwrap(), &rc, 5.0, 2000.0, 8);
    for (est, ana) in &b {
        assert!((est / ana - 1.0).abs() < 0.15, "{est} vs {ana}");
    }
    assert!(b.iter().all(|x| x.0 <= 1.1 * b[0].0));
}

#[test]
fn reruns_are_bit_identical() {
    let (p, rc) = desk();
    let run = StochasticRun::suggested(&rc, 99, 3, 0.2);
    assert_eq!(simulate_nonlinear(&p, &run).unwrap(), simulate_nonlinear(&p, &run).unwrap());
    let lin = StochasticRun {
        linear_scheme: LinearScheme::EulerMaruyama,
        ..run
    };
    assert_eq!(
        langevin::simulate_linearized(&p, &rc, &lin).unwrap(),
        langevin::simulate_linearized(&p, &rc, &lin).unwrap()
    );
}

use kerr_laser::full_model::{self, pulled_frequency};
use kerr_laser::langevin::{self, fastest_rate};
use kerr_laser::model::Branch;
use kerr_laser::response;
use kerr_laser::sweep;
use kerr_laser::{
    classify_regime, count_roots_bruteforce, fano_closed_form, fano_lyapunov, integrate_full_model, integrate_mean_field, linearize,
    oscillation_fit, simulate_linearized, simulate_nonlinear, solve_steady, stability_eigen, Error, FullModelOptions, FullModelState,
    LaserParams, LinearScheme, MeanFieldOptions, ResponseCoeffs, SteadyState, StochasticRun, TransientStart, WelchConfig,
};
use serde_json::json;

use crate::args::*;
use crate::output::{num, opt, Produced, Table};
use crate::Failure;

/// Resolved inputs shared by every command.
pub struct Ctx {
    pub params: LaserParams,
    pub seed: u64,
}

fn produced(table: Table, summary: serde_json::Value, plot: Vec<String>) -> Produced {
    Produced {
        table,
        extra: Vec::new(),
        summary,
        plot,
        check_failure: None,
    }
}

fn stable_point(p: &LaserParams) -> Result<(SteadyState, ResponseCoeffs), Failure> {
    let ss = *solve_steady(p).stable().ok_or(Error::NoStableState)?;
    Ok((ss, linearize(p, &ss)?))
}

/// 30 decay times of the slowest linear mode.
fn settle_time(p: &LaserParams, ss: &SteadyState, rc: &ResponseCoeffs) -> f64 {
    30.0 / stability_eigen(p, ss).slowest_rate().min(rc.gamma)
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Lower => "lower",
        Branch::Upper => "upper",
        Branch::Linear => "linear",
        Branch::Off => "off",
    }
}

pub fn steady(_: &Steady, ctx: &Ctx) -> Result<Produced, Failure> {
    let p = &ctx.params;
    let sol = solve_steady(p);
    let mut t = Table::new(&[
        "branch",
        "n_s",
        "S_s",
        "detuning",
        "stable",
        "gamma",
        "omega2",
        "det",
        "fano_closed",
        "fano_lyapunov",
    ]);
    for ss in sol.positive.iter().chain(sol.non_lasing.iter()) {
        let rc = if ss.is_lasing() { linearize(p, ss).ok() } else { None };
        let stable = rc.as_ref().is_some_and(|r| r.is_stable());
        let fano = |f: fn(&ResponseCoeffs) -> kerr_laser::Result<f64>| rc.as_ref().filter(|_| stable).and_then(|r| f(r).ok());
        t.push(vec![
            branch_name(ss.branch).into(),
            num(ss.n_s),
            num(ss.s_s),
            num(ss.detuning),
            stable.to_string(),
            opt(rc.as_ref().map(|r| r.gamma)),
            opt(rc.as_ref().map(|r| r.omega2)),
            opt(rc.as_ref().map(|r| r.det)),
            opt(fano(fano_closed_form)),
            opt(fano(fano_lyapunov)),
        ]);
    }
    let reg = sol.regime();
    Ok(produced(
        t,
        json!({
            "solutions": reg.count,
            "lasing": reg.lasing,
            "threshold_pump": p.threshold_pump(),
            "relative_pump": p.relative_pump(),
            "onset_factor": p.onset_factor(),
            "warnings": p.warnings(),
        }),
        Vec::new(),
    ))
}

pub fn fano_sweep(a: &FanoSweep, ctx: &Ctx) -> Result<Produced, Failure> {
    let p = &ctx.params;
    let lo = a.beta_min.unwrap_or(1e-3);
    let hi = a.beta_max.unwrap_or(1e2);
    let points = a.points.unwrap_or(101);
    if points == 0 || !(lo <= hi) {
        return Err(Failure::Config("beta range must be non-empty and ordered".into()));
    }
    let spacing = a.spacing.unwrap_or(Spacing::Log);
    if spacing == Spacing::Log && !(lo > 0.0) {
        return Err(Failure::Config("log spacing needs beta-min > 0".into()));
    }
    let mut grid = if a.include_zero { vec![0.0] } else { Vec::new() };
    grid.extend(match spacing {
        Spacing::Log => sweep::log_grid(lo, hi, points),
        Spacing::Linear => sweep::linear_grid(lo, hi, points),
    });
    let depth = a.refine_depth.unwrap_or(0);
    if depth > 0 {
        grid = sweep::refine_toward_edges(p, &grid, depth);
    }
    let rows = kerr_laser::fano_sweep(p, &grid, a.quadrature);
    let mut t = Table::new(&[
        "beta",
        "r",
        "pump",
        "n_s",
        "S_s",
        "detuning",
        "gamma",
        "omega2",
        "stable",
        "fano_closed",
        "fano_quadrature",
        "fano_lyapunov",
        "fano_sharp_gain",
        "fano_kerr_asymptote",
        "fano_linear_ref",
        "kappa_over_gamma",
    ]);
    for r in &rows {
        t.push(vec![
            num(r.beta),
            num(r.r),
            num(r.pump),
            num(r.n_s),
            num(r.s_s),
            num(r.detuning),
            num(r.gamma),
            num(r.omega2),
            r.stable.to_string(),
            opt(r.fano_closed),
            opt(r.fano_quadrature),
            opt(r.fano_lyapunov),
            opt(r.fano_eq4),
            opt(r.fano_s12_or_s13),
            num(r.fano_linear_ref),
            opt(r.kappa_over_gamma),
        ]);
    }
    let stable: Vec<_> = rows.iter().filter_map(|r| r.fano_closed.map(|f| (r.beta, f))).collect();
    let min = stable.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1));
    let max = stable.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1));
    Ok(produced(
        t,
        json!({
            "points": rows.len(),
            "stable_points": stable.len(),
            "min_fano": min.map(|m| json!({"beta": m.0, "fano": m.1})),
            "max_fano": max.map(|m| json!({"beta": m.0, "fano": m.1})),
        }),
        vec![
            "set logscale xy".into(),
            "set xlabel 'beta (1/s)'".into(),
            "set ylabel 'Fano factor'".into(),
            "plot '{csv}' using 'beta':'fano_closed' with lines, '' using 'beta':'fano_linear_ref' with lines dt 2".into(),
        ],
    ))
}

pub fn spectrum(a: &SpectrumCmd, ctx: &Ctx) -> Result<Produced, Failure> {
    let (_, rc) = stable_point(&ctx.params)?;
    let points = a.points.unwrap_or(400);
    let grid = match (a.omega_min, a.omega_max) {
        (None, None) => response::default_omega_grid(&rc, points),
        (lo, hi) => {
            let def = response::default_omega_grid(&rc, 2);
            let (lo, hi) = (lo.unwrap_or(def[0]), hi.unwrap_or(def[1]));
            if !(lo > 0.0 && lo < hi) || points < 2 {
                return Err(Failure::Config("omega range must satisfy 0 < omega-min < omega-max".into()));
            }
            response::log_space(lo, hi, points)
        }
    };
    let s = kerr_laser::spectrum(&rc, &grid)?;
    let mut t = Table::new(&["omega", "S", "S_over_shot_tail"]);
    for (w, v) in s.omega.iter().zip(&s.values) {
        // 2κn_s/ω² is the high-frequency (shot-noise) asymptote.
        t.push(vec![num(*w), num(*v), num(v * w * w / (2.0 * rc.kappa * rc.n_s))]);
    }
    Ok(produced(
        t,
        json!({
            "n_s": rc.n_s,
            "gamma": rc.gamma,
            "omega2": rc.omega2,
            "variance": s.variance,
            "fano": s.fano,
        }),
        vec![
            "set logscale xy".into(),
            "set xlabel 'omega (rad/s)'".into(),
            "plot '{csv}' using 'omega':'S' with lines".into(),
        ],
    ))
}

pub fn regime_map(a: &RegimeMap, ctx: &Ctx) -> Result<Produced, Failure> {
    use rayon::prelude::*;
    let p = &ctx.params;
    let betas = sweep::log_grid(a.beta_min.unwrap_or(1e-2), a.beta_max.unwrap_or(1e2), a.beta_points.unwrap_or(100));
    let rs = sweep::log_grid(a.r_min.unwrap_or(0.5), a.r_max.unwrap_or(300.0), a.r_points.unwrap_or(100));
    if betas.iter().chain(&rs).any(|v| !(*v > 0.0)) || betas.is_empty() || rs.is_empty() {
        return Err(Failure::Config("regime-map ranges must be positive and non-empty".into()));
    }
    let scan = a.scan_points.unwrap_or(10_000);
    let lth = p.threshold_pump();
    let cells: Vec<(f64, f64)> = betas.iter().flat_map(|&b| rs.iter().map(move |&r| (b, r))).collect();
    let counts: Vec<(u8, usize)> = cells
        .par_iter()
        .map(|&(b, r)| {
            let q = p.with_beta(b).with_pump(r * lth);
            (classify_regime(&q).count, count_roots_bruteforce(&q, scan))
        })
        .collect();
    let mut t = Table::new(&["beta", "r", "pump", "analytic", "bruteforce", "agree"]);
    let mut disagree = 0;
    for (&(b, r), &(c, n)) in cells.iter().zip(&counts) {
        disagree += usize::from(c as usize != n);
        t.push(vec![num(b), num(r), num(r * lth), c.to_string(), n.to_string(), (c as usize == n).to_string()]);
    }
    let mut out = produced(
        t,
        json!({"cells": cells.len(), "disagreements": disagree}),
        vec![
            "set logscale xy".into(),
            "set xlabel 'beta (1/s)'".into(),
            "set ylabel 'Lambda/Lambda_th'".into(),
            "plot '{csv}' using 'beta':'r':'analytic' with points pt 5 palette".into(),
        ],
    );
    if disagree > 0 {
        out.check_failure = Some(format!("{disagree} of {} cells disagree with brute-force root counting", cells.len()));
    }
    Ok(out)
}

pub fn transient(a: &Transient, ctx: &Ctx) -> Result<Produced, Failure> {
    let p = &ctx.params;
    let (ss, rc) = stable_point(p)?;
    let kind = a.start.unwrap_or(StartKind::Displaced);
    let start = match kind {
        StartKind::Displaced => TransientStart::Displaced {
            relative: a.displacement.unwrap_or(1e-3),
        },
        StartKind::Linear => TransientStart::LinearSteadyState {
            relative: a.displacement.unwrap_or(0.0),
        },
    };
    let (n0, s0) = start.initial_state(p)?;
    let mut opts = MeanFieldOptions::default();
    if let Some(m) = a.method {
        opts.method = m.into();
    }
    if let Some(r) = a.rtol {
        opts.rtol = r;
    }
    if let Some(s) = a.samples {
        opts.samples = s;
    }
    let t_end = a.t_end.unwrap_or_else(|| settle_time(p, &ss, &rc));
    let tr = integrate_mean_field(p, n0, s0, t_end, &opts)?;
    let mut t = Table::new(&["t", "n", "S"]);
    for i in 0..tr.len() {
        t.push(vec![num(tr.t[i]), num(tr.n[i]), num(tr.s[i])]);
    }
    let fit = if a.fit {
        Some(serde_json::to_value(oscillation_fit(&tr, ss.n_s)?).expect("fit serializes"))
    } else {
        None
    };
    let (_, n_end, s_end) = tr.last().expect("trajectory has samples");
    let e = stability_eigen(p, &ss);
    Ok(produced(
        t,
        json!({
            "n_s": ss.n_s,
            "S_s": ss.s_s,
            "n_final": n_end,
            "S_final": s_end,
            "gamma": rc.gamma,
            "omega2": rc.omega2,
            "oscillatory": e.is_oscillatory(),
            "integrator": tr.meta,
            "fit": fit,
        }),
        vec!["set xlabel 't (s)'".into(), "plot '{csv}' using 't':'n' with lines".into()],
    ))
}

pub fn langevin(a: &Langevin, ctx: &Ctx) -> Result<Produced, Failure> {
    let p = &ctx.params;
    let (_, rc) = stable_point(p)?;
    let model = a.model.unwrap_or(SdeModel::Nonlinear);
    let members = a.members.unwrap_or(8);
    let duration = a.duration.unwrap_or(1000.0 / rc.gamma);
    let mut run = match model {
        SdeModel::Nonlinear => StochasticRun::suggested_nonlinear(&rc, ctx.seed, members, duration),
        SdeModel::Linearized => StochasticRun::suggested(&rc, ctx.seed, members, duration),
    };
    if let Some(dt) = a.dt {
        run.dt = dt;
    }
    if let Some(b) = a.burn_in {
        run.burn_in = b;
    }
    run.sample_every = a.sample_every.unwrap_or(4);
    run.linear_scheme = match a.scheme.unwrap_or(SchemeArg::Exact) {
        SchemeArg::Exact => LinearScheme::Exact,
        SchemeArg::EulerMaruyama => LinearScheme::EulerMaruyama,
    };
    run.spectrum = a.spectrum_segment.map(|segment_len| WelchConfig {
        segment_len,
        overlap: 0.5,
    });
    let st = match model {
        SdeModel::Nonlinear => simulate_nonlinear(p, &run)?,
        SdeModel::Linearized => simulate_linearized(p, &rc, &run)?,
    };
    let lyap = fano_lyapunov(&rc)?;
    let closed = fano_closed_form(&rc)?;
    let z = (st.fano_estimate - lyap) / st.fano_stderr;
    let mut t = Table::new(&[
        "model",
        "members",
        "dt",
        "duration",
        "burn_in",
        "samples",
        "mean_n",
        "var_n",
        "fano_estimate",
        "fano_stderr",
        "fano_lyapunov",
        "fano_closed",
        "z_score",
        "tau_int",
        "n_eff",
        "rejection_rate",
        "reliable",
    ]);
    t.push(vec![
        match model {
            SdeModel::Nonlinear => "nonlinear".into(),
            SdeModel::Linearized => "linearized".into(),
        },
        run.members.to_string(),
        num(run.dt),
        num(run.duration),
        num(run.burn_in),
        st.samples.to_string(),
        num(st.mean_n),
        num(st.var_n),
        num(st.fano_estimate),
        num(st.fano_stderr),
        num(lyap),
        num(closed),
        num(z),
        num(st.tau_int),
        num(st.n_eff),
        num(st.rejection_rate),
        st.reliable.to_string(),
    ]);
    let mut out = produced(
        t,
        json!({
            "seed": st.seed,
            "params_hash": st.params_hash,
            "steps_per_member": run.steps_per_member() + run.burn_in_steps(),
            "fastest_rate": fastest_rate(&rc),
            "covariance": st.covariance,
            "rejections": st.rejections,
        }),
        Vec::new(),
    );
    if let Some(pg) = &st.spectrum_estimate {
        let mut s = Table::new(&["omega", "estimate", "analytic"]);
        for (w, v) in pg.omega.iter().zip(&pg.values) {
            s.push(vec![num(*w), num(*v), num(response::spectral_density(&rc, *w))]);
        }
        out.extra.push(("spectrum", s));
        out.plot = vec![
            "set logscale xy".into(),
            "plot '{stem}.spectrum.csv' using 'omega':'estimate' with lines, '' using 'omega':'analytic' with lines".into(),
        ];
    }
    if !st.reliable {
        eprintln!(
            "warning: step rejections {:.2e} exceed {:.0e} of steps; the estimate is flagged unreliable",
            st.rejection_rate,
            langevin::MAX_REJECTION_RATE
        );
    }
    Ok(out)
}

pub fn full_model(a: &FullModel, ctx: &Ctx) -> Result<Produced, Failure> {
    let p = &ctx.params;
    let (ss, rc) = stable_point(p)?;
    let frac = a.start_fraction.unwrap_or(0.9);
    let mut start = FullModelState::from_photons(frac * ss.n_s, ss.s_s);
    let frame = a.frame.unwrap_or(FrameArg::Gain);
    if frame == FrameArg::Pulled {
        start.frame = pulled_frequency(p, ss.n_s);
    }
    let mut opts = FullModelOptions::default();
    if let Some(r) = a.rtol {
        opts.rtol = r;
    }
    if let Some(s) = a.samples {
        opts.samples = s;
    }
    if let Some(m) = a.max_steps {
        opts.max_steps = m;
    }
    let t_end = a.t_end.unwrap_or_else(|| settle_time(p, &ss, &rc));
    let run = integrate_full_model(p, &start, t_end, &opts)?;
    let tr = &run.trajectory;
    let mut t = Table::new(&["t", "n", "S"]);
    for i in 0..tr.len() {
        t.push(vec![num(tr.t[i]), num(tr.n[i]), num(tr.s[i])]);
    }
    let n = run.final_state.photons();
    Ok(produced(
        t,
        json!({
            "photons_final": n,
            "reduced_root": ss.n_s,
            "relative_difference": (n - ss.n_s).abs() / ss.n_s,
            "full_model_root": full_model::full_model_steady_photons(p, ss.n_s),
            "tail_drift": run.tail_drift,
            "frame": start.frame,
            "pulled_frequency": pulled_frequency(p, ss.n_s),
            "warnings": run.warnings,
            "integrator": tr.meta,
        }),
        vec!["set xlabel 't (s)'".into(), "plot '{csv}' using 't':'n' with lines".into()],
    ))
}

//! `kerr-laser`: steady states, Fano-factor sweeps, noise spectra, regime
//! maps, transients and stochastic runs, each written as CSV with a JSON
//! manifest that `kerr-laser replay` can re-run.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod args;
mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use kerr_laser::{LaserParams, Preset};

use args::{Cli, Command, GlobalArgs, ParamArgs};
use commands::Ctx;
use output::{Inputs, Manifest, Produced};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(kerr_laser::Error),
    /// A run completed but a cross-check or replay comparison failed.
    Check(String),
}

impl From<kerr_laser::Error> for Failure {
    fn from(e: kerr_laser::Error) -> Self {
        match e {
            kerr_laser::Error::InvalidParameter { .. } | kerr_laser::Error::InvalidRun(_) => Failure::Config(e.to_string()),
            e => Failure::Numerical(e),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) | Failure::Check(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(e) => write!(f, "numerical failure: {e}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

const DEFAULT_PRESET: &str = "fig2-nd-yag";
const DEFAULT_SEED: u64 = 1;

fn resolve_params(preset: &str, a: &ParamArgs) -> Result<LaserParams, Failure> {
    let preset = Preset::from_name(preset).ok_or_else(|| {
        let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
        Failure::Config(format!("unknown preset `{preset}`; available: {}", names.join(", ")))
    })?;
    let mut p = preset.params();
    for (field, v) in [
        (&mut p.g, a.g),
        (&mut p.gamma_perp, a.gamma_perp),
        (&mut p.gamma_par, a.gamma_par),
        (&mut p.kappa, a.kappa),
        (&mut p.beta, a.beta),
        (&mut p.delta0, a.delta0),
        (&mut p.pump, a.pump),
    ] {
        if let Some(v) = v {
            *field = v;
        }
    }
    if let Some(r) = a.relative_pump {
        p = p.with_relative_pump(r);
    }
    p.validate()?;
    Ok(p)
}

fn command_params(c: &Command) -> ParamArgs {
    match c {
        Command::Steady(a) => a.params.clone(),
        Command::FanoSweep(a) => a.params.clone(),
        Command::Spectrum(a) => a.params.clone(),
        Command::RegimeMap(a) => a.params.clone(),
        Command::Transient(a) => a.params.clone(),
        Command::Langevin(a) => a.params.clone(),
        Command::FullModel(a) => a.params.clone(),
        Command::Replay(_) => ParamArgs::default(),
    }
}

fn command_args(c: &Command) -> serde_json::Value {
    let v = match c {
        Command::Steady(a) => serde_json::to_value(a),
        Command::FanoSweep(a) => serde_json::to_value(a),
        Command::Spectrum(a) => serde_json::to_value(a),
        Command::RegimeMap(a) => serde_json::to_value(a),
        Command::Transient(a) => serde_json::to_value(a),
        Command::Langevin(a) => serde_json::to_value(a),
        Command::FullModel(a) => serde_json::to_value(a),
        Command::Replay(_) => Ok(serde_json::Value::Null),
    };
    v.expect("arguments serialize")
}

fn command_from(name: &str, args: &serde_json::Value) -> Result<Command, Failure> {
    fn de<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> Result<T, Failure> {
        serde_json::from_value(v.clone()).map_err(|e| Failure::Config(format!("manifest arguments: {e}")))
    }
    Ok(match name {
        "steady" => Command::Steady(de(args)?),
        "fano-sweep" => Command::FanoSweep(de(args)?),
        "spectrum" => Command::Spectrum(de(args)?),
        "regime-map" => Command::RegimeMap(de(args)?),
        "transient" => Command::Transient(de(args)?),
        "langevin" => Command::Langevin(de(args)?),
        "full-model" => Command::FullModel(de(args)?),
        other => return Err(Failure::Config(format!("manifest names unknown command `{other}`"))),
    })
}

fn execute(c: &Command, ctx: &Ctx) -> Result<Produced, Failure> {
    match c {
        Command::Steady(a) => commands::steady(a, ctx),
        Command::FanoSweep(a) => commands::fano_sweep(a, ctx),
        Command::Spectrum(a) => commands::spectrum(a, ctx),
        Command::RegimeMap(a) => commands::regime_map(a, ctx),
        Command::Transient(a) => commands::transient(a, ctx),
        Command::Langevin(a) => commands::langevin(a, ctx),
        Command::FullModel(a) => commands::full_model(a, ctx),
        Command::Replay(_) => unreachable!("replay is dispatched separately"),
    }
}

/// Runs one command from resolved inputs and writes CSV, manifest and plot script.
fn run_and_record(
    command: &Command,
    inputs: Inputs,
    out: PathBuf,
    global: &GlobalArgs,
    config: Option<(PathBuf, String)>,
) -> Result<Manifest, Failure> {
    let started = Instant::now();
    let ctx = Ctx {
        params: inputs.params,
        seed: inputs.seed,
    };
    let produced = execute(command, &ctx)?;
    let hash = inputs.hash();
    let outputs = output::write_outputs(&out, &hash, &produced, global.gnuplot_script)?;
    let manifest = Manifest {
        manifest_hash: hash,
        inputs,
        command_line: std::env::args().collect(),
        config_sha256: config.as_ref().map(|(_, text)| output::sha256_hex(text.as_bytes())),
        config_file: config.map(|(p, _)| p),
        threads: rayon::current_num_threads(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs,
        summary: produced.summary,
    };
    let path = output::write_manifest(&out, &manifest)?;
    eprintln!("wrote {} and {}", out.display(), path.display());
    println!("{}", serde_json::to_string(&manifest.summary).expect("summary serializes"));
    match produced.check_failure {
        Some(m) => Err(Failure::Check(m)),
        None => Ok(manifest),
    }
}

fn setup_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn replay(manifest_path: &std::path::Path, global: &GlobalArgs) -> Result<(), Failure> {
    let old = output::read_manifest(manifest_path)?;
    if old.inputs.hash() != old.manifest_hash {
        return Err(Failure::Config("manifest inputs do not match its recorded hash".into()));
    }
    let command = command_from(&old.inputs.command, &old.inputs.args)?;
    setup_threads(global.threads)?;
    let first = old.outputs.first().ok_or_else(|| Failure::Config("manifest lists no outputs".into()))?;
    let out = global.out.clone().unwrap_or_else(|| output::sibling(&first.path, "replay.csv"));
    let new = run_and_record(&command, old.inputs.clone(), out, global, None)?;
    let mut diffs = Vec::new();
    for (a, b) in old.outputs.iter().zip(&new.outputs) {
        if a.sha256 != b.sha256 {
            diffs.push(format!("{} differs from {}", b.path.display(), a.path.display()));
        }
    }
    if old.outputs.len() != new.outputs.len() {
        diffs.push(format!("{} output files recorded, {} produced", old.outputs.len(), new.outputs.len()));
    }
    if diffs.is_empty() {
        eprintln!("replay identical: {} file(s)", new.outputs.len());
        Ok(())
    } else {
        Err(Failure::Check(diffs.join("; ")))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let Cli { mut global, mut command } = cli;
    if let Command::Replay(r) = &command {
        return replay(&r.manifest, &global);
    }
    let config = match global.config.clone() {
        Some(path) => {
            let (cfg, text) = config::ConfigFile::load(&path)?;
            config::apply(&mut global, &mut command, &cfg);
            Some((path, text))
        }
        None => None,
    };
    setup_threads(global.threads)?;
    let preset = global.preset.clone().unwrap_or_else(|| DEFAULT_PRESET.into());
    let params = resolve_params(&preset, &command_params(&command))?;
    for w in params.warnings() {
        eprintln!("warning: {w:?}");
    }
    let inputs = Inputs {
        tool: "kerr-laser".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        preset,
        seed: global.seed.unwrap_or(DEFAULT_SEED),
        params,
        args: command_args(&command),
    };
    let out = global.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", command.name())));
    run_and_record(&command, inputs, out, &global, config).map(|_| ())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

//! TOML defaults file. Top-level keys mirror the global flags, `[params]`
//! holds laser-parameter overrides shared by every command, and a table named
//! after a subcommand (`[fano-sweep]`, ...) holds that command's flags.
//! Flags given on the command line always win.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::args::*;
use crate::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub gnuplot_script: bool,
    #[serde(default)]
    pub params: ParamArgs,
    pub steady: Option<Steady>,
    pub fano_sweep: Option<FanoSweep>,
    pub spectrum: Option<SpectrumCmd>,
    pub regime_map: Option<RegimeMap>,
    pub transient: Option<Transient>,
    pub langevin: Option<Langevin>,
    pub full_model: Option<FullModel>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<(Self, String), Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        Ok((cfg, text))
    }
}

/// Fills unset fields of `self` from `other`.
pub trait Merge {
    fn merge_from(&mut self, other: &Self);
}

macro_rules! merge_impl {
    ($t:ty; opts: $($o:ident),*; flags: $($f:ident),*) => {
        impl Merge for $t {
            #[allow(unused_variables)]
            fn merge_from(&mut self, other: &Self) {
                $( if self.$o.is_none() { self.$o = other.$o.clone(); } )*
                $( self.$f |= other.$f; )*
            }
        }
    };
}

merge_impl!(GlobalArgs; opts: config, preset, out, seed, threads; flags: gnuplot_script);
merge_impl!(FanoSweep; opts: beta_min, beta_max, points, spacing, refine_depth; flags: include_zero, quadrature);
merge_impl!(SpectrumCmd; opts: omega_min, omega_max, points; flags: );
merge_impl!(RegimeMap; opts: beta_min, beta_max, beta_points, r_min, r_max, r_points, scan_points; flags: );
merge_impl!(Transient; opts: start, displacement, t_end, samples, method, rtol; flags: fit);
merge_impl!(Langevin; opts: model, scheme, members, duration, dt, burn_in, sample_every, spectrum_segment; flags: );
merge_impl!(FullModel; opts: start_fraction, t_end, samples, frame, rtol, max_steps; flags: );
merge_impl!(Steady; opts: ; flags: );

impl Merge for ParamArgs {
    fn merge_from(&mut self, other: &Self) {
        for (mine, theirs) in [
            (&mut self.g, other.g),
            (&mut self.gamma_perp, other.gamma_perp),
            (&mut self.gamma_par, other.gamma_par),
            (&mut self.kappa, other.kappa),
            (&mut self.beta, other.beta),
            (&mut self.delta0, other.delta0),
        ] {
            if mine.is_none() {
                *mine = theirs;
            }
        }
        // The two pump forms are one setting.
        if self.pump.is_none() && self.relative_pump.is_none() {
            self.pump = other.pump;
            self.relative_pump = other.relative_pump;
        }
    }
}

/// Merges the config's values into parsed command-line arguments.
pub fn apply(global: &mut GlobalArgs, command: &mut Command, cfg: &ConfigFile) {
    let file_global = GlobalArgs {
        config: None,
        preset: cfg.preset.clone(),
        out: cfg.out.clone(),
        seed: cfg.seed,
        threads: cfg.threads,
        gnuplot_script: cfg.gnuplot_script,
    };
    global.merge_from(&file_global);
    fn both<T: Merge + HasParams>(cmd: &mut T, table: &Option<T>, shared: &ParamArgs) {
        if let Some(t) = table {
            cmd.merge_from(t);
            cmd.params_mut().merge_from(t.params());
        }
        cmd.params_mut().merge_from(shared);
    }
    let shared = &cfg.params;
    match command {
        Command::Steady(c) => both(c, &cfg.steady, shared),
        Command::FanoSweep(c) => both(c, &cfg.fano_sweep, shared),
        Command::Spectrum(c) => both(c, &cfg.spectrum, shared),
        Command::RegimeMap(c) => both(c, &cfg.regime_map, shared),
        Command::Transient(c) => both(c, &cfg.transient, shared),
        Command::Langevin(c) => both(c, &cfg.langevin, shared),
        Command::FullModel(c) => both(c, &cfg.full_model, shared),
        Command::Replay(_) => {}
    }
}

pub trait HasParams {
    fn params(&self) -> &ParamArgs;
    fn params_mut(&mut self) -> &mut ParamArgs;
}

macro_rules! has_params {
    ($($t:ty),*) => {
        $(impl HasParams for $t {
            fn params(&self) -> &ParamArgs { &self.params }
            fn params_mut(&mut self) -> &mut ParamArgs { &mut self.params }
        })*
    };
}

has_params!(Steady, FanoSweep, SpectrumCmd, RegimeMap, Transient, Langevin, FullModel);

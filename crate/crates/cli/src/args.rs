use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "kerr-laser", version, about = "Steady states, noise and dynamics of lasers with a Kerr nonlinearity")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML file with default values; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Parameter preset: fig2-nd-yag, fig3-offres or desk-scale.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,

    /// Output CSV path; a `.manifest.json` is written next to it.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Seed of the noise generator.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Worker threads for parallel sweeps and ensembles.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Also write a gnuplot script that plots the CSV.
    #[arg(long, global = true)]
    pub gnuplot_script: bool,
}

/// Overrides of individual laser parameters, all in s⁻¹.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ParamArgs {
    /// Atom-field coupling g.
    #[arg(long, allow_negative_numbers = true)]
    pub g: Option<f64>,
    /// Polarization decay γ⊥.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma_perp: Option<f64>,
    /// Inversion decay γ∥.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma_par: Option<f64>,
    /// Cavity loss κ.
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    /// Kerr coefficient β.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Cavity-gain detuning Δ0 at n = 0.
    #[arg(long, allow_negative_numbers = true)]
    pub delta0: Option<f64>,
    /// Pump rate Λ.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "relative_pump")]
    pub pump: Option<f64>,
    /// Pump relative to the resonant threshold, r = Λ/Λ_th.
    #[arg(long, allow_negative_numbers = true)]
    pub relative_pump: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady solutions, their stability and noise.
    Steady(Steady),
    /// Fano factor by every route over a range of β.
    FanoSweep(FanoSweep),
    /// Intensity-noise spectrum at the stable operating point.
    Spectrum(SpectrumCmd),
    /// Number of lasing solutions over a (β, r) grid, analytic and brute force.
    RegimeMap(RegimeMap),
    /// Noise-free rate-equation transient.
    Transient(Transient),
    /// Stochastic ensemble estimate of the Fano factor.
    Langevin(Langevin),
    /// Field-polarization-inversion integration without adiabatic elimination.
    FullModel(FullModel),
    /// Re-run the command recorded in a manifest and compare the outputs.
    Replay(Replay),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Steady(_) => "steady",
            Command::FanoSweep(_) => "fano-sweep",
            Command::Spectrum(_) => "spectrum",
            Command::RegimeMap(_) => "regime-map",
            Command::Transient(_) => "transient",
            Command::Langevin(_) => "langevin",
            Command::FullModel(_) => "full-model",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Steady {
    #[command(flatten)]
    #[serde(default)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FanoSweep {
    #[command(flatten)]
    #[serde(default)]
    pub params: ParamArgs,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    pub spacing: Option<Spacing>,
    /// Prepend β = 0 to the grid.
    #[arg(long)]
    #[serde(default)]
    pub include_zero: bool,
    /// Also evaluate the Fano factor by adaptive quadrature.
    #[arg(long)]
    #[serde(default)]
    pub quadrature: bool,
    /// Geometric refinement levels toward each stability edge (0 disables).
    #[arg(long)]
    pub refine_depth: Option<u32>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SpectrumCmd {
    #[command(flatten)]
    #[serde(default)]
    pub params: ParamArgs,
    /// Angular frequency range, rad/s; defaults to [10⁻²Γ, 10³·max(Γ, √|Ω²|)].
    #[arg(long)]
    pub omega_min: Option<f64>,
    #[arg(long)]
    pub omega_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RegimeMap {
    #[command(flatten)]
    #[serde(default)]
    pub params: ParamArgs,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    #[arg(long)]
    pub beta_points: Option<usize>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub r_points: Option<usize>,
    /// Samples of the brute-force sign scan.
    #[arg(long)]
    pub scan_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    /// The stable state of the same parameters, displaced.
    Displaced,
    /// The β = 0 steady state, with the Kerr term switched on at t = 0.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Dopri5,
    Rosenbrock23,
}

impl From<MethodArg> for kerr_laser::Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dopri5 => kerr_laser::Method::Dopri5,
            MethodArg::Rosenbrock23 => kerr_laser::Method::Rosenbrock23,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Transient {
    #[command(flatten)]
    #[serde(default)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub start: Option<StartKind>,
    /// Relative photon-number displacement of the start.
    #[arg(long, allow_negative_numbers = true)]
    pub displacement: Option<f64>,
    /// End time, s; defaults to 30 decay times of the slowest mode.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Fit a damped cosine to the trajectory.
    #[arg(long)]
    #[serde(default)]
    pub fit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdeModel {
    /// Full rate equations with state-dependent diffusion (Euler–Maruyama).
    Nonlinear,
    /// Fluctuations linearized about the steady state.
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Exact,
    EulerMaruyama,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Langevin {
    #[command(flatten)]
    #[serde(default)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub model: Option<SdeModel>,
    /// Step scheme of the linearized model.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long)]
    pub members: Option<usize>,
    /// Recorded time per member after burn-in, s.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub sample_every: Option<usize>,
    /// Welch segment length; writes `<out>.spectrum.csv` with the estimate.
    #[arg(long)]
    pub spectrum_segment: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameArg {
    /// Rotating at the gain-line frequency.
    Gain,
    /// Rotating at the analytic pulled lasing frequency.
    Pulled,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FullModel {
    #[command(flatten)]
    #[serde(default)]
    pub params: ParamArgs,
    /// Initial photon number as a fraction of the stable root.
    #[arg(long)]
    pub start_fraction: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_enum)]
    pub frame: Option<FrameArg>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct Replay {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}

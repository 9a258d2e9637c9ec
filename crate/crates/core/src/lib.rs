//! Steady states, linear-response noise, transients and stochastic
//! simulation of a single-mode class-B laser with a Kerr nonlinearity.
//!
//! The photon-number dependent gain is R_sp(n) = 2g²γ⊥/(γ⊥² + (βn − Δ0)²);
//! every rate is in s⁻¹.

pub mod dynamics;
pub mod error;
pub mod fit;
pub mod full_model;
pub mod langevin;
pub mod lyapunov;
pub mod model;
pub mod ode;
pub mod params;
pub mod quadrature;
pub mod response;
pub mod spectral;
pub mod stats;
pub mod sweep;

pub use dynamics::{integrate_mean_field, stability_eigen, MeanFieldOptions, StabilityEigen, Trajectory, TransientStart};
pub use error::{Error, Result};
pub use fit::{oscillation_fit, OscillationFit};
pub use full_model::{integrate_full_model, FullModelOptions, FullModelRun, FullModelState};
pub use langevin::{simulate_linearized, simulate_nonlinear, LinearScheme, NoiseStats, StochasticRun};
pub use model::{classify_regime, count_roots_bruteforce, solve_steady, Branch, Regime, SteadySolutions, SteadyState};
pub use ode::Method;
pub use params::{LaserParams, ParamWarning, Preset, DEFAULT_BETAS, RESONANT_RELATIVE_PUMP};
pub use response::{
    fano_approximations, fano_closed_form, fano_lyapunov, fano_quadrature, linearize, spectrum, NoiseSpectrum, ResponseCoeffs,
};
pub use spectral::{estimate_spectrum, Periodogram, WelchConfig};
pub use sweep::{fano_row, fano_sweep, FanoRow};

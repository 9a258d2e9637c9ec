//! Laser parameter sets and the built-in presets.
//!
//! All rates are in s⁻¹. The detuning convention used throughout the crate is
//! `Δ(n) = β·n − Δ0`, where `Δ0 = ω_c(0) − ω_0` is the empty-cavity detuning
//! above the gain line; the cavity and the gain are resonant at `n = Δ0/β`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

use crate::error::{Error, Result};

/// One laser configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserParams {
    /// Coupling of the lasing transition to the cavity mode.
    pub g: f64,
    /// Polarization decay rate γ⊥ (gain bandwidth).
    pub gamma_perp: f64,
    /// Inversion decay rate γ∥.
    pub gamma_par: f64,
    /// Cavity leakage rate κ.
    pub kappa: f64,
    /// Kerr frequency shift per photon β.
    pub beta: f64,
    /// Empty-cavity detuning Δ0 (zero for the resonant laser).
    pub delta0: f64,
    /// Pump rate Λ.
    pub pump: f64,
}

/// Non-fatal diagnostics about a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ParamWarning {
    /// γ⊥ is not much larger than κ; adiabatic elimination of the polarization is questionable.
    WeakPolarizationSeparation { gamma_perp_over_kappa: f64 },
    /// γ⊥ is not much larger than γ∥.
    WeakInversionSeparation { gamma_perp_over_gamma_par: f64 },
}

impl fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamWarning::WeakPolarizationSeparation {
                gamma_perp_over_kappa,
            } => write!(
                f,
                "gamma_perp/kappa = {gamma_perp_over_kappa:.3e}: class-B ordering gamma_perp >> kappa violated"
            ),
            ParamWarning::WeakInversionSeparation {
                gamma_perp_over_gamma_par,
            } => write!(
                f,
                "gamma_perp/gamma_par = {gamma_perp_over_gamma_par:.3e}: class-B ordering gamma_perp >> gamma_par violated"
            ),
        }
    }
}

/// Ratio below which the class-B ordering is reported as violated.
pub const CLASS_B_SEPARATION: f64 = 100.0;

impl LaserParams {
    /// Builds and validates a parameter set.
    pub fn new(
        g: f64,
        gamma_perp: f64,
        gamma_par: f64,
        kappa: f64,
        beta: f64,
        delta0: f64,
        pump: f64,
    ) -> Result<Self> {
        let p = LaserParams {
            g,
            gamma_perp,
            gamma_par,
            kappa,
            beta,
            delta0,
            pump,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("g", self.g),
            ("gamma_perp", self.gamma_perp),
            ("gamma_par", self.gamma_par),
            ("kappa", self.kappa),
            ("pump", self.pump),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        for (name, value) in [("beta", self.beta), ("delta0", self.delta0)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and non-negative",
                });
            }
        }
        Ok(())
    }

    /// Class-B ordering diagnostics. An empty list means γ⊥ ≫ κ, γ∥.
    pub fn warnings(&self) -> Vec<ParamWarning> {
        let mut out = Vec::new();
        let pk = self.gamma_perp / self.kappa;
        if pk < CLASS_B_SEPARATION {
            out.push(ParamWarning::WeakPolarizationSeparation {
                gamma_perp_over_kappa: pk,
            });
        }
        let pg = self.gamma_perp / self.gamma_par;
        if pg < CLASS_B_SEPARATION {
            out.push(ParamWarning::WeakInversionSeparation {
                gamma_perp_over_gamma_par: pg,
            });
        }
        out
    }

    /// Lasing threshold of the resonant laser, κγ∥γ⊥/(2g²).
    pub fn threshold_pump(&self) -> f64 {
        self.kappa * self.gamma_par * self.gamma_perp / (2.0 * self.g * self.g)
    }

    /// Factor by which the empty-cavity detuning raises the lasing onset, 1 + Δ0²/γ⊥².
    pub fn onset_factor(&self) -> f64 {
        let d = self.delta0 / self.gamma_perp;
        1.0 + d * d
    }

    /// Relative pump r = Λ/Λ_th.
    pub fn relative_pump(&self) -> f64 {
        self.pump / self.threshold_pump()
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_pump(mut self, pump: f64) -> Self {
        self.pump = pump;
        self
    }

    /// Sets the pump through the relative pump r = Λ/Λ_th.
    pub fn with_relative_pump(mut self, r: f64) -> Self {
        self.pump = r * self.threshold_pump();
        self
    }

    pub fn with_delta0(mut self, delta0: f64) -> Self {
        self.delta0 = delta0;
        self
    }

    /// Kerr strength in the scaled form a = 2g²/(γ∥β) that, together with
    /// r and Δ0/γ⊥, fixes the dimensionless steady-state quadratic.
    pub fn saturation_ratio(&self) -> f64 {
        2.0 * self.g * self.g / (self.gamma_par * self.beta)
    }

    /// Maps these parameters onto another set of decay rates while preserving
    /// the dimensionless ratios that control the steady state and the noise:
    /// r, Δ0/γ⊥, and the steady Kerr shift βn_s/γ⊥.
    pub fn rescaled(&self, target: &LaserParams) -> LaserParams {
        let mut out = *target;
        out.delta0 = self.delta0 / self.gamma_perp * target.gamma_perp;
        out.pump = self.relative_pump() * target.threshold_pump();
        out.beta = if self.beta == 0.0 {
            0.0
        } else {
            // βn/γ⊥ is a function of r, Δ0/γ⊥ and a = 2g²/(γ∥β) only.
            let a = self.saturation_ratio();
            2.0 * target.g * target.g / (target.gamma_par * a)
        };
        out
    }

    /// Short stable hash of the exact parameter values.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in [
            self.g,
            self.gamma_perp,
            self.gamma_par,
            self.kappa,
            self.beta,
            self.delta0,
            self.pump,
        ] {
            h.update(v.to_bits().to_le_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// Nd:YAG-like resonant laser.
    Fig2NdYag,
    /// Same gain medium with an empty-cavity detuning Δ0 = 10¹³ s⁻¹.
    Fig3OffResonant,
    /// Ratio-preserving reduced-scale rates for stochastic and full-model runs.
    DeskScale,
}

/// Relative pump used for the resonant scans.
pub const RESONANT_RELATIVE_PUMP: f64 = 150.0;

/// Kerr strengths exposed as the default family for the resonant figures, s⁻¹.
pub const DEFAULT_BETAS: [f64; 5] = [0.0, 0.05, 0.5, 5.0, 50.0];

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig2NdYag, Preset::Fig3OffResonant, Preset::DeskScale];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig2NdYag => "fig2-nd-yag",
            Preset::Fig3OffResonant => "fig3-offres",
            Preset::DeskScale => "desk-scale",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    /// The parameter set. Resonant presets are pumped at r = 150; the
    /// off-resonant preset at twice its detuned lasing onset.
    pub fn params(&self) -> LaserParams {
        match self {
            Preset::Fig2NdYag => LaserParams {
                g: 1e2,
                gamma_perp: 1e12,
                gamma_par: 4.34e3,
                kappa: 1e7,
                beta: 0.0,
                delta0: 0.0,
                pump: 0.0,
            }
            .with_relative_pump(RESONANT_RELATIVE_PUMP),
            Preset::Fig3OffResonant => {
                let p = Preset::Fig2NdYag.params().with_delta0(1e13);
                p.with_relative_pump(2.0 * p.onset_factor())
            }
            Preset::DeskScale => LaserParams {
                g: 10.0,
                gamma_perp: 1e6,
                gamma_par: 10.0,
                kappa: 1e3,
                beta: 0.0,
                delta0: 0.0,
                pump: 0.0,
            }
            .with_relative_pump(RESONANT_RELATIVE_PUMP),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

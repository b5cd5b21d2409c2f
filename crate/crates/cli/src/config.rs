//! Run configuration as read from JSON.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use krs_core::ansatz::BaseFactor;
use krs_core::grid::Profile;
use krs_core::numerics::ode::OdeTolerances;
use krs_core::stability::{potential_abs, potential_part, FactorNorm, PerturbationProfile};
use krs_core::{BundleConfig, GridScheme, SolitonSolution, SolverOptions};
use serde::{Deserialize, Serialize};

pub const MIN_NODES: usize = 64;
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub factors: Vec<FactorSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySpec>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub dim: u32,
    pub einstein_constant: f64,
    pub twist: i64,
    #[serde(default)]
    pub deformation_norm2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nodes: usize,
    #[serde(default)]
    pub scheme: GridScheme,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nodes: 2048,
            scheme: GridScheme::Chebyshev,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Momentum,
    Shooting,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative ODE tolerance for shooting.
    pub ode: f64,
    /// Bound on the soliton-system and Kähler residuals.
    pub residual: f64,
    /// Bound on the pointwise identity deviations.
    pub identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode: 1e-10,
            residual: 1e-8,
            identity: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySpec {
    /// Absent means the shipped default family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles: Option<Vec<ProfileSpec>>,
    #[serde(default = "default_prefactor")]
    pub prefactor: f64,
}

fn default_prefactor() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Constant,
    UPlus,
    UMinus,
    AbsU,
    Sampled,
}

impl ProfileKind {
    fn label(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::UPlus => "u_plus",
            Self::UMinus => "u_minus",
            Self::AbsU => "abs_u",
            Self::Sampled => "sampled",
        }
    }
}

/// One perturbation profile; `kappa` applies to constants, `values` and
/// `factor` to sampled data given on the solution nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.bundle()?;
        ensure!(
            self.grid.nodes >= MIN_NODES,
            "grid.nodes = {} is below the minimum of {MIN_NODES}",
            self.grid.nodes
        );
        let t = self.tolerances;
        for (name, v) in [("ode", t.ode), ("residual", t.residual), ("identity", t.identity)] {
            ensure!(v > 0.0 && v.is_finite(), "tolerances.{name} must be positive");
        }
        if let Some(s) = &self.stability {
            ensure!(s.prefactor.is_finite(), "stability.prefactor must be finite");
            for p in s.profiles.iter().flatten() {
                p.validate(self.factors.len())?;
            }
        }
        Ok(())
    }

    pub fn bundle(&self) -> Result<BundleConfig> {
        let factors = self
            .factors
            .iter()
            .map(|f| BaseFactor::new(f.dim, f.einstein_constant, f.twist, f.deformation_norm2))
            .collect::<krs_core::Result<Vec<_>>>()?;
        Ok(BundleConfig::new(factors)?)
    }

    pub fn solver_options(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            nodes: self.grid.nodes,
            scheme: self.grid.scheme,
            ode: OdeTolerances {
                rtol: self.tolerances.ode,
                atol: 1e-2 * self.tolerances.ode,
                ..d.ode
            },
            ..d
        }
    }

    pub fn prefactor(&self) -> f64 {
        self.stability.as_ref().map_or(default_prefactor(), |s| s.prefactor)
    }

    /// The explicit profile list, or `None` for the default family.
    pub fn profiles(&self) -> Option<&[ProfileSpec]> {
        self.stability.as_ref().and_then(|s| s.profiles.as_deref())
    }
}

impl ProfileSpec {
    fn validate(&self, factor_count: usize) -> Result<()> {
        match self.kind {
            ProfileKind::Constant => {
                if let Some(k) = &self.kappa {
                    ensure!(k.len() == factor_count, "constant profile needs {factor_count} norms");
                }
                ensure!(self.values.is_none(), "constant profile takes kappa, not values");
            }
            ProfileKind::Sampled => {
                ensure!(self.values.is_some(), "sampled profile needs values");
                ensure!(self.kappa.is_none(), "sampled profile takes values, not kappa");
            }
            _ => ensure!(
                self.kappa.is_none() && self.values.is_none(),
                "{} profiles take no data",
                self.kind.label()
            ),
        }
        if let Some(f) = self.factor {
            ensure!(f < factor_count, "factor index {f} out of range");
        }
        Ok(())
    }

    pub fn label(&self, index: usize) -> String {
        self.id.clone().unwrap_or_else(|| format!("{}-{index}", self.kind.label()))
    }

    /// Builds the perturbation on the solved grid.
    pub fn build(&self, sol: &SolitonSolution) -> Result<PerturbationProfile> {
        let r = sol.config.factor_count();
        let on_factor = |psi: Profile| -> Result<PerturbationProfile> {
            let n = psi.len();
            let at = self.factor.unwrap_or(0);
            let mut factors = vec![FactorNorm::Sampled(Profile::constant(n, 0.0)); r];
            factors[at] = FactorNorm::Sampled(psi);
            let p = PerturbationProfile {
                factors,
                essential: false,
            };
            p.validate()?;
            Ok(p)
        };
        Ok(match self.kind {
            ProfileKind::Constant => match &self.kappa {
                Some(k) => PerturbationProfile::constant(k.clone())?,
                None => PerturbationProfile::from_config(&sol.config),
            },
            ProfileKind::UPlus => on_factor(potential_part(&sol.grid, 1.0))?,
            ProfileKind::UMinus => on_factor(potential_part(&sol.grid, -1.0))?,
            ProfileKind::AbsU => on_factor(potential_abs(&sol.grid))?,
            ProfileKind::Sampled => {
                let values = self.values.clone().unwrap_or_default();
                if values.len() != sol.grid.len() {
                    bail!(
                        "sampled profile has {} values but the solution has {} nodes",
                        values.len(),
                        sol.grid.len()
                    );
                }
                on_factor(Profile::from_samples(&sol.grid, values))?
            }
        })
    }
}

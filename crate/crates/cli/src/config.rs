//! Run configuration, read from TOML.
//!
//! Every table rejects unknown keys. See the README for the full grammar.

use std::path::PathBuf;

use multicoag_core::composition::{Composition, WeightParams};
use multicoag_core::grid::{GridSpec, SourceSpec, Truncation};
use multicoag_core::kernels::{Kernel, SizeTable};
use multicoag_core::lattice::Lattice;
use multicoag_core::measures::SignedMeasure;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    #[default]
    Grid,
    Ssa,
    Both,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Constant {
        value: f64,
    },
    Brownian,
    ProductEnvelope {
        theta1: f64,
        theta2: f64,
    },
    /// `|x||y|`; accepted by `simulate` only.
    Multiplicative,
    Table {
        sizes: Vec<f64>,
        rates: Vec<Vec<f64>>,
        c_u: f64,
        theta1: f64,
        theta2: f64,
    },
}

impl KernelConfig {
    pub fn build(&self) -> Result<Kernel<f64>, CliError> {
        let k = match self {
            KernelConfig::Constant { value } => Kernel::constant(*value)?,
            KernelConfig::Brownian => Kernel::brownian(),
            KernelConfig::ProductEnvelope { theta1, theta2 } => {
                Kernel::product_envelope(*theta1, *theta2)?
            }
            KernelConfig::Multiplicative => Kernel::multiplicative(),
            KernelConfig::Table {
                sizes,
                rates,
                c_u,
                theta1,
                theta2,
            } => Kernel::table(
                SizeTable::new(sizes.clone(), rates.clone())?,
                *c_u,
                *theta1,
                *theta2,
            )?,
        };
        Ok(k)
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub extent: usize,
    #[serde(default = "default_truncation")]
    pub truncation: Truncation,
    pub dt: f64,
    #[serde(default = "one")]
    pub output_every: usize,
}

fn default_truncation() -> Truncation {
    Truncation::Closed
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsaBlock {
    pub volume: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
}

fn default_replicas() -> usize {
    32
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitAtom {
    pub at: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceAtom {
    pub at: Vec<f64>,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiagnosticConfig {
    MassConservation {
        tolerance: f64,
    },
    SublinearMoment {
        alpha: f64,
        beta: f64,
        tolerance: f64,
    },
    /// `Φ(r) = r^power`.
    PhiMoment {
        power: f64,
        alpha: f64,
        tolerance: f64,
    },
    /// Weights default to `(max{0, −θ1}, 0)`.
    TimeLipschitz {
        alpha: Option<f64>,
        beta: Option<f64>,
        #[serde(default = "two")]
        ratio_limit: f64,
    },
    /// Test function `min{|x|, cap}`.
    WeakResidual {
        #[serde(default = "two")]
        cap: f64,
    },
    /// Weights default to `(−θ1, θ2)`; `budget` defaults to a Richardson
    /// estimate of the grid error.
    Uniqueness {
        alpha: Option<f64>,
        beta: Option<f64>,
        budget: Option<f64>,
    },
    /// Grid-versus-particle agreement of `∫|x|^k df` at the final time.
    MomentAgreement {
        #[serde(default = "default_orders")]
        orders: Vec<f64>,
    },
    /// `γ` defaults to the kernel's `θ2 − θ1`.
    Localisation {
        gamma: Option<f64>,
        delta: f64,
    },
}

fn two() -> f64 {
    2.0
}

fn default_orders() -> Vec<f64> {
    vec![1.0, 2.0]
}

impl DiagnosticConfig {
    fn tolerances(&self) -> Vec<(&'static str, f64)> {
        match self {
            DiagnosticConfig::MassConservation { tolerance }
            | DiagnosticConfig::SublinearMoment { tolerance, .. }
            | DiagnosticConfig::PhiMoment { tolerance, .. } => vec![("tolerance", *tolerance)],
            DiagnosticConfig::TimeLipschitz { ratio_limit, .. } => {
                vec![("ratio_limit", *ratio_limit)]
            }
            DiagnosticConfig::WeakResidual { cap } => vec![("cap", *cap)],
            DiagnosticConfig::Uniqueness { budget, .. } => {
                budget.map(|b| vec![("budget", b)]).unwrap_or_default()
            }
            DiagnosticConfig::MomentAgreement { .. } => vec![],
            DiagnosticConfig::Localisation { delta, .. } => vec![("delta", *delta)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverChoice,
    pub output: Option<PathBuf>,
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub ssa: Option<SsaBlock>,
    pub init: Vec<InitAtom>,
    #[serde(default)]
    pub source: Vec<SourceAtom>,
    #[serde(default)]
    pub diagnostics: Vec<DiagnosticConfig>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn point(dim: usize, at: &[f64], what: &str, i: usize) -> Result<Composition<f64>, CliError> {
    if at.len() != dim {
        return Err(CliError::Config(format!(
            "{what} atom {i} has {} coordinates, dimension is {dim}",
            at.len()
        )));
    }
    Composition::new(at.to_vec()).map_err(|e| CliError::Config(format!("{what} atom {i}: {e}")))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.dimension == 0 {
            return Err(CliError::Config("dimension must be at least 1".into()));
        }
        self.kernel.build()?;
        self.grid_spec()?;
        self.initial_measure()?;
        self.source()?;
        if let Some(ssa) = &self.ssa {
            if !(ssa.volume > 0.0) || !ssa.volume.is_finite() {
                return Err(CliError::Config(format!(
                    "ssa.volume = {} must be positive",
                    ssa.volume
                )));
            }
            if ssa.replicas == 0 {
                return Err(CliError::Config("ssa.replicas must be at least 1".into()));
            }
        }
        if self.solver != SolverChoice::Grid && self.ssa.is_none() {
            return Err(CliError::Config(
                "solver uses the particle method but [ssa] is missing".into(),
            ));
        }
        for d in &self.diagnostics {
            for (name, v) in d.tolerances() {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(CliError::Config(format!("{name} = {v} must be positive")));
                }
            }
            if let DiagnosticConfig::Localisation { delta, .. } = d {
                if *delta >= 1.0 {
                    return Err(CliError::Config(format!("delta = {delta} must be below 1")));
                }
            }
            if let DiagnosticConfig::PhiMoment { power, alpha, .. } = d {
                if !(*power >= 1.0) || !(*alpha > 0.0) {
                    return Err(CliError::Config(format!(
                        "phi_moment needs power >= 1 and alpha > 0 (got {power}, {alpha})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<Kernel<f64>, CliError> {
        self.kernel.build()
    }

    pub fn grid_spec(&self) -> Result<GridSpec<f64>, CliError> {
        Ok(GridSpec::new(
            self.dimension,
            self.grid.extent,
            self.grid.truncation,
            self.grid.dt,
            self.time.t_end,
            self.grid.output_every,
        )?)
    }

    pub fn lattice(&self) -> Result<Lattice, CliError> {
        Ok(self.grid_spec()?.lattice()?)
    }

    pub fn initial_measure(&self) -> Result<SignedMeasure<f64>, CliError> {
        let mut atoms = Vec::with_capacity(self.init.len());
        for (i, a) in self.init.iter().enumerate() {
            if !(a.weight >= 0.0) || !a.weight.is_finite() {
                return Err(CliError::Config(format!(
                    "init atom {i} has negative weight {}",
                    a.weight
                )));
            }
            atoms.push((point(self.dimension, &a.at, "init", i)?, a.weight));
        }
        Ok(SignedMeasure::new(self.dimension, atoms)?)
    }

    pub fn source(&self) -> Result<SourceSpec<f64>, CliError> {
        let mut atoms = Vec::with_capacity(self.source.len());
        for (i, a) in self.source.iter().enumerate() {
            if !(a.rate >= 0.0) || !a.rate.is_finite() {
                return Err(CliError::Config(format!(
                    "source atom {i} has negative rate {}",
                    a.rate
                )));
            }
            atoms.push((point(self.dimension, &a.at, "source", i)?, a.rate));
        }
        Ok(SourceSpec::from_atoms(self.dimension, atoms)?)
    }

    /// Default weights `(−θ1, θ2)` of the uniqueness norm.
    pub fn uniqueness_weights(&self) -> Result<WeightParams<f64>, CliError> {
        let k = self.kernel()?;
        Ok(WeightParams::new(-k.theta1(), k.theta2()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
dimension = 1
kernel = { type = "constant", value = 2.0 }
grid = { extent = 16, dt = 0.01 }
time = { t_end = 1.0 }
init = [{ at = [1.0], weight = 1.0 }]
"#;

    #[test]
    fn minimal_config_is_valid() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.dimension, 1);
        assert_eq!(cfg.solver, SolverChoice::Grid);
        assert_eq!(cfg.grid.truncation, Truncation::Closed);
        assert_eq!(cfg.grid_spec().unwrap().steps().unwrap(), 100);
    }

    fn rejected(text: &str) -> String {
        match parse_config(text) {
            Err(e) => {
                assert_eq!(e.exit_code(), 1);
                e.to_string()
            }
            Ok(_) => panic!("accepted"),
        }
    }

    #[test]
    fn theta2_above_one_is_rejected() {
        let text = MINIMAL.replace(
            r#"{ type = "constant", value = 2.0 }"#,
            r#"{ type = "product_envelope", theta1 = 0.0, theta2 = 1.5 }"#,
        );
        assert!(rejected(&text).contains("theta2 < 1"));
    }

    #[test]
    fn negative_init_weight_is_rejected() {
        let text = MINIMAL.replace("weight = 1.0", "weight = -1.0");
        assert!(rejected(&text).contains("negative weight"));
    }

    #[test]
    fn unknown_and_missing_keys_are_rejected() {
        assert!(rejected(&format!("{MINIMAL}\nbogus = 1\n")).contains("bogus"));
        let text = MINIMAL.replace("dt = 0.01", "dt = 0.01, stride = 2");
        assert!(rejected(&text).contains("stride"));
        let text = format!("{MINIMAL}\n[[diagnostics]]\ncheck = \"mass_conservation\"\ntolerance = 1e-6\nextra = 1\n");
        assert!(rejected(&text).contains("extra"));
        assert!(rejected(&MINIMAL.replace("time = { t_end = 1.0 }\n", "")).contains("time"));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = MINIMAL.replace("at = [1.0]", "at = [1.0, 0.0]");
        assert!(rejected(&text).contains("dimension"));
    }

    #[test]
    fn tolerances_must_be_positive() {
        let text =
            format!("{MINIMAL}\n[[diagnostics]]\ncheck = \"mass_conservation\"\ntolerance = 0.0\n");
        assert!(rejected(&text).contains("tolerance"));
    }

    #[test]
    fn particle_solver_needs_its_block() {
        let text = format!("solver = \"both\"\n{MINIMAL}");
        assert!(rejected(&text).contains("[ssa]"));
        let text = format!("solver = \"both\"\n{MINIMAL}ssa = {{ volume = 1000.0 }}\n");
        assert_eq!(parse_config(&text).unwrap().ssa.unwrap().replicas, 32);
    }
}

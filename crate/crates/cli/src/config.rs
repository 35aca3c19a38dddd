//! Experiment configuration: one JSON document per run.

use std::path::Path;

use robust_detect::density::{
    exp_offset_scale, DensitySpec, FDivGenerator, Grid, GridDensity, GridFunction,
};
use robust_detect::uncertainty::{
    band_from_scaled_nominal, DensityBand, EpsContamination, FDivBall, UncertaintySet,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Lfd,
    Roc,
    Breakdown,
    SeqDesign,
    SeqSimulate,
    Verify,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Lfd => "lfd",
            Self::Roc => "roc",
            Self::Breakdown => "breakdown",
            Self::SeqDesign => "seq-design",
            Self::SeqSimulate => "seq-simulate",
            Self::Verify => "verify",
        }
    }

    /// Commands that draw random numbers and therefore need a seed.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, Self::SeqSimulate | Self::Verify)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Uncertainty sets, one per hypothesis (index 0 is the null / run-length measure).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hypotheses: Vec<SetSpec>,
    /// Nominal pair for `breakdown`, and the optional evaluation pair for `roc`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominals: Option<[DensitySpec; 2]>,
    #[serde(default, skip_serializing_if = "Tolerances::is_default")]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roc: Option<RocSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequential: Option<SequentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Band fixed-point tolerance on the constants `c₀, c₁`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lfd_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lfd_max_iter: Option<usize>,
    /// Value-iteration / alternation tolerance of the sequential designer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_alternations: Option<usize>,
    /// Per-state LFD tolerance and cycle cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_lfd_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_lfd_max_cycles: Option<usize>,
}

impl Tolerances {
    fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    /// A single, exactly known density.
    Density {
        density: DensitySpec,
    },
    Band(BandSpec),
    Contamination {
        nominal: DensitySpec,
        eps: f64,
    },
    Fball {
        nominal: DensitySpec,
        divergence: DivergenceSpec,
        radius: f64,
    },
}

/// Either `a·p ≤ q ≤ b·p` around a nominal (`b = null` for no upper bound) or
/// explicit lower/upper functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandSpec {
    Scaled(ScaledBand),
    Explicit(ExplicitBand),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledBand {
    pub nominal: DensitySpec,
    pub a: f64,
    pub b: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitBand {
    pub lower: BoundSpec,
    pub upper: BoundSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundSpec {
    /// `factor · density`.
    Scaled { density: DensitySpec, factor: f64 },
    /// `a·exp(s·x) + c`, unnormalized; `a` may be fixed by the mass on `[x_min, x_max]`.
    ExpOffset { a: ScaleSpec, s: f64, c: f64 },
    /// Upper bound only: the lower bound plus a constant.
    LowerPlus { add: f64 },
    /// Upper bound only: no upper bound.
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleSpec {
    Value(f64),
    Mass { mass: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceSpec {
    Kl,
    ReverseKl,
    ChiSquared,
    SquaredHellinger,
    #[serde(untagged)]
    Alpha {
        alpha: f64,
    },
}

impl DivergenceSpec {
    pub fn generator(&self) -> FDivGenerator<f64> {
        match *self {
            Self::Kl => FDivGenerator::KullbackLeibler,
            Self::ReverseKl => FDivGenerator::ReverseKl,
            Self::ChiSquared => FDivGenerator::ChiSquared,
            Self::SquaredHellinger => FDivGenerator::SquaredHellinger,
            Self::Alpha { alpha } => FDivGenerator::Alpha(alpha),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RocSpec {
    /// Sample sizes; one ROC per entry.
    pub samples: Vec<usize>,
    /// Evaluate under the least favorable pair (default) or the nominal pair.
    #[serde(default)]
    pub evaluate: Evaluation,
    /// Fixed randomized tests whose error probabilities are reported.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<TestSpec>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    #[default]
    LeastFavorable,
    Nominal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    pub log_threshold: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// LFD table as written by `lfd`; relative paths resolve against the config file.
    pub lfd_file: String,
    #[serde(default = "default_verify_samples")]
    pub samples: usize,
}

fn default_verify_samples() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialSpec {
    /// Decision-error weights, one per hypothesis `1..=K` (minimax designs).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda: Vec<f64>,
    /// Log-LR clamp `L` and points per axis `m`.
    pub half_width: f64,
    pub points: usize,
    /// Wald's test of `hypotheses[0]` (decision 1) against `hypotheses[1]` (decision 2)
    /// instead of a minimax design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sprt: Option<SprtSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SprtSpec {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub runs: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Data-generating model per hypothesis `1..=K`; defaults to the state LFDs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub truth: Vec<TruthSpec>,
    /// Keep one row per run in `runs.csv`.
    #[serde(default)]
    pub per_run: bool,
}

fn default_horizon() -> usize {
    robust_detect::sequential::DEFAULT_HORIZON
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruthSpec {
    LeastFavorable(LeastFavorableTag),
    Density(DensitySpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeastFavorableTag {
    LeastFavorable,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Number of terminal decisions `K` of a sequential config.
    pub fn decision_count(&self) -> usize {
        match self.sequential.as_ref().and_then(|s| s.sprt) {
            Some(_) => 2,
            None => self.hypotheses.len().saturating_sub(1),
        }
    }

    pub fn build_grid(&self) -> Result<Grid<f64>, CliError> {
        Ok(Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n)?)
    }

    /// Checks everything that does not need the numerics: command-specific sections,
    /// counts, and seeds for stochastic commands.
    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::Config(format!(
                    "config is for command '{}', invoked as '{}'",
                    c.as_str(),
                    command.as_str()
                )));
            }
        }
        if command.is_stochastic() && self.seed.is_none() {
            return Err(CliError::Config(format!(
                "command '{}' needs a seed",
                command.as_str()
            )));
        }
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(what.to_string()))
            }
        };
        match command {
            Command::Lfd | Command::Roc | Command::Verify => {
                need(
                    self.hypotheses.len() == 2,
                    "binary commands need exactly two hypotheses",
                )?;
            }
            Command::Breakdown => need(self.nominals.is_some(), "breakdown needs 'nominals'")?,
            Command::SeqDesign | Command::SeqSimulate => {
                let seq = self
                    .sequential
                    .as_ref()
                    .ok_or_else(|| CliError::Config("missing 'sequential'".into()))?;
                match seq.sprt {
                    Some(_) => need(
                        self.hypotheses.len() == 2
                            && self
                                .hypotheses
                                .iter()
                                .all(|h| matches!(h, SetSpec::Density { .. })),
                        "an SPRT needs two 'density' hypotheses",
                    )?,
                    None => {
                        need(
                            self.hypotheses.len() >= 2,
                            "sequential designs need at least two sets",
                        )?;
                        need(
                            seq.lambda.len() + 1 == self.hypotheses.len(),
                            "'lambda' needs one weight per hypothesis 1..=K",
                        )?;
                    }
                }
            }
        }
        match command {
            Command::Roc => need(self.roc.is_some(), "roc needs a 'roc' section")?,
            Command::Verify => need(self.verify.is_some(), "verify needs a 'verify' section")?,
            Command::SeqSimulate => {
                let sim = self
                    .simulate
                    .as_ref()
                    .ok_or_else(|| CliError::Config("missing 'simulate'".into()))?;
                need(
                    sim.truth.is_empty() || sim.truth.len() == self.decision_count(),
                    "'truth' needs one entry per hypothesis 1..=K",
                )?;
            }
            _ => {}
        }
        Ok(())
    }
}

pub fn build_density(spec: &DensitySpec, grid: &Grid<f64>) -> Result<GridDensity<f64>, CliError> {
    Ok(spec.build(grid)?)
}

impl SetSpec {
    pub fn build(&self, grid: &Grid<f64>) -> Result<UncertaintySet<f64>, CliError> {
        Ok(match self {
            Self::Density { density } => {
                let p = build_density(density, grid)?;
                UncertaintySet::Band(DensityBand::new(p.to_function(), p.to_function())?)
            }
            Self::Band(BandSpec::Scaled(s)) => {
                let p = build_density(&s.nominal, grid)?;
                UncertaintySet::Band(band_from_scaled_nominal(
                    &p,
                    s.a,
                    s.b.unwrap_or(f64::INFINITY),
                )?)
            }
            Self::Band(BandSpec::Explicit(b)) => {
                let lower = match b.lower {
                    BoundSpec::LowerPlus { .. } | BoundSpec::Infinite => {
                        return Err(CliError::Config(
                            "lower bound must be 'scaled' or 'exp_offset'".into(),
                        ))
                    }
                    ref spec => bound_values(spec, grid, None)?,
                };
                let upper = bound_values(&b.upper, grid, Some(&lower))?;
                UncertaintySet::Band(DensityBand::new(
                    GridFunction::new(*grid, lower)?,
                    GridFunction::new(*grid, upper)?,
                )?)
            }
            Self::Contamination { nominal, eps } => UncertaintySet::Contamination(
                EpsContamination::new(build_density(nominal, grid)?, *eps)?,
            ),
            Self::Fball {
                nominal,
                divergence,
                radius,
            } => UncertaintySet::Ball(FDivBall::new(
                build_density(nominal, grid)?,
                divergence.generator(),
                *radius,
            )?),
        })
    }

    /// Nominal density, where the set has one.
    pub fn nominal(&self) -> Option<&DensitySpec> {
        match self {
            Self::Density { density } => Some(density),
            Self::Band(BandSpec::Scaled(s)) => Some(&s.nominal),
            Self::Band(BandSpec::Explicit(_)) => None,
            Self::Contamination { nominal, .. } | Self::Fball { nominal, .. } => Some(nominal),
        }
    }
}

fn bound_values(
    spec: &BoundSpec,
    grid: &Grid<f64>,
    lower: Option<&[f64]>,
) -> Result<Vec<f64>, CliError> {
    let xs = grid.points();
    Ok(match *spec {
        BoundSpec::Scaled {
            ref density,
            factor,
        } => {
            if !(factor.is_finite() && factor >= 0.0) {
                return Err(CliError::Config(format!(
                    "bound factor must be finite and ≥ 0, got {factor}"
                )));
            }
            build_density(density, grid)?
                .values()
                .iter()
                .map(|v| factor * v)
                .collect()
        }
        BoundSpec::ExpOffset { a, s, c } => {
            let a = match a {
                ScaleSpec::Value(a) => a,
                ScaleSpec::Mass { mass } => {
                    exp_offset_scale(s, c, grid.x_min(), grid.x_max(), mass)?
                }
            };
            xs.iter().map(|x| a * (s * x).exp() + c).collect()
        }
        BoundSpec::LowerPlus { add } => match lower {
            Some(l) => l.iter().map(|v| v + add).collect(),
            None => {
                return Err(CliError::Config(
                    "'lower_plus' is only valid for the upper bound".into(),
                ))
            }
        },
        BoundSpec::Infinite => vec![f64::INFINITY; xs.len()],
    })
}

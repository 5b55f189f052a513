//! TOML run configuration.

use std::path::PathBuf;

use sabap::strings::{OperatorGenerator, StringGenerator};
use sabap::{
    AlgorithmVariant, CountableFamily, IndexVector, Operator, OperatorFamily, Point, ProblemSpec,
    SteeringSequence, StringFamily,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_MAX_ITER: u64 = 1000;
pub const DEFAULT_RECORD_EVERY: u64 = 100;
pub const DEFAULT_PREFIX: u64 = 10_000;
pub const DEFAULT_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_max_iter")]
    pub max_iter: u64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    /// Seeds the sampled checks of `check`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub problem: ProblemConfig,
    pub variant: VariantConfig,
    #[serde(default)]
    pub steering: SteeringConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
}

fn default_max_iter() -> u64 {
    DEFAULT_MAX_ITER
}

fn default_record_every() -> u64 {
    DEFAULT_RECORD_EVERY
}

fn default_prefix() -> u64 {
    DEFAULT_PREFIX
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub anchor: Vec<f64>,
    /// Defaults to the anchor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// A point of `F`, checked against every operator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub operators: Vec<OperatorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub countable: Option<CountableConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorConfig {
    Halfspace {
        a: Vec<f64>,
        b: f64,
    },
    Hyperplane {
        a: Vec<f64>,
        b: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    AffineSubspace {
        rows: Vec<RowConfig>,
    },
    Relaxed {
        alpha: f64,
        inner: std::boxed::Box<OperatorConfig>,
    },
    Identity {
        dim: usize,
    },
}

/// One equation `<a, x> = b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowConfig {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountableConfig {
    pub ratio: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub strings: StringsConfig,
    pub generator: GeneratorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorConfig {
    /// `T_i` projects onto `{<a, x> ≤ b + scale / i}`.
    ShrinkingHalfspaces { a: Vec<f64>, b: f64, scale: f64 },
    /// `T_i = operators[(i − 1) mod m]`.
    Cycle { operators: Vec<OperatorConfig> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StringsConfig {
    #[default]
    Singletons,
    Window {
        len: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub strings: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VariantConfig {
    StaticSa {
        strings: Vec<Vec<usize>>,
        weights: Vec<f64>,
    },
    QuasiDynamicSa {
        schedule: Vec<FamilyConfig>,
    },
    SimultaneousSa {
        schedule: Vec<FamilyConfig>,
        outer_weights: Vec<f64>,
    },
    FullySimultaneous {
        weights: Vec<f64>,
    },
    StaticProjectionSa {
        strings: Vec<Vec<usize>>,
        weights: Vec<f64>,
    },
    HalpernWittman,
    InfiniteStaticSa,
    Combettes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SteeringConfig {
    PowerLaw {
        #[serde(default = "default_one")]
        c: f64,
        #[serde(default = "default_one")]
        p: f64,
    },
    HarmonicShifted {
        offset: u64,
    },
    UserTable {
        values: Vec<f64>,
        #[serde(default = "default_one")]
        c: f64,
        #[serde(default = "default_one")]
        p: f64,
    },
    /// Accepted by the schema so that it can be rejected with a clear message.
    Constant {
        value: f64,
    },
}

impl Default for SteeringConfig {
    fn default() -> Self {
        Self::PowerLaw { c: 1.0, p: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Lower weight bound `Δ` of `M*`.
    pub delta: f64,
    /// Upper string length bound `q̄` of `M*`.
    pub q_bar: usize,
    #[serde(default = "default_prefix")]
    pub prefix: u64,
    /// Random pairs per operator for the sampled nonexpansiveness check.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Known `P_F(u)`, used when no other oracle applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    /// Grid fallback for non-polyhedral problems of dimension ≤ 3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub resolution: f64,
}

/// Validated solver inputs.
#[derive(Debug, Clone)]
pub struct Built {
    pub problem: ProblemSpec,
    pub variant: AlgorithmVariant,
    pub steering: SteeringSequence,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Defaults made explicit; re-parses to an equal config.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        if out.problem.x0.is_none() {
            out.problem.x0 = Some(out.problem.anchor.clone());
        }
        out
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn build(&self) -> Result<Built, CliError> {
        let problem = self.problem.build()?;
        let variant = self.variant.build()?;
        let steering = self.steering.build()?;
        Ok(Built {
            problem,
            variant,
            steering,
        })
    }
}

fn field<T>(path: &str, r: sabap::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(format!("{path}: {e}")))
}

pub(crate) fn point(path: &str, coords: &[f64]) -> Result<Point, CliError> {
    field(path, Point::new(coords.to_vec()))
}

impl ProblemConfig {
    pub fn family(&self) -> Result<OperatorFamily, CliError> {
        match (&self.countable, self.operators.is_empty()) {
            (Some(_), false) => Err(CliError::Config(
                "problem: give either `operators` or `countable`, not both".into(),
            )),
            (None, true) => Err(CliError::Config(
                "problem.operators: at least one operator is required".into(),
            )),
            (None, false) => Ok(OperatorFamily::Finite(build_operators(
                "problem.operators",
                &self.operators,
            )?)),
            (Some(c), true) => Ok(OperatorFamily::Countable(c.build()?)),
        }
    }

    pub fn build(&self) -> Result<ProblemSpec, CliError> {
        let anchor = point("problem.anchor", &self.anchor)?;
        let x0 = match &self.x0 {
            Some(x0) => point("problem.x0", x0)?,
            None => anchor.clone(),
        };
        let mut spec = field("problem", ProblemSpec::new(self.family()?, anchor, x0))?;
        if let Some(w) = &self.witness {
            spec = field(
                "problem.witness",
                spec.with_witness(point("problem.witness", w)?),
            )?;
        }
        Ok(spec)
    }
}

fn build_operators(path: &str, ops: &[OperatorConfig]) -> Result<Vec<Operator>, CliError> {
    ops.iter()
        .enumerate()
        .map(|(i, op)| op.build(&format!("{path}[{i}]")))
        .collect()
}

impl OperatorConfig {
    pub fn build(&self, path: &str) -> Result<Operator, CliError> {
        let op = match self {
            Self::Halfspace { a, b } => Operator::halfspace(point(&format!("{path}.a"), a)?, *b),
            Self::Hyperplane { a, b } => Operator::hyperplane(point(&format!("{path}.a"), a)?, *b),
            Self::Box { lo, hi } => Operator::box_set(
                point(&format!("{path}.lo"), lo)?,
                point(&format!("{path}.hi"), hi)?,
            ),
            Self::Ball { center, radius } => {
                Operator::ball(point(&format!("{path}.center"), center)?, *radius)
            }
            Self::AffineSubspace { rows } => {
                let rows = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| Ok((point(&format!("{path}.rows[{i}].a"), &r.a)?, r.b)))
                    .collect::<Result<Vec<_>, CliError>>()?;
                Operator::affine_subspace(rows)
            }
            Self::Relaxed { alpha, inner } => {
                Operator::relaxed(inner.build(&format!("{path}.inner"))?, *alpha)
            }
            Self::Identity { dim } => Operator::identity(*dim),
        };
        field(path, op)
    }
}

impl CountableConfig {
    pub fn build(&self) -> Result<CountableFamily, CliError> {
        let path = "problem.countable";
        let operators = match &self.generator {
            GeneratorConfig::ShrinkingHalfspaces { a, b, scale } => field(
                &format!("{path}.generator"),
                OperatorGenerator::shrinking_halfspaces(
                    point(&format!("{path}.generator.a"), a)?,
                    *b,
                    *scale,
                ),
            )?,
            GeneratorConfig::Cycle { operators } => {
                let ops = build_operators(&format!("{path}.generator.operators"), operators)?;
                field(&format!("{path}.generator"), OperatorGenerator::cycle(ops))?
            }
        };
        let strings = match self.strings {
            StringsConfig::Singletons => StringGenerator::Singletons,
            StringsConfig::Window { len } => StringGenerator::Window(len),
        };
        field(
            path,
            CountableFamily::new(operators, strings, self.ratio, self.epsilon),
        )
    }
}

impl FamilyConfig {
    pub fn build(&self, path: &str) -> Result<StringFamily, CliError> {
        build_family(path, &self.strings, &self.weights)
    }
}

pub(crate) fn index_vectors(
    path: &str,
    strings: &[Vec<usize>],
) -> Result<Vec<IndexVector>, CliError> {
    strings
        .iter()
        .enumerate()
        .map(|(i, t)| field(&format!("{path}.strings[{i}]"), IndexVector::new(t.clone())))
        .collect()
}

fn build_family(
    path: &str,
    strings: &[Vec<usize>],
    weights: &[f64],
) -> Result<StringFamily, CliError> {
    let strings = index_vectors(path, strings)?;
    field(path, StringFamily::new(strings, weights.to_vec()))
}

fn build_schedule(schedule: &[FamilyConfig]) -> Result<Vec<StringFamily>, CliError> {
    schedule
        .iter()
        .enumerate()
        .map(|(i, f)| f.build(&format!("variant.schedule[{i}]")))
        .collect()
}

impl VariantConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::StaticSa { .. } => "static-sa",
            Self::QuasiDynamicSa { .. } => "quasi-dynamic-sa",
            Self::SimultaneousSa { .. } => "simultaneous-sa",
            Self::FullySimultaneous { .. } => "fully-simultaneous",
            Self::StaticProjectionSa { .. } => "static-projection-sa",
            Self::HalpernWittman => "halpern-wittman",
            Self::InfiniteStaticSa => "infinite-static-sa",
            Self::Combettes => "combettes",
        }
    }

    pub fn build(&self) -> Result<AlgorithmVariant, CliError> {
        Ok(match self {
            Self::StaticSa { strings, weights } => {
                AlgorithmVariant::StaticSA(build_family("variant", strings, weights)?)
            }
            Self::StaticProjectionSa { strings, weights } => {
                AlgorithmVariant::StaticProjectionSA(build_family("variant", strings, weights)?)
            }
            Self::QuasiDynamicSa { schedule } => {
                AlgorithmVariant::QuasiDynamicSA(build_schedule(schedule)?)
            }
            Self::SimultaneousSa {
                schedule,
                outer_weights,
            } => AlgorithmVariant::SimultaneousSA {
                schedule: build_schedule(schedule)?,
                outer_weights: outer_weights.clone(),
            },
            Self::FullySimultaneous { weights } => {
                AlgorithmVariant::FullySimultaneous(weights.clone())
            }
            Self::HalpernWittman => AlgorithmVariant::HalpernWittman,
            Self::InfiniteStaticSa => AlgorithmVariant::InfiniteStaticSA,
            Self::Combettes => AlgorithmVariant::CombettesSimultaneous,
        })
    }
}

impl SteeringConfig {
    pub fn build(&self) -> Result<SteeringSequence, CliError> {
        let seq = match self {
            Self::PowerLaw { c, p } => SteeringSequence::power_law(*c, *p),
            Self::HarmonicShifted { offset } => Ok(SteeringSequence::harmonic_shifted(*offset)),
            Self::UserTable { values, c, p } => SteeringSequence::user_table(values.clone(), *c, *p),
            Self::Constant { value } => {
                return Err(CliError::Config(format!(
                    "steering.family: constant λ = {value} is not a steering sequence (λ_k must tend to 0)"
                )))
            }
        };
        field("steering", seq)
    }
}

//! Halpern-type string-averaging iterations.
//!
//! Every variant performs
//!
//! ```text
//! x^{k+1} = λ_k u + (1 − λ_k) S_k(x^k)
//! ```
//!
//! and differs only in the averaging operator `S_k`:
//!
//! | variant                | `S_k`                                              |
//! |------------------------|----------------------------------------------------|
//! | `StaticSA`             | `Σ_{t∈Ω} w(t) T[t]`                                |
//! | `QuasiDynamicSA`       | the family `schedule[j(k)]`, `j(k) = k mod len + 1` |
//! | `SimultaneousSA`       | `Σ_r ŵ_r Σ_{t∈Ω_r} w_r(t) T[t]`                    |
//! | `FullySimultaneous`    | `Σ_i w_i T_i`                                      |
//! | `StaticProjectionSA`   | as `StaticSA`, projections only                    |
//! | `HalpernWittman`       | `P_m ∘ ... ∘ P_1`, with `λ_k = 1/(k+1)`, `x^0 = u` |
//! | `InfiniteStaticSA`     | truncated countable string average                  |
//! | `CombettesSimultaneous`| truncated countable average of singletons          |

use std::fmt;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::operators::Operator;
use crate::point::{self, Point};
use crate::steering::{SteeringFamily, SteeringSequence};
use crate::strings::{
    apply_string_in_place, average_into, check_weights, CountableFamily, IndexVector, StringFamily,
    StringGenerator, TruncatedAverage, Workspace,
};
use crate::tol;

#[derive(Debug, Clone)]
pub enum OperatorFamily {
    Finite(Vec<Operator>),
    Countable(CountableFamily),
}

impl OperatorFamily {
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Finite(ops) => ops.first().map(Operator::dim),
            Self::Countable(fam) => Some(fam.dim()),
        }
    }
}

/// Operators, anchor `u` and starting point `x^0`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    operators: OperatorFamily,
    anchor: Point,
    x0: Point,
    witness: Option<Point>,
}

impl ProblemSpec {
    pub fn new(operators: OperatorFamily, anchor: Point, x0: Point) -> Result<Self> {
        let dim = operators
            .dim()
            .ok_or_else(|| Error::InvalidProblem("operator family is empty".into()))?;
        if let OperatorFamily::Finite(ops) = &operators {
            for op in ops {
                if op.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: op.dim(),
                    });
                }
            }
        }
        anchor.check_dim(dim)?;
        x0.check_dim(dim)?;
        Ok(Self {
            operators,
            anchor,
            x0,
            witness: None,
        })
    }

    /// Attaches a point certified to lie in every `Fix(T_i)`. For countable
    /// families the certificate covers the operators kept by truncation.
    pub fn with_witness(mut self, witness: Point) -> Result<Self> {
        witness.check_dim(self.dim())?;
        let worst = match &self.operators {
            OperatorFamily::Finite(ops) => max_residual(ops, &witness)?,
            OperatorFamily::Countable(fam) => {
                max_residual(fam.truncated_average()?.operators(), &witness)?
            }
        };
        if worst > tol::PROPERTY_SLACK {
            return Err(Error::InvalidProblem(format!(
                "witness {witness} is not a common fixed point (residual {worst:e})"
            )));
        }
        self.witness = Some(witness);
        Ok(self)
    }

    pub fn operators(&self) -> &OperatorFamily {
        &self.operators
    }

    pub fn anchor(&self) -> &Point {
        &self.anchor
    }

    pub fn x0(&self) -> &Point {
        &self.x0
    }

    pub fn witness(&self) -> Option<&Point> {
        self.witness.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.anchor.dim()
    }

    pub fn with_x0(&self, x0: Point) -> Result<Self> {
        x0.check_dim(self.dim())?;
        Ok(Self { x0, ..self.clone() })
    }
}

fn max_residual(ops: &[Operator], x: &Point) -> Result<f64> {
    ops.iter()
        .map(|op| op.fixed_point_residual(x))
        .try_fold(0.0, |acc, r| r.map(|r| f64::max(acc, r)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmVariant {
    StaticSA(StringFamily),
    /// The schedule order is the cyclic order in which families are used.
    QuasiDynamicSA(Vec<StringFamily>),
    SimultaneousSA {
        schedule: Vec<StringFamily>,
        outer_weights: Vec<f64>,
    },
    FullySimultaneous(Vec<f64>),
    StaticProjectionSA(StringFamily),
    HalpernWittman,
    InfiniteStaticSA,
    CombettesSimultaneous,
}

impl AlgorithmVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::StaticSA(_) => "static-sa",
            Self::QuasiDynamicSA(_) => "quasi-dynamic-sa",
            Self::SimultaneousSA { .. } => "simultaneous-sa",
            Self::FullySimultaneous(_) => "fully-simultaneous",
            Self::StaticProjectionSA(_) => "static-projection-sa",
            Self::HalpernWittman => "halpern-wittman",
            Self::InfiniteStaticSA => "infinite-static-sa",
            Self::CombettesSimultaneous => "combettes",
        }
    }
}

impl fmt::Display for AlgorithmVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `λ u + (1 − λ) s`.
pub fn halpern_step(u: &Point, lambda: f64, s: &Point) -> Result<Point> {
    s.check_dim(u.dim())?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    let mut out = vec![0.0; u.dim()];
    halpern_into(u.coords(), lambda, s.coords(), &mut out);
    Ok(Point::from_raw(out))
}

fn halpern_into(u: &[f64], lambda: f64, s: &[f64], out: &mut [f64]) {
    let mu = 1.0 - lambda;
    for ((o, ui), si) in out.iter_mut().zip(u).zip(s) {
        *o = lambda * ui + mu * si;
    }
}

/// `j(k) = (k mod size) + 1`.
pub fn cyclic_index(k: u64, size: usize) -> usize {
    assert!(size >= 1, "cycle length must be positive");
    (k % size as u64) as usize + 1
}

#[derive(Debug, Clone)]
enum Engine {
    /// Families evaluated one at a time; `cyclic` selects by `j(k)`.
    Strings {
        ops: Vec<Operator>,
        schedule: Vec<StringFamily>,
        cyclic: bool,
    },
    Simultaneous {
        ops: Vec<Operator>,
        schedule: Vec<StringFamily>,
        outer_weights: Vec<f64>,
    },
    Fully {
        ops: Vec<Operator>,
        weights: Vec<f64>,
    },
    HalpernWittman {
        ops: Vec<Operator>,
        string: IndexVector,
    },
    Countable(TruncatedAverage),
    Combettes(TruncatedAverage),
}

/// A validated problem/variant/steering triple that can be stepped.
#[derive(Debug, Clone)]
pub struct Solver {
    problem: ProblemSpec,
    variant: AlgorithmVariant,
    steering: SteeringSequence,
    engine: Engine,
}

fn finite_ops<'a>(problem: &'a ProblemSpec, variant: &AlgorithmVariant) -> Result<&'a [Operator]> {
    match problem.operators() {
        OperatorFamily::Finite(ops) => Ok(ops),
        OperatorFamily::Countable(_) => Err(Error::InvalidVariant(format!(
            "{variant} needs a finite operator family"
        ))),
    }
}

fn countable<'a>(
    problem: &'a ProblemSpec,
    variant: &AlgorithmVariant,
) -> Result<&'a CountableFamily> {
    match problem.operators() {
        OperatorFamily::Countable(fam) => Ok(fam),
        OperatorFamily::Finite(_) => Err(Error::InvalidVariant(format!(
            "{variant} needs a countable operator family"
        ))),
    }
}

fn require_projections(ops: &[Operator], variant: &AlgorithmVariant) -> Result<()> {
    match ops.iter().position(|op| !op.is_projection()) {
        Some(i) => Err(Error::InvalidVariant(format!(
            "{variant} requires orthogonal projections, operator {} is not one",
            i + 1
        ))),
        None => Ok(()),
    }
}

fn bind_schedule(schedule: &[StringFamily], m: usize) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidVariant("schedule is empty".into()));
    }
    schedule.iter().try_for_each(|f| f.bind(m))
}

impl Solver {
    pub fn new(
        problem: ProblemSpec,
        variant: AlgorithmVariant,
        steering: SteeringSequence,
    ) -> Result<Self> {
        if !steering.is_verified() {
            return Err(Error::InvalidSteering(
                "sequence is not a verified steering sequence".into(),
            ));
        }
        let engine = match &variant {
            AlgorithmVariant::StaticSA(family) | AlgorithmVariant::StaticProjectionSA(family) => {
                let ops = finite_ops(&problem, &variant)?;
                if matches!(variant, AlgorithmVariant::StaticProjectionSA(_)) {
                    require_projections(ops, &variant)?;
                }
                family.bind(ops.len())?;
                Engine::Strings {
                    ops: ops.to_vec(),
                    schedule: vec![family.clone()],
                    cyclic: false,
                }
            }
            AlgorithmVariant::QuasiDynamicSA(schedule) => {
                let ops = finite_ops(&problem, &variant)?;
                bind_schedule(schedule, ops.len())?;
                Engine::Strings {
                    ops: ops.to_vec(),
                    schedule: schedule.clone(),
                    cyclic: true,
                }
            }
            AlgorithmVariant::SimultaneousSA {
                schedule,
                outer_weights,
            } => {
                let ops = finite_ops(&problem, &variant)?;
                bind_schedule(schedule, ops.len())?;
                check_weights(outer_weights)?;
                if outer_weights.len() != schedule.len() {
                    return Err(Error::InvalidVariant(format!(
                        "{} outer weights for {} families",
                        outer_weights.len(),
                        schedule.len()
                    )));
                }
                Engine::Simultaneous {
                    ops: ops.to_vec(),
                    schedule: schedule.clone(),
                    outer_weights: outer_weights.clone(),
                }
            }
            AlgorithmVariant::FullySimultaneous(weights) => {
                let ops = finite_ops(&problem, &variant)?;
                check_weights(weights)?;
                if weights.len() != ops.len() {
                    return Err(Error::InvalidVariant(format!(
                        "{} weights for {} operators",
                        weights.len(),
                        ops.len()
                    )));
                }
                Engine::Fully {
                    ops: ops.to_vec(),
                    weights: weights.clone(),
                }
            }
            AlgorithmVariant::HalpernWittman => {
                let ops = finite_ops(&problem, &variant)?;
                require_projections(ops, &variant)?;
                if problem.x0() != problem.anchor() {
                    return Err(Error::InvalidVariant(
                        "halpern-wittman starts at the anchor: x0 must equal u".into(),
                    ));
                }
                if *steering.family() != (SteeringFamily::PowerLaw { c: 1.0, p: 1.0 }) {
                    return Err(Error::InvalidVariant(
                        "halpern-wittman uses λ_k = 1/(k+1) (power-law c = 1, p = 1)".into(),
                    ));
                }
                Engine::HalpernWittman {
                    ops: ops.to_vec(),
                    string: IndexVector::full(ops.len())?,
                }
            }
            AlgorithmVariant::InfiniteStaticSA => {
                Engine::Countable(countable(&problem, &variant)?.truncated_average()?)
            }
            AlgorithmVariant::CombettesSimultaneous => {
                let fam = countable(&problem, &variant)?;
                if !matches!(fam.string_generator(), StringGenerator::Singletons) {
                    return Err(Error::InvalidVariant(
                        "combettes needs singleton strings".into(),
                    ));
                }
                Engine::Combettes(fam.truncated_average()?)
            }
        };
        Ok(Self {
            problem,
            variant,
            steering,
            engine,
        })
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn variant(&self) -> &AlgorithmVariant {
        &self.variant
    }

    pub fn steering(&self) -> &SteeringSequence {
        &self.steering
    }

    /// Tail mass `ρ_N` of the truncated countable average, if any.
    pub fn tail_mass(&self) -> Option<f64> {
        match &self.engine {
            Engine::Countable(avg) | Engine::Combettes(avg) => Some(avg.tail_mass()),
            _ => None,
        }
    }

    pub fn truncated_terms(&self) -> Option<usize> {
        match &self.engine {
            Engine::Countable(avg) | Engine::Combettes(avg) => Some(avg.truncation().len()),
            _ => None,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self.problem.operators() {
            OperatorFamily::Countable(fam) => Some(fam.epsilon()),
            OperatorFamily::Finite(_) => None,
        }
    }

    /// The coefficient used at step `k`.
    pub fn lambda(&self, k: u64) -> f64 {
        match self.engine {
            Engine::HalpernWittman { .. } => 1.0 / (k + 1) as f64,
            _ => self.steering.lambda(k),
        }
    }

    /// Evaluates the averaging operator `S_k(x)`.
    pub fn averaged(&self, x: &Point, k: u64) -> Result<Point> {
        x.check_dim(self.problem.dim())?;
        let mut bufs = Buffers::new(x.dim());
        let mut out = vec![0.0; x.dim()];
        self.averaged_into(x.coords(), k, &mut bufs, &mut out);
        Ok(Point::from_raw(out))
    }

    /// `x^{k+1}` from `x^k`.
    pub fn step(&self, x: &Point, k: u64) -> Result<Point> {
        self.step_with_lambda(x, k, self.lambda(k))
    }

    /// One step with an explicit coefficient in place of `λ_k`.
    pub fn step_with_lambda(&self, x: &Point, k: u64, lambda: f64) -> Result<Point> {
        let s = self.averaged(x, k)?;
        halpern_step(self.problem.anchor(), lambda, &s)
    }

    fn averaged_into(&self, x: &[f64], k: u64, bufs: &mut Buffers, out: &mut [f64]) {
        match &self.engine {
            Engine::Strings {
                ops,
                schedule,
                cyclic,
            } => {
                let family = if *cyclic {
                    &schedule[cyclic_index(k, schedule.len()) - 1]
                } else {
                    &schedule[0]
                };
                average_into(
                    ops,
                    family.strings(),
                    family.weights(),
                    x,
                    &mut bufs.ws,
                    out,
                );
            }
            Engine::Simultaneous {
                ops,
                schedule,
                outer_weights,
            } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for (family, &w) in schedule.iter().zip(outer_weights) {
                    average_into(
                        ops,
                        family.strings(),
                        family.weights(),
                        x,
                        &mut bufs.ws,
                        &mut bufs.inner,
                    );
                    for (o, s) in out.iter_mut().zip(&bufs.inner) {
                        *o += w * s;
                    }
                }
            }
            Engine::Fully { ops, weights } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for (op, &w) in ops.iter().zip(weights) {
                    bufs.inner.copy_from_slice(x);
                    op.apply_in_place(&mut bufs.inner);
                    for (o, s) in out.iter_mut().zip(&bufs.inner) {
                        *o += w * s;
                    }
                }
            }
            Engine::HalpernWittman { ops, string } => {
                out.copy_from_slice(x);
                apply_string_in_place(ops, string, out);
            }
            Engine::Countable(avg) => avg.apply_into(x, &mut bufs.ws, out),
            Engine::Combettes(avg) => {
                let t = avg.truncation();
                out.iter_mut().for_each(|v| *v = 0.0);
                for (op, &w) in avg.operators().iter().zip(&t.weights) {
                    bufs.inner.copy_from_slice(x);
                    op.apply_in_place(&mut bufs.inner);
                    for (o, s) in out.iter_mut().zip(&bufs.inner) {
                        *o += w * s;
                    }
                }
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += t.tail_mass * xi;
                }
            }
        }
    }

    /// Iterates from `x^0` for `opts.max_iter` steps, recording rows at
    /// every multiple of `opts.record_every` and at the final iterate.
    pub fn run(&self, opts: &RunOptions) -> Result<SolverRun, RunError> {
        let mut run = SolverRun {
            variant: self.variant.name().to_string(),
            steering: self.steering.clone(),
            max_iter: opts.max_iter,
            record_every: opts.record_every,
            epsilon: self.epsilon(),
            tail_mass: self.tail_mass(),
            truncated_terms: self.truncated_terms(),
            stopped_at: None,
            trace: Vec::new(),
        };
        if let Err(error) = opts.validate(self.problem.dim()) {
            return Err(RunError {
                error,
                partial: Box::new(run),
            });
        }

        let dim = self.problem.dim();
        let u = self.problem.anchor().coords();
        let mut x = self.problem.x0().coords().to_vec();
        let mut next = vec![0.0; dim];
        let mut s = vec![0.0; dim];
        let mut bufs = Buffers::new(dim);
        let record = |k: u64, x: &[f64], step_norm: f64| TraceRow {
            k,
            lambda: self.lambda(k),
            x: Point::from_raw(x.to_vec()),
            step_norm,
            oracle_dist: opts.oracle.as_ref().map(|p| point::distance(x, p.coords())),
        };

        run.trace.push(record(0, &x, 0.0));
        for k in 0..opts.max_iter {
            self.averaged_into(&x, k, &mut bufs, &mut s);
            halpern_into(u, self.lambda(k), &s, &mut next);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(RunError {
                    error: Error::Diverged {
                        k: (k + 1) as usize,
                    },
                    partial: Box::new(run),
                });
            }
            let step_norm = point::distance(&next, &x);
            std::mem::swap(&mut x, &mut next);
            let k1 = k + 1;
            let converged = opts.step_tolerance.is_some_and(|t| step_norm <= t);
            if k1 % opts.record_every == 0 || k1 == opts.max_iter || converged {
                run.trace.push(record(k1, &x, step_norm));
            }
            if converged {
                run.stopped_at = Some(k1);
                break;
            }
        }
        Ok(run)
    }
}

#[derive(Debug, Clone)]
struct Buffers {
    ws: Workspace,
    inner: Vec<f64>,
}

impl Buffers {
    fn new(dim: usize) -> Self {
        Self {
            ws: Workspace::new(dim),
            inner: vec![0.0; dim],
        }
    }
}

/// Iteration and recording controls.
///
/// The step-norm stop is off by default: near the anchor the `λ_k u` drift
/// can make consecutive iterates close long before `P_F(u)` is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub max_iter: u64,
    pub record_every: u64,
    /// Reference point for the `oracle_dist` column.
    pub oracle: Option<Point>,
    pub step_tolerance: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            record_every: 100,
            oracle: None,
            step_tolerance: None,
        }
    }
}

impl RunOptions {
    pub fn new(max_iter: u64, record_every: u64) -> Self {
        Self {
            max_iter,
            record_every,
            ..Self::default()
        }
    }

    /// Records every iterate.
    pub fn full_trace(max_iter: u64) -> Self {
        Self::new(max_iter, 1)
    }

    pub fn with_oracle(mut self, oracle: Point) -> Self {
        self.oracle = Some(oracle);
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidProblem("max_iter must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidProblem(
                "record_every must be at least 1".into(),
            ));
        }
        if let Some(p) = &self.oracle {
            p.check_dim(dim)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    /// `λ_k`, the coefficient applied when stepping from this row.
    pub lambda: f64,
    pub x: Point,
    /// `||x^k − x^{k−1}||`, zero at `k = 0`.
    pub step_norm: f64,
    pub oracle_dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    pub variant: String,
    pub steering: SteeringSequence,
    pub max_iter: u64,
    pub record_every: u64,
    /// Truncation tolerance for countable families.
    pub epsilon: Option<f64>,
    pub tail_mass: Option<f64>,
    pub truncated_terms: Option<usize>,
    /// Set when the optional step-norm stop fired.
    pub stopped_at: Option<u64>,
    pub trace: Vec<TraceRow>,
}

impl SolverRun {
    pub fn last(&self) -> &TraceRow {
        self.trace
            .last()
            .expect("trace always holds the initial row")
    }

    pub fn final_point(&self) -> &Point {
        &self.last().x
    }

    pub fn row(&self, k: u64) -> Option<&TraceRow> {
        self.trace.iter().find(|r| r.k == k)
    }
}

#[derive(Debug, Clone, Error)]
#[error("{error}")]
pub struct RunError {
    pub error: Error,
    /// Rows recorded before the failure.
    pub partial: Box<SolverRun>,
}

impl From<RunError> for Error {
    fn from(e: RunError) -> Self {
        e.error
    }
}

/// Builds a [`Solver`] and runs it.
pub fn run(
    problem: ProblemSpec,
    variant: AlgorithmVariant,
    steering: SteeringSequence,
    opts: &RunOptions,
) -> Result<SolverRun, RunError> {
    let steering_copy = steering.clone();
    let name = variant.name().to_string();
    let solver = Solver::new(problem, variant, steering).map_err(|error| RunError {
        error,
        partial: Box::new(SolverRun {
            variant: name,
            steering: steering_copy,
            max_iter: opts.max_iter,
            record_every: opts.record_every,
            epsilon: None,
            tail_mass: None,
            truncated_terms: None,
            stopped_at: None,
            trace: Vec::new(),
        }),
    })?;
    solver.run(opts)
}

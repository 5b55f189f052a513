//! Index vectors, string operators and weighted string families.
//!
//! An index vector `t = (t_1, ..., t_q)` selects the string operator
//! `T[t] = T_{t_q} ∘ ... ∘ T_{t_1}`; `T_{t_1}` is applied first. A
//! [`StringFamily`] pairs a set of index vectors with positive weights that
//! sum to one, and its averaging operator is `Σ_t w(t) T[t]`.
//!
//! Countable families are represented by a [`CountableFamily`], which pairs
//! an operator generator with a string generator and geometric weights. The
//! infinite average is evaluated through a [`Truncation`]: the first `N`
//! terms are kept and the remaining mass `ρ_N` is assigned to the identity,
//! so the evaluated operator is still a convex combination of nonexpansive
//! maps whose fixed-point set contains the common fixed points.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};
use crate::operators::Operator;
use crate::point::Point;
use crate::tol;

/// A nonempty list of 1-based operator indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexVector(SmallVec<[usize; 4]>);

impl IndexVector {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidIndexVector("index vector is empty".into()));
        }
        if indices.contains(&0) {
            return Err(Error::InvalidIndexVector(
                "operator indices are 1-based; found 0".into(),
            ));
        }
        Ok(Self(indices.into_iter().collect()))
    }

    pub fn singleton(index: usize) -> Result<Self> {
        Self::new(vec![index])
    }

    /// `(1, 2, ..., m)`
    pub fn full(m: usize) -> Result<Self> {
        Self::new((1..=m).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// The string length `γ(t)`.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn max_index(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    fn check_range(&self, count: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i > count) {
            Some(&index) => Err(Error::IndexOutOfRange { index, count }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for IndexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (j, i) in self.0.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

/// Checks that `weights` are finite, strictly positive and sum to one.
pub fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidWeights("no weights given".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidWeights(format!(
            "weights must be strictly positive, found {w}"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > tol::WEIGHT_SUM {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}")));
    }
    Ok(())
}

/// A finite set `Ω` of index vectors with weights `w: Ω → (0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StringFamily {
    strings: Vec<IndexVector>,
    weights: Vec<f64>,
}

impl StringFamily {
    pub fn new(strings: Vec<IndexVector>, weights: Vec<f64>) -> Result<Self> {
        if strings.len() != weights.len() {
            return Err(Error::InvalidWeights(format!(
                "{} strings but {} weights",
                strings.len(),
                weights.len()
            )));
        }
        check_weights(&weights)?;
        let mut seen = HashSet::new();
        for t in &strings {
            if !seen.insert(t) {
                return Err(Error::DuplicateString(t.indices().to_vec()));
            }
        }
        Ok(Self { strings, weights })
    }

    /// `Ω = {(1), ..., (m)}` with `w((i)) = weights[i−1]`.
    pub fn singletons(weights: Vec<f64>) -> Result<Self> {
        let strings = (1..=weights.len())
            .map(IndexVector::singleton)
            .collect::<Result<_>>()?;
        Self::new(strings, weights)
    }

    /// `Ω = {(1, ..., m)}` with weight one.
    pub fn full_string(m: usize) -> Result<Self> {
        Self::new(vec![IndexVector::full(m)?], vec![1.0])
    }

    pub fn strings(&self) -> &[IndexVector] {
        &self.strings
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&IndexVector, f64)> {
        self.strings.iter().zip(self.weights.iter().copied())
    }

    pub fn max_index(&self) -> usize {
        self.strings
            .iter()
            .map(IndexVector::max_index)
            .max()
            .unwrap_or(0)
    }

    /// Indices in `1..=m` that appear in no string; empty iff `Ω` is fit.
    pub fn validate_fit(&self, m: usize) -> Vec<usize> {
        let present: BTreeSet<usize> = self
            .strings
            .iter()
            .flat_map(|t| t.indices().iter().copied())
            .collect();
        (1..=m).filter(|i| !present.contains(i)).collect()
    }

    /// Checks the family against an operator family of size `m`: every index
    /// resolves and every operator is used.
    pub fn bind(&self, m: usize) -> Result<()> {
        for t in &self.strings {
            t.check_range(m)?;
        }
        let missing = self.validate_fit(m);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::NotFit { missing })
        }
    }
}

fn check_operators(ops: &[Operator], x: &Point) -> Result<()> {
    for op in ops {
        x.check_dim(op.dim())?;
    }
    Ok(())
}

/// `T[t](x) = T_{t_q}(... T_{t_1}(x))`.
pub fn apply_string(ops: &[Operator], t: &IndexVector, x: &Point) -> Result<Point> {
    t.check_range(ops.len())?;
    for &i in t.indices() {
        x.check_dim(ops[i - 1].dim())?;
    }
    let mut out = x.coords().to_vec();
    apply_string_in_place(ops, t, &mut out);
    Ok(Point::from_raw(out))
}

/// `Σ_{t∈Ω} w(t) T[t](x)`, summed in list order.
pub fn string_average(ops: &[Operator], family: &StringFamily, x: &Point) -> Result<Point> {
    for t in family.strings() {
        t.check_range(ops.len())?;
    }
    check_operators(ops, x)?;
    let mut ws = Workspace::new(x.dim());
    let mut out = vec![0.0; x.dim()];
    average_into(
        ops,
        family.strings(),
        family.weights(),
        x.coords(),
        &mut ws,
        &mut out,
    );
    Ok(Point::from_raw(out))
}

pub(crate) fn apply_string_in_place(ops: &[Operator], t: &IndexVector, x: &mut [f64]) {
    for &i in t.indices() {
        ops[i - 1].apply_in_place(x);
    }
}

/// Scratch buffer reused across evaluations.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    scratch: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            scratch: vec![0.0; dim],
        }
    }
}

/// Writes `Σ_r weights[r] T[strings[r]](x)` into `out`. Indices must already
/// be validated against `ops`.
pub(crate) fn average_into(
    ops: &[Operator],
    strings: &[IndexVector],
    weights: &[f64],
    x: &[f64],
    ws: &mut Workspace,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (t, &w) in strings.iter().zip(weights) {
        for (s, xi) in ws.scratch.iter_mut().zip(x) {
            *s = *xi;
        }
        apply_string_in_place(ops, t, &mut ws.scratch);
        for (o, s) in out.iter_mut().zip(&ws.scratch) {
            *o += w * s;
        }
    }
}

/// Bounds `(Δ, q̄)` defining the subset `M*` of admissible families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MStarBounds {
    delta: f64,
    q_bar: usize,
    m: usize,
}

impl MStarBounds {
    pub fn new(delta: f64, q_bar: usize, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidBounds(
                "operator count must be positive".into(),
            ));
        }
        if !(delta > 0.0 && delta < 1.0 / m as f64) {
            return Err(Error::InvalidBounds(format!(
                "Δ must lie in (0, 1/{m}), got {delta}"
            )));
        }
        if q_bar < m {
            return Err(Error::InvalidBounds(format!(
                "q̄ must be at least m = {m}, got {q_bar}"
            )));
        }
        Ok(Self { delta, q_bar, m })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn q_bar(&self) -> usize {
        self.q_bar
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MStarReason {
    TooLong,
    TooLight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MStarViolation {
    pub string: IndexVector,
    pub length: usize,
    pub weight: f64,
    pub reason: MStarReason,
}

impl fmt::Display for MStarViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.reason {
            MStarReason::TooLong => write!(
                f,
                "string {} has length {} above q̄",
                self.string, self.length
            ),
            MStarReason::TooLight => write!(
                f,
                "string {} has weight {} below Δ",
                self.string, self.weight
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MStarReport {
    pub violations: Vec<MStarViolation>,
}

impl MStarReport {
    pub fn is_member(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Membership of `(Ω, w)` in `M*`: `γ(t) ≤ q̄` and `w(t) ≥ Δ` for all `t`.
pub fn check_m_star(family: &StringFamily, bounds: &MStarBounds) -> MStarReport {
    let mut violations = Vec::new();
    for (t, w) in family.iter() {
        if t.len() > bounds.q_bar {
            violations.push(MStarViolation {
                string: t.clone(),
                length: t.len(),
                weight: w,
                reason: MStarReason::TooLong,
            });
        }
        if w < bounds.delta {
            violations.push(MStarViolation {
                string: t.clone(),
                length: t.len(),
                weight: w,
                reason: MStarReason::TooLight,
            });
        }
    }
    MStarReport { violations }
}

/// Generates the operator `T_i` for every `i ≥ 1`.
#[derive(Clone)]
pub struct OperatorGenerator {
    dim: usize,
    description: String,
    generate: Arc<dyn Fn(usize) -> Operator + Send + Sync>,
}

impl fmt::Debug for OperatorGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorGenerator")
            .field("dim", &self.dim)
            .field("description", &self.description)
            .finish()
    }
}

impl OperatorGenerator {
    /// `generate(i)` must return a firmly nonexpansive operator of dimension
    /// `dim` for every `i ≥ 1`.
    pub fn new(
        dim: usize,
        description: impl Into<String>,
        generate: impl Fn(usize) -> Operator + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            description: description.into(),
            generate: Arc::new(generate),
        }
    }

    /// `H_i = {x : <a, x> ≤ b + scale / i}`; the intersection is `{<a, x> ≤ b}`.
    pub fn shrinking_halfspaces(a: Point, b: f64, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidOperator(format!(
                "halfspace offset scale must be finite and nonnegative, got {scale}"
            )));
        }
        // Validates the normal once.
        Operator::halfspace(a.clone(), b)?;
        let dim = a.dim();
        let description = format!("shrinking halfspaces <a,x> <= {b} + {scale}/i");
        Ok(Self::new(dim, description, move |i| {
            Operator::halfspace(a.clone(), b + scale / i as f64).expect("validated normal")
        }))
    }

    /// `T_i = ops[(i − 1) mod m]`.
    pub fn cycle(ops: Vec<Operator>) -> Result<Self> {
        let Some(first) = ops.first() else {
            return Err(Error::InvalidProblem(
                "cyclic generator needs operators".into(),
            ));
        };
        let dim = first.dim();
        for op in &ops {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: op.dim(),
                });
            }
        }
        let description = format!("cycle over {} operators", ops.len());
        Ok(Self::new(dim, description, move |i| {
            ops[(i - 1) % ops.len()].clone()
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn operator(&self, i: usize) -> Operator {
        assert!(i >= 1, "operator indices are 1-based");
        (self.generate)(i)
    }
}

/// Generates the `r`-th index vector of a countable `Ω`, `r ≥ 1`.
#[derive(Clone)]
pub enum StringGenerator {
    /// `t_r = (r)`
    Singletons,
    /// `t_r = (r, r + 1, ..., r + len − 1)`
    Window(usize),
    /// Fitness over all indices is the caller's responsibility.
    Custom(Arc<dyn Fn(usize) -> IndexVector + Send + Sync>),
}

impl fmt::Debug for StringGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Singletons => write!(f, "Singletons"),
            Self::Window(len) => write!(f, "Window({len})"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fitness {
    /// Every index `i` appears in string `t_i`.
    Certified,
    AssertedByUser,
}

impl StringGenerator {
    pub fn string(&self, r: usize) -> IndexVector {
        match self {
            Self::Singletons => IndexVector(smallvec![r]),
            Self::Window(len) => IndexVector((r..r + len).collect()),
            Self::Custom(f) => f(r),
        }
    }

    pub fn fitness(&self) -> Fitness {
        match self {
            Self::Singletons | Self::Window(_) => Fitness::Certified,
            Self::Custom(_) => Fitness::AssertedByUser,
        }
    }
}

/// A countable family of operators averaged over a countable set of strings
/// with geometric weights `w_r = (1 − q) q^{r−1}`, `q ∈ (0, 1)`.
///
/// The weights lie in `(0, 1)`, sum to one, and have the certified tail
/// `Σ_{r>N} w_r = q^N`.
#[derive(Debug, Clone)]
pub struct CountableFamily {
    operators: OperatorGenerator,
    strings: StringGenerator,
    ratio: f64,
    epsilon: f64,
}

impl CountableFamily {
    pub fn new(
        operators: OperatorGenerator,
        strings: StringGenerator,
        ratio: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidWeights(format!(
                "geometric ratio must lie in (0, 1), got {ratio}"
            )));
        }
        if let StringGenerator::Window(0) = strings {
            return Err(Error::InvalidIndexVector(
                "window length must be positive".into(),
            ));
        }
        check_epsilon(epsilon)?;
        Ok(Self {
            operators,
            strings,
            ratio,
            epsilon,
        })
    }

    pub fn geometric_singletons(
        operators: OperatorGenerator,
        ratio: f64,
        epsilon: f64,
    ) -> Result<Self> {
        Self::new(operators, StringGenerator::Singletons, ratio, epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            epsilon,
            ..self.clone()
        })
    }

    pub fn operators(&self) -> &OperatorGenerator {
        &self.operators
    }

    pub fn string_generator(&self) -> &StringGenerator {
        &self.strings
    }

    pub fn dim(&self) -> usize {
        self.operators.dim()
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weight(&self, r: usize) -> f64 {
        assert!(r >= 1, "string ranks are 1-based");
        (1.0 - self.ratio) * self.ratio.powi(r as i32 - 1)
    }

    pub fn string(&self, r: usize) -> IndexVector {
        self.strings.string(r)
    }

    /// Smallest `N` with `Σ_{r>N} w_r = q^N ≤ epsilon`.
    pub fn tail_bound(&self, epsilon: f64) -> usize {
        let mut n = 0;
        let mut tail = 1.0;
        while tail > epsilon {
            tail *= self.ratio;
            n += 1;
        }
        n
    }

    /// Keeps the first `N ≥ 1` strings, with `N` the smallest count whose
    /// floating-point tail mass `ρ_N = 1 − Σ_{r≤N} w_r` is at most epsilon.
    pub fn truncate(&self) -> Result<Truncation> {
        let start = self.tail_bound(self.epsilon).max(1);
        let limit = 2 * start + 64;
        let mut strings = Vec::with_capacity(start);
        let mut weights = Vec::with_capacity(start);
        let mut w = 1.0 - self.ratio;
        let mut sum = 0.0;
        for r in 1..=limit {
            strings.push(self.strings.string(r));
            weights.push(w);
            sum += w;
            w *= self.ratio;
            let tail_mass = (1.0 - sum).max(0.0);
            if r >= start && tail_mass <= self.epsilon {
                return Ok(Truncation {
                    strings,
                    weights,
                    tail_mass,
                });
            }
        }
        Err(Error::InvalidEpsilon(self.epsilon))
    }

    /// Truncates and materialises the operators referenced by the kept strings.
    pub fn truncated_average(&self) -> Result<TruncatedAverage> {
        let truncation = self.truncate()?;
        let max_index = truncation
            .strings
            .iter()
            .map(IndexVector::max_index)
            .max()
            .unwrap_or(0);
        let operators = (1..=max_index)
            .map(|i| self.operators.operator(i))
            .collect();
        Ok(TruncatedAverage {
            operators,
            truncation,
            dim: self.dim(),
        })
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(epsilon))
    }
}

/// The retained prefix of a countable family and its tail mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub strings: Vec<IndexVector>,
    pub weights: Vec<f64>,
    pub tail_mass: f64,
}

impl Truncation {
    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
}

/// `Σ_{r≤N} w_r T[t_r] + ρ_N I`.
#[derive(Debug, Clone)]
pub struct TruncatedAverage {
    operators: Vec<Operator>,
    truncation: Truncation,
    dim: usize,
}

impl TruncatedAverage {
    pub fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    pub fn tail_mass(&self) -> f64 {
        self.truncation.tail_mass
    }

    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        x.check_dim(self.dim)?;
        let mut ws = Workspace::new(self.dim);
        let mut out = vec![0.0; self.dim];
        self.apply_into(x.coords(), &mut ws, &mut out);
        Ok(Point::from_raw(out))
    }

    pub(crate) fn apply_into(&self, x: &[f64], ws: &mut Workspace, out: &mut [f64]) {
        average_into(
            &self.operators,
            &self.truncation.strings,
            &self.truncation.weights,
            x,
            ws,
            out,
        );
        let rho = self.truncation.tail_mass;
        for (o, xi) in out.iter_mut().zip(x) {
            *o += rho * xi;
        }
    }
}

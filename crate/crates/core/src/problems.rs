//! Shipped test problems with known solutions.
//!
//! | name | space | `F`                                        | `u`          | `P_F(u)`        |
//! |------|-------|--------------------------------------------|--------------|-----------------|
//! | P1   | R²    | nonpositive orthant                        | (2, 2)       | (0, 0)          |
//! | P2   | R²    | triangle `x ≥ 0, x₁ + x₂ ≤ 1`              | (3, −1)      | (1, 0)          |
//! | P3   | R³    | line `x₁ = x₂, x₃ = ½` within `[0, 1]³`    | (3, 1, 3)    | (1, 1, ½)       |
//! | P4   | R²    | `⋂ {x₁ ≤ 1 + 1/i}` = `{x₁ ≤ 1}`            | (3, 0)       | (1, 0)          |
//!
//! P4 uses singleton strings with geometric weights `(1 − q) q^{i−1}`,
//! `q = 0.98`. The slow decay keeps enough weight on the nearly-binding
//! halfspaces for the iteration to approach `x₁ = 1` at desk-scale budgets.

use crate::error::Result;
use crate::operators::Operator;
use crate::oracle::PolyhedralSpec;
use crate::point;
use crate::point::Point;
use crate::solvers::{OperatorFamily, ProblemSpec};
use crate::strings::{CountableFamily, OperatorGenerator};

pub const P4_RATIO: f64 = 0.98;
pub const P4_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TestProblem {
    pub name: &'static str,
    pub problem: ProblemSpec,
    /// Polyhedral description of `F` for the active-set oracle.
    pub polyhedral: Option<PolyhedralSpec>,
    /// Closed-form `P_F(u)`.
    pub solution: Point,
}

impl TestProblem {
    pub fn operators(&self) -> &[Operator] {
        match self.problem.operators() {
            OperatorFamily::Finite(ops) => ops,
            OperatorFamily::Countable(_) => &[],
        }
    }

    pub fn anchor(&self) -> &Point {
        self.problem.anchor()
    }
}

fn finite(
    name: &'static str,
    ops: Vec<Operator>,
    anchor: Point,
    witness: Point,
    solution: Point,
) -> Result<TestProblem> {
    let polyhedral = PolyhedralSpec::from_operators(&ops).transpose()?;
    let problem = ProblemSpec::new(OperatorFamily::Finite(ops), anchor.clone(), anchor)?
        .with_witness(witness)?;
    Ok(TestProblem {
        name,
        problem,
        polyhedral,
        solution,
    })
}

/// Two-halfspace corner.
pub fn p1() -> TestProblem {
    finite(
        "P1",
        vec![
            Operator::halfspace(point![1, 0], 0.0).unwrap(),
            Operator::halfspace(point![0, 1], 0.0).unwrap(),
        ],
        point![2, 2],
        point![-1, -1],
        point![0, 0],
    )
    .expect("P1 is well formed")
}

/// Three-halfspace triangle; the solution is a vertex.
pub fn p2() -> TestProblem {
    finite(
        "P2",
        vec![
            Operator::halfspace(point![-1, 0], 0.0).unwrap(),
            Operator::halfspace(point![0, -1], 0.0).unwrap(),
            Operator::halfspace(point![1, 1], 1.0).unwrap(),
        ],
        point![3, -1],
        point![0.25, 0.25],
        point![1, 0],
    )
    .expect("P2 is well formed")
}

/// Affine line intersected with the unit cube.
pub fn p3() -> TestProblem {
    finite(
        "P3",
        vec![
            Operator::affine_subspace(vec![(point![1, -1, 0], 0.0), (point![0, 0, 1], 0.5)])
                .unwrap(),
            Operator::box_set(point![0, 0, 0], point![1, 1, 1]).unwrap(),
        ],
        point![3, 1, 3],
        point![0.5, 0.5, 0.5],
        point![1, 1, 0.5],
    )
    .expect("P3 is well formed")
}

/// Countable family of shrinking halfspaces.
pub fn p4() -> TestProblem {
    p4_with(P4_RATIO, P4_EPSILON).expect("P4 is well formed")
}

pub fn p4_with(ratio: f64, epsilon: f64) -> Result<TestProblem> {
    let gen = OperatorGenerator::shrinking_halfspaces(point![1, 0], 1.0, 1.0)?;
    let fam = CountableFamily::geometric_singletons(gen, ratio, epsilon)?;
    let u = point![3, 0];
    let problem = ProblemSpec::new(OperatorFamily::Countable(fam), u.clone(), u)?
        .with_witness(point![0, 0])?;
    Ok(TestProblem {
        name: "P4",
        problem,
        polyhedral: None,
        solution: point![1, 0],
    })
}

pub fn all() -> Vec<TestProblem> {
    vec![p1(), p2(), p3(), p4()]
}

pub fn by_name(name: &str) -> Option<TestProblem> {
    match name.to_ascii_uppercase().as_str() {
        "P1" => Some(p1()),
        "P2" => Some(p2()),
        "P3" => Some(p3()),
        "P4" => Some(p4()),
        _ => None,
    }
}

//! Reference solutions for `P_F(u)` when `F` is a small polyhedron.
//!
//! [`PolyhedralSpec::kkt_project`] enumerates every subset of inequality
//! constraints as a candidate active set, solves the resulting
//! equality-constrained least-distance problem in closed form, and keeps the
//! candidates that satisfy the KKT conditions. [`grid_project`] is a
//! brute-force cross-check for dimensions up to three.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operators::{row_rank, Operator, OperatorKind};
use crate::point::{self, Point};
use crate::tol;

pub const MAX_ENUMERATION_DIM: usize = 6;
pub const MAX_ENUMERATION_CONSTRAINTS: usize = 12;
pub const MAX_GRID_DIM: usize = 3;

/// `{x : <a, x> ≤ b for each inequality, <a, x> = b for each equality}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralSpec {
    dim: usize,
    inequalities: Vec<(Point, f64)>,
    equalities: Vec<(Point, f64)>,
}

impl PolyhedralSpec {
    pub fn new(
        dim: usize,
        inequalities: Vec<(Point, f64)>,
        equalities: Vec<(Point, f64)>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Oracle("dimension must be positive".into()));
        }
        for (a, b) in inequalities.iter().chain(&equalities) {
            a.check_dim(dim)?;
            if a.coords().iter().all(|&v| v == 0.0) || !b.is_finite() {
                return Err(Error::Oracle(format!(
                    "constraint <{a}, x> ~ {b} is degenerate"
                )));
            }
        }
        Ok(Self {
            dim,
            inequalities,
            equalities,
        })
    }

    /// Intersection of the operators' fixed-point sets, or `None` when one of
    /// them is not polyhedral (balls).
    pub fn from_operators(ops: &[Operator]) -> Option<Result<Self>> {
        let dim = ops.first()?.dim();
        let mut ineq = Vec::new();
        let mut eq = Vec::new();
        for op in ops {
            if !collect_rows(op, &mut ineq, &mut eq) {
                return None;
            }
        }
        Some(Self::new(dim, ineq, eq))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inequalities(&self) -> &[(Point, f64)] {
        &self.inequalities
    }

    pub fn equalities(&self) -> &[(Point, f64)] {
        &self.equalities
    }

    /// Largest constraint violation at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let ineq = self
            .inequalities
            .iter()
            .map(|(a, b)| (point::dot(a.coords(), x) - b).max(0.0));
        let eq = self
            .equalities
            .iter()
            .map(|(a, b)| (point::dot(a.coords(), x) - b).abs());
        ineq.chain(eq).fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, x: &Point) -> bool {
        x.dim() == self.dim && self.max_violation(x.coords()) <= tol::FEASIBILITY
    }

    /// The projection of `u` onto the polyhedron by exhaustive active-set
    /// enumeration. Returns `u` itself when `u` is feasible.
    pub fn kkt_project(&self, u: &Point) -> Result<Point> {
        u.check_dim(self.dim)?;
        if self.dim > MAX_ENUMERATION_DIM
            || self.inequalities.len() + self.equalities.len() > MAX_ENUMERATION_CONSTRAINTS
        {
            return Err(Error::Oracle(format!(
                "enumeration limited to dim <= {MAX_ENUMERATION_DIM} and <= {MAX_ENUMERATION_CONSTRAINTS} constraints"
            )));
        }
        if self.is_feasible(u) {
            return Ok(u.clone());
        }

        let p = self.inequalities.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << p) {
            let active: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
            let Some((x, multipliers)) = self.solve_active(u, &active) else {
                continue;
            };
            // Inequality multipliers follow the equality ones.
            let dual_ok = multipliers[self.equalities.len()..]
                .iter()
                .all(|&y| y >= tol::MULTIPLIER);
            if !dual_ok || self.max_violation(&x) > tol::FEASIBILITY {
                continue;
            }
            let d = point::distance(&x, u.coords());
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
        best.map(|(_, x)| Point::from_raw(x)).ok_or_else(|| {
            Error::Oracle("no KKT point found; constraints may be infeasible".into())
        })
    }

    /// Minimises `||x − u||` subject to the equalities and the listed
    /// inequalities held with equality. `None` for rank-deficient row sets.
    fn solve_active(&self, u: &Point, active: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
        let rows: Vec<&(Point, f64)> = self
            .equalities
            .iter()
            .chain(active.iter().map(|&j| &self.inequalities[j]))
            .collect();
        if rows.is_empty() {
            return Some((u.coords().to_vec(), Vec::new()));
        }
        if rows.len() > self.dim {
            return None;
        }
        let normals: Vec<&Point> = rows.iter().map(|(a, _)| a).collect();
        if row_rank(&normals, self.dim) < rows.len() {
            return None;
        }
        let q = rows.len();
        let a = DMatrix::from_fn(q, self.dim, |i, j| rows[i].0[j]);
        let gram = &a * a.transpose();
        let rhs = DVector::from_fn(q, |i, _| rows[i].0.dot(u) - rows[i].1);
        let y = gram.lu().solve(&rhs)?;
        let shift = a.transpose() * &y;
        let x: Vec<f64> = u
            .coords()
            .iter()
            .zip(shift.iter())
            .map(|(ui, s)| ui - s)
            .collect();
        Some((x, y.iter().copied().collect()))
    }
}

fn collect_rows(op: &Operator, ineq: &mut Vec<(Point, f64)>, eq: &mut Vec<(Point, f64)>) -> bool {
    match op.kind() {
        OperatorKind::Halfspace { a, b } => ineq.push((a.clone(), *b)),
        OperatorKind::Hyperplane { a, b } => eq.push((a.clone(), *b)),
        OperatorKind::Box { lo, hi } => {
            let n = lo.dim();
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                ineq.push((Point::from_raw(e.clone()), hi[i]));
                e[i] = -1.0;
                ineq.push((Point::from_raw(e), -lo[i]));
            }
        }
        OperatorKind::AffineSubspace(sub) => eq.extend(sub.rows().iter().cloned()),
        // Fix((1 − α) I + α P) = Fix(P).
        OperatorKind::RelaxedProjection { inner, .. } => return collect_rows(inner, ineq, eq),
        OperatorKind::Identity => {}
        OperatorKind::Ball { .. } => return false,
    }
    true
}

/// Axis-aligned search box for [`grid_project`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridBox {
    pub lo: Point,
    pub hi: Point,
}

/// Nearest feasible grid point to `u` on the lattice `lo + resolution · Z^n`
/// inside the box.
pub fn grid_project_with(
    u: &Point,
    resolution: f64,
    bounds: &GridBox,
    feasible: impl Fn(&[f64]) -> bool,
) -> Result<Point> {
    let dim = u.dim();
    bounds.lo.check_dim(dim)?;
    bounds.hi.check_dim(dim)?;
    if dim > MAX_GRID_DIM {
        return Err(Error::Oracle(format!(
            "grid search limited to dim <= {MAX_GRID_DIM}"
        )));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::Oracle(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let counts: Vec<usize> = (0..dim)
        .map(|i| {
            let span = bounds.hi[i] - bounds.lo[i];
            if span < 0.0 {
                0
            } else {
                (span / resolution + 1e-9).floor() as usize + 1
            }
        })
        .collect();
    if counts.contains(&0) {
        return Err(Error::Oracle("grid box is empty".into()));
    }

    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut best: Option<(f64, Vec<f64>)> = None;
    'outer: loop {
        for i in 0..dim {
            x[i] = bounds.lo[i] + idx[i] as f64 * resolution;
        }
        if feasible(&x) {
            let d = point::distance(&x, u.coords());
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x.clone()));
            }
        }
        for i in 0..dim {
            idx[i] += 1;
            if idx[i] < counts[i] {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    best.map(|(_, x)| Point::from_raw(x))
        .ok_or_else(|| Error::Oracle("no feasible grid point in the search box".into()))
}

pub fn grid_project(
    spec: &PolyhedralSpec,
    u: &Point,
    resolution: f64,
    bounds: &GridBox,
) -> Result<Point> {
    u.check_dim(spec.dim())?;
    grid_project_with(u, resolution, bounds, |x| {
        spec.max_violation(x) <= tol::FEASIBILITY
    })
}

/// Grid search over the intersection of the operators' target sets; works
/// for balls as well as polyhedral kinds.
pub fn grid_project_operators(
    ops: &[Operator],
    u: &Point,
    resolution: f64,
    bounds: &GridBox,
) -> Result<Point> {
    for op in ops {
        u.check_dim(op.dim())?;
    }
    grid_project_with(u, resolution, bounds, |x| {
        let p = Point::from_raw(x.to_vec());
        ops.iter()
            .all(|op| op.set_residual(&p).is_ok_and(|r| r <= tol::FEASIBILITY))
    })
}

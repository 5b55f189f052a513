//! Firmly nonexpansive operators on `R^n`.
//!
//! Every built-in kind is either the metric projection onto a closed convex
//! set or a relaxation `(1 − α) I + α P` of a firmly nonexpansive `P` with
//! `α ∈ (0, 1]`, so all of them are firmly nonexpansive. The residual
//! functions below evaluate the defining inequalities of the operator classes
//! numerically so the class memberships can be spot-checked on samples.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::point::{self, Point};
use crate::tol;

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    kind: OperatorKind,
    dim: usize,
    /// `1 / ||a||²` for halfspaces and hyperplanes.
    inv_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    /// `{x : <a, x> <= b}`
    Halfspace {
        a: Point,
        b: f64,
    },
    /// `{x : <a, x> = b}`
    Hyperplane {
        a: Point,
        b: f64,
    },
    /// `{x : lo <= x <= hi}` componentwise.
    Box {
        lo: Point,
        hi: Point,
    },
    Ball {
        center: Point,
        radius: f64,
    },
    /// `{x : <a_j, x> = b_j for every row j}`
    AffineSubspace(AffineSubspace),
    RelaxedProjection {
        inner: Arc<Operator>,
        alpha: f64,
    },
    Identity,
}

/// Solution set of a full-row-rank linear system, with its Gram inverse
/// cached for the normal-equations projection.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSubspace {
    rows: Vec<(Point, f64)>,
    gram_inv: DMatrix<f64>,
}

impl AffineSubspace {
    pub fn rows(&self) -> &[(Point, f64)] {
        &self.rows
    }

    fn project_in_place(&self, x: &mut [f64]) {
        let residual: Vec<f64> = self
            .rows
            .iter()
            .map(|(a, b)| point::dot(a.coords(), x) - b)
            .collect();
        for (j, (a, _)) in self.rows.iter().enumerate() {
            let y: f64 = (0..self.rows.len())
                .map(|l| self.gram_inv[(j, l)] * residual[l])
                .sum();
            for (xi, ai) in x.iter_mut().zip(a.coords()) {
                *xi -= y * ai;
            }
        }
    }
}

/// Number of linearly independent rows among `rows`, judged relative to the
/// largest singular value.
pub(crate) fn row_rank(rows: &[&Point], dim: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol::RANK * max).count()
}

/// Returns `1 / ||a||²`, rejecting normals too small to invert.
fn nonzero_normal(a: &Point) -> Result<f64> {
    let inv = 1.0 / a.dot(a);
    if inv.is_finite() {
        Ok(inv)
    } else {
        Err(Error::InvalidOperator(
            "normal vector must be nonzero".into(),
        ))
    }
}

impl Operator {
    pub fn halfspace(a: Point, b: f64) -> Result<Self> {
        let inv_norm_sq = nonzero_normal(&a)?;
        finite_scalar("b", b)?;
        let dim = a.dim();
        Ok(Self {
            kind: OperatorKind::Halfspace { a, b },
            dim,
            inv_norm_sq,
        })
    }

    pub fn hyperplane(a: Point, b: f64) -> Result<Self> {
        let inv_norm_sq = nonzero_normal(&a)?;
        finite_scalar("b", b)?;
        let dim = a.dim();
        Ok(Self {
            kind: OperatorKind::Hyperplane { a, b },
            dim,
            inv_norm_sq,
        })
    }

    pub fn box_set(lo: Point, hi: Point) -> Result<Self> {
        hi.check_dim(lo.dim())?;
        if let Some(i) = (0..lo.dim()).find(|&i| lo[i] > hi[i]) {
            return Err(Error::InvalidOperator(format!(
                "box bounds cross at coordinate {i}: lo = {} > hi = {}",
                lo[i], hi[i]
            )));
        }
        let dim = lo.dim();
        Ok(Self {
            kind: OperatorKind::Box { lo, hi },
            dim,
            inv_norm_sq: 0.0,
        })
    }

    /// A radius of zero gives the constant map onto `center`.
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidOperator(format!(
                "ball radius must be finite and nonnegative, got {radius}"
            )));
        }
        let dim = center.dim();
        Ok(Self {
            kind: OperatorKind::Ball { center, radius },
            dim,
            inv_norm_sq: 0.0,
        })
    }

    pub fn affine_subspace(rows: Vec<(Point, f64)>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidOperator(
                "affine subspace needs at least one row".into(),
            ));
        };
        let dim = first.0.dim();
        for (a, b) in &rows {
            a.check_dim(dim)?;
            finite_scalar("b", *b)?;
        }
        let normals: Vec<&Point> = rows.iter().map(|(a, _)| a).collect();
        if row_rank(&normals, dim) < rows.len() {
            return Err(Error::InvalidOperator(
                "affine subspace rows are linearly dependent".into(),
            ));
        }
        let p = rows.len();
        let gram = DMatrix::from_fn(p, p, |i, j| rows[i].0.dot(&rows[j].0));
        let gram_inv = gram.try_inverse().ok_or_else(|| {
            Error::InvalidOperator("affine subspace Gram matrix is singular".into())
        })?;
        Ok(Self {
            kind: OperatorKind::AffineSubspace(AffineSubspace { rows, gram_inv }),
            dim,
            inv_norm_sq: 0.0,
        })
    }

    /// `(1 − alpha) I + alpha · inner`, `alpha ∈ (0, 1]`.
    pub fn relaxed(inner: Operator, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidOperator(format!(
                "relaxation parameter must lie in (0, 1], got {alpha}"
            )));
        }
        let dim = inner.dim;
        Ok(Self {
            kind: OperatorKind::RelaxedProjection {
                inner: Arc::new(inner),
                alpha,
            },
            dim,
            inv_norm_sq: 0.0,
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidOperator("dimension must be positive".into()));
        }
        Ok(Self {
            kind: OperatorKind::Identity,
            dim,
            inv_norm_sq: 0.0,
        })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True for metric projections (the identity projects onto `R^n`).
    /// A relaxation counts only when `alpha == 1` and its inner operator is
    /// itself a projection.
    pub fn is_projection(&self) -> bool {
        match &self.kind {
            OperatorKind::RelaxedProjection { inner, alpha } => {
                *alpha == 1.0 && inner.is_projection()
            }
            _ => true,
        }
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        x.check_dim(self.dim)?;
        let mut out = x.coords().to_vec();
        self.apply_in_place(&mut out);
        Ok(Point::from_raw(out))
    }

    /// Overwrites `x` with `T(x)`. The caller guarantees `x.len() == dim`.
    pub(crate) fn apply_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            OperatorKind::Halfspace { a, b } => {
                let excess = point::dot(a.coords(), x) - b;
                if excess > 0.0 {
                    let t = excess * self.inv_norm_sq;
                    for (xi, ai) in x.iter_mut().zip(a.coords()) {
                        *xi -= t * ai;
                    }
                }
            }
            OperatorKind::Hyperplane { a, b } => {
                let t = (point::dot(a.coords(), x) - b) * self.inv_norm_sq;
                for (xi, ai) in x.iter_mut().zip(a.coords()) {
                    *xi -= t * ai;
                }
            }
            OperatorKind::Box { lo, hi } => {
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi = xi.clamp(lo[i], hi[i]);
                }
            }
            OperatorKind::Ball { center, radius } => {
                let d = point::distance(x, center.coords());
                if d > *radius {
                    let s = radius / d;
                    for (xi, ci) in x.iter_mut().zip(center.coords()) {
                        *xi = ci + s * (*xi - ci);
                    }
                }
            }
            OperatorKind::AffineSubspace(sub) => sub.project_in_place(x),
            OperatorKind::RelaxedProjection { inner, alpha } => {
                if *alpha == 1.0 {
                    inner.apply_in_place(x);
                } else {
                    let mut p = x.to_vec();
                    inner.apply_in_place(&mut p);
                    for (xi, pi) in x.iter_mut().zip(&p) {
                        *xi = (1.0 - alpha) * *xi + alpha * pi;
                    }
                }
            }
            OperatorKind::Identity => {}
        }
    }

    /// Distance-like violation of membership in `Fix(T)`, computed from the
    /// set description rather than by applying the operator.
    pub fn set_residual(&self, x: &Point) -> Result<f64> {
        x.check_dim(self.dim)?;
        Ok(match &self.kind {
            OperatorKind::Halfspace { a, b } => ((a.dot(x) - b) / a.norm()).max(0.0),
            OperatorKind::Hyperplane { a, b } => ((a.dot(x) - b) / a.norm()).abs(),
            OperatorKind::Box { lo, hi } => (0..self.dim)
                .map(|i| (lo[i] - x[i]).max(x[i] - hi[i]).max(0.0))
                .fold(0.0, f64::max),
            OperatorKind::Ball { center, radius } => (x.distance(center) - radius).max(0.0),
            OperatorKind::AffineSubspace(sub) => sub
                .rows
                .iter()
                .map(|(a, b)| ((a.dot(x) - b) / a.norm()).abs())
                .fold(0.0, f64::max),
            OperatorKind::RelaxedProjection { inner, .. } => inner.set_residual(x)?,
            OperatorKind::Identity => 0.0,
        })
    }

    /// `||T(x) − x||`.
    pub fn fixed_point_residual(&self, x: &Point) -> Result<f64> {
        Ok(self.apply(x)?.distance(x))
    }

    /// `<x − y, T(x) − T(y)> − ||T(x) − T(y)||²`, nonnegative for FNE `T`.
    pub fn fne_residual(&self, x: &Point, y: &Point) -> Result<f64> {
        x.check_dim(self.dim)?;
        y.check_dim(self.dim)?;
        let dt = self.apply(x)?.sub(&self.apply(y)?);
        Ok(x.sub(y).dot(&dt) - dt.dot(&dt))
    }

    /// `||x − y|| − ||T(x) − y||` for a fixed point `y`, nonnegative for QNE `T`.
    pub fn qne_residual(&self, x: &Point, y_fixed: &Point) -> Result<f64> {
        x.check_dim(self.dim)?;
        let residual = self.fixed_point_residual(y_fixed)?;
        if residual > tol::MEMBERSHIP {
            return Err(Error::NotFixed { residual });
        }
        Ok(x.distance(y_fixed) - self.apply(x)?.distance(y_fixed))
    }
}

fn finite_scalar(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidOperator(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

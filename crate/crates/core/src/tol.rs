//! Numeric tolerances shared across the crate.
//!
//! Every comparison slack used by constructors, predicates and the oracle is
//! defined here so that they can be tuned together.

/// Slack for operator-class predicates (FNE, NE, QNE inequalities).
pub const PROPERTY_SLACK: f64 = 1e-10;

/// Residual below which a point counts as a member of a projection target.
pub const MEMBERSHIP: f64 = 1e-12;

/// Allowed deviation of a weight vector's sum from one.
pub const WEIGHT_SUM: f64 = 1e-12;

/// Relative singular-value threshold for rank decisions.
pub const RANK: f64 = 1e-10;

/// Feasibility slack used by the polyhedral oracle.
pub const FEASIBILITY: f64 = 1e-10;

/// Lower bound accepted for KKT multipliers in the active-set oracle.
pub const MULTIPLIER: f64 = -1e-10;

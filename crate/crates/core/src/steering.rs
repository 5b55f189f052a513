//! Steering sequences `(λ_k)`: coefficients in `[0, 1]` with `λ_k → 0`,
//! `Σ λ_k = ∞` and `Σ |λ_{k+1} − λ_k| < ∞`.
//!
//! The two asymptotic conditions cannot be observed on a finite prefix, so a
//! sequence carries a `verified` flag that only the built-in constructors can
//! set. [`SteeringSequence::validate_prefix`] complements it with runtime
//! checks against closed-form witnesses.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SteeringFamily {
    /// `λ_k = c / (k + 1)^p`
    PowerLaw { c: f64, p: f64 },
    /// `λ_k = 1 / (k + 1 + offset)`
    HarmonicShifted { offset: u64 },
    /// Explicit leading values, then a power law evaluated at the absolute
    /// index `k`.
    UserTable { values: Vec<f64>, c: f64, p: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringSequence {
    family: SteeringFamily,
    verified: bool,
}

impl Default for SteeringSequence {
    /// `λ_k = 1 / (k + 1)`.
    fn default() -> Self {
        Self {
            family: SteeringFamily::PowerLaw { c: 1.0, p: 1.0 },
            verified: true,
        }
    }
}

impl fmt::Display for SteeringFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerLaw { c, p } => write!(f, "power-law(c={c}, p={p})"),
            Self::HarmonicShifted { offset } => write!(f, "harmonic-shifted(offset={offset})"),
            Self::UserTable { values, c, p } => {
                write!(f, "user-table({} values, then c={c}, p={p})", values.len())
            }
        }
    }
}

impl fmt::Display for SteeringSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.family.fmt(f)
    }
}

fn check_power_law(c: f64, p: f64) -> Result<()> {
    if p == 0.0 {
        return Err(Error::InvalidSteering(format!(
            "constant sequence λ_k = {c} does not tend to zero"
        )));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidSteering(format!(
            "power-law scale c must lie in (0, 1], got {c}"
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidSteering(format!(
            "power-law exponent p must lie in (0, 1], got {p}"
        )));
    }
    Ok(())
}

fn power_law(c: f64, p: f64, k: u64) -> f64 {
    let base = (k + 1) as f64;
    if p == 1.0 {
        c / base
    } else if p == 0.5 {
        c / base.sqrt()
    } else {
        c / base.powf(p)
    }
}

/// Lower bound for `Σ_{k=from}^{to-1} c / (k + 1)^p` by the integral test.
fn power_law_sum_lower_bound(c: f64, p: f64, from: u64, to: u64) -> f64 {
    if to <= from {
        return 0.0;
    }
    let (a, b) = ((from + 1) as f64, (to + 1) as f64);
    if p == 1.0 {
        c * (b / a).ln()
    } else {
        c * (b.powf(1.0 - p) - a.powf(1.0 - p)) / (1.0 - p)
    }
}

impl SteeringSequence {
    /// `λ_k = c / (k + 1)^p` with `c, p ∈ (0, 1]`. `p = 0` would be a
    /// constant sequence and is rejected.
    pub fn power_law(c: f64, p: f64) -> Result<Self> {
        check_power_law(c, p)?;
        Ok(Self {
            family: SteeringFamily::PowerLaw { c, p },
            verified: true,
        })
    }

    pub fn harmonic_shifted(offset: u64) -> Self {
        Self {
            family: SteeringFamily::HarmonicShifted { offset },
            verified: true,
        }
    }

    /// Leading `values`, then `c / (k + 1)^p`. Values outside `[0, 1]` are
    /// accepted so that [`validate_prefix`](Self::validate_prefix) can report
    /// them, but they leave the sequence unverified.
    pub fn user_table(values: Vec<f64>, c: f64, p: f64) -> Result<Self> {
        check_power_law(c, p)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSteering(format!(
                "table value {v} is not finite"
            )));
        }
        let verified = values.iter().all(|v| (0.0..=1.0).contains(v));
        Ok(Self {
            family: SteeringFamily::UserTable { values, c, p },
            verified,
        })
    }

    pub fn family(&self) -> &SteeringFamily {
        &self.family
    }

    /// Whether all three steering conditions are known to hold.
    pub fn is_verified(&self) -> bool {
        self.verified
    }

    pub fn lambda(&self, k: u64) -> f64 {
        match &self.family {
            SteeringFamily::PowerLaw { c, p } => power_law(*c, *p, k),
            SteeringFamily::HarmonicShifted { offset } => 1.0 / (k + 1 + offset) as f64,
            SteeringFamily::UserTable { values, c, p } => match values.get(k as usize) {
                Some(&v) => v,
                None => power_law(*c, *p, k),
            },
        }
    }

    /// Lower bound for `Σ_{k<n} λ_k` implied by the family's closed form.
    fn partial_sum_lower_bound(&self, n: u64) -> f64 {
        match &self.family {
            SteeringFamily::PowerLaw { c, p } => power_law_sum_lower_bound(*c, *p, 0, n),
            SteeringFamily::HarmonicShifted { offset } => {
                ((n + 1 + offset) as f64 / (1 + offset) as f64).ln()
            }
            SteeringFamily::UserTable { values, c, p } => {
                power_law_sum_lower_bound(*c, *p, values.len() as u64, n)
            }
        }
    }

    /// Upper bound for `Σ_{k=0}^{n-2} |λ_{k+1} − λ_k|`.
    fn variation_bound(&self, n: u64) -> f64 {
        let last = self.lambda(n.saturating_sub(1));
        match &self.family {
            // Monotone decreasing: the variation telescopes.
            SteeringFamily::PowerLaw { c, .. } => c - last,
            SteeringFamily::HarmonicShifted { offset } => 1.0 / (1 + offset) as f64 - last,
            // Each in-range table step and the junction move by at most one;
            // the power-law tail adds at most c.
            SteeringFamily::UserTable { values, c, .. } => values.len() as f64 + c,
        }
    }

    /// Checks the steering conditions on `λ_0, ..., λ_{horizon−1}`.
    ///
    /// * range: every `λ_k ∈ [0, 1]`;
    /// * divergence: every partial sum stays above the family's integral
    ///   lower bound, which grows without limit;
    /// * summability: the accumulated variation stays below the family's
    ///   closed-form bound.
    pub fn validate_prefix(&self, horizon: u64) -> PrefixReport {
        assert!(horizon >= 2, "prefix horizon must be at least 2");
        // Absorbs rounding in the running sums.
        let slack = 1e-12 * horizon as f64;

        let mut range = Condition::new();
        let mut divergence = Condition::new();
        let mut summability = Condition::new();

        let mut sum = 0.0;
        let mut variation = 0.0;
        let mut prev: Option<f64> = None;
        for k in 0..horizon {
            let lambda = self.lambda(k);
            if !(0.0..=1.0).contains(&lambda) {
                range.fail_at(k);
            }
            sum += lambda;
            let lower = self.partial_sum_lower_bound(k + 1);
            if sum < lower - slack {
                divergence.fail_at(k);
            }
            if let Some(p) = prev {
                variation += (lambda - p).abs();
            }
            if variation > self.variation_bound(k + 1) + slack {
                summability.fail_at(k);
            }
            prev = Some(lambda);
        }
        range.value = sum;
        divergence.value = sum;
        divergence.bound = self.partial_sum_lower_bound(horizon);
        summability.value = variation;
        summability.bound = self.variation_bound(horizon);

        PrefixReport {
            horizon,
            range,
            divergence,
            summability,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub passed: bool,
    pub first_violation: Option<u64>,
    /// Observed statistic: the partial sum for range/divergence, the
    /// accumulated variation for summability.
    pub value: f64,
    /// Closed-form witness the statistic was compared against.
    pub bound: f64,
}

impl Condition {
    fn new() -> Self {
        Self {
            passed: true,
            first_violation: None,
            value: 0.0,
            bound: f64::NAN,
        }
    }

    fn fail_at(&mut self, k: u64) {
        if self.passed {
            self.passed = false;
            self.first_violation = Some(k);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixReport {
    pub horizon: u64,
    pub range: Condition,
    pub divergence: Condition,
    pub summability: Condition,
}

impl PrefixReport {
    pub fn passed(&self) -> bool {
        self.range.passed && self.divergence.passed && self.summability.passed
    }
}

//! Posterior-odds intervals and the three-way decision rule.

use serde::{Deserialize, Serialize};

/// Bounds of the posterior inclusion odds `P(gamma_j=1|y) / P(gamma_j=0|y)`
/// over a set of priors. Stored on the log scale; the linear bounds
/// overflow to infinity easily for strong signals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OddsInterval {
    pub log_lower: f64,
    pub log_upper: f64,
}

impl OddsInterval {
    /// Builds an interval from two log-odds values given in any order.
    pub fn from_log(a: f64, b: f64) -> Self {
        Self {
            log_lower: a.min(b),
            log_upper: a.max(b),
        }
    }

    pub fn from_odds(lower: f64, upper: f64) -> Self {
        Self::from_log(lower.ln(), upper.ln())
    }

    pub fn point(log_odds: f64) -> Self {
        Self::from_log(log_odds, log_odds)
    }

    pub fn lower(&self) -> f64 {
        self.log_lower.exp()
    }

    pub fn upper(&self) -> f64 {
        self.log_upper.exp()
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &OddsInterval) -> OddsInterval {
        OddsInterval {
            log_lower: self.log_lower.min(other.log_lower),
            log_upper: self.log_upper.max(other.log_upper),
        }
    }

    /// Smallest interval containing every value in `log_odds`; `None` when
    /// the iterator is empty.
    pub fn enclosing(log_odds: impl IntoIterator<Item = f64>) -> Option<OddsInterval> {
        log_odds.into_iter().map(OddsInterval::point).reduce(|a, b| a.hull(&b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Active,
    Inactive,
    Indeterminate,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Active => "Active",
            Status::Inactive => "Inactive",
            Status::Indeterminate => "Indeterminate",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Active iff the lower odds exceed 1, Inactive iff the upper odds are
/// below 1, Indeterminate otherwise (including equality at a bound).
pub fn classify(odds: &OddsInterval) -> Status {
    if odds.log_lower > 0.0 {
        Status::Active
    } else if odds.log_upper < 0.0 {
        Status::Inactive
    } else {
        Status::Indeterminate
    }
}

/// Inclusion odds estimated from `count` inclusions in `draws` kept draws,
/// with one half added to both cells so that the estimate stays finite.
pub fn smoothed_odds(count: u64, draws: u64) -> f64 {
    debug_assert!(count <= draws);
    (count as f64 + 0.5) / ((draws - count) as f64 + 0.5)
}

/// Log of [`smoothed_odds`].
pub fn smoothed_log_odds(count: u64, draws: u64) -> f64 {
    (count as f64 + 0.5).ln() - ((draws - count) as f64 + 0.5).ln()
}

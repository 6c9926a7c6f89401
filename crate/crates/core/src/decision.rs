//! Active sets, refit errors and the accuracy summaries reported for a set
//! of fitted prior configurations.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::SweepResult;
use crate::model::Dataset;
use crate::odds::Status;

/// `{ j : odds_j > 1 }`.
pub fn active_set(inclusion_odds: &[f64]) -> Vec<usize> {
    (0..inclusion_odds.len()).filter(|&j| inclusion_odds[j] > 1.0).collect()
}

/// `{ j : log odds_j > 0 }`.
pub fn active_set_from_log(log_odds: &[f64]) -> Vec<usize> {
    (0..log_odds.len()).filter(|&j| log_odds[j] > 0.0).collect()
}

fn check_active(active: &[usize], p: usize) -> Result<()> {
    if let Some(&j) = active.iter().find(|&&j| j >= p) {
        return Err(Error::domain(format!("active index {j} out of range for p={p}")));
    }
    Ok(())
}

/// `|y - x_A beta_A|^2` where `beta_A` holds the posterior means of the
/// active coefficients in the order of `active`. An empty set gives `|y|^2`.
pub fn refit_and_error(data: &Dataset, active: &[usize], posterior_mean_restricted: &[f64]) -> Result<f64> {
    check_active(active, data.p())?;
    if active.len() != posterior_mean_restricted.len() {
        return Err(Error::domain(format!(
            "active set has {} entries but {} restricted coefficients were given",
            active.len(),
            posterior_mean_restricted.len()
        )));
    }
    let mut resid = data.y().clone();
    for (&j, &b) in active.iter().zip(posterior_mean_restricted) {
        resid.axpy(-b, &data.x().column(j), 1.0);
    }
    Ok(resid.norm_squared())
}

/// [`refit_and_error`] taking the full-length posterior mean.
pub fn refit_error_full(data: &Dataset, active: &[usize], posterior_mean: &[f64]) -> Result<f64> {
    check_active(active, posterior_mean.len())?;
    let restricted: Vec<f64> = active.iter().map(|&j| posterior_mean[j]).collect();
    refit_and_error(data, active, &restricted)
}

/// Extremes of the refit error over configurations and where they occur.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRange {
    pub min: f64,
    pub max: f64,
    /// Configuration attaining the minimum (the optimistic fit).
    pub argmin: usize,
    /// Configuration attaining the maximum (the pessimistic fit).
    pub argmax: usize,
}

/// Min and max of per-configuration errors; ties go to the first index.
pub fn error_range(errors: &[f64]) -> Result<ErrorRange> {
    if errors.is_empty() {
        return Err(Error::domain("at least one configuration is required"));
    }
    let mut r = ErrorRange {
        min: errors[0],
        max: errors[0],
        argmin: 0,
        argmax: 0,
    };
    for (i, &e) in errors.iter().enumerate().skip(1) {
        if e < r.min {
            r.min = e;
            r.argmin = i;
        }
        if e > r.max {
            r.max = e;
            r.argmax = i;
        }
    }
    Ok(r)
}

/// Refit error range across the configurations of a sweep.
pub fn min_max_error(sweep: &SweepResult, data: &Dataset) -> Result<ErrorRange> {
    let errors = sweep
        .configurations
        .iter()
        .map(|c| refit_error_full(data, &c.active_set, &c.posterior_mean))
        .collect::<Result<Vec<f64>>>()?;
    error_range(&errors)
}

/// `(max - min) / max`, defined as 0 when `max = 0`.
pub fn model_indeterminacy(min: f64, max: f64) -> f64 {
    if max == 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}

/// `sum_j (E(beta_j | y) 1{j in A} - beta*_j)^2`.
pub fn delta_beta(posterior_mean: &[f64], active: &[usize], beta_true: &[f64]) -> Result<f64> {
    if posterior_mean.len() != beta_true.len() {
        return Err(Error::domain("posterior mean and true coefficients differ in length"));
    }
    check_active(active, beta_true.len())?;
    let mut masked = DVector::zeros(beta_true.len());
    for &j in active {
        masked[j] = posterior_mean[j];
    }
    Ok(beta_true.iter().zip(masked.iter()).map(|(t, m)| (m - t) * (m - t)).sum())
}

/// A count split into determinate and indeterminate parts, printed `x-y`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCount {
    pub determinate: usize,
    pub indeterminate: usize,
}

impl std::fmt::Display for SplitCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.determinate, self.indeterminate)
    }
}

/// Selection counts for one fit. Determinate counts come from the status;
/// indeterminate covariates count as active when they are in the fit's
/// active set and as inactive otherwise. The false counts need the truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub active: SplitCount,
    pub inactive: SplitCount,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub false_active: Option<SplitCount>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub false_inactive: Option<SplitCount>,
}

impl Confusion {
    /// Counts in the hyphen notation, keyed `Act`, `FA`, `Inact`, `FI`.
    pub fn hyphenated(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("Act", self.active.to_string())];
        if let Some(fa) = self.false_active {
            out.push(("FA", fa.to_string()));
        }
        out.push(("Inact", self.inactive.to_string()));
        if let Some(fi) = self.false_inactive {
            out.push(("FI", fi.to_string()));
        }
        out
    }

    /// Covariates in the fit that are truly active (true positives).
    pub fn true_active(&self) -> usize {
        let total = self.active.determinate + self.active.indeterminate;
        total - self.false_active.map_or(0, |fa| fa.determinate + fa.indeterminate)
    }

    /// Covariates in the fit that are truly inactive.
    pub fn false_active_total(&self) -> Option<usize> {
        self.false_active.map(|fa| fa.determinate + fa.indeterminate)
    }
}

pub fn confusion(status: &[Status], active: &[usize], truth: Option<&[usize]>) -> Result<Confusion> {
    let p = status.len();
    check_active(active, p)?;
    let mut in_fit = vec![false; p];
    active.iter().for_each(|&j| in_fit[j] = true);
    let truly = truth.map(|t| {
        let mut v = vec![false; p];
        t.iter().filter(|&&j| j < p).for_each(|&j| v[j] = true);
        v
    });
    let mut c = Confusion {
        active: SplitCount::default(),
        inactive: SplitCount::default(),
        false_active: truly.as_ref().map(|_| SplitCount::default()),
        false_inactive: truly.as_ref().map(|_| SplitCount::default()),
    };
    for j in 0..p {
        let is_true = truly.as_ref().map(|t| t[j]);
        let (bucket, false_bucket, determinate) = match status[j] {
            Status::Active => (&mut c.active, c.false_active.as_mut().filter(|_| is_true == Some(false)), true),
            Status::Inactive => (&mut c.inactive, c.false_inactive.as_mut().filter(|_| is_true == Some(true)), true),
            Status::Indeterminate if in_fit[j] => {
                (&mut c.active, c.false_active.as_mut().filter(|_| is_true == Some(false)), false)
            }
            Status::Indeterminate => (&mut c.inactive, c.false_inactive.as_mut().filter(|_| is_true == Some(true)), false),
        };
        if determinate {
            bucket.determinate += 1;
        } else {
            bucket.indeterminate += 1;
        }
        if let Some(fb) = false_bucket {
            if determinate {
                fb.determinate += 1;
            } else {
                fb.indeterminate += 1;
            }
        }
    }
    Ok(c)
}

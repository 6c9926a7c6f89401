//! Domain types of the hierarchical spike-and-slab model and its prior
//! densities.
//!
//! ```text
//! y | beta, sigma2       ~ N(x beta, sigma2 I)
//! beta_j | gamma_j, sigma2 ~ N(0, sigma2 tau_{gamma_j}^2)
//! gamma_j | q_j          ~ Bernoulli(q_j)
//! q_j                    ~ Beta(s alpha_j, s (1 - alpha_j))
//! sigma2                 ~ InvGamma(a, b)
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log_add_exp, normal_log_density};

/// Response vector and design matrix.
#[derive(Clone, Debug)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    column_names: Vec<String>,
    response_name: String,
    standardization: Option<Standardization>,
}

/// Record of the centering and scaling applied by [`Dataset::standardize`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub column_means: Vec<f64>,
    pub column_scales: Vec<f64>,
    pub response_mean: f64,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, y, names, "y".to_string())
    }

    pub fn with_names(
        x: DMatrix<f64>,
        y: DVector<f64>,
        column_names: Vec<String>,
        response_name: String,
    ) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::domain(format!("dataset must have n >= 1 and p >= 1, got n={n}, p={p}")));
        }
        if y.len() != n {
            return Err(Error::domain(format!("response has {} entries but design has {n} rows", y.len())));
        }
        if column_names.len() != p {
            return Err(Error::domain("column name count does not match p"));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite design entry at row {}, column {}",
                pos % n + 1,
                pos / n + 1
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite response at row {}", i + 1)));
        }
        Ok(Self {
            x,
            y,
            column_names,
            response_name,
            standardization: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn is_standardized(&self) -> bool {
        self.standardization.is_some()
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    /// Centers `y`, centers every column of `x` and scales it to unit
    /// variance (divisor `n`, so that an orthogonal design keeps
    /// `x'x = n I`). Constant columns are centered and left unscaled.
    /// Standardizing an already standardized dataset returns it unchanged.
    pub fn standardize(&self) -> Dataset {
        if self.standardization.is_some() {
            return self.clone();
        }
        let n = self.n() as f64;
        let mut x = self.x.clone();
        let mut means = Vec::with_capacity(self.p());
        let mut scales = Vec::with_capacity(self.p());
        for mut col in x.column_iter_mut() {
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
            let var = col.norm_squared() / n;
            let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
            col /= scale;
            means.push(mean);
            scales.push(scale);
        }
        let response_mean = self.y.sum() / n;
        let y = self.y.add_scalar(-response_mean);
        Dataset {
            x,
            y,
            column_names: self.column_names.clone(),
            response_name: self.response_name.clone(),
            standardization: Some(Standardization {
                column_means: means,
                column_scales: scales,
                response_mean,
            }),
        }
    }

    /// Maps coefficients fitted on this dataset back to the original
    /// column scale. Identity for unstandardized data.
    pub fn coefficients_to_original_scale(&self, beta: &[f64]) -> Vec<f64> {
        match &self.standardization {
            None => beta.to_vec(),
            Some(s) => beta.iter().zip(&s.column_scales).map(|(b, sc)| b / sc).collect(),
        }
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Dataset> {
        if columns.is_empty() {
            return Err(Error::domain("column selection is empty"));
        }
        if let Some(&bad) = columns.iter().find(|&&j| j >= self.p()) {
            return Err(Error::domain(format!("column index {bad} out of range for p={}", self.p())));
        }
        let x = self.x.select_columns(columns);
        let names = columns.iter().map(|&j| self.column_names[j].clone()).collect();
        let standardization = self.standardization.as_ref().map(|s| Standardization {
            column_means: columns.iter().map(|&j| s.column_means[j]).collect(),
            column_scales: columns.iter().map(|&j| s.column_scales[j]).collect(),
            response_mean: s.response_mean,
        });
        Ok(Dataset {
            x,
            y: self.y.clone(),
            column_names: names,
            response_name: self.response_name.clone(),
            standardization,
        })
    }
}

/// Fixed hyperparameters of the hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Spike scale.
    pub tau0: f64,
    /// Slab scale.
    pub tau1: f64,
    /// Beta concentration.
    pub s: f64,
    /// Inverse-gamma shape.
    pub a: f64,
    /// Inverse-gamma rate.
    pub b: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            tau0: 1e-6,
            tau1: 5.0,
            s: 1.0,
            a: 0.01,
            b: 0.01,
        }
    }
}

impl Hyperparameters {
    pub fn new(tau0: f64, tau1: f64, s: f64, a: f64, b: f64) -> Result<Self> {
        let hp = Self { tau0, tau1, s, a, b };
        hp.validate()?;
        Ok(hp)
    }

    pub fn with_taus(tau0: f64, tau1: f64) -> Result<Self> {
        Self::new(tau0, tau1, 1.0, 0.01, 0.01)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau0", self.tau0), ("tau1", self.tau1), ("s", self.s), ("a", self.a), ("b", self.b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be a positive finite number, got {v}")));
            }
        }
        if self.tau0 >= self.tau1 {
            return Err(Error::domain(format!(
                "spike scale tau0={} must be smaller than slab scale tau1={}",
                self.tau0, self.tau1
            )));
        }
        Ok(())
    }

    /// Soft diagnostics for settings that are legal but unusual.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.tau0 >= 1.0 {
            out.push(format!("tau0={} is not small; the spike is not concentrated near zero", self.tau0));
        }
        if self.tau1 <= 1.0 {
            out.push(format!("tau1={} is not larger than 1; the slab is narrow", self.tau1));
        }
        out
    }

    /// Prior scale `tau_gamma` of a coefficient with indicator `gamma`.
    #[inline]
    pub fn tau(&self, gamma: bool) -> f64 {
        if gamma {
            self.tau1
        } else {
            self.tau0
        }
    }
}

/// Per-covariate intervals of prior inclusion probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl AlphaBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::domain("alpha box bounds must be non-empty and of equal length"));
        }
        for (j, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l > 0.0 && l <= h && h < 1.0) {
                return Err(Error::domain(format!(
                    "alpha box entry {j} must satisfy 0 < lo <= hi < 1, got [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The same interval for every covariate.
    pub fn uniform(p: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; p], vec![hi; p])
    }

    /// A single precise prior.
    pub fn precise(alpha: Vec<f64>) -> Result<Self> {
        Self::new(alpha.clone(), alpha)
    }

    /// `[eps1, 1 - eps2]` for every covariate.
    pub fn near_vacuous(p: usize, eps1: f64, eps2: f64) -> Result<Self> {
        Self::uniform(p, eps1, 1.0 - eps2)
    }

    pub fn p(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    /// `lo + t (hi - lo)` componentwise, `t` in `[0, 1]`.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| l + t * (h - l)).collect()
    }

    pub fn permuted(&self, order: &[usize]) -> AlphaBox {
        AlphaBox {
            lo: order.iter().map(|&j| self.lo[j]).collect(),
            hi: order.iter().map(|&j| self.hi[j]).collect(),
        }
    }
}

/// Parameters of one component density `f_gamma(beta_j)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeSlabDensityParams {
    pub gamma: bool,
    pub sigma2: f64,
}

impl SpikeSlabDensityParams {
    /// `sigma2 * tau_gamma^2`.
    pub fn variance(&self, hp: &Hyperparameters) -> f64 {
        let t = hp.tau(self.gamma);
        self.sigma2 * t * t
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {v}")))
    }
}

/// `log f_gamma(beta_j)`, the normal log-density with variance
/// `sigma2 tau_gamma^2`.
pub fn spike_slab_log_density(beta_j: f64, gamma: bool, sigma2: f64, hp: &Hyperparameters) -> Result<f64> {
    check_finite("beta_j", beta_j)?;
    check_finite("sigma2", sigma2)?;
    if sigma2 <= 0.0 {
        return Err(Error::domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let var = SpikeSlabDensityParams { gamma, sigma2 }.variance(hp);
    Ok(normal_log_density(beta_j, 0.0, var))
}

/// Log of the marginal prior `alpha f_1(beta) + (1 - alpha) f_0(beta)`.
pub fn marginal_prior_log_density(beta_j: f64, alpha_j: f64, sigma2: f64, hp: &Hyperparameters) -> Result<f64> {
    if !(alpha_j > 0.0 && alpha_j < 1.0) {
        return Err(Error::domain(format!("alpha_j must lie in (0, 1), got {alpha_j}")));
    }
    let slab = spike_slab_log_density(beta_j, true, sigma2, hp)?;
    let spike = spike_slab_log_density(beta_j, false, sigma2, hp)?;
    Ok(log_add_exp(alpha_j.ln() + slab, (-alpha_j).ln_1p() + spike))
}

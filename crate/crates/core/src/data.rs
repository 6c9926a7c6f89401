//! Synthetic regression data, CSV input/output, ridge-based elicitation of
//! inclusion-probability intervals and marginal-correlation screening.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, cholesky_solve};
use crate::model::{AlphaBox, Dataset, Standardization};
use crate::numeric::two_sided_p_value;
use crate::rng::SeedStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    pub n_active: usize,
    /// Predictor correlation `corr_base^|i-j|`.
    pub corr_base: f64,
    /// Noise variance (not standard deviation).
    pub noise_var: f64,
    pub coef_low: f64,
    pub coef_high: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n: usize, p: usize, n_active: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            n_active,
            corr_base: 0.2,
            noise_var: 4.0,
            coef_low: 1.0,
            coef_high: 4.0,
            seed,
        }
    }

    /// Benchmark regimes 1 to 4: `n = 50`, `p = 100` with 10, 20, 50 or 60
    /// active predictors.
    pub fn dataset(index: usize, seed: u64) -> Result<Self> {
        let active = match index {
            1 => 10,
            2 => 20,
            3 => 50,
            4 => 60,
            _ => return Err(Error::domain(format!("unknown synthetic dataset {index}; expected 1 to 4"))),
        };
        Ok(Self::new(50, 100, active, seed))
    }

    /// Parses `dataset1` .. `dataset4`.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name.strip_prefix("dataset").and_then(|s| s.parse().ok()) {
            Some(i) => Self::dataset(i, seed),
            None => Err(Error::domain(format!("unknown synthetic preset '{name}'; expected dataset1 to dataset4"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::domain("n and p must be positive"));
        }
        if self.n_active > self.p {
            return Err(Error::domain(format!("n_active={} exceeds p={}", self.n_active, self.p)));
        }
        if !(0.0..1.0).contains(&self.corr_base) {
            return Err(Error::domain(format!("corr_base must lie in [0, 1), got {}", self.corr_base)));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::domain(format!("noise_var must be positive, got {}", self.noise_var)));
        }
        if !(self.coef_low > 0.0 && self.coef_low <= self.coef_high && self.coef_high.is_finite()) {
            return Err(Error::domain("coefficient magnitudes need 0 < coef_low <= coef_high"));
        }
        Ok(())
    }

    /// `Sigma_ij = corr_base^|i-j|`.
    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.p, |i, j| self.corr_base.powi(i.abs_diff(j) as i32))
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub beta_true: Vec<f64>,
    /// Sorted indices of the nonzero coefficients.
    pub active: Vec<usize>,
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let root = SeedStream::new(spec.seed);
    let mut coef_rng = root.child(0).rng();
    let mut active = sample(&mut coef_rng, spec.p, spec.n_active).into_vec();
    active.sort_unstable();
    let mut beta_true = vec![0.0; spec.p];
    for &j in &active {
        let magnitude = coef_rng.random_range(spec.coef_low..=spec.coef_high);
        beta_true[j] = if coef_rng.random_bool(0.5) { magnitude } else { -magnitude };
    }

    let (chol, _) = cholesky_jittered(&spec.covariance())?;
    let mut x_rng = root.child(1).rng();
    let z = DMatrix::from_fn(spec.n, spec.p, |_, _| -> f64 { StandardNormal.sample(&mut x_rng) });
    let x = z * chol.transpose();

    let mut e_rng = root.child(2).rng();
    let sd = spec.noise_var.sqrt();
    let noise = DVector::from_fn(spec.n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut e_rng);
        sd * z
    });
    let y = &x * DVector::from_column_slice(&beta_true) + noise;
    Ok(SyntheticData {
        dataset: Dataset::new(x, y)?,
        beta_true,
        active,
    })
}

/// Which CSV column holds the response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResponseColumn {
    Name(String),
    /// Zero-based column position.
    Index(usize),
}

impl ResponseColumn {
    /// A header name, or a zero-based index when the text is an integer.
    pub fn parse(text: &str) -> Self {
        match text.parse() {
            Ok(i) => ResponseColumn::Index(i),
            Err(_) => ResponseColumn::Name(text.to_string()),
        }
    }

    fn resolve(&self, headers: &[String]) -> Result<usize> {
        match self {
            ResponseColumn::Name(name) => headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::domain(format!("response column '{name}' not found in header"))),
            ResponseColumn::Index(i) => {
                // A numeric header name wins over the positional reading.
                if let Some(pos) = headers.iter().position(|h| h == &i.to_string()) {
                    return Ok(pos);
                }
                if *i < headers.len() {
                    Ok(*i)
                } else {
                    Err(Error::domain(format!("response column index {i} out of range ({} columns)", headers.len())))
                }
            }
        }
    }
}

/// Reads a rectangular numeric CSV with a header row. Locations in errors
/// are 1-based file line and column numbers.
pub fn read_csv<R: Read>(reader: R, response: &ResponseColumn, standardize: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let width = headers.len();
    if width < 2 {
        return Err(Error::Parse {
            row: 1,
            column: width.max(1),
            message: "need a response column and at least one predictor".into(),
        });
    }
    let ycol = response.resolve(&headers)?;
    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(r + 2, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::Parse {
                row: line,
                column: record.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            let text = field.trim();
            if text.is_empty() {
                return Err(Error::Parse { row: line, column: c + 1, message: "missing value".into() });
            }
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                row: line,
                column: c + 1,
                message: format!("non-numeric value '{text}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row: line, column: c + 1, message: format!("non-finite value '{text}'") });
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse { row: 2, column: 1, message: "no data rows".into() });
    }
    let all = DMatrix::from_row_slice(rows, width, &values);
    let xcols: Vec<usize> = (0..width).filter(|&c| c != ycol).collect();
    let x = all.select_columns(&xcols);
    let y = all.column(ycol).into_owned();
    let names = xcols.iter().map(|&c| headers[c].clone()).collect();
    let data = Dataset::with_names(x, y, names, headers[ycol].clone())?;
    Ok(if standardize { data.standardize() } else { data })
}

pub fn load_csv(path: &Path, response: &ResponseColumn, standardize: bool) -> Result<Dataset> {
    read_csv(File::open(path)?, response, standardize)
}

/// Writes the response first, then the predictors, each value with 17
/// significant digits so that reading the file back is exact.
pub fn write_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![data.response_name().to_string()];
    header.extend(data.column_names().iter().cloned());
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = Vec::with_capacity(data.p() + 1);
        rec.push(format!("{:.16e}", data.y()[i]));
        rec.extend(data.x().row(i).iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: &Path, data: &Dataset) -> Result<()> {
    write_csv(File::create(path)?, data)
}

/// Sidecar metadata written next to a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub response: String,
    pub columns: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spec: Option<SynthSpec>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta_true: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub active: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub standardization: Option<Standardization>,
}

impl DatasetMetadata {
    pub fn for_synthetic(synth: &SyntheticData, spec: &SynthSpec) -> Self {
        Self {
            response: synth.dataset.response_name().to_string(),
            columns: synth.dataset.column_names().to_vec(),
            seed: Some(spec.seed),
            spec: Some(spec.clone()),
            beta_true: Some(synth.beta_true.clone()),
            active: Some(synth.active.clone()),
            standardization: synth.dataset.standardization().cloned(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCount {
    pub threshold: f64,
    pub count: usize,
}

/// Multiplicity correction applied to the ridge p-values before counting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueAdjustment {
    None,
    #[default]
    BenjaminiHochberg,
}

impl PValueAdjustment {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "none" => Ok(Self::None),
            "bh" | "fdr" | "benjamini-hochberg" => Ok(Self::BenjaminiHochberg),
            other => Err(Error::domain(format!("unknown p-value adjustment '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElicitationResult {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub counts_at_thresholds: Vec<ThresholdCount>,
    pub method: String,
    pub ridge_penalty: f64,
    pub adjustment: PValueAdjustment,
    /// Unadjusted two-sided p-values.
    pub p_values: Vec<f64>,
}

impl ElicitationResult {
    pub fn alpha_box(&self, p: usize) -> Result<AlphaBox> {
        AlphaBox::uniform(p, self.alpha_lo, self.alpha_hi)
    }
}

/// Ridge penalty used when none is given.
pub const DEFAULT_RIDGE_PENALTY: f64 = 10.0;

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn benjamini_hochberg(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0_f64;
    for rank in (0..m).rev() {
        let j = order[rank];
        running = running.min(p_values[j] * m as f64 / (rank + 1) as f64);
        adjusted[j] = running;
    }
    adjusted
}

/// [`elicit_alpha_interval_with`] using the default adjustment.
pub fn elicit_alpha_interval(data: &Dataset, p_low: f64, p_high: f64, ridge_penalty: f64) -> Result<ElicitationResult> {
    elicit_alpha_interval_with(data, p_low, p_high, ridge_penalty, PValueAdjustment::default())
}

/// Interval of plausible prior inclusion probabilities from the number of
/// ridge coefficients that look significant at two p-value cutoffs. The
/// p-values are heuristic: they use a normal reference with sandwich
/// standard errors of the (biased) ridge estimator, and the noise variance
/// is estimated with residual degrees of freedom `n - tr(2H - H H')`.
pub fn elicit_alpha_interval_with(
    data: &Dataset,
    p_low: f64,
    p_high: f64,
    ridge_penalty: f64,
    adjustment: PValueAdjustment,
) -> Result<ElicitationResult> {
    if !(p_low > 0.0 && p_low < p_high && p_high < 1.0) {
        return Err(Error::domain(format!("need 0 < p_low < p_high < 1, got {p_low}, {p_high}")));
    }
    if !(ridge_penalty > 0.0 && ridge_penalty.is_finite()) {
        return Err(Error::domain(format!("ridge penalty must be positive, got {ridge_penalty}")));
    }
    let p = data.p();
    let n = data.n();
    let x = data.x();
    let xtx = x.tr_mul(x);
    let mut a = xtx.clone();
    for i in 0..p {
        a[(i, i)] += ridge_penalty;
    }
    let (chol, _) = cholesky_jittered(&a).map_err(|e| Error::numeric(format!("ridge fit failed: {e}")))?;
    let mut beta = x.tr_mul(data.y());
    cholesky_solve(&chol, &mut beta);
    let mut a_inv = DMatrix::identity(p, p);
    for mut col in a_inv.column_iter_mut() {
        let mut v = col.clone_owned();
        cholesky_solve(&chol, &mut v);
        col.copy_from(&v);
    }
    // tr(H) = tr(A^-1 G) and tr(H H') = tr((A^-1 G)^2) with G = X'X.
    let m = &a_inv * &xtx;
    let tr_h = m.trace();
    let tr_hh = m.component_mul(&m.transpose()).sum();
    let residual_df = n as f64 - (2.0 * tr_h - tr_hh);
    let rss = (data.y() - x * &beta).norm_squared();
    let sigma2 = rss / residual_df.max(1.0);
    let cov = &m * &a_inv * sigma2;
    let p_values: Vec<f64> = (0..p)
        .map(|j| {
            let se = cov[(j, j)].max(0.0).sqrt();
            if se > 0.0 {
                two_sided_p_value(beta[j] / se)
            } else {
                1.0
            }
        })
        .collect();
    if p_values.iter().any(|v| v.is_nan()) {
        return Err(Error::numeric("ridge p-values are not finite"));
    }
    let tested = match adjustment {
        PValueAdjustment::None => p_values.clone(),
        PValueAdjustment::BenjaminiHochberg => benjamini_hochberg(&p_values),
    };
    let count = |t: f64| tested.iter().filter(|&&pv| pv < t).count();
    let (k_low, k_high) = (count(p_low), count(p_high));
    let floor = 1.0 / (2.0 * p as f64);
    let clamp = |v: f64| v.clamp(floor, 1.0 - floor);
    Ok(ElicitationResult {
        alpha_lo: clamp(k_low as f64 / p as f64),
        alpha_hi: clamp(k_high as f64 / p as f64),
        counts_at_thresholds: vec![
            ThresholdCount { threshold: p_low, count: k_low },
            ThresholdCount { threshold: p_high, count: k_high },
        ],
        method: "ridge-pvalue".into(),
        ridge_penalty,
        adjustment,
        p_values,
    })
}

/// Column indices ordered by decreasing absolute Pearson correlation with
/// the response, first `keep` only. Ties keep column order; constant
/// columns have correlation 0.
pub fn screen_covariates(data: &Dataset, keep: usize) -> Result<Vec<usize>> {
    if keep > data.p() {
        return Err(Error::domain(format!("cannot keep {keep} of {} covariates", data.p())));
    }
    let corr = absolute_correlations(data);
    let mut order: Vec<usize> = (0..data.p()).collect();
    order.sort_by(|&a, &b| corr[b].total_cmp(&corr[a]).then(a.cmp(&b)));
    order.truncate(keep);
    Ok(order)
}

pub fn absolute_correlations(data: &Dataset) -> Vec<f64> {
    let y = data.y();
    let ym = y.mean();
    let yc = y.add_scalar(-ym);
    let yss = yc.norm_squared();
    data.x()
        .column_iter()
        .map(|col| {
            let m = col.mean();
            let xc = col.add_scalar(-m);
            let xss = xc.norm_squared();
            if xss == 0.0 || yss == 0.0 {
                0.0
            } else {
                (xc.dot(&yc) / (xss * yss).sqrt()).abs()
            }
        })
        .collect()
}

/// Named inclusion-probability intervals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphaPreset {
    Diabetes,
    Gaia,
    Lymphoma,
    NearVacuous,
    Synthetic1,
    Synthetic2,
    Synthetic3,
    Synthetic4,
}

impl AlphaPreset {
    pub const ALL: [AlphaPreset; 8] = [
        AlphaPreset::Diabetes,
        AlphaPreset::Gaia,
        AlphaPreset::Lymphoma,
        AlphaPreset::NearVacuous,
        AlphaPreset::Synthetic1,
        AlphaPreset::Synthetic2,
        AlphaPreset::Synthetic3,
        AlphaPreset::Synthetic4,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AlphaPreset::Diabetes => "diabetes",
            AlphaPreset::Gaia => "gaia",
            AlphaPreset::Lymphoma => "lymphoma",
            AlphaPreset::NearVacuous => "nearVacuous",
            AlphaPreset::Synthetic1 => "synthetic1",
            AlphaPreset::Synthetic2 => "synthetic2",
            AlphaPreset::Synthetic3 => "synthetic3",
            AlphaPreset::Synthetic4 => "synthetic4",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        let key = name.to_ascii_lowercase().replace(['-', '_'], "");
        Self::ALL
            .into_iter()
            .find(|p| p.name().to_ascii_lowercase() == key)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|p| p.name()).collect();
                Error::domain(format!("unknown alpha preset '{name}'; known presets: {}", names.join(", ")))
            })
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            AlphaPreset::Diabetes => (0.2, 0.5),
            AlphaPreset::Gaia => (0.0625, 0.1875),
            AlphaPreset::Lymphoma => (0.1, 0.15),
            AlphaPreset::NearVacuous => (0.05, 0.95),
            AlphaPreset::Synthetic1 => (0.05, 0.12),
            AlphaPreset::Synthetic2 => (0.08, 0.22),
            AlphaPreset::Synthetic3 => (0.10, 0.33),
            AlphaPreset::Synthetic4 => (0.16, 0.34),
        }
    }

    pub fn alpha_box(&self, p: usize) -> Result<AlphaBox> {
        let (lo, hi) = self.bounds();
        AlphaBox::uniform(p, lo, hi)
    }
}

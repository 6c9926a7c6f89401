//! End-to-end fit: backend selection, the sweep over a box of prior
//! inclusion probabilities, three-way classification and the accuracy
//! summaries, collected into a serializable [`SelectionReport`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::decision::{confusion, delta_beta, error_range, model_indeterminacy, refit_error_full, Confusion};
use crate::error::{Error, Result};
use crate::exact::{self, EnumerationOptions, ModelSpaceTable};
use crate::gibbs::{sensitivity_sweep, ChainConfig, SamplerKind, Schedule};
use crate::model::{AlphaBox, Dataset, Hyperparameters};
use crate::odds::{classify, OddsInterval, Status};
use crate::orthogonal::{self, check_orthogonal, coefficient_posterior, log_posterior_odds, orthogonal_selection};

/// Version of the JSON layout of [`SelectionReport`].
pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Auto,
    Orthogonal,
    Exact,
    Gibbs,
}

impl Backend {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "orthogonal" | "closed-form" => Ok(Self::Orthogonal),
            "exact" => Ok(Self::Exact),
            "gibbs" => Ok(Self::Gibbs),
            other => Err(Error::domain(format!("unknown backend '{other}'"))),
        }
    }

    /// Label of the odds source written next to each covariate.
    pub fn source(&self) -> &'static str {
        match self {
            Backend::Auto => "auto",
            Backend::Orthogonal => "closed-form",
            Backend::Exact => "exact",
            Backend::Gibbs => "gibbs",
        }
    }
}

/// Known truth of a synthetic dataset, coefficients on the original scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub beta: Vec<f64>,
    pub active: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub hp: Hyperparameters,
    pub backend: Backend,
    pub schedule: Schedule,
    pub chain: ChainConfig,
    pub seed: u64,
    /// Largest model space the exact backend may enumerate.
    pub cap: u64,
    /// Known error variance; the orthogonal backend estimates it otherwise.
    pub sigma2: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            hp: Hyperparameters::default(),
            backend: Backend::Auto,
            schedule: Schedule::Endpoints,
            chain: ChainConfig::default(),
            seed: 0,
            cap: exact::DEFAULT_CAP,
            sigma2: None,
        }
    }
}

/// Backend actually used for `data` under `cfg`.
pub fn resolve_backend(data: &Dataset, cfg: &FitConfig) -> Result<Backend> {
    match cfg.backend {
        Backend::Auto => {
            if cfg.sigma2.is_some() && check_orthogonal(data).is_ok() {
                Ok(Backend::Orthogonal)
            } else if exact::check_capacity(data.p(), cfg.cap).is_ok() {
                Ok(Backend::Exact)
            } else {
                Ok(Backend::Gibbs)
            }
        }
        Backend::Orthogonal => {
            check_orthogonal(data)?;
            Ok(Backend::Orthogonal)
        }
        Backend::Exact => {
            exact::check_capacity(data.p(), cfg.cap)?;
            Ok(Backend::Exact)
        }
        Backend::Gibbs => Ok(Backend::Gibbs),
    }
}

/// Residual variance of the least-squares fit with `n - p` degrees of
/// freedom. For an orthogonal design the fit is `x'y / n`.
pub fn orthogonal_residual_variance(data: &Dataset) -> Result<f64> {
    let (n, p) = (data.n(), data.p());
    if n <= p {
        return Err(Error::Precondition(format!(
            "cannot estimate the error variance with n={n} <= p={p}; supply sigma2"
        )));
    }
    let beta = orthogonal::ols_orthogonal(data)?;
    let mut resid = data.y().clone();
    for (j, b) in beta.iter().enumerate() {
        resid.axpy(-b, &data.x().column(j), 1.0);
    }
    let s2 = resid.norm_squared() / (n - p) as f64;
    if s2 > 0.0 && s2.is_finite() {
        Ok(s2)
    } else {
        Err(Error::numeric(format!("estimated error variance {s2} is not positive")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n: usize,
    pub p: usize,
    pub response: String,
    pub standardized: bool,
    /// Column scales dividing the original covariates, when standardized.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub column_scales: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSummary {
    pub kind: SamplerKind,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub chains: usize,
    pub draws_per_configuration: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateReport {
    pub index: usize,
    pub name: String,
    pub status: Status,
    pub log_odds_lower: f64,
    pub log_odds_upper: f64,
    /// Linear odds bounds; `null` when they overflow.
    pub odds_lower: Option<f64>,
    pub odds_upper: Option<f64>,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationReport {
    pub alpha: Vec<f64>,
    pub active_set: Vec<usize>,
    pub squared_error: f64,
    pub log_inclusion_odds: Vec<f64>,
    /// `E(beta | y)` on the scale of the fitted covariates.
    pub posterior_mean: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_inclusion_mcse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta_beta: Option<f64>,
    pub confusion: Confusion,
}

/// One extreme fit of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremeFit {
    pub configuration: usize,
    pub alpha: Vec<f64>,
    pub squared_error: f64,
    pub active_set: Vec<usize>,
    pub confusion: Confusion,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta_beta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub min_squared_error: f64,
    pub max_squared_error: f64,
    pub model_indeterminacy: f64,
    pub optimistic: ExtremeFit,
    pub pessimistic: ExtremeFit,
    pub status_counts: StatusCounts,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub active: usize,
    pub inactive: usize,
    pub indeterminate: usize,
}

impl StatusCounts {
    pub fn of(status: &[Status]) -> Self {
        let mut c = Self::default();
        for s in status {
            match s {
                Status::Active => c.active += 1,
                Status::Inactive => c.inactive += 1,
                Status::Indeterminate => c.indeterminate += 1,
            }
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub schema_version: String,
    pub backend: Backend,
    pub data: DataSummary,
    pub hyperparameters: Hyperparameters,
    pub alpha_box: AlphaBox,
    pub schedule: Schedule,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sampler: Option<SamplerSummary>,
    pub covariates: Vec<CovariateReport>,
    pub configurations: Vec<ConfigurationReport>,
    pub metrics: Metrics,
    pub notes: Vec<String>,
}

impl SelectionReport {
    pub fn status(&self) -> Vec<Status> {
        self.covariates.iter().map(|c| c.status).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Recomputes `delta_beta` and the confusion counts against `truth`.
    pub fn apply_truth(&mut self, truth: Option<&Truth>) -> Result<()> {
        let status = self.status();
        let scales = self.data.column_scales.clone();
        for c in &mut self.configurations {
            c.confusion = confusion(&status, &c.active_set, truth.map(|t| t.active.as_slice()))?;
            c.delta_beta = truth
                .map(|t| delta_beta(&original_scale(&c.posterior_mean, scales.as_deref()), &c.active_set, &t.beta))
                .transpose()?;
        }
        for fit in [&mut self.metrics.optimistic, &mut self.metrics.pessimistic] {
            let c = &self.configurations[fit.configuration];
            fit.confusion = c.confusion;
            fit.delta_beta = c.delta_beta;
        }
        Ok(())
    }
}

fn original_scale(beta: &[f64], scales: Option<&[f64]>) -> Vec<f64> {
    match scales {
        Some(s) => beta.iter().zip(s).map(|(b, s)| b / s).collect(),
        None => beta.to_vec(),
    }
}

/// Clamps to the finite range so the value survives JSON.
fn finite(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-f64::MAX, f64::MAX)
    }
}

fn linear(log_odds: f64) -> Option<f64> {
    let v = log_odds.exp();
    v.is_finite().then_some(v)
}

/// Alpha, log inclusion odds, posterior mean and largest inclusion MCSE at
/// one configuration.
type ConfigurationFit = (Vec<f64>, Vec<f64>, Vec<f64>, Option<f64>);

/// Per-configuration output of a backend before the metrics are attached.
struct BackendFit {
    configurations: Vec<ConfigurationFit>,
    odds: Vec<OddsInterval>,
    sampler: Option<SamplerSummary>,
}

fn fit_orthogonal(data: &Dataset, alpha: &AlphaBox, sigma2: f64, cfg: &FitConfig) -> Result<BackendFit> {
    let coords = orthogonal_selection(data, alpha, sigma2, &cfg.hp)?;
    let configurations = cfg
        .schedule
        .configurations(alpha)?
        .into_iter()
        .map(|a| {
            let log_odds: Vec<f64> = coords
                .iter()
                .zip(&a)
                .map(|(c, &aj)| log_posterior_odds(aj, c.log_w1, c.log_w0))
                .collect();
            let mean = coords
                .iter()
                .zip(&a)
                .map(|(c, &aj)| Ok(coefficient_posterior(aj, c.beta_hat, data.n(), sigma2, &cfg.hp)?.mean()))
                .collect::<Result<Vec<f64>>>()?;
            Ok((a, log_odds, mean, None))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BackendFit {
        configurations,
        odds: coords.iter().map(|c| c.odds).collect(),
        sampler: None,
    })
}

fn fit_exact(data: &Dataset, alpha: &AlphaBox, cfg: &FitConfig) -> Result<BackendFit> {
    let table = ModelSpaceTable::compute(data, &cfg.hp, &EnumerationOptions::with_cap(cfg.cap))?;
    let alphas = cfg.schedule.configurations(alpha)?;
    let posteriors = alphas.iter().map(|a| table.posterior(a)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = posteriors.iter().collect();
    let means = exact::posterior_means(data, &refs, &cfg.hp)?;
    let configurations: Vec<_> = alphas
        .into_iter()
        .zip(&posteriors)
        .zip(means)
        .map(|((a, post), m)| (a, post.log_inclusion_odds(), m.iter().copied().collect(), None))
        .collect();
    let odds = hull_odds(&configurations, data.p());
    Ok(BackendFit {
        configurations,
        odds,
        sampler: None,
    })
}

fn fit_gibbs(data: &Dataset, alpha: &AlphaBox, cfg: &FitConfig) -> Result<BackendFit> {
    let sweep = sensitivity_sweep(data, alpha, &cfg.hp, cfg.schedule, &cfg.chain, cfg.seed)?;
    let chains = cfg.chain.chains as f64;
    let configurations = sweep
        .configurations
        .into_iter()
        .map(|c| {
            let mcse = (0..data.p())
                .map(|j| c.chains.iter().map(|ch| ch.inclusion_mcse()[j]).sum::<f64>() / chains / chains.sqrt())
                .fold(0.0, f64::max);
            (c.alpha, c.log_inclusion_odds, c.posterior_mean, Some(mcse))
        })
        .collect();
    Ok(BackendFit {
        configurations,
        odds: sweep.odds,
        sampler: Some(SamplerSummary {
            kind: cfg.chain.kind,
            iterations: cfg.chain.iterations,
            burnin: cfg.chain.burnin,
            thin: cfg.chain.thin,
            chains: cfg.chain.chains,
            draws_per_configuration: (cfg.chain.kept_draws() * cfg.chain.chains) as u64,
        }),
    })
}

fn hull_odds(configurations: &[ConfigurationFit], p: usize) -> Vec<OddsInterval> {
    (0..p)
        .map(|j| OddsInterval::enclosing(configurations.iter().map(|c| c.1[j])).expect("at least one configuration"))
        .collect()
}

/// Runs the chosen backend over `alpha` and assembles the report. `truth`
/// adds the error against known coefficients and the false counts.
pub fn fit(data: &Dataset, alpha: &AlphaBox, cfg: &FitConfig, truth: Option<&Truth>) -> Result<SelectionReport> {
    cfg.hp.validate()?;
    if alpha.p() != data.p() {
        return Err(Error::domain(format!("alpha box has {} entries, data has p={}", alpha.p(), data.p())));
    }
    if let Some(t) = truth {
        if t.beta.len() != data.p() {
            return Err(Error::domain(format!(
                "truth has {} coefficients, data has p={}",
                t.beta.len(),
                data.p()
            )));
        }
    }
    let backend = resolve_backend(data, cfg)?;
    let mut notes = cfg.hp.warnings();
    let defaults = Hyperparameters::default();
    if (cfg.hp.a, cfg.hp.b, cfg.hp.s) == (defaults.a, defaults.b, defaults.s) {
        notes.push(format!(
            "a={}, b={}, s={} are library defaults, not values tuned to this data",
            cfg.hp.a, cfg.hp.b, cfg.hp.s
        ));
    }
    let (result, sigma2) = match backend {
        Backend::Orthogonal => {
            let s2 = match cfg.sigma2 {
                Some(s2) if s2 > 0.0 && s2.is_finite() => s2,
                Some(s2) => return Err(Error::domain(format!("sigma2 must be positive, got {s2}"))),
                None => {
                    let s2 = orthogonal_residual_variance(data)?;
                    notes.push(format!("sigma2 estimated from least-squares residuals: {s2}"));
                    s2
                }
            };
            (fit_orthogonal(data, alpha, s2, cfg)?, Some(s2))
        }
        Backend::Exact => {
            notes.push("odds bounds are the hull over the visited alpha configurations".into());
            (fit_exact(data, alpha, cfg)?, None)
        }
        Backend::Gibbs => {
            notes.push("odds bounds are the hull over the visited alpha configurations".into());
            (fit_gibbs(data, alpha, cfg)?, None)
        }
        Backend::Auto => unreachable!("resolve_backend never returns Auto"),
    };

    let status: Vec<Status> = result.odds.iter().map(classify).collect();
    let source = backend.source().to_string();
    let covariates = (0..data.p())
        .map(|j| {
            let o = result.odds[j];
            CovariateReport {
                index: j,
                name: data.column_names()[j].clone(),
                status: status[j],
                log_odds_lower: finite(o.log_lower),
                log_odds_upper: finite(o.log_upper),
                odds_lower: linear(o.log_lower),
                odds_upper: linear(o.log_upper),
                source: source.clone(),
            }
        })
        .collect();

    let configurations = result
        .configurations
        .into_iter()
        .map(|(a, log_odds, mean, mcse)| {
            let active = crate::decision::active_set_from_log(&log_odds);
            Ok(ConfigurationReport {
                squared_error: refit_error_full(data, &active, &mean)?,
                confusion: confusion(&status, &active, None)?,
                alpha: a,
                active_set: active,
                log_inclusion_odds: log_odds.into_iter().map(finite).collect(),
                posterior_mean: mean,
                max_inclusion_mcse: mcse,
                delta_beta: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let errors: Vec<f64> = configurations.iter().map(|c| c.squared_error).collect();
    let range = error_range(&errors)?;
    let extreme = |i: usize| {
        let c: &ConfigurationReport = &configurations[i];
        ExtremeFit {
            configuration: i,
            alpha: c.alpha.clone(),
            squared_error: c.squared_error,
            active_set: c.active_set.clone(),
            confusion: c.confusion,
            delta_beta: None,
        }
    };
    let metrics = Metrics {
        min_squared_error: range.min,
        max_squared_error: range.max,
        model_indeterminacy: model_indeterminacy(range.min, range.max),
        optimistic: extreme(range.argmin),
        pessimistic: extreme(range.argmax),
        status_counts: StatusCounts::of(&status),
    };

    let mut report = SelectionReport {
        schema_version: SCHEMA_VERSION.into(),
        backend,
        data: DataSummary {
            n: data.n(),
            p: data.p(),
            response: data.response_name().to_string(),
            standardized: data.is_standardized(),
            column_scales: data.standardization().map(|s| s.column_scales.clone()),
        },
        hyperparameters: cfg.hp,
        alpha_box: alpha.clone(),
        schedule: cfg.schedule,
        seed: cfg.seed,
        sigma2,
        sampler: result.sampler,
        covariates,
        configurations,
        metrics,
        notes,
    };
    report.apply_truth(truth)?;
    Ok(report)
}

/// Plain-text summary of a report.
pub fn render_table(report: &SelectionReport) -> String {
    let mut out = String::new();
    let name_w = report.covariates.iter().map(|c| c.name.len()).max().unwrap_or(4).max(8);
    let _ = writeln!(
        out,
        "backend: {}  n={} p={}  tau0={} tau1={}",
        report.backend.source(),
        report.data.n,
        report.data.p,
        report.hyperparameters.tau0,
        report.hyperparameters.tau1
    );
    let _ = writeln!(out, "{:>5}  {:<name_w$}  {:<13}  {:>12}  {:>12}", "index", "name", "status", "log odds lo", "log odds hi");
    for c in &report.covariates {
        let _ = writeln!(
            out,
            "{:>5}  {:<name_w$}  {:<13}  {:>12.4}  {:>12.4}",
            c.index,
            c.name,
            c.status.as_str(),
            c.log_odds_lower,
            c.log_odds_upper
        );
    }
    let m = &report.metrics;
    let counts = m.status_counts;
    let _ = writeln!(
        out,
        "active {}  inactive {}  indeterminate {}",
        counts.active, counts.inactive, counts.indeterminate
    );
    let _ = writeln!(
        out,
        "min squared error {:.4}  max squared error {:.4}  model indeterminacy {:.4}",
        m.min_squared_error, m.max_squared_error, m.model_indeterminacy
    );
    for (label, fit) in [("optimistic", &m.optimistic), ("pessimistic", &m.pessimistic)] {
        let counts: Vec<String> = fit.confusion.hyphenated().into_iter().map(|(k, v)| format!("{k} {v}")).collect();
        let delta = fit.delta_beta.map(|d| format!("  delta(beta) {d:.4}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{label:<11} config {}  error {:.4}  {}{delta}",
            fit.configuration,
            fit.squared_error,
            counts.join("  ")
        );
    }
    for n in &report.notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

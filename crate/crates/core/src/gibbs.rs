//! Gibbs sampling for the general (non-orthogonal) case and the
//! sensitivity sweep over a box of prior inclusion probabilities.
//!
//! Two kernels are provided. [`SamplerKind::Conditional`] cycles through the
//! full conditionals `beta -> gamma -> q -> sigma2`. With a very narrow
//! spike the conditional update of `gamma_j` given `beta_j` almost never
//! leaves its current value, so the default [`SamplerKind::Collapsed`]
//! kernel draws each `gamma_j` with `beta` and `sigma2` integrated out,
//! then `sigma2 | gamma`, `beta | sigma2, gamma` and `q | gamma`. Both
//! leave the same joint posterior invariant.

use std::io::Write;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::ObservationSpace;
use crate::error::{Error, Result};
use crate::model::{AlphaBox, Dataset, Hyperparameters};
use crate::numeric::{logit, normal_log_density, sigmoid};
use crate::odds::{classify, smoothed_log_odds, OddsInterval, Status};
use crate::rng::{SeedStream, SimRng};

/// Fresh factorizations of the response covariance happen this often (in
/// iterations) to bound drift from accumulated rank-one updates.
const REFACTOR_EVERY: usize = 250;

/// Below this `1 - tau^2 x'Sigma^{-1}x` the leave-one-out statistics of the
/// collapsed update are recomputed from a spike-state factor instead.
const DOWNDATE_GUARD: f64 = 1e-6;

/// Number of batches used for batch-means standard errors.
const BATCHES: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Collapsed,
    Conditional,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsState {
    pub beta: DVector<f64>,
    pub gamma: Vec<bool>,
    pub q: Vec<f64>,
    pub sigma2: f64,
}

impl GibbsState {
    /// `gamma = 0`, `q = alpha`, `sigma2` = sample variance of `y`, `beta = 0`.
    pub fn initial(data: &Dataset, alpha: &[f64]) -> Self {
        let n = data.n();
        let y = data.y();
        let var = if n > 1 {
            let m = y.mean();
            y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            beta: DVector::zeros(data.p()),
            gamma: vec![false; data.p()],
            q: alpha.to_vec(),
            sigma2: if var > 0.0 && var.is_finite() { var } else { 1.0 },
        }
    }

    fn tau2(&self, hp: &Hyperparameters) -> Vec<f64> {
        self.gamma.iter().map(|&g| hp.tau(g).powi(2)).collect()
    }
}

/// Draw from `N(mu_gamma, sigma2 L_gamma)`.
pub fn sample_beta<R: Rng + ?Sized>(
    state: &GibbsState,
    data: &Dataset,
    hp: &Hyperparameters,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let space = ObservationSpace::new(data.x(), data.y(), state.tau2(hp)).map_err(|e| {
        let active: Vec<usize> = (0..state.gamma.len()).filter(|&j| state.gamma[j]).collect();
        Error::numeric(format!("coefficient draw for gamma with active set {active:?}: {e}"))
    })?;
    Ok(space.draw_coefficients(state.sigma2.sqrt(), rng))
}

/// `P(gamma_j = 1 | beta_j, sigma2, q_j)` for the conditional update.
pub fn gamma_conditional_prob(beta_j: f64, q_j: f64, sigma2: f64, hp: &Hyperparameters) -> f64 {
    let f1 = normal_log_density(beta_j, 0.0, sigma2 * hp.tau1 * hp.tau1);
    let f0 = normal_log_density(beta_j, 0.0, sigma2 * hp.tau0 * hp.tau0);
    sigmoid(logit(q_j) + (f1 - f0))
}

/// Independent Bernoulli draws of every `gamma_j` given `beta_j`.
pub fn sample_gamma<R: Rng + ?Sized>(state: &GibbsState, hp: &Hyperparameters, rng: &mut R) -> Vec<bool> {
    (0..state.gamma.len())
        .map(|j| rng.random::<f64>() < gamma_conditional_prob(state.beta[j], state.q[j], state.sigma2, hp))
        .collect()
}

/// Keeps a draw of `q_j` inside the open unit interval; beta draws with
/// small shape parameters can round to exactly 0 or 1.
fn clamp_open(q: f64) -> f64 {
    q.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `q_j ~ Beta(s alpha_j + gamma_j, s (1 - alpha_j) + 1 - gamma_j)`.
pub fn sample_q<R: Rng + ?Sized>(
    state: &GibbsState,
    hp: &Hyperparameters,
    alpha: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    state
        .gamma
        .iter()
        .zip(alpha)
        .map(|(&g, &a)| {
            let g = g as u8 as f64;
            let dist = Beta::new(hp.s * a + g, hp.s * (1.0 - a) + 1.0 - g)
                .map_err(|e| Error::domain(format!("invalid beta parameters: {e}")))?;
            Ok(clamp_open(dist.sample(rng)))
        })
        .collect()
}

fn inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    assert!(rate > 0.0, "inverse-gamma rate must be positive, got {rate}");
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::domain(format!("invalid gamma parameters: {e}")))?;
    Ok(1.0 / g.sample(rng))
}

/// Shape and rate of the full conditional of `sigma2`.
pub fn sigma2_conditional(state: &GibbsState, data: &Dataset, hp: &Hyperparameters) -> (f64, f64) {
    let n = data.n() as f64;
    let p = data.p() as f64;
    let resid = data.y() - data.x() * &state.beta;
    let penalty: f64 = state
        .beta
        .iter()
        .zip(&state.gamma)
        .map(|(b, &g)| b * b / hp.tau(g).powi(2))
        .sum();
    (hp.a + 0.5 * p + 0.5 * n, hp.b + 0.5 * resid.norm_squared() + 0.5 * penalty)
}

/// `sigma2 ~ IG(a + p/2 + n/2, b + |y - x beta|^2 / 2 + beta' D_gamma beta / 2)`.
pub fn sample_sigma2<R: Rng + ?Sized>(
    state: &GibbsState,
    data: &Dataset,
    hp: &Hyperparameters,
    rng: &mut R,
) -> Result<f64> {
    let (shape, rate) = sigma2_conditional(state, data, hp);
    inverse_gamma(shape, rate, rng)
}

/// A Markov chain positioned at a state, advancing one full scan per
/// [`Sampler::step`].
pub struct Sampler<'a> {
    data: &'a Dataset,
    alpha: Vec<f64>,
    hp: Hyperparameters,
    kind: SamplerKind,
    state: GibbsState,
    space: ObservationSpace<'a>,
    steps: usize,
}

impl<'a> Sampler<'a> {
    pub fn new(
        data: &'a Dataset,
        alpha: &[f64],
        hp: &Hyperparameters,
        kind: SamplerKind,
        state: GibbsState,
    ) -> Result<Self> {
        hp.validate()?;
        if alpha.len() != data.p() || state.gamma.len() != data.p() {
            return Err(Error::domain("alpha and state dimensions must match the data"));
        }
        if state.sigma2.is_nan() || state.sigma2 <= 0.0 {
            return Err(Error::domain(format!("sigma2 must be positive, got {}", state.sigma2)));
        }
        let space = ObservationSpace::new(data.x(), data.y(), state.tau2(hp))?;
        Ok(Self {
            data,
            alpha: alpha.to_vec(),
            hp: *hp,
            kind,
            state,
            space,
            steps: 0,
        })
    }

    pub fn state(&self) -> &GibbsState {
        &self.state
    }

    pub fn step(&mut self, rng: &mut SimRng) -> Result<()> {
        if self.steps > 0 && self.steps.is_multiple_of(REFACTOR_EVERY) {
            self.space.refactor()?;
        }
        self.steps += 1;
        match self.kind {
            SamplerKind::Collapsed => self.collapsed_step(rng),
            SamplerKind::Conditional => self.conditional_step(rng),
        }
    }

    fn set_gamma(&mut self, j: usize, value: bool) -> Result<()> {
        if self.state.gamma[j] != value {
            self.state.gamma[j] = value;
            self.space.set_tau2(j, self.hp.tau(value).powi(2))?;
        }
        Ok(())
    }

    fn conditional_step(&mut self, rng: &mut SimRng) -> Result<()> {
        self.state.beta = self.space.draw_coefficients(self.state.sigma2.sqrt(), rng);
        let gamma = sample_gamma(&self.state, &self.hp, rng);
        for (j, g) in gamma.into_iter().enumerate() {
            self.set_gamma(j, g)?;
        }
        self.state.q = sample_q(&self.state, &self.hp, &self.alpha, rng)?;
        self.state.sigma2 = sample_sigma2(&self.state, self.data, &self.hp, rng)?;
        Ok(())
    }

    /// Log odds of `gamma_j = 1` given the other indicators and `q_j`, with
    /// `beta` and `sigma2` integrated out.
    pub fn collapsed_log_odds(&mut self, j: usize) -> Result<f64> {
        let hp = self.hp;
        let (mut s, mut t) = self.space.coordinate_stats(j);
        let mut tc2 = hp.tau(self.state.gamma[j]).powi(2);
        let mut d = 1.0 - tc2 * s;
        if d < DOWNDATE_GUARD {
            self.set_gamma(j, false)?;
            (s, t) = self.space.coordinate_stats(j);
            tc2 = hp.tau0 * hp.tau0;
            d = 1.0 - tc2 * s;
        }
        let u = s / d;
        let v = t / d;
        let q_rest = self.space.quad() + tc2 * t * t / d;
        let t1 = hp.tau1 * hp.tau1;
        let t0 = hp.tau0 * hp.tau0;
        let q1 = (q_rest - t1 * v * v / (1.0 + t1 * u)).max(0.0);
        let q0 = (q_rest - t0 * v * v / (1.0 + t0 * u)).max(0.0);
        let expo = 0.5 * self.data.n() as f64 + hp.a;
        Ok(logit(self.state.q[j]) - 0.5 * ((t1 * u).ln_1p() - (t0 * u).ln_1p())
            - expo * ((hp.b + 0.5 * q1).ln() - (hp.b + 0.5 * q0).ln()))
    }

    fn collapsed_step(&mut self, rng: &mut SimRng) -> Result<()> {
        for j in 0..self.data.p() {
            let lo = self.collapsed_log_odds(j)?;
            let g = rng.random::<f64>() < sigmoid(lo);
            self.set_gamma(j, g)?;
        }
        let shape = self.hp.a + 0.5 * self.data.n() as f64;
        let rate = self.hp.b + 0.5 * self.space.quad();
        self.state.sigma2 = inverse_gamma(shape, rate, rng)?;
        self.state.beta = self.space.draw_coefficients(self.state.sigma2.sqrt(), rng);
        self.state.q = sample_q(&self.state, &self.hp, &self.alpha, rng)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub chains: usize,
    pub kind: SamplerKind,
    /// Keep every stored draw in memory for trace output.
    pub keep_trace: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burnin: 2_000,
            thin: 1,
            chains: 2,
            kind: SamplerKind::Collapsed,
            keep_trace: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burnin >= self.iterations {
            return Err(Error::domain(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burnin, self.iterations
            )));
        }
        if self.thin == 0 || self.chains == 0 {
            return Err(Error::domain("thin and chains must be at least 1"));
        }
        Ok(())
    }

    /// Number of draws kept per chain.
    pub fn kept_draws(&self) -> usize {
        (self.iterations - self.burnin).div_ceil(self.thin)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub sigma2: f64,
    pub gamma: Vec<bool>,
    pub beta: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub seed: u64,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub kind: SamplerKind,
    pub kept_draws: u64,
    pub inclusion_counts: Vec<u64>,
    pub beta_sum: Vec<f64>,
    pub beta_sum_sq: Vec<f64>,
    pub sigma2: ScalarSummary,
    /// Means over consecutive batches of kept draws, for Monte Carlo error.
    pub beta_batch_means: Vec<Vec<f64>>,
    pub inclusion_batch_means: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TraceRow>>,
}

impl ChainOutput {
    pub fn p(&self) -> usize {
        self.inclusion_counts.len()
    }

    pub fn inclusion_frequencies(&self) -> Vec<f64> {
        let n = self.kept_draws.max(1) as f64;
        self.inclusion_counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn beta_mean(&self) -> Vec<f64> {
        let n = self.kept_draws.max(1) as f64;
        self.beta_sum.iter().map(|s| s / n).collect()
    }

    pub fn log_inclusion_odds(&self) -> Vec<f64> {
        self.inclusion_counts
            .iter()
            .map(|&c| smoothed_log_odds(c, self.kept_draws))
            .collect()
    }

    /// Batch-means Monte Carlo standard error of each posterior mean.
    pub fn beta_mcse(&self) -> Vec<f64> {
        batch_se(&self.beta_batch_means, self.p())
    }

    pub fn inclusion_mcse(&self) -> Vec<f64> {
        batch_se(&self.inclusion_batch_means, self.p())
    }

    /// Writes the stored trace as CSV: iteration, sigma2, indicator bits,
    /// coefficient values.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows = self
            .trace
            .as_ref()
            .ok_or_else(|| Error::domain("chain was run without trace storage"))?;
        let p = self.p();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string(), "sigma2".to_string()];
        header.extend((1..=p).map(|j| format!("gamma_{j}")));
        header.extend((1..=p).map(|j| format!("beta_{j}")));
        w.write_record(&header)?;
        for row in rows {
            let mut rec = vec![row.iteration.to_string(), format!("{:.17e}", row.sigma2)];
            rec.extend(row.gamma.iter().map(|&g| (g as u8).to_string()));
            rec.extend(row.beta.iter().map(|b| format!("{b:.17e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn batch_se(batches: &[Vec<f64>], p: usize) -> Vec<f64> {
    let b = batches.len();
    if b < 2 {
        return vec![f64::NAN; p];
    }
    (0..p)
        .map(|j| {
            let m = batches.iter().map(|v| v[j]).sum::<f64>() / b as f64;
            let var = batches.iter().map(|v| (v[j] - m).powi(2)).sum::<f64>() / (b - 1) as f64;
            (var / b as f64).sqrt()
        })
        .collect()
}

/// Runs one chain from the default initial state.
pub fn run_chain(
    data: &Dataset,
    alpha: &[f64],
    hp: &Hyperparameters,
    cfg: &ChainConfig,
    seed: u64,
) -> Result<ChainOutput> {
    cfg.validate()?;
    let mut rng = SeedStream::new(seed).rng();
    let mut sampler = Sampler::new(data, alpha, hp, cfg.kind, GibbsState::initial(data, alpha))?;
    let p = data.p();
    let kept_total = cfg.kept_draws();
    let batches = BATCHES.min(kept_total);
    let batch_len = kept_total / batches.max(1);

    let mut counts = vec![0u64; p];
    let mut sum = vec![0.0; p];
    let mut sum_sq = vec![0.0; p];
    let mut s_sum = 0.0;
    let mut s_sq = 0.0;
    let mut s_min = f64::INFINITY;
    let mut s_max = f64::NEG_INFINITY;
    let mut beta_batches = Vec::with_capacity(batches);
    let mut incl_batches = Vec::with_capacity(batches);
    let mut batch_beta = vec![0.0; p];
    let mut batch_incl = vec![0.0; p];
    let mut in_batch = 0usize;
    let mut kept = 0u64;
    let mut trace = cfg.keep_trace.then(Vec::new);

    for it in 0..cfg.iterations {
        sampler
            .step(&mut rng)
            .map_err(|e| Error::numeric(format!("iteration {it}: {e}")))?;
        if it < cfg.burnin || !(it - cfg.burnin).is_multiple_of(cfg.thin) {
            continue;
        }
        let st = sampler.state();
        kept += 1;
        for j in 0..p {
            let b = st.beta[j];
            sum[j] += b;
            sum_sq[j] += b * b;
            counts[j] += st.gamma[j] as u64;
            batch_beta[j] += b;
            batch_incl[j] += st.gamma[j] as u8 as f64;
        }
        s_sum += st.sigma2;
        s_sq += st.sigma2 * st.sigma2;
        s_min = s_min.min(st.sigma2);
        s_max = s_max.max(st.sigma2);
        in_batch += 1;
        if batch_len > 0 && in_batch == batch_len && beta_batches.len() < batches {
            let k = batch_len as f64;
            beta_batches.push(batch_beta.iter().map(|v| v / k).collect());
            incl_batches.push(batch_incl.iter().map(|v| v / k).collect());
            batch_beta.iter_mut().for_each(|v| *v = 0.0);
            batch_incl.iter_mut().for_each(|v| *v = 0.0);
            in_batch = 0;
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceRow {
                iteration: it,
                sigma2: st.sigma2,
                gamma: st.gamma.clone(),
                beta: st.beta.iter().copied().collect(),
            });
        }
    }

    let k = kept.max(1) as f64;
    let mean = s_sum / k;
    let var = if kept > 1 { (s_sq - k * mean * mean) / (k - 1.0) } else { 0.0 };
    Ok(ChainOutput {
        seed,
        iterations: cfg.iterations,
        burnin: cfg.burnin,
        thin: cfg.thin,
        kind: cfg.kind,
        kept_draws: kept,
        inclusion_counts: counts,
        beta_sum: sum,
        beta_sum_sq: sum_sq,
        sigma2: ScalarSummary {
            mean,
            sd: var.max(0.0).sqrt(),
            min: s_min,
            max: s_max,
        },
        beta_batch_means: beta_batches,
        inclusion_batch_means: incl_batches,
        trace,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "points")]
pub enum Schedule {
    /// The all-lower and all-upper corners of the box.
    Endpoints,
    /// `G` equally spaced points on the segment from the lower to the upper
    /// corner.
    Grid(usize),
}

impl Schedule {
    /// Alpha configurations visited for `alpha`.
    pub fn configurations(&self, alpha: &AlphaBox) -> Result<Vec<Vec<f64>>> {
        if alpha.is_degenerate() {
            return Ok(vec![alpha.lo().to_vec()]);
        }
        match *self {
            Schedule::Endpoints => Ok(vec![alpha.lo().to_vec(), alpha.hi().to_vec()]),
            Schedule::Grid(g) if g >= 2 => Ok((0..g).map(|i| alpha.interpolate(i as f64 / (g - 1) as f64)).collect()),
            Schedule::Grid(g) => Err(Error::domain(format!("grid schedule needs at least 2 points, got {g}"))),
        }
    }
}

/// Chains pooled at one alpha configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationResult {
    pub alpha: Vec<f64>,
    pub chains: Vec<ChainOutput>,
    pub kept_draws: u64,
    pub inclusion_counts: Vec<u64>,
    /// Half-smoothed log inclusion odds from the pooled counts.
    pub log_inclusion_odds: Vec<f64>,
    pub posterior_mean: Vec<f64>,
    /// Covariates with estimated inclusion odds above 1.
    pub active_set: Vec<usize>,
}

impl ConfigurationResult {
    pub fn pool(alpha: Vec<f64>, chains: Vec<ChainOutput>) -> Self {
        let p = chains.first().map_or(0, |c| c.p());
        let kept: u64 = chains.iter().map(|c| c.kept_draws).sum();
        let mut counts = vec![0u64; p];
        let mut sums = vec![0.0; p];
        for c in &chains {
            for j in 0..p {
                counts[j] += c.inclusion_counts[j];
                sums[j] += c.beta_sum[j];
            }
        }
        let log_odds: Vec<f64> = counts.iter().map(|&c| smoothed_log_odds(c, kept)).collect();
        let active_set = (0..p).filter(|&j| log_odds[j] > 0.0).collect();
        Self {
            alpha,
            chains,
            kept_draws: kept,
            inclusion_counts: counts,
            log_inclusion_odds: log_odds,
            posterior_mean: sums.iter().map(|s| s / kept.max(1) as f64).collect(),
            active_set,
        }
    }

    pub fn inclusion_frequencies(&self) -> Vec<f64> {
        let n = self.kept_draws.max(1) as f64;
        self.inclusion_counts.iter().map(|&c| c as f64 / n).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schedule: Schedule,
    pub configurations: Vec<ConfigurationResult>,
    pub odds: Vec<OddsInterval>,
    pub status: Vec<Status>,
}

/// Runs `cfg.chains` chains at every configuration of `schedule` and
/// brackets each covariate's inclusion odds by the extremes across
/// configurations. Chain `k` of configuration `c` uses seed stream
/// `seed / c / k`, so the output does not depend on thread scheduling.
pub fn sensitivity_sweep(
    data: &Dataset,
    alpha: &AlphaBox,
    hp: &Hyperparameters,
    schedule: Schedule,
    cfg: &ChainConfig,
    seed: u64,
) -> Result<SweepResult> {
    cfg.validate()?;
    if alpha.p() != data.p() {
        return Err(Error::domain(format!("alpha box has {} entries, data has p={}", alpha.p(), data.p())));
    }
    let configs = schedule.configurations(alpha)?;
    let root = SeedStream::new(seed);
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..cfg.chains).map(move |k| (c, k)))
        .collect();
    let outputs = jobs
        .par_iter()
        .map(|&(c, k)| run_chain(data, &configs[c], hp, cfg, root.child(c as u64).child(k as u64).seed()))
        .collect::<Result<Vec<_>>>()?;
    let mut outputs = outputs.into_iter();
    let configurations: Vec<ConfigurationResult> = configs
        .into_iter()
        .map(|a| ConfigurationResult::pool(a, outputs.by_ref().take(cfg.chains).collect()))
        .collect();
    let odds: Vec<OddsInterval> = (0..data.p())
        .map(|j| {
            OddsInterval::enclosing(configurations.iter().map(|c| c.log_inclusion_odds[j]))
                .expect("at least one configuration")
        })
        .collect();
    let status = odds.iter().map(classify).collect();
    Ok(SweepResult {
        schedule,
        configurations,
        odds,
        status,
    })
}

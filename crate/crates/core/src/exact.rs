//! Exact posteriors over the full `2^p` model space.
//!
//! The error variance and coefficients are integrated out analytically, so
//! each model `gamma` carries a log marginal likelihood
//!
//! ```text
//! log m(gamma) = -1/2 log det(I + S G S) - (n/2 + a) log(b + Q/2),
//! Q = y'y - c' S (I + S G S)^{-1} S c,   S = diag(tau_gamma), G = x'x, c = x'y,
//! ```
//!
//! up to a constant shared by all models. Posterior model probabilities add
//! the Bernoulli prior with inclusion probabilities `alpha`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::ObservationSpace;
use crate::error::{Error, Result};
use crate::linalg::{backward_solve, cholesky_jittered, forward_solve, log_det_from_factor};
use crate::model::{spike_slab_log_density, Dataset, Hyperparameters};
use crate::numeric::{log_add_exp, log_sum_exp, multivariate_t_log_density, LogSumExp};

/// Default largest model space that will be enumerated.
pub const DEFAULT_CAP: u64 = 1 << 20;

/// Largest `p` accepted by [`verify_product_expansion`].
pub const PRODUCT_EXPANSION_MAX_P: usize = 12;

/// Inclusion indicators of one model.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelIndicator {
    gamma: Vec<bool>,
}

impl ModelIndicator {
    pub fn new(gamma: Vec<bool>) -> Self {
        Self { gamma }
    }

    pub fn empty(p: usize) -> Self {
        Self { gamma: vec![false; p] }
    }

    /// Bit `j` of `mask` is `gamma_j`.
    pub fn from_mask(mask: u64, p: usize) -> Self {
        Self {
            gamma: (0..p).map(|j| mask >> j & 1 == 1).collect(),
        }
    }

    pub fn mask(&self) -> u64 {
        self.gamma
            .iter()
            .enumerate()
            .fold(0u64, |m, (j, &g)| if g { m | 1 << j } else { m })
    }

    pub fn p(&self) -> usize {
        self.gamma.len()
    }

    pub fn get(&self, j: usize) -> bool {
        self.gamma[j]
    }

    pub fn set(&mut self, j: usize, value: bool) {
        self.gamma[j] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.gamma
    }

    pub fn size(&self) -> usize {
        self.gamma.iter().filter(|&&g| g).count()
    }

    pub fn included(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.gamma[j]).collect()
    }

    fn scales(&self, hp: &Hyperparameters) -> DVector<f64> {
        DVector::from_iterator(self.p(), self.gamma.iter().map(|&g| hp.tau(g)))
    }
}

/// Sufficient statistics shared by every model of one dataset.
#[derive(Clone, Debug)]
pub struct Gram {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
    pub n: usize,
}

impl Gram {
    pub fn new(data: &Dataset) -> Self {
        Self {
            xtx: data.x().tr_mul(data.x()),
            xty: data.x().tr_mul(data.y()),
            yty: data.y().norm_squared(),
            n: data.n(),
        }
    }

    pub fn p(&self) -> usize {
        self.xty.len()
    }
}

/// Posterior geometry of the coefficients under one model.
#[derive(Clone, Debug)]
pub struct ModelGeometry {
    /// Diagonal of `D_gamma`, entries `tau_gamma_j^{-2}`.
    pub d_gamma: DVector<f64>,
    /// `(x'x + D_gamma)^{-1}`.
    pub l_gamma: DMatrix<f64>,
    /// `L_gamma x'y`.
    pub mu_gamma: DVector<f64>,
    /// `b + (y'y - y'x L_gamma x'y) / 2`.
    pub r_gamma: f64,
    /// `log det L_gamma`.
    pub log_det_l: f64,
}

/// Cholesky quantities of `M = I + S G S` for one model.
struct Scaled {
    factor: DMatrix<f64>,
    scales: DVector<f64>,
    /// `R^{-1} S c`.
    e: DVector<f64>,
    log_det_m: f64,
    q: f64,
}

fn scaled(gamma: &ModelIndicator, gram: &Gram, hp: &Hyperparameters) -> Result<Scaled> {
    let p = gram.p();
    let scales = gamma.scales(hp);
    let mut m = DMatrix::from_fn(p, p, |i, j| scales[i] * gram.xtx[(i, j)] * scales[j]);
    for i in 0..p {
        m[(i, i)] += 1.0;
    }
    let factor = cholesky_jittered(&m)
        .map_err(|e| Error::numeric(format!("model {:?}: {e}", gamma.included())))?
        .0;
    let mut e = gram.xty.component_mul(&scales);
    forward_solve(&factor, &mut e);
    let q = (gram.yty - e.norm_squared()).max(0.0);
    Ok(Scaled {
        log_det_m: log_det_from_factor(&factor),
        factor,
        scales,
        e,
        q,
    })
}

fn check_model(gamma: &ModelIndicator, p: usize) -> Result<()> {
    if gamma.p() != p {
        return Err(Error::domain(format!("model indicator has {} entries, data has p={p}", gamma.p())));
    }
    Ok(())
}

fn check_alpha(alpha: &[f64], p: usize) -> Result<()> {
    if alpha.len() != p {
        return Err(Error::domain(format!("alpha has {} entries, data has p={p}", alpha.len())));
    }
    if let Some((j, a)) = alpha.iter().enumerate().find(|(_, &a)| !(a > 0.0 && a < 1.0)) {
        return Err(Error::domain(format!("alpha[{j}]={a} is outside (0, 1)")));
    }
    Ok(())
}

pub fn model_geometry(gamma: &ModelIndicator, data: &Dataset, hp: &Hyperparameters) -> Result<ModelGeometry> {
    check_model(gamma, data.p())?;
    geometry_from_gram(gamma, &Gram::new(data), hp)
}

pub fn geometry_from_gram(gamma: &ModelIndicator, gram: &Gram, hp: &Hyperparameters) -> Result<ModelGeometry> {
    let sc = scaled(gamma, gram, hp)?;
    let p = gram.p();
    let mut minv = DMatrix::identity(p, p);
    for mut col in minv.column_iter_mut() {
        let mut v = col.clone_owned();
        forward_solve(&sc.factor, &mut v);
        backward_solve(&sc.factor, &mut v);
        col.copy_from(&v);
    }
    let l_gamma = DMatrix::from_fn(p, p, |i, j| sc.scales[i] * minv[(i, j)] * sc.scales[j]);
    let mut t = sc.e.clone();
    backward_solve(&sc.factor, &mut t);
    let mu_gamma = t.component_mul(&sc.scales);
    let log_scale: f64 = sc.scales.iter().map(|s| s.ln()).sum();
    Ok(ModelGeometry {
        d_gamma: sc.scales.map(|s| 1.0 / (s * s)),
        l_gamma,
        mu_gamma,
        r_gamma: hp.b + 0.5 * sc.q,
        log_det_l: 2.0 * log_scale - sc.log_det_m,
    })
}

/// `sum_j gamma_j log alpha_j + (1 - gamma_j) log(1 - alpha_j)`.
pub fn log_model_prior(gamma: &ModelIndicator, alpha: &[f64]) -> f64 {
    gamma
        .bits()
        .iter()
        .zip(alpha)
        .map(|(&g, &a)| if g { a.ln() } else { (-a).ln_1p() })
        .sum()
}

fn log_marginal_from_parts(log_det: f64, q: f64, n: usize, hp: &Hyperparameters) -> f64 {
    -0.5 * log_det - (0.5 * n as f64 + hp.a) * (hp.b + 0.5 * q).ln()
}

/// Log marginal likelihood of `gamma` up to a model-independent constant.
pub fn log_marginal_likelihood(gamma: &ModelIndicator, gram: &Gram, hp: &Hyperparameters) -> Result<f64> {
    let sc = scaled(gamma, gram, hp)?;
    Ok(log_marginal_from_parts(sc.log_det_m, sc.q, gram.n, hp))
}

/// Unnormalized log posterior probability of a model.
pub fn model_log_score(gamma: &ModelIndicator, data: &Dataset, alpha: &[f64], hp: &Hyperparameters) -> Result<f64> {
    check_model(gamma, data.p())?;
    check_alpha(alpha, data.p())?;
    let geo = model_geometry(gamma, data, hp)?;
    let k = gamma.size() as f64;
    let p = data.p() as f64;
    Ok(log_model_prior(gamma, alpha) + 0.5 * geo.log_det_l - k * hp.tau1.ln() - (p - k) * hp.tau0.ln()
        - (0.5 * data.n() as f64 + hp.a) * geo.r_gamma.ln())
}

/// [`model_log_score`] evaluated through the `n x n` marginal covariance of
/// the response instead of the coefficient space.
pub fn model_log_score_observation_space(
    gamma: &ModelIndicator,
    data: &Dataset,
    alpha: &[f64],
    hp: &Hyperparameters,
) -> Result<f64> {
    check_model(gamma, data.p())?;
    check_alpha(alpha, data.p())?;
    let tau2 = gamma.bits().iter().map(|&g| hp.tau(g).powi(2)).collect();
    let space = ObservationSpace::new(data.x(), data.y(), tau2)?;
    Ok(log_model_prior(gamma, alpha) + log_marginal_from_parts(space.log_det(), space.quad(), data.n(), hp))
}

/// Posterior odds `P(gamma_a | y) / P(gamma_b | y)` from the closed-form
/// ratio of prior odds, spike/slab scale ratio, determinant ratio and
/// residual ratio.
pub fn model_odds(
    gamma_a: &ModelIndicator,
    gamma_b: &ModelIndicator,
    data: &Dataset,
    alpha: &[f64],
    hp: &Hyperparameters,
) -> Result<f64> {
    Ok(model_log_odds(gamma_a, gamma_b, data, alpha, hp)?.exp())
}

pub fn model_log_odds(
    gamma_a: &ModelIndicator,
    gamma_b: &ModelIndicator,
    data: &Dataset,
    alpha: &[f64],
    hp: &Hyperparameters,
) -> Result<f64> {
    check_model(gamma_a, data.p())?;
    check_model(gamma_b, data.p())?;
    check_alpha(alpha, data.p())?;
    if gamma_a == gamma_b {
        return Ok(0.0);
    }
    let gram = Gram::new(data);
    let ga = geometry_from_gram(gamma_a, &gram, hp)?;
    let gb = geometry_from_gram(gamma_b, &gram, hp)?;
    let mut prior = 0.0;
    for (j, &a) in alpha.iter().enumerate() {
        let diff = gamma_b.get(j) as i32 - gamma_a.get(j) as i32;
        if diff != 0 {
            prior += diff as f64 * ((-a).ln_1p() - a.ln());
        }
    }
    let size_diff = gamma_a.size() as f64 - gamma_b.size() as f64;
    Ok(prior
        + size_diff * (hp.tau0.ln() - hp.tau1.ln())
        + 0.5 * (ga.log_det_l - gb.log_det_l)
        + (0.5 * data.n() as f64 + hp.a) * (gb.r_gamma.ln() - ga.r_gamma.ln()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnumerationPath {
    /// Gray-code traversal with rank-one updates when that is cheaper.
    Auto,
    /// Gray-code traversal with rank-one updates of the response covariance.
    GrayCode,
    /// Independent factorization of every model.
    Recompute,
}

#[derive(Clone, Copy, Debug)]
pub struct EnumerationOptions {
    pub cap: u64,
    pub path: EnumerationPath,
    /// Models per worker job; each job refactorizes once at its start.
    pub chunk: usize,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            path: EnumerationPath::Auto,
            chunk: 1 << 10,
        }
    }
}

impl EnumerationOptions {
    pub fn with_cap(cap: u64) -> Self {
        Self { cap, ..Default::default() }
    }
}

/// Largest `p` for which the Gray-code path is chosen automatically.
pub const GRAY_CODE_MAX_P: usize = 16;

fn use_gray_code(n: usize, p: usize, path: EnumerationPath) -> bool {
    match path {
        EnumerationPath::GrayCode => true,
        EnumerationPath::Recompute => false,
        // Per-model cost is about 3 n^2 for the rank-one route against
        // p^3 / 3 for a fresh factorization.
        EnumerationPath::Auto => p <= GRAY_CODE_MAX_P && 9 * n * n < p * p * p,
    }
}

pub fn check_capacity(p: usize, cap: u64) -> Result<()> {
    if p >= 64 || (1u64 << p) > cap {
        return Err(Error::Capacity { p, cap });
    }
    Ok(())
}

#[inline]
fn gray(i: u64) -> u64 {
    i ^ (i >> 1)
}

/// Log marginal likelihood of every model, indexed by bit mask.
#[derive(Clone, Debug)]
pub struct ModelSpaceTable {
    p: usize,
    log_ml: Vec<f64>,
}

impl ModelSpaceTable {
    pub fn compute(data: &Dataset, hp: &Hyperparameters, opts: &EnumerationOptions) -> Result<Self> {
        let p = data.p();
        check_capacity(p, opts.cap)?;
        let total = 1usize << p;
        let chunk = opts.chunk.max(1);
        let log_ml = if use_gray_code(data.n(), p, opts.path) {
            let mut by_gray = vec![0.0; total];
            by_gray
                .par_chunks_mut(chunk)
                .enumerate()
                .try_for_each(|(c, out)| gray_chunk(data, hp, (c * chunk) as u64, out))?;
            let mut table = vec![0.0; total];
            for (i, v) in by_gray.into_iter().enumerate() {
                table[gray(i as u64) as usize] = v;
            }
            table
        } else {
            let gram = Gram::new(data);
            let mut table = vec![0.0; total];
            table.par_chunks_mut(chunk).enumerate().try_for_each(|(c, out)| {
                for (k, slot) in out.iter_mut().enumerate() {
                    let mask = (c * chunk + k) as u64;
                    *slot = log_marginal_likelihood(&ModelIndicator::from_mask(mask, p), &gram, hp)?;
                }
                Ok::<(), Error>(())
            })?;
            table
        };
        Ok(Self { p, log_ml })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn log_marginal(&self, mask: u64) -> f64 {
        self.log_ml[mask as usize]
    }

    pub fn log_marginals(&self) -> &[f64] {
        &self.log_ml
    }

    /// Normalized posterior over models for prior inclusion probabilities
    /// `alpha`.
    pub fn posterior(&self, alpha: &[f64]) -> Result<ModelPosterior> {
        check_alpha(alpha, self.p)?;
        let la: Vec<f64> = alpha.iter().map(|a| a.ln()).collect();
        let lb: Vec<f64> = alpha.iter().map(|a| (-a).ln_1p()).collect();
        let p = self.p;
        let mut log_probs: Vec<f64> = self
            .log_ml
            .par_iter()
            .enumerate()
            .map(|(mask, &lm)| {
                let mut prior = 0.0;
                for j in 0..p {
                    prior += if mask >> j & 1 == 1 { la[j] } else { lb[j] };
                }
                lm + prior
            })
            .collect();
        let norm = log_probs
            .par_chunks(4096)
            .map(|c| {
                let mut acc = LogSumExp::default();
                c.iter().for_each(|&v| acc.push(v));
                acc
            })
            .reduce(LogSumExp::default, LogSumExp::merge)
            .value();
        if !norm.is_finite() {
            return Err(Error::numeric("model posterior normalizer is not finite"));
        }
        log_probs.par_iter_mut().for_each(|v| *v -= norm);
        Ok(ModelPosterior {
            p,
            log_probs,
            log_normalizer: norm,
        })
    }
}

fn gray_chunk(data: &Dataset, hp: &Hyperparameters, start: u64, out: &mut [f64]) -> Result<()> {
    let p = data.p();
    let t0 = hp.tau0 * hp.tau0;
    let t1 = hp.tau1 * hp.tau1;
    let mut mask = gray(start);
    let tau2 = (0..p).map(|j| if mask >> j & 1 == 1 { t1 } else { t0 }).collect();
    let mut space = ObservationSpace::new(data.x(), data.y(), tau2)?;
    let n = data.n();
    out[0] = log_marginal_from_parts(space.log_det(), space.quad(), n, hp);
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        let i = start + k as u64;
        let j = i.trailing_zeros() as usize;
        mask ^= 1 << j;
        space.set_tau2(j, if mask >> j & 1 == 1 { t1 } else { t0 })?;
        *slot = log_marginal_from_parts(space.log_det(), space.quad(), n, hp);
    }
    Ok(())
}

/// Normalized posterior probabilities of all models, on the log scale.
#[derive(Clone, Debug)]
pub struct ModelPosterior {
    p: usize,
    log_probs: Vec<f64>,
    log_normalizer: f64,
}

impl ModelPosterior {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_probability(&self, mask: u64) -> f64 {
        self.log_probs[mask as usize]
    }

    pub fn probability(&self, mask: u64) -> f64 {
        self.log_probs[mask as usize].exp()
    }

    pub fn log_probabilities(&self) -> &[f64] {
        &self.log_probs
    }

    /// Log of the sum of unnormalized scores.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// `(indicator, probability)` for every model in mask order.
    pub fn iter(&self) -> impl Iterator<Item = (ModelIndicator, f64)> + '_ {
        let p = self.p;
        self.log_probs
            .iter()
            .enumerate()
            .map(move |(m, lp)| (ModelIndicator::from_mask(m as u64, p), lp.exp()))
    }

    /// `log P(gamma_j = 1 | y) - log P(gamma_j = 0 | y)` per covariate,
    /// accumulated separately on both sides so that neither tail underflows.
    pub fn log_inclusion_odds(&self) -> Vec<f64> {
        (0..self.p)
            .into_par_iter()
            .map(|j| {
                let mut on = LogSumExp::default();
                let mut off = LogSumExp::default();
                for (m, &lp) in self.log_probs.iter().enumerate() {
                    if m >> j & 1 == 1 {
                        on.push(lp);
                    } else {
                        off.push(lp);
                    }
                }
                on.value() - off.value()
            })
            .collect()
    }

    pub fn inclusion_probabilities(&self) -> Vec<f64> {
        self.log_inclusion_odds().into_iter().map(crate::numeric::sigmoid).collect()
    }

    /// Most probable model.
    pub fn mode(&self) -> ModelIndicator {
        let (m, _) = self
            .log_probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (m, &v)| if v > best.1 { (m, v) } else { best });
        ModelIndicator::from_mask(m as u64, self.p)
    }
}

pub fn enumerate_posterior(data: &Dataset, alpha: &[f64], hp: &Hyperparameters, cap: u64) -> Result<ModelPosterior> {
    check_alpha(alpha, data.p())?;
    ModelSpaceTable::compute(data, hp, &EnumerationOptions::with_cap(cap))?.posterior(alpha)
}

/// `P(gamma_j = 1 | y)` for every covariate.
pub fn marginal_inclusion_exact(data: &Dataset, alpha: &[f64], hp: &Hyperparameters, cap: u64) -> Result<Vec<f64>> {
    Ok(enumerate_posterior(data, alpha, hp, cap)?.inclusion_probabilities())
}

/// One multivariate t component of the coefficient posterior.
#[derive(Clone, Debug)]
pub struct TMixtureComponent {
    pub gamma: ModelIndicator,
    /// Unnormalized log weight (the model score).
    pub weight_log: f64,
    /// Normalized weight `P(gamma | y)`.
    pub weight: f64,
    pub mean: DVector<f64>,
    /// `(2 r_gamma / (n + 2a)) L_gamma`.
    pub scale: DMatrix<f64>,
    pub dof: f64,
    log_det_scale: f64,
}

impl TMixtureComponent {
    pub fn log_density(&self, beta: &DVector<f64>) -> Result<f64> {
        let d = beta - &self.mean;
        let chol = self
            .scale
            .clone()
            .cholesky()
            .ok_or_else(|| Error::numeric("t component scale is not positive definite"))?;
        let z = chol.l().solve_lower_triangular(&d).ok_or_else(|| Error::numeric("singular scale"))?;
        Ok(multivariate_t_log_density(z.norm_squared(), self.log_det_scale, self.mean.len(), self.dof))
    }
}

/// Coefficient posterior as a mixture of multivariate t distributions, one
/// per model, with weights `P(gamma | y)`.
pub fn beta_posterior_mixture_exact(
    data: &Dataset,
    alpha: &[f64],
    hp: &Hyperparameters,
    cap: u64,
) -> Result<Vec<TMixtureComponent>> {
    let post = enumerate_posterior(data, alpha, hp, cap)?;
    let gram = Gram::new(data);
    let dof = data.n() as f64 + 2.0 * hp.a;
    let p = data.p();
    (0..post.len() as u64)
        .into_par_iter()
        .map(|mask| {
            let gamma = ModelIndicator::from_mask(mask, p);
            let geo = geometry_from_gram(&gamma, &gram, hp)?;
            let c = 2.0 * geo.r_gamma / dof;
            Ok(TMixtureComponent {
                weight_log: post.log_probability(mask) + post.log_normalizer(),
                weight: post.probability(mask),
                mean: geo.mu_gamma,
                scale: geo.l_gamma * c,
                dof,
                log_det_scale: geo.log_det_l + p as f64 * c.ln(),
                gamma,
            })
        })
        .collect()
}

/// Log density of a t mixture at `beta`.
pub fn mixture_log_density(components: &[TMixtureComponent], beta: &DVector<f64>) -> Result<f64> {
    let terms = components
        .iter()
        .filter(|c| c.weight > 0.0)
        .map(|c| Ok(c.weight.ln() + c.log_density(beta)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(log_sum_exp(&terms))
}

/// `E(beta | y) = sum_gamma P(gamma | y) mu_gamma` for each of several
/// posteriors over the same data; every `mu_gamma` is formed once.
pub fn posterior_means(data: &Dataset, posteriors: &[&ModelPosterior], hp: &Hyperparameters) -> Result<Vec<DVector<f64>>> {
    let p = data.p();
    for post in posteriors {
        if post.p() != p {
            return Err(Error::domain("posterior dimension does not match data"));
        }
    }
    if posteriors.is_empty() {
        return Ok(Vec::new());
    }
    let gram = Gram::new(data);
    let total = posteriors[0].len() as u64;
    let zero = || vec![DVector::<f64>::zeros(p); posteriors.len()];
    (0..total)
        .into_par_iter()
        .try_fold(zero, |mut acc, mask| {
            let weights: Vec<f64> = posteriors.iter().map(|post| post.probability(mask)).collect();
            if weights.iter().all(|&w| w == 0.0) {
                return Ok(acc);
            }
            let sc = scaled(&ModelIndicator::from_mask(mask, p), &gram, hp)?;
            let mut t = sc.e.clone();
            backward_solve(&sc.factor, &mut t);
            let mu = t.component_mul(&sc.scales);
            for (a, w) in acc.iter_mut().zip(&weights) {
                a.axpy(*w, &mu, 1.0);
            }
            Ok::<_, Error>(acc)
        })
        .try_reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            Ok(a)
        })
}

/// Both sides of the expansion of `prod_j [alpha_j f_1(beta_j) + (1 - alpha_j) f_0(beta_j)]`
/// into a slab-only factor times a sum over subsets. `lhs` is the direct
/// log product, `rhs` the log of the expanded form.
pub fn verify_product_expansion(
    beta: &[f64],
    alpha: &[f64],
    sigma2: f64,
    hp: &Hyperparameters,
) -> Result<(f64, f64)> {
    let p = beta.len();
    if p == 0 || p > PRODUCT_EXPANSION_MAX_P {
        return Err(Error::domain(format!(
            "product expansion needs 1 <= p <= {PRODUCT_EXPANSION_MAX_P}, got {p}"
        )));
    }
    if alpha.len() != p {
        return Err(Error::domain("alpha and beta lengths differ"));
    }
    if let Some(a) = alpha.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::domain(format!("alpha entries must lie in (0, 1], got {a}")));
    }
    let mut lhs = 0.0;
    let mut log_r = Vec::with_capacity(p);
    for (&b, &a) in beta.iter().zip(alpha) {
        let f1 = spike_slab_log_density(b, true, sigma2, hp)?;
        let f0 = spike_slab_log_density(b, false, sigma2, hp)?;
        let spike = if a < 1.0 { (-a).ln_1p() + f0 } else { f64::NEG_INFINITY };
        lhs += log_add_exp(a.ln() + f1, spike);
        log_r.push(spike - a.ln() - f1);
    }
    let g = expansion_terms(&log_r);
    let norm2: f64 = beta.iter().map(|b| b * b).sum();
    let v1 = sigma2 * hp.tau1 * hp.tau1;
    let slab = -0.5 * p as f64 * (std::f64::consts::TAU * v1).ln() - norm2 / (2.0 * v1);
    let rhs = slab + alpha.iter().map(|a| a.ln()).sum::<f64>() + log_sum_exp(&g);
    Ok((lhs, rhs))
}

/// `log g_k` for `k = 0..=p`: the log of the sum over all size-`k` subsets
/// of the products of `exp(log_r_j)`, by explicit subset enumeration.
pub fn expansion_terms(log_r: &[f64]) -> Vec<f64> {
    let p = log_r.len();
    let mut acc = vec![LogSumExp::default(); p + 1];
    for mask in 0u64..1 << p {
        let mut term = 0.0;
        for (j, lr) in log_r.iter().enumerate() {
            if mask >> j & 1 == 1 {
                term += lr;
            }
        }
        acc[mask.count_ones() as usize].push(term);
    }
    acc.iter().map(|a| a.value()).collect()
}

//! Shared oracles and fixture access for the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use css_core::data::{load_csv, ResponseColumn};
use css_core::exact::ModelIndicator;
use css_core::model::spike_slab_log_density;
use css_core::numeric::ln_gamma;
use css_core::rng::SeedStream;
use css_core::{Dataset, Hyperparameters};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// Unstandardized fixture dataset with the response in column `y`.
pub fn fixture(name: &str) -> Dataset {
    load_csv(&fixture_path(name), &ResponseColumn::Name("y".into()), false).expect("fixture loads")
}

pub fn goldens() -> Value {
    let text = std::fs::read_to_string(fixture_path("goldens.json")).expect("goldens.json");
    serde_json::from_str(&text).expect("goldens parse")
}

pub fn f64_at(v: &Value, path: &[&str]) -> f64 {
    path.iter().fold(v, |v, k| &v[*k]).as_f64().unwrap_or_else(|| panic!("missing golden {path:?}"))
}

pub fn vec_at(v: &Value, path: &[&str]) -> Vec<f64> {
    path.iter()
        .fold(v, |v, k| &v[*k])
        .as_array()
        .unwrap_or_else(|| panic!("missing golden {path:?}"))
        .iter()
        .map(|x| x.as_f64().expect("number"))
        .collect()
}

pub fn usize_vec_at(v: &Value, path: &[&str]) -> Vec<usize> {
    vec_at(v, path).into_iter().map(|x| x as usize).collect()
}

/// 15-point Kronrod nodes (non-negative half) with Kronrod and embedded
/// 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]` split at the given
/// interior points.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breaks: &[f64], rel_tol: f64) -> f64 {
    let mut pts: Vec<f64> = breaks.to_vec();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut stack: Vec<(f64, f64, f64, f64)> = pts
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    let scale = stack.iter().map(|s| s.2.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    let mut done: Vec<f64> = Vec::new();
    let mut iterations = 0;
    while let Some((a, b, v, e)) = stack.pop() {
        iterations += 1;
        if e <= rel_tol * scale || (b - a) < 1e-15 * (1.0 + a.abs()) || iterations > 200_000 {
            done.push(v);
            continue;
        }
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(&f, a, m);
        let (v2, e2) = gk15(&f, m, b);
        stack.push((a, m, v1, e1));
        stack.push((m, b, v2, e2));
    }
    done.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    for d in done {
        total += d;
    }
    total
}

/// `log int exp(g(x)) dx` over `[a, b]` with breakpoints, shifting by the
/// largest value of `g` on a probe grid so the integrand stays in range.
pub fn integrate_log<F: Fn(f64) -> f64>(g: F, breaks: &[f64], rel_tol: f64) -> f64 {
    let mut pts: Vec<f64> = breaks.to_vec();
    pts.sort_by(f64::total_cmp);
    let mut shift = f64::NEG_INFINITY;
    for w in pts.windows(2) {
        for i in 0..=200 {
            shift = shift.max(g(w[0] + (w[1] - w[0]) * i as f64 / 200.0));
        }
    }
    integrate(|x| (g(x) - shift).exp(), &pts, rel_tol).ln() + shift
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// `log int exp(-n (b - bhat)^2 / (2 sigma2)) N(b; 0, sigma2 tau^2) db` by
/// quadrature. The peak location only guides the breakpoints.
pub fn log_component_weight_quadrature(tau: f64, bhat: f64, n: usize, sigma2: f64) -> f64 {
    let nf = n as f64;
    let v = sigma2 * tau * tau;
    let g = |b: f64| -nf * (b - bhat) * (b - bhat) / (2.0 * sigma2) - 0.5 * (std::f64::consts::TAU * v).ln() - b * b / (2.0 * v);
    let prior_sd = v.sqrt();
    let lik_sd = (sigma2 / nf).sqrt();
    let peak = nf * tau * tau * bhat / (nf * tau * tau + 1.0);
    let peak_sd = (1.0 / (1.0 / v + nf / sigma2)).sqrt();
    let mut breaks = Vec::new();
    for (c, s) in [(0.0, prior_sd), (bhat, lik_sd), (peak, peak_sd)] {
        for k in [-40.0, -8.0, -2.0, 0.0, 2.0, 8.0, 40.0] {
            breaks.push(c + k * s);
        }
    }
    // Only the window where either factor has mass matters.
    let lo = (-40.0 * prior_sd).max(bhat - 40.0 * lik_sd).min(peak - 40.0 * peak_sd);
    let hi = (40.0 * prior_sd).min(bhat + 40.0 * lik_sd).max(peak + 40.0 * peak_sd);
    breaks.retain(|&b| b >= lo && b <= hi);
    breaks.push(lo);
    breaks.push(hi);
    integrate_log(g, &breaks, 1e-13)
}

/// `P(gamma = 1 | y)` in the orthogonal model from quadrature weights.
pub fn gamma_prob_quadrature(alpha: f64, bhat: f64, n: usize, sigma2: f64, tau0: f64, tau1: f64) -> f64 {
    let l1 = alpha.ln() + log_component_weight_quadrature(tau1, bhat, n, sigma2);
    let l0 = (1.0 - alpha).ln() + log_component_weight_quadrature(tau0, bhat, n, sigma2);
    1.0 / (1.0 + (l0 - l1).exp())
}

/// Orthogonal design with `n` rows and noise variance 1.
pub fn orthogonal_data(n: usize, beta: &[f64], seed: u64) -> Dataset {
    let p = beta.len();
    let mut rng = SeedStream::new(seed).rng();
    let z = DMatrix::from_fn(n, p, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let x = z.qr().q() * (n as f64).sqrt();
    let y = DVector::from_fn(n, |i, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        (0..p).map(|j| x[(i, j)] * beta[j]).sum::<f64>() + e
    });
    Dataset::new(x, y).unwrap()
}

/// `log int N(y; X beta, s I) prod_j N(beta_j; 0, s tau_j^2) IG(s; a, b) ds`.
pub fn joint_log_density_by_quadrature(d: &Dataset, beta: &DVector<f64>, gamma: &ModelIndicator, hp: &Hyperparameters) -> f64 {
    let n = d.n() as f64;
    let resid = (d.y() - d.x() * beta).norm_squared();
    let g = |u: f64| {
        let s = u.exp();
        let lik = -0.5 * n * (std::f64::consts::TAU * s).ln() - resid / (2.0 * s);
        let prior: f64 = (0..beta.len())
            .map(|j| spike_slab_log_density(beta[j], gamma.get(j), s, hp).unwrap())
            .sum();
        let ig = hp.a * hp.b.ln() - ln_gamma(hp.a) - (hp.a + 1.0) * u - hp.b / s;
        lik + prior + ig + u
    };
    let breaks: Vec<f64> = (-60..=60).map(|k| k as f64 * 0.5).collect();
    integrate_log(g, &breaks, 1e-13)
}

/// `log int N(y; 0, s Sigma_gamma) IG(s; a, b) ds` through a dense inverse.
pub fn evidence_by_quadrature(d: &Dataset, gamma: &ModelIndicator, hp: &Hyperparameters) -> f64 {
    let n = d.n();
    let t = DMatrix::from_diagonal(&DVector::from_iterator(gamma.p(), gamma.bits().iter().map(|&g| hp.tau(g).powi(2))));
    let sigma = DMatrix::identity(n, n) + d.x() * t * d.x().transpose();
    let logdet = sigma.determinant().ln();
    let quad = d.y().dot(&(sigma.try_inverse().unwrap() * d.y()));
    let nf = n as f64;
    let g = |u: f64| {
        let s = u.exp();
        let lik = -0.5 * nf * (std::f64::consts::TAU * s).ln() - 0.5 * logdet - quad / (2.0 * s);
        let ig = hp.a * hp.b.ln() - ln_gamma(hp.a) - (hp.a + 1.0) * u - hp.b / s;
        lik + ig + u
    };
    let breaks: Vec<f64> = (-60..=60).map(|k| k as f64 * 0.5).collect();
    integrate_log(g, &breaks, 1e-13)
}

mod support;

use css_core::numeric::logit;
use css_core::orthogonal::*;
use css_core::rng::SeedStream;
use css_core::{classify, AlphaBox, Dataset, Hyperparameters, OddsInterval, Status};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn hp(tau0: f64, tau1: f64) -> Hyperparameters {
    Hyperparameters { tau0, tau1, ..Default::default() }
}

/// Random design with `x'x = n I`.
fn orthogonal_design(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = SeedStream::new(seed).rng();
    let z = DMatrix::from_fn(n, p, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let q = z.qr().q();
    q * (n as f64).sqrt()
}

#[test]
fn quadrature_oracle_self_check() {
    let v = support::integrate(|x| (-0.5 * x * x).exp(), &[-40.0, 0.0, 40.0], 1e-13);
    assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    let v = support::integrate(|x| x * x * x + 1.0, &[0.0, 2.0], 1e-14);
    assert!((v - 6.0).abs() < 1e-13);
    let lv = support::integrate_log(|x| -1e6 * x * x - 700.0, &[-0.1, 0.0, 0.1], 1e-12);
    let want = (std::f64::consts::PI / 1e6).sqrt().ln() - 700.0;
    assert!((lv - want).abs() < 1e-10);
}

#[test]
fn ols_matches_normal_equations() {
    let (n, p) = (50, 5);
    let x = orthogonal_design(n, p, 3);
    let mut rng = SeedStream::new(4).rng();
    let y = DVector::from_fn(n, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let d = Dataset::new(x.clone(), y.clone()).unwrap();
    check_orthogonal(&d).unwrap();
    let got = ols_orthogonal(&d).unwrap();
    let want = (x.transpose() * &x).lu().solve(&(x.transpose() * &y)).unwrap();
    for j in 0..p {
        assert!((got[j] - want[j]).abs() < 1e-10);
    }
}

#[test]
fn non_orthogonal_design_is_refused_with_location() {
    let mut x = orthogonal_design(20, 3, 5);
    x[(0, 1)] += 0.5;
    let d = Dataset::new(x, DVector::zeros(20)).unwrap();
    let err = ols_orthogonal(&d).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("entry ("), "{err}");
}

#[test]
fn shrinkage_triple_matches_golden() {
    let g = support::goldens();
    let h = hp(1e-4, 10.0);
    for (k, name) in [(true, "shrinkage_slab"), (false, "shrinkage_spike")] {
        let c = shrinkage_component(k, 0.3, 100, 1.0, &h).unwrap();
        let want_b = support::f64_at(&g, &["orthogonal", name, "beta_hat"]);
        let want_s = support::f64_at(&g, &["orthogonal", name, "sigma2"]);
        let want_w = support::f64_at(&g, &["orthogonal", name, "log_w"]);
        assert!((c.beta_hat - want_b).abs() <= 1e-14 * want_b.abs().max(1e-300), "{name}");
        assert!((c.sigma2 - want_s).abs() <= 1e-14 * want_s, "{name}");
        assert!((c.log_w - want_w).abs() < 1e-13, "{name}");
    }
}

#[test]
fn shrinkage_limits() {
    let h = hp(1e-6, 5.0);
    let c = shrinkage_component(false, 0.3, 100, 1.0, &h).unwrap();
    assert!(c.beta_hat.abs() < 1e-9);
    let c = shrinkage_component(true, 0.3, 1_000_000, 1.0, &h).unwrap();
    assert!((c.beta_hat - 0.3).abs() < 1e-7);
    assert!(shrinkage_component(true, 0.3, 0, 1.0, &h).is_err());
    assert!(shrinkage_component(true, 0.3, 10, 0.0, &h).is_err());
}

#[test]
fn gamma_prob_matches_golden_and_quadrature() {
    let g = support::goldens();
    let h = hp(1e-4, 10.0);
    let w1 = shrinkage_component(true, 0.5, 100, 1.0, &h).unwrap().log_w;
    let w0 = shrinkage_component(false, 0.5, 100, 1.0, &h).unwrap().log_w;
    let got = gamma_posterior_prob(0.5, w1, w0);
    let want = support::f64_at(&g, &["orthogonal", "gamma_prob_bhat05_alpha05"]);
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    let quad = support::gamma_prob_quadrature(0.5, 0.5, 100, 1.0, 1e-4, 10.0);
    assert!((got - quad).abs() < 1e-8, "{got} vs {quad}");
    // The closed-form weights equal the frozen high-precision integrals.
    assert!((w1 - support::f64_at(&g, &["orthogonal", "log_w1_bhat05_by_quadrature"])).abs() < 1e-10);
    assert!((w0 - support::f64_at(&g, &["orthogonal", "log_w0_bhat05_by_quadrature"])).abs() < 1e-10);
}

#[test]
fn gamma_prob_edge_cases() {
    assert!((gamma_posterior_prob(0.3, -1.0, -1.0) - 0.3).abs() < 1e-15);
    let p = gamma_posterior_prob(0.5, 0.0, -2000.0);
    assert!(p > 0.0 && p <= 1.0);
    let p = gamma_posterior_prob(0.5, -2000.0, 0.0);
    assert!((0.0..1.0).contains(&p));
}

#[test]
fn odds_interval_endpoints_match_grid_search() {
    let h = hp(1e-4, 10.0);
    let w1 = shrinkage_component(true, 0.5, 100, 1.0, &h).unwrap().log_w;
    let w0 = shrinkage_component(false, 0.5, 100, 1.0, &h).unwrap().log_w;
    let iv = odds_interval((0.05, 0.95), w1, w0).unwrap();
    let grid: Vec<f64> = (0..=1002).map(|i| 0.05 + 0.9 * i as f64 / 1002.0).collect();
    let odds: Vec<f64> = grid.iter().map(|&a| log_posterior_odds(a, w1, w0)).collect();
    let mn = odds.iter().cloned().fold(f64::INFINITY, f64::min);
    let mx = odds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((iv.lower() - mn.exp()).abs() < 1e-12 * iv.lower());
    assert!((iv.upper() - mx.exp()).abs() < 1e-12 * iv.upper());
    assert!(odds_interval((0.5, 0.4), w1, w0).is_err());
    assert!(odds_interval((0.0, 0.4), w1, w0).is_err());
}

#[test]
fn degenerate_interval_is_point_odds() {
    let iv = odds_interval((0.3, 0.3), -1.0, -2.0).unwrap();
    assert_eq!(iv.log_lower, iv.log_upper);
    assert!((iv.log_lower - (logit(0.3) + 1.0)).abs() < 1e-15);
}

#[test]
fn classification_cases() {
    assert_eq!(classify(&OddsInterval::from_odds(1.2, 3.0)), Status::Active);
    assert_eq!(classify(&OddsInterval::from_odds(0.2, 0.9)), Status::Inactive);
    assert_eq!(classify(&OddsInterval::from_odds(0.5, 2.0)), Status::Indeterminate);
    assert_eq!(classify(&OddsInterval::from_odds(1.0, 2.0)), Status::Indeterminate);
    assert_eq!(classify(&OddsInterval::from_odds(0.5, 1.0)), Status::Indeterminate);
}

#[test]
fn cdf_matches_frozen_quadrature() {
    let g = support::goldens();
    let h = hp(1e-4, 10.0);
    let xs = support::vec_at(&g, &["orthogonal", "cdf_points"]);
    for a in ["0.05", "0.5", "0.95"] {
        let want = support::vec_at(&g, &["orthogonal", "cdf_bhat05", a]);
        let post = coefficient_posterior(a.parse().unwrap(), 0.5, 100, 1.0, &h).unwrap();
        for (x, w) in xs.iter().zip(&want) {
            let got = post.cdf(*x);
            assert!((got - w).abs() < 1e-10, "alpha {a} x {x}: {got} vs {w}");
        }
    }
}

#[test]
fn cdf_is_monotone_and_shifts_with_alpha() {
    let h = hp(1e-4, 10.0);
    let lo = coefficient_posterior(0.05, 0.5, 100, 1.0, &h).unwrap();
    let hi = coefficient_posterior(0.95, 0.5, 100, 1.0, &h).unwrap();
    let xs: Vec<f64> = (0..200).map(|i| -1.0 + i as f64 * 0.01).collect();
    for w in xs.windows(2) {
        assert!(lo.cdf(w[1]) >= lo.cdf(w[0]));
    }
    // More prior inclusion mass moves posterior mass away from zero.
    assert!(hi.cdf(0.1) <= lo.cdf(0.1));
}

#[test]
fn mean_moves_with_alpha() {
    let h = hp(1e-4, 10.0);
    let lo = posterior_mean(0.1, 0.3, 100, 1.0, &h).unwrap();
    let hi = posterior_mean(0.9, 0.3, 100, 1.0, &h).unwrap();
    assert!(hi > lo);
    assert_eq!(posterior_mean(0.5, 0.0, 100, 1.0, &h).unwrap(), 0.0);
}

#[test]
fn variance_by_monte_carlo() {
    let h = hp(1e-4, 10.0);
    let post = coefficient_posterior(0.5, 0.5, 100, 1.0, &h).unwrap();
    let mut rng = SeedStream::new(77).rng();
    let draws: Vec<f64> = (0..2_000_000).map(|_| post.sample(&mut rng)).collect();
    let m = draws.iter().sum::<f64>() / draws.len() as f64;
    let dev: Vec<f64> = draws.iter().map(|d| (d - m) * (d - m)).collect();
    let (v, se) = support::mean_se(&dev);
    assert!((v - post.variance()).abs() < 4.0 * se, "{v} vs {} (se {se})", post.variance());
    assert!(posterior_variance(0.5, 0.5, 100, 1.0, &h).unwrap() > 0.0);
}

#[test]
fn threshold_pair_matches_root_finding() {
    let g = support::goldens();
    let h = hp(1e-6, 5.0);
    let (lower, upper) = indeterminacy_region(100, 1.0, &h, 0.05, 0.05).unwrap();
    let want_lo = support::f64_at(&g, &["orthogonal", "threshold_inactive"]);
    let want_hi = support::f64_at(&g, &["orthogonal", "threshold_active"]);
    assert!((lower - want_lo).abs() < 1e-12 * want_lo.abs());
    assert!((upper - want_hi).abs() < 1e-12 * want_hi.abs());
    let mut prev = upper - lower;
    for eps in [0.1, 0.2, 0.3, 0.4, 0.5] {
        let (l, u) = indeterminacy_region(100, 1.0, &h, eps, eps).unwrap();
        assert!(u - l <= prev);
        prev = u - l;
    }
    let (l, u) = indeterminacy_region(100, 1.0, &h, 0.5, 0.5).unwrap();
    assert_eq!(l, u);
    assert!(indeterminacy_region(100, 1.0, &h, 0.0, 0.1).is_err());
    assert!(indeterminacy_region(100, 1.0, &h, 0.6, 0.1).is_err());
}

#[test]
fn simplified_thresholds_approach_full_form() {
    let h = hp(1e-9, 5.0);
    let (l, u) = indeterminacy_region(100, 1.0, &h, 0.05, 0.1).unwrap();
    let (ls, us) = indeterminacy_region_simplified(100, 1.0, 5.0, 0.05, 0.1).unwrap();
    assert!((l - ls).abs() < 1e-12 && (u - us).abs() < 1e-12);
}

#[test]
fn orthogonal_selection_statuses_follow_thresholds() {
    let (n, p) = (100, 4);
    let x = orthogonal_design(n, p, 9);
    let beta = [0.0, 0.2, 0.5, 0.03];
    let mut rng = SeedStream::new(10).rng();
    let y = DVector::from_fn(n, |i, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        (0..p).map(|j| x[(i, j)] * beta[j]).sum::<f64>() + 0.1 * e
    });
    let d = Dataset::new(x, y).unwrap();
    let h = hp(1e-6, 5.0);
    let boxed = AlphaBox::uniform(p, 0.05, 0.95).unwrap();
    let coords = orthogonal_selection(&d, &boxed, 1.0, &h).unwrap();
    let (lower, upper) = indeterminacy_region(n, 1.0, &h, 0.05, 0.05).unwrap();
    for c in coords {
        let b2 = c.beta_hat * c.beta_hat;
        let want = if b2 > upper {
            Status::Active
        } else if b2 < lower {
            Status::Inactive
        } else {
            Status::Indeterminate
        };
        assert_eq!(c.status, want, "beta_hat^2 = {b2}");
    }
}

fn random_params(rng: &mut impl Rng) -> (usize, f64, Hyperparameters, f64) {
    let n = rng.random_range(10..=500);
    let sigma2 = rng.random_range(0.25..4.0);
    let tau0 = 10f64.powf(rng.random_range(-6.0..-3.0));
    let tau1 = rng.random_range(1.0..20.0);
    let bhat = rng.random_range(-3.0..3.0);
    (n, sigma2, hp(tau0, tau1), bhat)
}

#[test]
fn mixture_sampler_matches_closed_form_mean() {
    let mut rng = SeedStream::new(123).rng();
    for _ in 0..5 {
        let (n, s2, h, b) = random_params(&mut rng);
        let a = rng.random_range(0.01..0.99);
        let post = coefficient_posterior(a, b, n, s2, &h).unwrap();
        let draws: Vec<f64> = (0..200_000).map(|_| post.sample(&mut rng)).collect();
        let (m, se) = support::mean_se(&draws);
        assert!((m - post.mean()).abs() <= 4.0 * se + 1e-12, "{m} vs {}", post.mean());
    }
}

proptest! {
    #[test]
    fn mean_monotone_in_alpha(
        bhat in -3.0f64..3.0,
        n in 10usize..500,
        sigma2 in 0.25f64..4.0,
        tau1 in 1.0f64..20.0,
        log_tau0 in -6.0f64..-3.0,
    ) {
        let h = hp(10f64.powf(log_tau0), tau1);
        let means: Vec<f64> = (1..=101)
            .map(|i| posterior_mean(i as f64 / 102.0, bhat, n, sigma2, &h).unwrap())
            .collect();
        for w in means.windows(2) {
            if bhat >= 0.0 {
                prop_assert!(w[1] >= w[0]);
            } else {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }

    #[test]
    fn odds_interval_brackets_interior(
        bhat in -2.0f64..2.0,
        lo in 0.01f64..0.5,
        width in 0.0f64..0.45,
        t in 0.0f64..1.0,
    ) {
        let h = hp(1e-4, 5.0);
        let w1 = shrinkage_component(true, bhat, 100, 1.0, &h).unwrap().log_w;
        let w0 = shrinkage_component(false, bhat, 100, 1.0, &h).unwrap().log_w;
        let hi = lo + width;
        let iv = odds_interval((lo, hi), w1, w0).unwrap();
        let inner = log_posterior_odds(lo + t * (hi - lo), w1, w0);
        prop_assert!(inner >= iv.log_lower - 1e-12 && inner <= iv.log_upper + 1e-12);
    }

    #[test]
    fn variance_is_positive_and_bounded(
        bhat in -3.0f64..3.0,
        alpha in 0.0f64..=1.0,
    ) {
        let h = hp(1e-4, 10.0);
        let post = coefficient_posterior(alpha, bhat, 100, 1.0, &h).unwrap();
        let v = post.variance();
        prop_assert!(v > 0.0);
        let d = post.slab.mean - post.spike.mean;
        prop_assert!(v <= post.slab.variance.max(post.spike.variance) + 0.25 * d * d + 1e-15);
    }

    #[test]
    fn thresholds_cross_unit_odds(
        n in 10usize..500,
        sigma2 in 0.25f64..4.0,
        tau1 in 1.0f64..20.0,
        log_tau0 in -6.0f64..-3.0,
        eps in 0.01f64..0.5,
    ) {
        let h = hp(10f64.powf(log_tau0), tau1);
        let (lower, upper) = indeterminacy_region(n, sigma2, &h, eps, eps).unwrap();
        let odds_at = |alpha: f64, b2: f64| {
            let b = b2.max(0.0).sqrt();
            let w1 = shrinkage_component(true, b, n, sigma2, &h).unwrap().log_w;
            let w0 = shrinkage_component(false, b, n, sigma2, &h).unwrap().log_w;
            log_posterior_odds(alpha, w1, w0)
        };
        prop_assert!(upper >= lower - 1e-15);
        prop_assert!(odds_at(eps, upper).abs() < 1e-8);
        if lower > 0.0 {
            prop_assert!(odds_at(1.0 - eps, lower).abs() < 1e-8);
        }
    }
}

mod support;

use css_core::exact::enumerate_posterior;
use css_core::gibbs::{ChainConfig, Schedule};
use css_core::odds::Status;
use css_core::orthogonal::{gamma_posterior_prob, ols_orthogonal, shrinkage_component};
use css_core::pipeline::*;
use css_core::plotdata::*;
use css_core::rng::SeedStream;
use css_core::{AlphaBox, Dataset, Hyperparameters};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

fn schema() -> jsonschema::Validator {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schema/selection-report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(report: &SelectionReport) {
    let v: Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    let validator = schema();
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn quick_chain() -> ChainConfig {
    ChainConfig { iterations: 2_000, burnin: 500, ..Default::default() }
}

#[test]
fn reports_from_every_backend_match_the_schema() {
    let d = support::fixture("golden_p8.csv");
    let alpha = AlphaBox::uniform(8, 0.1, 0.6).unwrap();
    let truth = Truth { beta: support::vec_at(&support::goldens(), &["p8", "beta_true"]), active: vec![0, 3, 5] };
    for backend in [Backend::Exact, Backend::Gibbs] {
        let cfg = FitConfig { backend, chain: quick_chain(), schedule: Schedule::Grid(4), ..Default::default() };
        assert_valid(&fit(&d, &alpha, &cfg, Some(&truth)).unwrap());
        assert_valid(&fit(&d, &alpha, &cfg, None).unwrap());
    }
    let o = support::orthogonal_data(40, &[1.0, 0.0, 0.3], 2);
    let cfg = FitConfig { backend: Backend::Orthogonal, ..Default::default() };
    let report = fit(&o, &AlphaBox::uniform(3, 0.2, 0.8).unwrap(), &cfg, None).unwrap();
    assert!(report.sigma2.is_some());
    assert_valid(&report);
    assert_valid(&fit(&d.standardize(), &alpha, &FitConfig { backend: Backend::Exact, ..Default::default() }, None).unwrap());
}

#[test]
fn schema_rejects_malformed_reports() {
    let d = support::fixture("golden_p3.csv");
    let report = fit(&d, &AlphaBox::uniform(3, 0.2, 0.4).unwrap(), &FitConfig::default(), None).unwrap();
    let mut v: Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    v["covariates"][0]["status"] = Value::from("Maybe");
    assert!(!schema().is_valid(&v));
    let mut v: Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("metrics");
    assert!(!schema().is_valid(&v));
}

#[test]
fn automatic_backend_selection() {
    let o = support::orthogonal_data(30, &[1.0, 0.0], 3);
    let with_var = FitConfig { sigma2: Some(1.0), ..Default::default() };
    assert_eq!(resolve_backend(&o, &with_var).unwrap(), Backend::Orthogonal);
    assert_eq!(resolve_backend(&o, &FitConfig::default()).unwrap(), Backend::Exact);
    let d = support::fixture("golden_p8.csv");
    assert_eq!(resolve_backend(&d, &with_var).unwrap(), Backend::Exact);
    assert_eq!(resolve_backend(&d, &FitConfig { cap: 100, ..Default::default() }).unwrap(), Backend::Gibbs);
    let err = resolve_backend(&d, &FitConfig { backend: Backend::Orthogonal, ..Default::default() }).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let err = resolve_backend(&d, &FitConfig { backend: Backend::Exact, cap: 100, ..Default::default() }).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert_eq!(Backend::parse("gibbs").unwrap(), Backend::Gibbs);
    assert!(Backend::parse("mcmc").is_err());
}

#[test]
fn orthogonal_variance_estimate_needs_more_rows_than_columns() {
    let mut rng = SeedStream::new(1).rng();
    let z = DMatrix::from_fn(4, 4, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let x = z.qr().q() * 2.0;
    let d = Dataset::new(x, DVector::from_element(4, 1.0)).unwrap();
    let err = orthogonal_residual_variance(&d).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let o = support::orthogonal_data(60, &[1.0, 0.0, 0.5], 9);
    let s2 = orthogonal_residual_variance(&o).unwrap();
    assert!((s2 - 1.0).abs() < 0.5);
}

#[test]
fn degenerate_orthogonal_fit_is_the_median_probability_model() {
    let o = support::orthogonal_data(50, &[0.6, 0.0, 0.25, -0.15, 0.05], 4);
    let hp = Hyperparameters { tau0: 1e-4, tau1: 2.0, ..Default::default() };
    let cfg = FitConfig { hp, backend: Backend::Orthogonal, sigma2: Some(1.0), ..Default::default() };
    let report = fit(&o, &AlphaBox::uniform(5, 0.4, 0.4).unwrap(), &cfg, None).unwrap();
    let bhat = ols_orthogonal(&o).unwrap();
    for (j, (&b, cov)) in bhat.iter().zip(&report.covariates).enumerate() {
        let w1 = shrinkage_component(true, b, 50, 1.0, &hp).unwrap().log_w;
        let w0 = shrinkage_component(false, b, 50, 1.0, &hp).unwrap().log_w;
        let p = gamma_posterior_prob(0.4, w1, w0);
        let want = if p > 0.5 { Status::Active } else { Status::Inactive };
        assert_eq!(cov.status, want, "covariate {j}");
        assert_eq!(cov.source, "closed-form");
    }
    assert_eq!(report.metrics.status_counts.indeterminate, 0);
    assert_eq!(report.metrics.model_indeterminacy, 0.0);
}

#[test]
fn gibbs_and_exact_agree_on_clear_cases() {
    let d = support::fixture("golden_p8.csv");
    let alpha = AlphaBox::uniform(8, 0.1, 0.6).unwrap();
    let exact = fit(&d, &alpha, &FitConfig { backend: Backend::Exact, ..Default::default() }, None).unwrap();
    let cfg = FitConfig {
        backend: Backend::Gibbs,
        chain: ChainConfig { iterations: 20_000, burnin: 2_000, ..Default::default() },
        seed: 5,
        ..Default::default()
    };
    let gibbs = fit(&d, &alpha, &cfg, None).unwrap();
    let mut compared = 0;
    for (e, g) in exact.covariates.iter().zip(&gibbs.covariates) {
        assert_eq!(g.source, "gibbs");
        if e.log_odds_lower.abs() >= 0.25 && e.log_odds_upper.abs() >= 0.25 {
            assert_eq!(e.status, g.status, "covariate {}", e.index);
            compared += 1;
        }
    }
    assert!(compared >= 6);
    let post = enumerate_posterior(&d, &[0.1; 8], &Hyperparameters::default(), 1 << 20).unwrap();
    assert!((post.log_inclusion_odds()[0] - exact.configurations[0].log_inclusion_odds[0]).abs() < 1e-12);
}

#[test]
fn reruns_are_byte_identical() {
    let d = support::fixture("golden_p8.csv");
    let alpha = AlphaBox::uniform(8, 0.1, 0.6).unwrap();
    let cfg = FitConfig { backend: Backend::Gibbs, chain: quick_chain(), seed: 31, ..Default::default() };
    let a = fit(&d, &alpha, &cfg, None).unwrap().to_json().unwrap();
    let b = fit(&d, &alpha, &cfg, None).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let parsed = SelectionReport::from_json(&a).unwrap();
    assert_eq!(parsed.to_json().unwrap(), a);
    let other = fit(&d, &alpha, &FitConfig { seed: 32, ..cfg }, None).unwrap().to_json().unwrap();
    assert_ne!(a, other);
}

#[test]
fn truth_can_be_attached_after_fitting() {
    let d = support::fixture("golden_p8.csv");
    let alpha = AlphaBox::uniform(8, 0.1, 0.6).unwrap();
    let cfg = FitConfig { backend: Backend::Exact, ..Default::default() };
    let truth = Truth { beta: support::vec_at(&support::goldens(), &["p8", "beta_true"]), active: vec![0, 3, 5] };
    let direct = fit(&d, &alpha, &cfg, Some(&truth)).unwrap();
    let mut later = fit(&d, &alpha, &cfg, None).unwrap();
    assert!(later.metrics.optimistic.delta_beta.is_none());
    later.apply_truth(Some(&truth)).unwrap();
    assert_eq!(later, direct);
    let table = render_table(&direct);
    assert!(table.contains("model indeterminacy"));
    assert!(table.contains("FA "));
}

#[test]
fn mismatched_inputs_are_domain_errors() {
    let d = support::fixture("golden_p3.csv");
    assert_eq!(fit(&d, &AlphaBox::uniform(4, 0.1, 0.2).unwrap(), &FitConfig::default(), None).unwrap_err().exit_code(), 2);
    let bad = Truth { beta: vec![1.0], active: vec![0] };
    assert!(fit(&d, &AlphaBox::uniform(3, 0.1, 0.2).unwrap(), &FitConfig::default(), Some(&bad)).is_err());
}

#[test]
fn prior_density_series_integrates_to_one() {
    let hp = Hyperparameters { tau0: 1e-4, tau1: 10.0, ..Default::default() };
    let grid = coefficient_grid(1.0, &hp, 20_001);
    let rows = prior_density_series(&[0.5], &grid, 1.0, &hp).unwrap();
    let xs: Vec<f64> = rows.iter().map(|r| r.beta).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.density).collect();
    let mass = trapezoid(&xs, &ys);
    assert!((mass - 1.0).abs() < 1e-4, "{mass}");
    assert_eq!(coefficient_grid(1.0, &hp, DEFAULT_GRID_POINTS).len(), 2 * DEFAULT_GRID_POINTS);
}

#[test]
fn posterior_series_are_consistent() {
    let hp = Hyperparameters { tau0: 1e-4, tau1: 10.0, ..Default::default() };
    let alphas = linspace(0.01, 0.99, 101);
    let moments = posterior_moment_series(&[0.3], &alphas, 100, 1.0, &hp).unwrap();
    for w in moments.windows(2) {
        assert!(w[1].mean >= w[0].mean);
    }
    let grid = linspace(-1.0, 1.5, 2_001);
    let curves = posterior_curve_series(&[0.3], &[0.5], &grid, 100, 1.0, &hp).unwrap();
    for w in curves.windows(2) {
        assert!(w[1].cdf >= w[0].cdf);
    }
    assert!(curves[0].cdf < 1e-6 && curves[curves.len() - 1].cdf > 1.0 - 1e-6);
    let mut buf = Vec::new();
    write_series(&mut buf, &curves[..2]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("beta_hat,alpha,beta,density,cdf\n"));
    assert_eq!(default_alpha_grid().len(), DEFAULT_GRID_POINTS);
}

#[test]
fn indeterminacy_region_closes_at_half() {
    let rows = indeterminacy_series(&[0.05, 0.5], &linspace(1.0, 10.0, 10), 100, 1.0, 1e-4).unwrap();
    assert_eq!(rows.len(), 20);
    for r in &rows {
        assert!(r.lower <= r.upper);
        if r.epsilon == 0.5 {
            assert!((r.upper - r.lower).abs() <= 1e-12 * r.upper.max(1.0));
        } else {
            assert!(r.upper > r.lower);
        }
    }
}

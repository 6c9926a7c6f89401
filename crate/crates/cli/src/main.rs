//! `css`: cautious spike-and-slab variable selection from the command line.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 precondition or capacity
//! error, 3 numeric failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use css_core::data::{
    elicit_alpha_interval_with, generate_synthetic, load_csv, save_csv, AlphaPreset, DatasetMetadata, PValueAdjustment,
    ResponseColumn, SynthSpec, DEFAULT_RIDGE_PENALTY,
};
use css_core::gibbs::{ChainConfig, SamplerKind, Schedule};
use css_core::pipeline::{fit, render_table, Backend, FitConfig, SelectionReport, Truth};
use css_core::plotdata::{
    coefficient_grid, default_alpha_grid, indeterminacy_series, linspace, posterior_curve_series,
    posterior_moment_series, prior_density_series, write_series,
};
use css_core::{AlphaBox, Hyperparameters};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] css_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Json(_) => 1,
            CliError::Core(e) => e.exit_code() as u8,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "css", version, about = "Cautious spike-and-slab variable selection under a box of prior inclusion probabilities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with a truth sidecar.
    Simulate(SimulateArgs),
    /// Fit a dataset and write a selection report.
    Fit(FitArgs),
    /// Summarise the accuracy measures of a report.
    Metrics(MetricsArgs),
    /// Write CSV series for the diagnostic figures of the orthogonal model.
    Plotdata(PlotArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Named regime: dataset1 to dataset4.
    #[arg(long, conflicts_with_all = ["n", "p", "active"])]
    preset: Option<String>,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    p: usize,
    /// Number of nonzero coefficients.
    #[arg(long, default_value_t = 10)]
    active: usize,
    /// Predictor correlation base, `corr^|i-j|`.
    #[arg(long, default_value_t = 0.2)]
    corr: f64,
    /// Noise variance.
    #[arg(long, default_value_t = 4.0)]
    noise_var: f64,
    #[arg(long, env = "CSS_SEED", default_value_t = 0)]
    seed: u64,
    /// Dataset CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Truth sidecar; defaults to `<out stem>.meta.json`.
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args)]
struct PriorArgs {
    #[arg(long, default_value_t = 1e-6)]
    tau0: f64,
    #[arg(long, default_value_t = 5.0)]
    tau1: f64,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long, default_value_t = 0.01)]
    a: f64,
    #[arg(long, default_value_t = 0.01)]
    b: f64,
}

impl PriorArgs {
    fn hyperparameters(&self) -> Result<Hyperparameters> {
        Ok(Hyperparameters::new(self.tau0, self.tau1, self.s, self.a, self.b)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Auto,
    Orthogonal,
    Exact,
    Gibbs,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Collapsed,
    Conditional,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Response column: header name or zero-based index.
    #[arg(long, default_value = "y")]
    response: String,
    /// Fit on the raw columns instead of centred and scaled ones.
    #[arg(long)]
    no_standardize: bool,
    #[arg(long, requires = "alpha_hi")]
    alpha_lo: Option<f64>,
    #[arg(long, requires = "alpha_lo")]
    alpha_hi: Option<f64>,
    /// Named box, e.g. nearVacuous, synthetic1, diabetes.
    #[arg(long, conflicts_with_all = ["alpha_lo", "elicit"])]
    alpha_preset: Option<String>,
    /// Elicit the box from ridge p-values at two cutoffs.
    #[arg(long, conflicts_with = "alpha_lo")]
    elicit: bool,
    #[arg(long, default_value_t = 0.01)]
    p_low: f64,
    #[arg(long, default_value_t = 0.2)]
    p_high: f64,
    #[arg(long, default_value_t = DEFAULT_RIDGE_PENALTY)]
    ridge_penalty: f64,
    /// P-value adjustment for elicitation: bh or none.
    #[arg(long, default_value = "bh")]
    adjust: String,
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, value_enum, default_value = "auto")]
    backend: BackendArg,
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    #[arg(long, default_value_t = 2_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 2)]
    chains: usize,
    #[arg(long, value_enum, default_value = "collapsed")]
    kernel: KernelArg,
    /// Sweep this many points between the box corners instead of the corners only.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, env = "CSS_SEED", default_value_t = 0)]
    seed: u64,
    /// Largest model space the exact backend may enumerate.
    #[arg(long, default_value_t = css_core::exact::DEFAULT_CAP)]
    cap: u64,
    /// Known error variance for the orthogonal backend.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Truth sidecar written by `simulate`.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Report JSON to write; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Report JSON written by `fit`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeriesKind {
    /// Marginal prior density against beta for several alpha.
    Prior,
    /// Posterior density and CDF for several least-squares estimates.
    Posterior,
    /// Posterior mean and variance against alpha.
    Moments,
    /// Indeterminacy thresholds against tau1.
    Indeterminacy,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, value_enum)]
    kind: SeriesKind,
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Comma-separated alpha values.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Comma-separated least-squares estimates.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 1.0])]
    beta_hat: Vec<f64>,
    /// Points per coefficient grid, or per tau1 grid.
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Comma-separated epsilons for the indeterminacy series.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.25, 0.5])]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    tau1_min: f64,
    #[arg(long, default_value_t = 20.0)]
    tau1_max: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Metrics(a) => metrics(a),
        Command::Plotdata(a) => plotdata(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn sidecar_path(data: &Path) -> PathBuf {
    let stem = data.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    data.with_file_name(format!("{stem}.meta.json"))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let spec = match &a.preset {
        Some(name) => SynthSpec::preset(name, a.seed)?,
        None => SynthSpec {
            corr_base: a.corr,
            noise_var: a.noise_var,
            ..SynthSpec::new(a.n, a.p, a.active, a.seed)
        },
    };
    let synth = generate_synthetic(&spec)?;
    save_csv(&a.out, &synth.dataset)?;
    let truth_path = a.truth_out.unwrap_or_else(|| sidecar_path(&a.out));
    DatasetMetadata::for_synthetic(&synth, &spec).save(&truth_path)?;
    println!(
        "wrote {} (n={} p={} active={}) and {}",
        a.out.display(),
        spec.n,
        spec.p,
        spec.n_active,
        truth_path.display()
    );
    Ok(())
}

fn load_truth(path: &Path) -> Result<Truth> {
    let meta = DatasetMetadata::load(path)?;
    match (meta.beta_true, meta.active) {
        (Some(beta), Some(active)) => Ok(Truth { beta, active }),
        _ => Err(CliError::Usage(format!("{} holds no true coefficients", path.display()))),
    }
}

fn build_box(a: &FitArgs, data: &css_core::Dataset) -> Result<(AlphaBox, Option<String>)> {
    let p = data.p();
    if let (Some(lo), Some(hi)) = (a.alpha_lo, a.alpha_hi) {
        return Ok((AlphaBox::uniform(p, lo, hi)?, None));
    }
    if let Some(name) = &a.alpha_preset {
        let preset = AlphaPreset::parse(name)?;
        return Ok((preset.alpha_box(p)?, Some(format!("alpha box from preset {}", preset.name()))));
    }
    if a.elicit {
        let adjust = PValueAdjustment::parse(&a.adjust)?;
        let e = elicit_alpha_interval_with(data, a.p_low, a.p_high, a.ridge_penalty, adjust)?;
        let note = format!(
            "alpha box [{:.4}, {:.4}] elicited from ridge p-values (penalty {}, cutoffs {} and {})",
            e.alpha_lo, e.alpha_hi, e.ridge_penalty, a.p_low, a.p_high
        );
        return Ok((e.alpha_box(p)?, Some(note)));
    }
    Err(CliError::Usage("give --alpha-lo and --alpha-hi, --alpha-preset or --elicit".into()))
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    let data = load_csv(&a.data, &ResponseColumn::parse(&a.response), !a.no_standardize)?;
    let (alpha, note) = build_box(&a, &data)?;
    let truth = a.truth.as_deref().map(load_truth).transpose()?;
    let cfg = FitConfig {
        hp: a.prior.hyperparameters()?,
        backend: match a.backend {
            BackendArg::Auto => Backend::Auto,
            BackendArg::Orthogonal => Backend::Orthogonal,
            BackendArg::Exact => Backend::Exact,
            BackendArg::Gibbs => Backend::Gibbs,
        },
        schedule: a.grid.map_or(Schedule::Endpoints, Schedule::Grid),
        chain: ChainConfig {
            iterations: a.iters,
            burnin: a.burnin,
            thin: a.thin,
            chains: a.chains,
            kind: match a.kernel {
                KernelArg::Collapsed => SamplerKind::Collapsed,
                KernelArg::Conditional => SamplerKind::Conditional,
            },
            keep_trace: false,
        },
        seed: a.seed,
        cap: a.cap,
        sigma2: a.sigma2,
    };
    let mut report = fit(&data, &alpha, &cfg, truth.as_ref())?;
    report.notes.extend(note);
    write_output(a.out.as_deref(), &report.to_json()?)?;
    let table = render_table(&report);
    if a.out.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    Ok(())
}

fn hyphen_map(c: &css_core::decision::Confusion) -> serde_json::Map<String, serde_json::Value> {
    c.hyphenated().into_iter().map(|(k, v)| (k.to_string(), v.into())).collect()
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let mut report = SelectionReport::from_json(&fs::read_to_string(&a.report)?)?;
    match &a.truth {
        Some(path) => report.apply_truth(Some(&load_truth(path)?))?,
        None => eprintln!("warning: no truth given; delta(beta) and false counts are omitted"),
    }
    let m = &report.metrics;
    let extreme = |f: &css_core::pipeline::ExtremeFit| {
        let mut v = json!({
            "configuration": f.configuration,
            "squared_error": f.squared_error,
            "active_set": f.active_set,
            "confusion": hyphen_map(&f.confusion),
        });
        if let Some(d) = f.delta_beta {
            v["delta_beta"] = d.into();
        }
        v
    };
    let out = json!({
        "min_squared_error": m.min_squared_error,
        "max_squared_error": m.max_squared_error,
        "model_indeterminacy": m.model_indeterminacy,
        "status_counts": m.status_counts,
        "optimistic": extreme(&m.optimistic),
        "pessimistic": extreme(&m.pessimistic),
    });
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    write_output(a.out.as_deref(), &text)
}

fn plotdata(a: PlotArgs) -> Result<()> {
    let hp = a.prior.hyperparameters()?;
    let alphas = if a.alpha.is_empty() { default_alpha_grid() } else { a.alpha.clone() };
    let mut buf = Vec::new();
    match a.kind {
        SeriesKind::Prior => {
            let grid = coefficient_grid(a.sigma2, &hp, a.points);
            write_series(&mut buf, &prior_density_series(&alphas, &grid, a.sigma2, &hp)?)?;
        }
        SeriesKind::Posterior => {
            let grid = coefficient_grid(a.sigma2, &hp, a.points);
            write_series(&mut buf, &posterior_curve_series(&a.beta_hat, &alphas, &grid, a.n, a.sigma2, &hp)?)?;
        }
        SeriesKind::Moments => {
            write_series(&mut buf, &posterior_moment_series(&a.beta_hat, &alphas, a.n, a.sigma2, &hp)?)?;
        }
        SeriesKind::Indeterminacy => {
            let tau1s = linspace(a.tau1_min, a.tau1_max, a.points);
            write_series(&mut buf, &indeterminacy_series(&a.eps, &tau1s, a.n, a.sigma2, hp.tau0)?)?;
        }
    }
    let text = String::from_utf8(buf).map_err(|e| CliError::Usage(e.to_string()))?;
    write_output(a.out.as_deref(), &text)
}

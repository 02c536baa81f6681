use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use labelnoise::anchors::{self, power_curves, write_power_curves_csv};
use labelnoise::experiment::{run_grid, ExperimentConfig, GridOptions, TestVariance};
use labelnoise::logistic::{fit_with, Dataset, FitOptions, FittedModel};
use labelnoise::noise::{corrupt_labels, NoiseSpec};
use labelnoise::prior::{prior_exact_test, prior_z_test};
use labelnoise::seed::derive;
use labelnoise::synth::{generate, sample_anchors, GaussianSetup};
use labelnoise::{AnchorSet, Error, Result};

#[derive(Parser)]
#[command(name = "labelnoise", version, about = "Tests for class-conditional label noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a logistic regression and print the model as JSON.
    Fit(FitArgs),
    /// Run the anchor z-test on a dataset.
    Test(TestArgs),
    /// Power of the anchor test, or a power curve sweep.
    Power(PowerArgs),
    /// Test the class prior against a hypothesized value.
    PriorTest(PriorArgs),
    /// Generate a synthetic two-Gaussian dataset and optional anchors.
    Generate(GenerateArgs),
    /// Run the Monte-Carlo experiment grid.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct FitOpts {
    /// Refit with a small ridge penalty when the data are separable.
    #[arg(long)]
    ridge_fallback: bool,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

impl FitOpts {
    fn options(&self) -> FitOptions {
        FitOptions { ridge_fallback: self.ridge_fallback, max_iter: self.max_iter, ..FitOptions::default() }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV: feature columns, label (+1/-1) last.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    fit: FitOpts,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    data: PathBuf,
    /// Anchor CSV: one row per anchor, feature columns only.
    #[arg(long)]
    anchors: PathBuf,
    /// Significance level a.
    #[arg(long = "level", alias = "alpha-level", default_value_t = 0.05)]
    level: f64,
    /// Anchor relaxation δ (overrides any sidecar value).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    fit: FitOpts,
}

#[derive(Args)]
struct PowerArgs {
    /// P(flip | y = +1).
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// P(flip | y = -1).
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Null variance v.
    #[arg(long)]
    v: Option<f64>,
    /// Alternative variance ṽ.
    #[arg(long = "v-tilde")]
    v_tilde: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Number of anchors sharing the given single-anchor variances.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Take v and ṽ from a fitted model (JSON) and an anchor CSV.
    #[arg(long, requires = "anchors")]
    from_model: Option<PathBuf>,
    #[arg(long)]
    anchors: Option<PathBuf>,
    /// Write power curves over β - α ∈ [0, gap_max] to this CSV.
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 0.9)]
    gap_max: f64,
    #[arg(long, default_value_t = 91)]
    points: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorMethodArg {
    Exact,
    Z,
}

#[derive(Args)]
struct PriorArgs {
    #[arg(long, conflicts_with = "data")]
    n: Option<u64>,
    #[arg(long, requires = "n")]
    k_pos: Option<u64>,
    /// Count n and k_pos from a dataset CSV instead.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Hypothesized clean prior π₀.
    #[arg(long)]
    pi0: f64,
    #[arg(long, value_enum, default_value_t = PriorMethodArg::Exact)]
    method: PriorMethodArg,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, env = "LABELNOISE_SEED", default_value_t = 0)]
    seed: u64,
    /// Corrupt labels with CCN(alpha, beta) before writing.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write k anchors on the true boundary to this path.
    #[arg(long)]
    anchors: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 4.0)]
    half_width: f64,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML config; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, env = "LABELNOISE_SEED")]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    delta_grid: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    test_variance: Option<TestVarianceArg>,
    #[arg(long)]
    plots: bool,
    #[arg(long)]
    resume: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestVarianceArg {
    Strict,
    Relaxed,
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read_csv(fs::File::open(path)?)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(p) = out {
        fs::write(p, format!("{text}\n"))?;
    }
    println!("{text}");
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let data = read_dataset(&args.data)?;
    let model = fit_with(&data, &args.fit.options())?;
    eprintln!(
        "fitted {} coefficients in {} iterations (converged: {})",
        model.dim(),
        model.iterations,
        model.converged
    );
    emit(&model, args.out.as_deref())
}

fn cmd_test(args: TestArgs) -> Result<()> {
    let data = read_dataset(&args.data)?;
    let mut anchors = AnchorSet::load(&args.anchors)?;
    if let Some(d) = args.delta {
        anchors = anchors.with_delta(d)?;
    }
    if anchors.dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), got: anchors.dim() });
    }
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {}", args.level)));
    }
    let model = fit_with(&data, &args.fit.options())?;
    let report = anchors::z_test(&model, &anchors, args.level)?;
    emit(&report, args.out.as_deref())?;
    eprintln!("{}", report.verdict());
    Ok(())
}

#[derive(Serialize)]
struct PowerOutput {
    alpha: f64,
    beta: f64,
    v: f64,
    v_tilde: f64,
    k: usize,
    significance: f64,
    power: f64,
}

fn cmd_power(args: PowerArgs) -> Result<()> {
    NoiseSpec::class_conditional(args.alpha, args.beta)?;
    let (v, v_tilde, k) = match (&args.from_model, &args.anchors) {
        (Some(model_path), Some(anchor_path)) => {
            let model: FittedModel = serde_json::from_str(&fs::read_to_string(model_path)?)?;
            let anchors = AnchorSet::load(anchor_path)?;
            let (_, v) = anchors::anchor_mean_and_variance(&model, &anchors)?;
            let quad = model.quad_form(&anchors.mean_point())?;
            (v, anchors::alternative_variance(args.alpha, args.beta, quad)?, 1)
        }
        _ => {
            let need = |x: Option<f64>, name: &str| {
                x.ok_or_else(|| Error::InvalidParameter(format!("--{name} is required without --from-model")))
            };
            (need(args.v, "v")?, need(args.v_tilde, "v-tilde")?, args.k)
        }
    };
    let power = anchors::power_k(args.alpha, args.beta, v, v_tilde, k, args.level)?;
    if let Some(path) = &args.sweep {
        if args.points < 2 || !(args.gap_max > 0.0 && args.gap_max < 1.0) {
            return Err(Error::InvalidParameter("sweep needs points >= 2 and gap_max in (0, 1)".into()));
        }
        let gaps: Vec<f64> = (0..args.points)
            .map(|i| args.gap_max * i as f64 / (args.points - 1) as f64)
            .collect();
        let curves = power_curves(v, v_tilde, args.level, &args.ks, &gaps)?;
        write_power_curves_csv(&curves, std::io::BufWriter::new(fs::File::create(path)?))?;
    }
    emit(
        &PowerOutput { alpha: args.alpha, beta: args.beta, v, v_tilde, k, significance: args.level, power },
        None,
    )?;
    eprintln!("power at level {}: {power:.6}", args.level);
    Ok(())
}

fn cmd_prior(args: PriorArgs) -> Result<()> {
    let (n, k_pos) = match (&args.data, args.n, args.k_pos) {
        (Some(path), _, _) => {
            let data = read_dataset(path)?;
            (data.len() as u64, data.positive_count() as u64)
        }
        (None, Some(n), Some(k)) => (n, k),
        _ => {
            return Err(Error::InvalidParameter("give either --data or both --n and --k-pos".into()))
        }
    };
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {}", args.level)));
    }
    let report = match args.method {
        PriorMethodArg::Exact => prior_exact_test(n, k_pos, args.pi0)?,
        PriorMethodArg::Z => prior_z_test(n, k_pos, args.pi0)?,
    };
    emit(&report, None)?;
    let verdict = if report.reject(args.level) { "reject" } else { "retain" };
    eprintln!("{verdict} H0 (prior = {}) at level {} (p = {:.6})", args.pi0, args.level, report.p_value);
    Ok(())
}

#[derive(Serialize)]
struct GenerateOutput {
    n: usize,
    positives: usize,
    seed: u64,
    alpha: f64,
    beta: f64,
    data: PathBuf,
    anchors: Option<PathBuf>,
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let spec = NoiseSpec::class_conditional(args.alpha, args.beta)?;
    let setup = GaussianSetup::default();
    let clean = generate(&setup, args.n, derive(args.seed, &[1]))?;
    let labels = corrupt_labels(clean.labels(), &spec, derive(args.seed, &[2]))?;
    let data = clean.with_labels(labels)?;
    if let Some(path) = &args.anchors {
        let set = sample_anchors(&setup, args.k, args.delta, args.half_width, derive(args.seed, &[3]))?;
        set.save(path)?;
    }
    data.write_csv(std::io::BufWriter::new(fs::File::create(&args.out)?))?;
    emit(
        &GenerateOutput {
            n: data.len(),
            positives: data.positive_count(),
            seed: args.seed,
            alpha: args.alpha,
            beta: args.beta,
            data: args.out,
            anchors: args.anchors,
        },
        None,
    )
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => ExperimentConfig::from_toml(&fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(r) = args.runs {
        config.runs = r;
    }
    if let Some(s) = args.seed {
        config.root_seed = s;
    }
    if let Some(g) = args.n_grid {
        config.n_grid = g;
    }
    if let Some(g) = args.k_grid {
        config.k_grid = g;
    }
    if let Some(g) = args.delta_grid {
        config.delta_grid = g;
    }
    if let Some(t) = args.test_variance {
        config.test_variance = match t {
            TestVarianceArg::Strict => TestVariance::Strict,
            TestVarianceArg::Relaxed => TestVariance::Relaxed,
        };
    }
    config.validate()?;
    let summary = run_grid(&config, &args.out, GridOptions { plots: args.plots, resume: args.resume })?;
    let failed: usize = summary.cells.iter().map(|c| c.failed).sum();
    eprintln!(
        "{} cells x {} runs written to {} ({failed} failed runs)",
        summary.cells.len(),
        config.runs,
        args.out.display()
    );
    emit(&summary, None)
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Test(a) => cmd_test(a),
        Command::Power(a) => cmd_power(a),
        Command::PriorTest(a) => cmd_prior(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let record = ErrorRecord { error: e.kind(), message: e.to_string(), exit_code: code };
            eprintln!("{}", serde_json::to_string(&record).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(code as u8)
        }
    }
}

//! Monte-Carlo grid over (N, (α, β), k, δ).
//!
//! Each run draws a clean dataset, corrupts a copy with CCN(α, β), fits a
//! logistic model to both, samples anchors, and records the z-test p-value
//! on each fit. Every run is seeded from (root seed, cell coordinates, run
//! index), so results do not depend on worker count or execution order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::anchors::{alternative_variance, z_test, AnchorSet};
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::logistic::{fit_with, FitOptions, FittedModel};
use crate::noise::{corrupt_labels, NoiseSpec};
use crate::seed::derive;
use crate::stats::{mean, BoxStats};
use crate::synth::{generate, sample_anchors, GaussianSetup};
use crate::{anchors, plot};

/// How the z-test treats anchor relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestVariance {
    /// The practitioner does not know δ: always use (1/16)·x̄ᵀĤx̄.
    Strict,
    /// Use the relaxed-anchor variance with the true δ.
    Relaxed,
}

/// Which fit supplies v and ṽ for the analytic power column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerSource {
    Noisy,
    Clean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_grid: Vec<usize>,
    /// (α, β) pairs; α = P(flip | y=+1), β = P(flip | y=-1).
    pub noise_gaps: Vec<(f64, f64)>,
    pub k_grid: Vec<usize>,
    pub delta_grid: Vec<f64>,
    pub runs: usize,
    pub significance: f64,
    pub root_seed: u64,
    /// Anchors are drawn with free coordinates in [-c, c].
    pub anchor_half_width: f64,
    pub setup: GaussianSetup,
    pub test_variance: TestVariance,
    pub power_source: PowerSource,
    pub ridge_fallback: bool,
    /// A cell fails when more than this fraction of its runs fail.
    pub max_failure_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_grid: vec![500, 1000, 2000, 5000],
            noise_gaps: vec![(0.0, 0.05), (0.0, 0.10), (0.0, 0.20)],
            k_grid: vec![1, 2, 4, 8, 16, 32],
            delta_grid: vec![0.0, 0.05, 0.10],
            runs: 500,
            significance: 0.05,
            root_seed: 20_210_601,
            anchor_half_width: 4.0,
            setup: GaussianSetup::default(),
            test_variance: TestVariance::Strict,
            power_source: PowerSource::Noisy,
            ridge_fallback: false,
            max_failure_fraction: 0.05,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_grid.is_empty()
            || self.noise_gaps.is_empty()
            || self.k_grid.is_empty()
            || self.delta_grid.is_empty()
        {
            return bad("every grid must be nonempty".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if let Some(n) = self.n_grid.iter().find(|&&n| n < 2 * (self.setup.features() + 1)) {
            return bad(format!("sample size {n} too small"));
        }
        if self.k_grid.contains(&0) {
            return bad("k must be at least 1".into());
        }
        for &(a, b) in &self.noise_gaps {
            NoiseSpec::class_conditional(a, b)?;
        }
        if let Some(d) = self.delta_grid.iter().find(|d| !(0.0..0.5).contains(*d)) {
            return bad(format!("delta must lie in [0, 0.5), got {d}"));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return bad(format!("significance must lie in (0, 1), got {}", self.significance));
        }
        if self.anchor_half_width.is_nan() || self.anchor_half_width <= 0.0 {
            return bad("anchor_half_width must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return bad("max_failure_fraction must lie in [0, 1]".into());
        }
        self.setup.validate()
    }

    /// All cells in output order: N, then (α, β), then δ, then k.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.n_grid {
            for &(alpha, beta) in &self.noise_gaps {
                for &delta in &self.delta_grid {
                    for &k in &self.k_grid {
                        out.push(Cell { index: out.len(), n, alpha, beta, k, delta });
                    }
                }
            }
        }
        out
    }
}

/// One grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub delta: f64,
}

impl Cell {
    fn seed_keys(&self) -> [u64; 5] {
        [
            self.n as u64,
            self.alpha.to_bits(),
            self.beta.to_bits(),
            self.k as u64,
            self.delta.to_bits(),
        ]
    }

    /// Seed of run `run` in this cell.
    pub fn run_seed(&self, root: u64, run: usize) -> u64 {
        let mut keys = self.seed_keys().to_vec();
        keys.push(run as u64);
        derive(root, &keys)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    CleanFitFailed,
    NoisyFitFailed,
}

/// Per-fit quantities recorded for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub p_value: f64,
    pub eta_bar: f64,
    /// Null variance the test used.
    pub variance: f64,
    /// x̄ᵀĤx̄.
    pub quad: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub ridge_used: f64,
}

impl FitOutcome {
    fn missing() -> Self {
        FitOutcome {
            p_value: f64::NAN,
            eta_bar: f64::NAN,
            variance: f64::NAN,
            quad: f64::NAN,
            iterations: 0,
            grad_norm: f64::NAN,
            ridge_used: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub status: RunStatus,
    pub clean: FitOutcome,
    pub noisy: FitOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub runs: usize,
    pub failed: usize,
    pub clean_box: BoxStats,
    pub noisy_box: BoxStats,
    pub clean_reject_rate: f64,
    pub noisy_reject_rate: f64,
    /// Mean anchor posterior of the clean and noisy fits.
    pub clean_mean_eta: f64,
    pub noisy_mean_eta: f64,
    /// Mean null variance v over successful runs (from the power-source fit).
    pub mean_v: f64,
    /// Mean alternative variance ṽ = [η̃(1-η̃)]²·x̄ᵀĤx̄.
    pub mean_v_tilde: f64,
    /// Analytic power at (mean v, mean ṽ).
    pub analytic_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub records: Vec<RunRecord>,
    pub summary: CellSummary,
}

fn outcome(
    model: &FittedModel,
    anchors: &AnchorSet,
    significance: f64,
) -> Result<FitOutcome> {
    let report = z_test(model, anchors, significance)?;
    Ok(FitOutcome {
        p_value: report.p_value,
        eta_bar: report.eta_bar,
        variance: report.variance,
        quad: model.quad_form(&anchors.mean_point())?,
        iterations: model.iterations,
        grad_norm: model.grad_norm,
        ridge_used: model.ridge_used,
    })
}

fn fit_checked(data: &crate::logistic::Dataset, opts: &FitOptions) -> Result<FittedModel> {
    let m = fit_with(data, opts)?;
    if !m.converged {
        return Err(Error::Numerical(format!(
            "no convergence after {} iterations (gradient {:e})",
            m.iterations, m.grad_norm
        )));
    }
    Ok(m)
}

/// One Monte-Carlo replicate of a cell.
pub fn run_once(config: &ExperimentConfig, cell: &Cell, run: usize) -> Result<RunRecord> {
    let seed = cell.run_seed(config.root_seed, run);
    let clean = generate(&config.setup, cell.n, derive(seed, &[1]))?;
    let spec = NoiseSpec::class_conditional(cell.alpha, cell.beta)?;
    let noisy_labels = corrupt_labels(clean.labels(), &spec, derive(seed, &[2]))?;
    let sampled = sample_anchors(
        &config.setup,
        cell.k,
        cell.delta,
        config.anchor_half_width,
        derive(seed, &[3]),
    )?;
    let anchors = match config.test_variance {
        TestVariance::Strict => sampled.with_delta(0.0)?,
        TestVariance::Relaxed => sampled,
    };
    let opts = FitOptions { ridge_fallback: config.ridge_fallback, ..FitOptions::default() };

    let mut record = RunRecord {
        run,
        status: RunStatus::Ok,
        clean: FitOutcome::missing(),
        noisy: FitOutcome::missing(),
    };
    match fit_checked(&clean, &opts).and_then(|m| outcome(&m, &anchors, config.significance)) {
        Ok(o) => record.clean = o,
        Err(_) => record.status = RunStatus::CleanFitFailed,
    }
    // a corrupted copy can in principle lose a class entirely; count it as a failed fit
    let noisy = clean
        .with_labels(noisy_labels)
        .and_then(|d| fit_checked(&d, &opts))
        .and_then(|m| outcome(&m, &anchors, config.significance));
    match noisy {
        Ok(o) => record.noisy = o,
        Err(_) if record.status == RunStatus::Ok => record.status = RunStatus::NoisyFitFailed,
        Err(_) => {}
    }
    Ok(record)
}

/// Summarize the runs of one cell.
pub fn summarize(config: &ExperimentConfig, cell: &Cell, records: &[RunRecord]) -> Result<CellSummary> {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.status == RunStatus::Ok).collect();
    let failed = records.len() - ok.len();
    let clean_p: Vec<f64> = ok.iter().map(|r| r.clean.p_value).collect();
    let noisy_p: Vec<f64> = ok.iter().map(|r| r.noisy.p_value).collect();
    let rate = |ps: &[f64]| {
        ps.iter().filter(|&&p| p < config.significance).count() as f64 / ps.len() as f64
    };
    let source = |r: &&RunRecord| match config.power_source {
        PowerSource::Noisy => r.noisy,
        PowerSource::Clean => r.clean,
    };
    let mean_of = |f: fn(&RunRecord) -> f64| {
        let xs: Vec<f64> = ok.iter().map(|r| f(r)).collect();
        mean(&xs)
    };
    let (mean_v, mean_v_tilde, analytic_power) = if ok.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let vs: Vec<f64> = ok.iter().map(|r| source(r).variance).collect();
        let quads: Vec<f64> = ok.iter().map(|r| source(r).quad).collect();
        let mean_v = mean(&vs);
        let mean_v_tilde = alternative_variance(cell.alpha, cell.beta, mean(&quads))?;
        let p = anchors::power(cell.alpha, cell.beta, mean_v, mean_v_tilde, config.significance)?;
        (mean_v, mean_v_tilde, p)
    };
    Ok(CellSummary {
        cell: *cell,
        runs: records.len(),
        failed,
        clean_box: BoxStats::from_values(&clean_p).unwrap_or_else(BoxStats::nan),
        noisy_box: BoxStats::from_values(&noisy_p).unwrap_or_else(BoxStats::nan),
        clean_reject_rate: if ok.is_empty() { f64::NAN } else { rate(&clean_p) },
        noisy_reject_rate: if ok.is_empty() { f64::NAN } else { rate(&noisy_p) },
        clean_mean_eta: mean_of(|r| r.clean.eta_bar),
        noisy_mean_eta: mean_of(|r| r.noisy.eta_bar),
        mean_v,
        mean_v_tilde,
        analytic_power,
    })
}

/// Run every replicate of a cell (in parallel) and summarize.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell) -> Result<CellResult> {
    config.validate()?;
    let records = (0..config.runs)
        .into_par_iter()
        .map(|run| run_once(config, cell, run))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(config, cell, &records)?;
    if summary.failed as f64 > config.max_failure_fraction * records.len() as f64 {
        return Err(Error::CellFailed(format!(
            "cell {} (N={}, alpha={}, beta={}, k={}, delta={}): {} of {} runs failed",
            cell.index, cell.n, cell.alpha, cell.beta, cell.k, cell.delta, summary.failed, summary.runs
        )));
    }
    Ok(CellResult { records, summary })
}

/// Output switches for [`run_grid`].
#[derive(Debug, Clone, Copy, Default)]
pub struct GridOptions {
    pub plots: bool,
    /// Reuse cells completed by an earlier invocation with the same config.
    pub resume: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config: ExperimentConfig,
    completed: Vec<usize>,
}

fn part_path(out: &Path, index: usize) -> PathBuf {
    out.join("parts").join(format!("cell_{index:05}.json"))
}

/// Run the whole grid into `out`, writing `runs.csv`, `cells.csv`,
/// `config.toml` and optionally SVG figures.
pub fn run_grid(config: &ExperimentConfig, out: &Path, opts: GridOptions) -> Result<ExperimentSummary> {
    config.validate()?;
    fs::create_dir_all(out.join("parts"))?;
    let manifest_path = out.join("manifest.json");

    let mut manifest = Manifest { config: config.clone(), completed: Vec::new() };
    if opts.resume {
        if let Ok(text) = fs::read_to_string(&manifest_path) {
            let previous: Manifest = serde_json::from_str(&text)?;
            if previous.config != *config {
                return Err(Error::InvalidParameter(
                    "cannot resume: output directory was produced with a different config".into(),
                ));
            }
            manifest.completed = previous.completed;
        }
    }

    let mut results = Vec::new();
    for cell in config.cells() {
        let part = part_path(out, cell.index);
        let cached = if manifest.completed.contains(&cell.index) {
            fs::read_to_string(&part)
                .ok()
                .and_then(|t| serde_json::from_str::<CellResult>(&t).ok())
        } else {
            None
        };
        let result = match cached {
            Some(r) => r,
            None => {
                let r = run_cell(config, &cell)?;
                fs::write(&part, serde_json::to_string(&r)?)?;
                manifest.completed.push(cell.index);
                fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
                r
            }
        };
        results.push(result);
    }

    write_runs_csv(&results, fs::File::create(out.join("runs.csv"))?)?;
    let summaries: Vec<CellSummary> = results.into_iter().map(|r| r.summary).collect();
    write_cells_csv(&summaries, fs::File::create(out.join("cells.csv"))?)?;
    fs::write(out.join("config.toml"), config.to_toml())?;

    if opts.plots {
        for &(alpha, beta) in &config.noise_gaps {
            let svg = plot::box_panels(config, &summaries, alpha, beta);
            fs::write(out.join(format!("boxplots_alpha{alpha}_beta{beta}.svg")), svg)?;
        }
        let gaps: Vec<f64> = (0..=90).map(|i| i as f64 / 100.0).collect();
        let curves = anchors::power_curves(0.1, 0.1, config.significance, &config.k_grid, &gaps)?;
        fs::write(out.join("power_curves.svg"), plot::power_curves(&curves))?;
        anchors::write_power_curves_csv(&curves, fs::File::create(out.join("power_curves.csv"))?)?;
    }

    Ok(ExperimentSummary { config: config.clone(), cells: summaries })
}

const CELL_COLUMNS: &str = "cell,n,alpha,beta,k,delta";

fn cell_prefix(c: &Cell) -> String {
    format!(
        "{},{},{},{},{},{}",
        c.index,
        c.n,
        fmt_f64(c.alpha),
        fmt_f64(c.beta),
        c.k,
        fmt_f64(c.delta)
    )
}

fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Ok => "ok",
        RunStatus::CleanFitFailed => "clean_fit_failed",
        RunStatus::NoisyFitFailed => "noisy_fit_failed",
    }
}

pub fn write_runs_csv<W: Write>(results: &[CellResult], w: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    let fit_cols = |p: &str| {
        ["p", "eta_bar", "variance", "quad", "iterations", "grad_norm", "ridge"]
            .iter()
            .map(|c| format!("{p}_{c}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    writeln!(w, "{CELL_COLUMNS},run,status,{},{}", fit_cols("clean"), fit_cols("noisy"))?;
    let fit_vals = |o: &FitOutcome| {
        format!(
            "{},{},{},{},{},{},{}",
            fmt_f64(o.p_value),
            fmt_f64(o.eta_bar),
            fmt_f64(o.variance),
            fmt_f64(o.quad),
            o.iterations,
            fmt_f64(o.grad_norm),
            fmt_f64(o.ridge_used)
        )
    };
    for res in results {
        let prefix = cell_prefix(&res.summary.cell);
        for r in &res.records {
            writeln!(
                w,
                "{prefix},{},{},{},{}",
                r.run,
                status_name(r.status),
                fit_vals(&r.clean),
                fit_vals(&r.noisy)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_cells_csv<W: Write>(cells: &[CellSummary], w: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    let box_cols = |p: &str| {
        ["q1", "q2", "q3", "whisker_lo", "whisker_hi"]
            .iter()
            .map(|c| format!("{p}_{c}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    writeln!(
        w,
        "{CELL_COLUMNS},runs,failed,{},{},clean_reject_rate,noisy_reject_rate,clean_mean_eta,noisy_mean_eta,mean_v,mean_v_tilde,analytic_power",
        box_cols("clean"),
        box_cols("noisy")
    )?;
    let box_vals = |b: &BoxStats| {
        [b.q1, b.q2, b.q3, b.whisker_lo, b.whisker_hi]
            .iter()
            .map(|&v| fmt_f64(v))
            .collect::<Vec<_>>()
            .join(",")
    };
    for s in cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            cell_prefix(&s.cell),
            s.runs,
            s.failed,
            box_vals(&s.clean_box),
            box_vals(&s.noisy_box),
            fmt_f64(s.clean_reject_rate),
            fmt_f64(s.noisy_reject_rate),
            fmt_f64(s.clean_mean_eta),
            fmt_f64(s.noisy_mean_eta),
            fmt_f64(s.mean_v),
            fmt_f64(s.mean_v_tilde),
            fmt_f64(s.analytic_power)
        )?;
    }
    w.flush()?;
    Ok(())
}

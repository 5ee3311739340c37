//! Configuration-driven experiments: synthetic cohorts, repeated estimation,
//! confidence-interval sweeps and their persisted reports.
//!
//! Seeds are derived as `derive_seed(seed, repetition)` and each path of a
//! repetition uses its own RNG stream, so every (model, H) cell of a table sees
//! the same driving noise for a given repetition and outputs do not depend on
//! thread scheduling.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_cohort, Cohort, EstimationResult, EstimatorConfig};
use crate::fbm::{derive_seed, FbmGrid, FbmSampler, GenerationMethod, HurstParam, Regime};
use crate::inference::{build_interval, variance_proxy, ConfidenceInterval};
use crate::io::{write_csv_rows, write_json, write_paths_file};
use crate::model::{BuiltinModel, ModelChoice, ModelSpec};
use crate::sde::{integrate_with, SamplePath, Scheme};

pub const SCHEMA_VERSION: u32 = 1;

/// Used for the rough-regime proxy when the configuration gives no `theta_max`.
pub const DEFAULT_THETA_MAX: f64 = 10.0;

/// One (model, H) cell of a table run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: ModelChoice,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelChoice,
    pub h: f64,
    pub theta0: f64,
    pub t_final: f64,
    pub x0: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub c_contraction: f64,
    pub d_trunc: f64,
    pub theta_max: Option<f64>,
    /// `alpha` in the nominal level `1 - alpha`.
    pub alpha_level: f64,
    pub output_dir: PathBuf,
    /// Cells for `table1`; defaults to models A, B, C at H = 0.7 and 0.9.
    pub cells: Option<Vec<Cell>>,
    /// Overrides the per-regime default scheme.
    pub scheme: Option<Scheme>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelChoice::Builtin(BuiltinModel::A),
            h: 0.7,
            theta0: 1.0,
            t_final: 1.0,
            x0: 1.0,
            n_steps: 500,
            n_paths: 50,
            repetitions: 100,
            seed: 20_240_601,
            c_contraction: 0.5,
            d_trunc: 0.01,
            theta_max: None,
            alpha_level: 0.05,
            output_dir: PathBuf::from("out"),
            cells: None,
            scheme: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        HurstParam::new(self.h)?;
        FbmGrid::new(self.t_final, self.n_steps)?;
        if self.n_paths == 0 || self.repetitions == 0 {
            return Err(Error::Config("n_paths and repetitions must be positive".into()));
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(Error::Config(format!(
                "alpha_level must lie in (0, 1), got {}",
                self.alpha_level
            )));
        }
        if !self.theta0.is_finite() || !self.x0.is_finite() {
            return Err(Error::Config("theta0 and x0 must be finite".into()));
        }
        if let Some(tm) = self.theta_max {
            if !(tm > 0.0) {
                return Err(Error::Config(format!("theta_max must be positive, got {tm}")));
            }
        }
        if let Some(cells) = &self.cells {
            for c in cells {
                HurstParam::new(c.h)?;
            }
        }
        self.estimator_config().validate()
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            c_contraction: self.c_contraction,
            d_trunc: self.d_trunc,
            ..EstimatorConfig::default()
        }
    }

    pub fn grid(&self) -> Result<FbmGrid> {
        FbmGrid::new(self.t_final, self.n_steps)
    }

    pub fn level(&self) -> f64 {
        1.0 - self.alpha_level
    }

    pub fn table_cells(&self) -> Vec<Cell> {
        self.cells.clone().unwrap_or_else(|| {
            [0.7, 0.9]
                .into_iter()
                .flat_map(|h| {
                    BuiltinModel::ALL.into_iter().map(move |m| Cell {
                        model: ModelChoice::Builtin(m),
                        h,
                    })
                })
                .collect()
        })
    }

    /// `theta_max` for the rough proxy, falling back to [`DEFAULT_THETA_MAX`].
    pub fn theta_max_or_default(&self) -> f64 {
        self.theta_max.unwrap_or_else(|| {
            log::warn!("theta_max not set; using {DEFAULT_THETA_MAX} for the rough-regime proxy");
            DEFAULT_THETA_MAX
        })
    }
}

/// Simulates `n_paths` solutions for repetition `rep`. Path `i` is driven by
/// stream `i` of `derive_seed(seed, rep)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_cohort(
    sampler: &FbmSampler,
    model: &ModelSpec,
    theta0: f64,
    x0: f64,
    n_paths: usize,
    seed: u64,
    rep: u64,
    scheme: Scheme,
) -> Result<Vec<SamplePath>> {
    let rep_seed = derive_seed(seed, rep);
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let fbm = sampler.sample(rep_seed, i);
            integrate_with(model, theta0, x0, &fbm, scheme)
        })
        .collect()
}

/// Estimate plus interval for one cohort.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CohortOutcome {
    pub result: EstimationResult,
    pub interval: ConfidenceInterval,
}

pub fn analyse_cohort(
    paths: &[SamplePath],
    model: &ModelSpec,
    h: HurstParam,
    config: &EstimatorConfig,
    theta_max: Option<f64>,
    level: f64,
) -> Result<CohortOutcome> {
    let cohort = Cohort::new(paths, model, h)?;
    let result = estimate_cohort(&cohort, config)?;
    let (proxy, value) = variance_proxy(&cohort, theta_max)?;
    let interval = build_interval(&result, proxy, value, paths.len(), level)?;
    Ok(CohortOutcome { result, interval })
}

/// One repetition of a table cell. Failed repetitions keep their row with a
/// status message and empty numeric fields.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Row {
    pub model: String,
    pub h: f64,
    pub rep: usize,
    pub status: String,
    pub theta_bar: Option<f64>,
    pub abs_error: Option<f64>,
    pub gate: Option<bool>,
    pub theta_bar_gated: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub covered: Option<bool>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub d_n: Option<f64>,
    pub i_n: Option<f64>,
}

/// Aggregates over the successful repetitions of one cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Summary {
    pub model: String,
    pub h: f64,
    pub n_paths: usize,
    pub repetitions: usize,
    pub failed: usize,
    pub mean_abs_error: f64,
    pub std_abs_error: f64,
    pub gate_pass_rate: f64,
    pub coverage_rate: f64,
    pub non_converged: usize,
    pub generator: GenerationMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<Table1Row>,
    pub summaries: Vec<Table1Summary>,
}

/// Full results for one cell, including the per-repetition estimates.
#[derive(Debug)]
pub struct CellRun {
    pub outcomes: Vec<Result<CohortOutcome>>,
    pub rows: Vec<Table1Row>,
    pub summary: Table1Summary,
}

/// Runs `repetitions` cohorts for one (model, H) cell.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell) -> Result<CellRun> {
    let h = HurstParam::new(cell.h)?;
    let model = cell.model.build()?;
    let grid = config.grid()?;
    let sampler = FbmSampler::new(grid, h)?;
    let scheme = config.scheme.unwrap_or(Scheme::default_for(h.regime()));
    let est = config.estimator_config();
    let theta_max = match h.regime() {
        Regime::Young => None,
        Regime::Rough => Some(config.theta_max_or_default()),
    };
    let outcomes: Vec<Result<CohortOutcome>> = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| {
            let paths = simulate_cohort(
                &sampler,
                &model,
                config.theta0,
                config.x0,
                config.n_paths,
                config.seed,
                rep as u64,
                scheme,
            )?;
            analyse_cohort(&paths, &model, h, &est, theta_max, config.level())
        })
        .collect();
    let name = cell.model.name();
    let rows: Vec<Table1Row> = outcomes
        .iter()
        .enumerate()
        .map(|(rep, o)| table_row(&name, cell.h, rep, config.theta0, o))
        .collect();
    for (rep, o) in outcomes.iter().enumerate() {
        if let Err(e) = o {
            log::warn!("model {name}, H = {}, repetition {rep} failed: {e}", cell.h);
        }
    }
    let summary = summarise(&name, cell.h, config, &rows, sampler.method());
    Ok(CellRun {
        outcomes,
        rows,
        summary,
    })
}

fn table_row(
    model: &str,
    h: f64,
    rep: usize,
    theta0: f64,
    outcome: &Result<CohortOutcome>,
) -> Table1Row {
    match outcome {
        Ok(o) => Table1Row {
            model: model.to_string(),
            h,
            rep,
            status: if o.result.converged { "ok" } else { "not_converged" }.to_string(),
            theta_bar: Some(o.result.theta_bar),
            abs_error: Some((o.result.theta_bar - theta0).abs()),
            gate: Some(o.result.gate.passed),
            theta_bar_gated: Some(o.result.theta_bar_gated),
            ci_lo: Some(o.interval.lower()),
            ci_hi: Some(o.interval.upper()),
            covered: Some(o.interval.contains(theta0)),
            iterations: Some(o.result.iterations),
            converged: Some(o.result.converged),
            d_n: Some(o.result.stats.d_n),
            i_n: Some(o.result.stats.i_n),
        },
        Err(e) => Table1Row {
            model: model.to_string(),
            h,
            rep,
            status: format!("failed: {e}"),
            theta_bar: None,
            abs_error: None,
            gate: None,
            theta_bar_gated: None,
            ci_lo: None,
            ci_hi: None,
            covered: None,
            iterations: None,
            converged: None,
            d_n: None,
            i_n: None,
        },
    }
}

/// Mean and sample standard deviation of the absolute errors of the
/// repetitions that converged.
pub fn summarise(
    model: &str,
    h: f64,
    config: &ExperimentConfig,
    rows: &[Table1Row],
    generator: GenerationMethod,
) -> Table1Summary {
    let ok: Vec<&Table1Row> = rows.iter().filter(|r| r.status == "ok").collect();
    let errors: Vec<f64> = ok.iter().filter_map(|r| r.abs_error).collect();
    let (mean, std) = mean_std(&errors);
    let frac = |pred: &dyn Fn(&Table1Row) -> bool| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().filter(|r| pred(r)).count() as f64 / ok.len() as f64
        }
    };
    Table1Summary {
        model: model.to_string(),
        h,
        n_paths: config.n_paths,
        repetitions: rows.len(),
        failed: rows.len() - ok.len(),
        mean_abs_error: mean,
        std_abs_error: std,
        gate_pass_rate: frac(&|r| r.gate == Some(true)),
        coverage_rate: frac(&|r| r.covered == Some(true)),
        non_converged: rows.iter().filter(|r| r.converged == Some(false)).count(),
        generator,
    }
}

/// Mean and sample (n - 1) standard deviation; NaN where undefined.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    command: &'a str,
    crate_version: &'a str,
    config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    generator: Option<GenerationMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<Scheme>,
}

fn write_manifest(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    generator: Option<GenerationMethod>,
    scheme: Option<Scheme>,
) -> Result<()> {
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            schema_version: SCHEMA_VERSION,
            command,
            crate_version: env!("CARGO_PKG_VERSION"),
            config,
            generator,
            scheme,
        },
    )
}

/// Runs every table cell and writes `table1_rows.csv`, `table1_summary.csv`
/// and `manifest.json` to the output directory.
pub fn cmd_table1(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for cell in config.table_cells() {
        let run = run_cell(config, &cell)?;
        log::info!(
            "model {} H = {}: mean |error| = {:.4}, std = {:.4}, gate rate = {:.2}",
            run.summary.model,
            run.summary.h,
            run.summary.mean_abs_error,
            run.summary.std_abs_error,
            run.summary.gate_pass_rate
        );
        rows.extend(run.rows);
        summaries.push(run.summary);
    }
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    write_csv_rows(&dir.join("table1_rows.csv"), &rows)?;
    write_csv_rows(&dir.join("table1_summary.csv"), &summaries)?;
    write_manifest(dir, "table1", config, None, config.scheme)?;
    Ok(ExperimentReport { rows, summaries })
}

/// One row of an interval sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub theta_bar: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub gate: bool,
}

/// Estimates and intervals from the first `N` paths of one dataset, for
/// `N = 1..=n_paths`; writes `aci_sweep.csv` and `manifest.json`.
pub fn cmd_aci_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let h = HurstParam::new(config.h)?;
    let model = config.model.build()?;
    let sampler = FbmSampler::new(config.grid()?, h)?;
    let scheme = config.scheme.unwrap_or(Scheme::default_for(h.regime()));
    let paths = simulate_cohort(
        &sampler,
        &model,
        config.theta0,
        config.x0,
        config.n_paths,
        config.seed,
        0,
        scheme,
    )?;
    let rows = aci_sweep_rows(&paths, &model, h, config)?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    write_csv_rows(&dir.join("aci_sweep.csv"), &rows)?;
    write_manifest(dir, "aci-sweep", config, Some(sampler.method()), Some(scheme))?;
    Ok(rows)
}

pub fn aci_sweep_rows(
    paths: &[SamplePath],
    model: &ModelSpec,
    h: HurstParam,
    config: &ExperimentConfig,
) -> Result<Vec<SweepRow>> {
    let est = config.estimator_config();
    let theta_max = match h.regime() {
        Regime::Young => None,
        Regime::Rough => Some(config.theta_max_or_default()),
    };
    (1..=paths.len())
        .map(|n| {
            let o = analyse_cohort(&paths[..n], model, h, &est, theta_max, config.level())?;
            Ok(SweepRow {
                n,
                theta_bar: o.result.theta_bar,
                ci_lo: o.interval.lower(),
                ci_hi: o.interval.upper(),
                gate: o.result.gate.passed,
            })
        })
        .collect()
}

/// Simulates one dataset of `n_paths` paths and writes `paths.csv` plus
/// `manifest.json`.
pub fn cmd_simulate(config: &ExperimentConfig) -> Result<Vec<SamplePath>> {
    config.validate()?;
    let h = HurstParam::new(config.h)?;
    let model = config.model.build()?;
    let sampler = FbmSampler::new(config.grid()?, h)?;
    let scheme = config.scheme.unwrap_or(Scheme::default_for(h.regime()));
    let paths = simulate_cohort(
        &sampler,
        &model,
        config.theta0,
        config.x0,
        config.n_paths,
        config.seed,
        0,
        scheme,
    )?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    write_paths_file(&dir.join("paths.csv"), &paths)?;
    write_manifest(dir, "simulate", config, Some(sampler.method()), Some(scheme))?;
    Ok(paths)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub model: String,
    pub h: f64,
    pub n_paths: usize,
    pub result: EstimationResult,
    pub interval: ConfidenceInterval,
}

/// Estimates from a path file. Rough-regime data require `theta_max` in the
/// configuration. Writes `estimate.json` only once everything has succeeded.
pub fn cmd_estimate(dataset: &Path, config: &ExperimentConfig) -> Result<EstimateReport> {
    let h = HurstParam::new(config.h)?;
    if h.regime() == Regime::Rough && config.theta_max.is_none() {
        return Err(Error::Config(
            "estimating rough-regime data requires theta_max".into(),
        ));
    }
    let est = config.estimator_config();
    est.validate()?;
    let model = config.model.build()?;
    let paths = crate::io::read_paths_file(dataset)?;
    let o = analyse_cohort(&paths, &model, h, &est, config.theta_max, config.level())?;
    let report = EstimateReport {
        schema_version: SCHEMA_VERSION,
        model: config.model.name(),
        h: config.h,
        n_paths: paths.len(),
        result: o.result,
        interval: o.interval,
    };
    std::fs::create_dir_all(&config.output_dir)?;
    write_json(&config.output_dir.join("estimate.json"), &report)?;
    Ok(report)
}

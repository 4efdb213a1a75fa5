//! Experiment orchestration: every (strategy, trial) cell of a campaign,
//! the CSV artifacts it produces and the summary statistics.

mod stats;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::falsify::{
    run_strategy, Budget, ExternalSut, FalsifyError, Mode, Objective, SaParams, SearchOptions, SimSut, Strategy,
    SystemUnderTest, TrialResult,
};
use crate::par::Execution;
use crate::sim::perception::PerceptionParams;
use crate::sim::scenario::{urban_parameter_space, urban_scenario, urban_spec_text, ScenarioConfig};
use crate::sim::signal_names;
use crate::stl::{parse, parse_formula, StlError};
use crate::trace::{ParamValuation, ParameterSpace};

pub use stats::{
    fit_truncated_normal, log_normal_cdf, mean, sample_std, sign_test_less, SignTest, StatsError, TruncatedNormalFit,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Falsify(#[from] FalsifyError),
    #[error("specification: {0}")]
    Spec(#[from] StlError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
}

fn config_error(path: &str, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Config { path: path.into(), message: message.into() }
}

/// An external simulator program and its arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalCommand {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
}

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

/// A falsification campaign. Omitted scenario, space, spec and perception
/// fall back to the built-in urban scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub strategies: Vec<Strategy>,
    pub trials: usize,
    pub budget: usize,
    pub per_case_cap: usize,
    /// Trial `k` runs with seed `seed + k`.
    pub seed: u64,
    pub scenario: Option<ScenarioConfig>,
    pub space: Option<ParameterSpace>,
    /// Requirement in the formula text syntax.
    pub spec: Option<String>,
    pub perception: Option<PerceptionParams>,
    pub dt: f64,
    pub horizon: f64,
    /// Perception seed shared by every simulation of the campaign.
    pub sut_seed: u64,
    pub ca_strength: usize,
    pub bins: usize,
    pub ca_candidates: usize,
    pub sa: SaParams,
    pub histogram_bins: usize,
    pub sut_exec: Option<ExternalCommand>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Glancing,
            strategies: default_strategies(),
            trials: 20,
            budget: 200,
            per_case_cap: 50,
            seed: 0,
            scenario: None,
            space: None,
            spec: None,
            perception: None,
            dt: 0.05,
            horizon: 30.0,
            sut_seed: 0,
            ca_strength: 2,
            bins: 4,
            ca_candidates: 50,
            sa: SaParams::default(),
            histogram_bins: 10,
            sut_exec: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON config; errors carry the JSON path.
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| config_error(&e.path().to_string(), e.inner().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.strategies.is_empty() {
            return Err(config_error("strategies", "at least one strategy is required"));
        }
        if self.trials == 0 {
            return Err(config_error("trials", "must be at least 1"));
        }
        self.budget_limits().validate().map_err(|e| config_error("budget", e.to_string()))?;
        crate::sim::validate_timing(self.dt, self.horizon).map_err(|e| config_error("dt", e.to_string()))?;
        if self.histogram_bins == 0 {
            return Err(config_error("histogram_bins", "must be at least 1"));
        }
        self.sa.validate().map_err(|e| config_error("sa", e))?;
        if let Some(s) = &self.scenario {
            s.validate().map_err(|e| config_error("scenario", e.to_string()))?;
        }
        if let Some(p) = &self.perception {
            p.validate().map_err(|e| config_error("perception", e.to_string()))?;
        }
        Ok(())
    }

    pub fn budget_limits(&self) -> Budget {
        Budget { total_sims: self.budget, per_case_cap: self.per_case_cap, trials: self.trials }
    }

    pub fn search_options(&self, execution: Execution) -> SearchOptions {
        SearchOptions {
            ca_strength: self.ca_strength,
            bins: self.bins,
            sa: self.sa.clone(),
            ca_candidates: self.ca_candidates,
            execution,
        }
    }

    pub fn scenario_or_default(&self) -> ScenarioConfig {
        self.scenario.clone().unwrap_or_else(urban_scenario)
    }

    pub fn space_or_default(&self) -> ParameterSpace {
        self.space.clone().unwrap_or_else(urban_parameter_space)
    }

    pub fn spec_text(&self) -> String {
        self.spec.clone().unwrap_or_else(urban_spec_text)
    }

    pub fn objective(&self) -> Objective {
        Objective { mode: self.mode, b_bool: self.scenario_or_default().signals.b_bool }
    }

    /// The system under test described by this config.
    pub fn build_sut(&self) -> Result<Box<dyn SystemUnderTest + Send>, ExperimentError> {
        let text = self.spec_text();
        if let Some(ext) = &self.sut_exec {
            let phi = parse(&text)?;
            return Ok(Box::new(ExternalSut::new(ext.program.clone(), ext.args.clone(), &phi)));
        }
        let scenario = self.scenario_or_default();
        let phi = parse_formula(&text, &signal_names(scenario.agents.len()))?;
        let sut = SimSut::new(
            scenario,
            self.space_or_default(),
            self.perception.clone().unwrap_or_default(),
            &phi,
            self.dt,
            self.horizon,
            self.sut_seed,
        )?;
        Ok(Box::new(sut))
    }
}

/// One (strategy, trial) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub strategy: Strategy,
    pub trial: usize,
    pub seed: u64,
    pub result: TrialResult,
    /// Wall time of each evaluation, aligned with `result.all_evaluations`.
    pub wall_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySummary {
    pub strategy: Strategy,
    /// Best objective of each trial, in trial order.
    pub minima: Vec<f64>,
    pub best_robustness: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub fit: Option<TruncatedNormalFit>,
    pub violations: usize,
    pub total_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub mode: Mode,
    pub space: ParameterSpace,
    /// Ordered by strategy (config order), then trial.
    pub runs: Vec<TrialRun>,
    pub summaries: Vec<StrategySummary>,
}

impl ExperimentReport {
    pub fn any_violation(&self) -> bool {
        self.runs.iter().any(|r| r.result.all_evaluations.iter().any(|e| e.robustness < 0.0))
    }

    pub fn summary(&self, strategy: Strategy) -> Option<&StrategySummary> {
        self.summaries.iter().find(|s| s.strategy == strategy)
    }
}

/// Wraps a SUT to time each evaluation without touching results.
struct Timed<'a> {
    inner: &'a (dyn SystemUnderTest + Send),
    log: std::sync::Mutex<Vec<(ParamValuation, f64)>>,
}

impl SystemUnderTest for Timed<'_> {
    fn evaluate(&self, v: &ParamValuation) -> Result<f64, FalsifyError> {
        let start = Instant::now();
        let r = self.inner.evaluate(v);
        let ms = start.elapsed().as_secs_f64() * 1e3;
        self.log.lock().expect("timing log").push((v.clone(), ms));
        r
    }
}

fn align_timings(result: &TrialResult, mut timings: Vec<(ParamValuation, f64)>) -> Vec<f64> {
    result
        .all_evaluations
        .iter()
        .map(|e| match timings.iter().position(|(v, _)| v == &e.valuation) {
            Some(k) => timings.swap_remove(k).1,
            None => f64::NAN,
        })
        .collect()
}

/// Runs every (strategy, trial) cell of `cfg`. Cells run concurrently when
/// `execution` is parallel; results do not depend on it.
pub fn run_experiment(cfg: &ExperimentConfig, execution: Execution) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let sut = cfg.build_sut()?;
    let space = cfg.space_or_default();
    let objective = cfg.objective();
    let budget = cfg.budget_limits();
    let opts = cfg.search_options(execution);
    let cells: Vec<(Strategy, usize)> =
        cfg.strategies.iter().flat_map(|&s| (0..cfg.trials).map(move |t| (s, t))).collect();
    let outcomes = execution.map_slice(&cells, |&(strategy, trial)| {
        let seed = cfg.seed.wrapping_add(trial as u64);
        let timed = Timed { inner: sut.as_ref(), log: Default::default() };
        let result = run_strategy(strategy, &timed, &space, objective, &budget, &opts, seed)?;
        let wall_ms = align_timings(&result, timed.log.into_inner().expect("timing log"));
        log::info!(
            "{} trial {trial}: best objective {} after {} sims",
            strategy.label(),
            result.best_objective,
            result.sims_used
        );
        Ok::<_, FalsifyError>(TrialRun { strategy, trial, seed, result, wall_ms })
    });
    let runs = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    let summaries = cfg
        .strategies
        .iter()
        .map(|&strategy| summarize(strategy, runs.iter().filter(|r| r.strategy == strategy), cfg.mode))
        .collect();
    Ok(ExperimentReport { mode: cfg.mode, space, runs, summaries })
}

fn summarize<'a>(strategy: Strategy, runs: impl Iterator<Item = &'a TrialRun>, mode: Mode) -> StrategySummary {
    let runs: Vec<&TrialRun> = runs.collect();
    let minima: Vec<f64> = runs.iter().map(|r| r.result.best_objective).collect();
    let best_robustness = runs.iter().map(|r| r.result.best_robustness).collect();
    let fit = match mode {
        Mode::Glancing => fit_truncated_normal(&minima).ok(),
        Mode::Falsify => None,
    };
    StrategySummary {
        strategy,
        mean: mean(&minima),
        std: sample_std(&minima),
        fit,
        violations: runs.iter().filter(|r| r.result.best_robustness < 0.0).count(),
        total_wall_ms: runs.iter().flat_map(|r| r.wall_ms.iter()).filter(|w| w.is_finite()).sum(),
        best_robustness,
        minima,
    }
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Output { path: path.to_path_buf(), message: e.to_string() }
}

fn param_cells(space: &ParameterSpace, v: &ParamValuation) -> Vec<String> {
    let mut cells: Vec<String> =
        space.discrete().iter().map(|p| p.levels[v.discrete_choice[&p.name]].clone()).collect();
    cells.extend(space.continuous().iter().map(|p| v.continuous_value[&p.name].to_string()));
    cells
}

/// Writes one row per simulation: trial, strategy, sim_index, one column
/// per parameter, robustness, objective, wall_ms.
pub fn write_results_csv<W: Write>(report: &ExperimentReport, w: W, with_timing: bool) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["trial", "strategy", "sim_index"].map(String::from).to_vec();
    header.extend(report.space.names().into_iter().map(String::from));
    header.extend(["robustness", "objective"].map(String::from));
    if with_timing {
        header.push("wall_ms".into());
    }
    out.write_record(&header)?;
    for run in &report.runs {
        for (k, e) in run.result.all_evaluations.iter().enumerate() {
            let mut row = vec![run.trial.to_string(), run.strategy.label().to_string(), k.to_string()];
            row.extend(param_cells(&report.space, &e.valuation));
            row.push(e.robustness.to_string());
            row.push(e.objective.to_string());
            if with_timing {
                row.push(format!("{:.3}", run.wall_ms[k]));
            }
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Per-trial minima: strategy, trial, seed, best objective and robustness,
/// simulations used and covering-array size.
pub fn write_trials_csv<W: Write>(report: &ExperimentReport, w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["strategy", "trial", "seed", "best_objective", "best_robustness", "sims_used", "ca_size"])?;
    for r in &report.runs {
        out.write_record([
            r.strategy.label().to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.result.best_objective.to_string(),
            r.result.best_robustness.to_string(),
            r.result.sims_used.to_string(),
            r.result.ca_size.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(report: &ExperimentReport, w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "strategy",
        "trials",
        "mean",
        "std",
        "min",
        "max",
        "fit_mean",
        "fit_std",
        "fit_warning",
        "violations",
        "total_wall_ms",
    ])?;
    for s in &report.summaries {
        let min = s.minima.iter().copied().fold(f64::INFINITY, f64::min);
        let max = s.minima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (fm, fs, warn) = match &s.fit {
            Some(f) => (f.mean.to_string(), f.std.to_string(), f.warning.clone().unwrap_or_default()),
            None => (String::new(), String::new(), String::new()),
        };
        out.write_record([
            s.strategy.label().to_string(),
            s.minima.len().to_string(),
            s.mean.to_string(),
            s.std.to_string(),
            min.to_string(),
            max.to_string(),
            fm,
            fs,
            warn,
            s.violations.to_string(),
            format!("{:.1}", s.total_wall_ms),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Histogram of per-trial minima on bin edges shared by all strategies,
/// with the fitted truncated-normal density at each bin center.
pub fn write_histogram_csv<W: Write>(report: &ExperimentReport, bins: usize, w: W) -> Result<(), csv::Error> {
    let all: Vec<f64> = report.summaries.iter().flat_map(|s| s.minima.iter().copied()).collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let mut hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["strategy", "bin_lo", "bin_hi", "count", "fit_density"])?;
    for s in &report.summaries {
        let mut counts = vec![0usize; bins];
        for &m in &s.minima {
            let k = (((m - lo) / width).floor() as usize).min(bins - 1);
            counts[k] += 1;
        }
        for (k, c) in counts.iter().enumerate() {
            let (a, b) = (lo + k as f64 * width, lo + (k + 1) as f64 * width);
            let density = match &s.fit {
                Some(f) if f.std > 0.0 => truncated_density(0.5 * (a + b), f.mean, f.std).to_string(),
                _ => String::new(),
            };
            out.write_record([s.strategy.label().to_string(), a.to_string(), b.to_string(), c.to_string(), density])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn truncated_density(x: f64, mu: f64, sigma: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let z = (x - mu) / sigma;
    (-0.5 * z * z - log_normal_cdf(mu / sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Writes results.csv, trials.csv, summary.csv and histogram.csv into `dir`.
pub fn write_artifacts(report: &ExperimentReport, dir: &Path, histogram_bins: usize) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
    let open = |name: &str| {
        let p = dir.join(name);
        File::create(&p).map(|f| (f, p.clone())).map_err(|e| output_error(&p, e))
    };
    let (f, p) = open("results.csv")?;
    write_results_csv(report, f, true).map_err(|e| output_error(&p, e))?;
    let (f, p) = open("trials.csv")?;
    write_trials_csv(report, f).map_err(|e| output_error(&p, e))?;
    let (f, p) = open("summary.csv")?;
    write_summary_csv(report, f).map_err(|e| output_error(&p, e))?;
    let (f, p) = open("histogram.csv")?;
    write_histogram_csv(report, histogram_bins, f).map_err(|e| output_error(&p, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(strategies: Vec<Strategy>, trials: usize, budget: usize) -> ExperimentConfig {
        ExperimentConfig {
            strategies,
            trials,
            budget,
            per_case_cap: budget.min(50),
            horizon: 12.0,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn single_cell_single_row() {
        let report = run_experiment(&small(vec![Strategy::GlobalUr], 1, 1), Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&report, &mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("trial,strategy,sim_index,v1.color,"));
        assert!(text.lines().next().unwrap().ends_with("robustness,objective,wall_ms"));
    }

    #[test]
    fn config_errors_carry_json_path() {
        let err = ExperimentConfig::from_json(r#"{"scenario": {"ego": {"x": "far"}}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("scenario.ego.x"), "{msg}");
        let err = ExperimentConfig::from_json(r#"{"strategies": ["sideways"]}"#).unwrap_err();
        assert!(err.to_string().contains("strategies[0]"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"budget": 10, "per_case_cap": 50}"#).unwrap_err();
        assert!(err.to_string().contains("budget"), "{err}");
    }

    #[test]
    fn summary_has_one_row_per_strategy() {
        let cfg = small(Strategy::ALL.to_vec(), 2, 50);
        let report = run_experiment(&cfg, Execution::Parallel).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().contains("mean,std"));
        for s in &report.summaries {
            assert_eq!(s.minima.len(), 2);
            assert!(s.minima.iter().all(|m| *m >= 0.0));
        }
    }

    #[test]
    fn results_recompute_summary_minima() {
        let cfg = small(vec![Strategy::GlobalUr, Strategy::CaUr], 2, 50);
        let report = run_experiment(&cfg, Execution::Parallel).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&report, &mut buf, false).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let headers = rdr.headers().unwrap().clone();
        let obj = headers.iter().position(|h| h == "objective").unwrap();
        let mut best = std::collections::BTreeMap::<(String, String), f64>::new();
        for rec in rdr.records() {
            let rec = rec.unwrap();
            let key = (rec[1].to_string(), rec[0].to_string());
            let v: f64 = rec[obj].parse().unwrap();
            let e = best.entry(key).or_insert(f64::INFINITY);
            *e = e.min(v);
        }
        for s in &report.summaries {
            for (t, m) in s.minima.iter().enumerate() {
                assert_eq!(best[&(s.strategy.label().to_string(), t.to_string())], *m);
            }
        }
    }

    #[test]
    fn artifacts_agree_with_each_other() {
        let cfg = small(vec![Strategy::GlobalUr, Strategy::CaSa], 3, 50);
        let report = run_experiment(&cfg, Execution::Parallel).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_artifacts(&report, dir.path(), 5).unwrap();
        let read = |name: &str| {
            let mut rdr = csv::Reader::from_path(dir.path().join(name)).unwrap();
            rdr.records().map(|r| r.unwrap()).collect::<Vec<_>>()
        };
        let results = read("results.csv");
        let trials = read("trials.csv");
        assert_eq!(trials.len(), 6);
        let sims: usize = trials.iter().map(|r| r[5].parse::<usize>().unwrap()).sum();
        assert_eq!(sims, results.len());
        let histogram = read("histogram.csv");
        assert_eq!(histogram.len(), 2 * 5);
        for s in ["ur", "ca-sa"] {
            let n: usize = histogram.iter().filter(|r| &r[0] == s).map(|r| r[3].parse::<usize>().unwrap()).sum();
            assert_eq!(n, 3, "{s}");
        }
        assert_eq!(read("summary.csv").len(), 2);
    }

    #[test]
    fn falsify_mode_flags_violations() {
        let cfg = ExperimentConfig {
            mode: Mode::Falsify,
            spec: Some("always (v_ego < -1)".into()),
            ..small(vec![Strategy::GlobalUr], 1, 20)
        };
        let report = run_experiment(&cfg, Execution::Sequential).unwrap();
        assert!(report.any_violation());
        assert_eq!(report.runs[0].result.sims_used, 1);
    }
}

//! Test-generation strategies that search a parameter space for runs whose
//! requirement robustness is minimal (falsification) or closest to zero
//! (glancing cases).
//!
//! * Global UR samples the whole space uniformly.
//! * CA+UR simulates a covering array over the discrete parameters and the
//!   binned continuous ones, then resamples the continuous parameters
//!   uniformly inside the best rows.
//! * CA+SA replaces that resampling by simulated annealing.

mod anneal;
mod sut;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covering::{generate_with, verify_coverage, CoveringError, GenerateOptions};
use crate::par::Execution;
use crate::sim::{SimError, SimOutcome};
use crate::stl::{Formula, Monitor, StlError};
use crate::trace::{ParamValuation, ParameterSpace};

pub use anneal::{anneal, reflect, simulated_annealing, SaParams, SaResult};
pub use sut::{ExternalSut, SimSut, SystemUnderTest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FalsifyError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error("covering array: {0}")]
    Covering(String),
    #[error("invalid budget: {0}")]
    Budget(String),
    #[error("invalid strategy options: {0}")]
    Options(String),
    #[error("external system under test failed: {0}")]
    External(String),
}

impl From<CoveringError> for FalsifyError {
    fn from(e: CoveringError) -> Self {
        FalsifyError::Covering(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Minimize robustness; stop at the first violation.
    Falsify,
    /// Minimize the absolute robustness.
    Glancing,
}

/// Maps robustness to the scalar that strategies minimize. Values are
/// capped to `[-b_bool, b_bool]` first so that saturated Boolean atoms do
/// not swamp distance information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub mode: Mode,
    pub b_bool: f64,
}

impl Objective {
    pub fn glancing(b_bool: f64) -> Self {
        Self { mode: Mode::Glancing, b_bool }
    }

    pub fn falsify(b_bool: f64) -> Self {
        Self { mode: Mode::Falsify, b_bool }
    }

    pub fn value(&self, robustness: f64) -> f64 {
        let capped = if robustness.is_nan() { self.b_bool } else { robustness.clamp(-self.b_bool, self.b_bool) };
        match self.mode {
            Mode::Falsify => capped,
            Mode::Glancing => capped.abs(),
        }
    }
}

/// `|R|` of `spec` on the outcome's trace, with `R` capped at `b_bool`.
pub fn glancing_objective(outcome: &SimOutcome, spec: &Formula, b_bool: f64) -> Result<f64, FalsifyError> {
    let r = Monitor::new(spec).robustness_at(&outcome.trace, 0)?;
    Ok(Objective::glancing(b_bool).value(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub total_sims: usize,
    pub per_case_cap: usize,
    pub trials: usize,
}

impl Budget {
    pub fn validate(&self) -> Result<(), FalsifyError> {
        if self.total_sims == 0 {
            return Err(FalsifyError::Budget("total_sims must be at least 1".into()));
        }
        if self.per_case_cap == 0 || self.per_case_cap > self.total_sims {
            return Err(FalsifyError::Budget(format!(
                "per_case_cap {} must lie in [1, total_sims = {}]",
                self.per_case_cap, self.total_sims
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "ur")]
    GlobalUr,
    #[serde(rename = "ca-ur")]
    CaUr,
    #[serde(rename = "ca-sa")]
    CaSa,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::GlobalUr, Strategy::CaUr, Strategy::CaSa];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::GlobalUr => "ur",
            Strategy::CaUr => "ca-ur",
            Strategy::CaSa => "ca-sa",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.label() == s)
    }
}

/// Settings shared by the covering-array strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub ca_strength: usize,
    /// Equal-width bins per continuous parameter in the covering phase.
    pub bins: usize,
    pub sa: SaParams,
    pub ca_candidates: usize,
    pub execution: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { ca_strength: 2, bins: 4, sa: SaParams::default(), ca_candidates: 50, execution: Execution::Parallel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Uniform samples over the whole space.
    Global,
    /// Rows of the covering array.
    Covering,
    /// Continuous search inside one covering-array row.
    Continuation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub valuation: ParamValuation,
    pub robustness: f64,
    pub objective: f64,
    pub phase: Phase,
    /// Covering-array row the evaluation belongs to.
    pub case: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub best_valuation: ParamValuation,
    pub best_objective: f64,
    pub best_robustness: f64,
    pub all_evaluations: Vec<Evaluation>,
    pub sims_used: usize,
    pub ca_size: Option<usize>,
}

/// Collects evaluations and stops the search after the first violation in
/// falsify mode.
struct Log<'a, S: ?Sized> {
    sut: &'a S,
    objective: Objective,
    execution: Execution,
    evals: Vec<Evaluation>,
    halted: bool,
}

impl<'a, S: SystemUnderTest + ?Sized> Log<'a, S> {
    fn new(sut: &'a S, objective: Objective, execution: Execution) -> Self {
        Self { sut, objective, execution, evals: Vec::new(), halted: false }
    }

    fn record(&mut self, valuation: ParamValuation, robustness: f64, phase: Phase, case: Option<usize>) -> f64 {
        let objective = self.objective.value(robustness);
        if self.objective.mode == Mode::Falsify && robustness < 0.0 {
            self.halted = true;
        }
        self.evals.push(Evaluation { valuation, robustness, objective, phase, case });
        objective
    }

    fn one(&mut self, valuation: ParamValuation, phase: Phase, case: Option<usize>) -> Result<f64, FalsifyError> {
        let r = self.sut.evaluate(&valuation)?;
        Ok(self.record(valuation, r, phase, case))
    }

    /// Evaluates a batch; parallel unless the search may halt part way.
    fn batch(&mut self, batch: Vec<(ParamValuation, Option<usize>)>, phase: Phase) -> Result<(), FalsifyError> {
        if self.objective.mode == Mode::Falsify {
            for (v, case) in batch {
                if self.halted {
                    break;
                }
                self.one(v, phase, case)?;
            }
            return Ok(());
        }
        let sut = self.sut;
        let results = self.execution.map_slice(&batch, |(v, _)| sut.evaluate(v));
        for ((v, case), r) in batch.into_iter().zip(results) {
            self.record(v, r?, phase, case);
        }
        Ok(())
    }

    fn finish(self, ca_size: Option<usize>) -> TrialResult {
        let best = self
            .evals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .expect("at least one evaluation");
        let b = &self.evals[best];
        TrialResult {
            best_valuation: b.valuation.clone(),
            best_objective: b.objective,
            best_robustness: b.robustness,
            sims_used: self.evals.len(),
            ca_size,
            all_evaluations: self.evals,
        }
    }
}

fn uniform_levels(space: &ParameterSpace, rng: &mut impl Rng) -> Vec<usize> {
    space.discrete_sizes().into_iter().map(|n| rng.random_range(0..n)).collect()
}

fn uniform_point(space: &ParameterSpace, rng: &mut impl Rng) -> Vec<f64> {
    space
        .continuous_bounds()
        .into_iter()
        .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

fn valuation(space: &ParameterSpace, levels: &[usize], point: &[f64]) -> ParamValuation {
    space.valuation(levels, point).expect("levels and point drawn from the space")
}

/// Seed of the continuation streams, kept apart from the covering-array
/// generator which is seeded with the trial seed itself.
fn continuation_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Uniform random sampling of the whole space.
pub fn run_global_ur<S: SystemUnderTest + ?Sized>(
    sut: &S,
    space: &ParameterSpace,
    objective: Objective,
    budget: &Budget,
    seed: u64,
    execution: Execution,
) -> Result<TrialResult, FalsifyError> {
    budget.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = (0..budget.total_sims)
        .map(|_| {
            let levels = uniform_levels(space, &mut rng);
            let point = uniform_point(space, &mut rng);
            (valuation(space, &levels, &point), None)
        })
        .collect();
    let mut log = Log::new(sut, objective, execution);
    log.batch(batch, Phase::Global)?;
    Ok(log.finish(None))
}

/// Covering array over the discrete parameters and binned continuous ones,
/// with the continuous part of each row set to its bin centers.
struct CoveringPhase {
    levels: Vec<Vec<usize>>,
    points: Vec<Vec<f64>>,
}

fn covering_phase(space: &ParameterSpace, opts: &SearchOptions, seed: u64) -> Result<CoveringPhase, FalsifyError> {
    if opts.bins < 2 && !space.continuous().is_empty() {
        return Err(FalsifyError::Options("bins must be at least 2".into()));
    }
    let v = space.discrete().len();
    let mut domains = space.discrete_sizes();
    domains.extend(std::iter::repeat_n(opts.bins, space.continuous().len()));
    let gen = GenerateOptions { candidates: opts.ca_candidates, execution: opts.execution };
    let ca = generate_with(opts.ca_strength, &domains, seed, gen)?;
    if let Err(missing) = verify_coverage(&ca) {
        return Err(FalsifyError::Covering(format!("generated array misses {} combinations", missing.len())));
    }
    let centers: Vec<Vec<f64>> = space.continuous().iter().map(|c| c.bin_centers(opts.bins)).collect();
    let levels = ca.rows().iter().map(|r| r[..v].to_vec()).collect();
    let points = ca.rows().iter().map(|r| r[v..].iter().zip(&centers).map(|(&b, c)| c[b]).collect()).collect();
    Ok(CoveringPhase { levels, points })
}

fn run_covering<S: SystemUnderTest + ?Sized>(
    sut: &S,
    space: &ParameterSpace,
    objective: Objective,
    budget: &Budget,
    opts: &SearchOptions,
    seed: u64,
    annealing: bool,
) -> Result<TrialResult, FalsifyError> {
    budget.validate()?;
    opts.sa.validate().map_err(FalsifyError::Options)?;
    let ca = covering_phase(space, opts, seed)?;
    let ca_size = ca.levels.len();
    if budget.total_sims < ca_size {
        return Err(FalsifyError::Budget(format!(
            "total_sims {} is smaller than the covering array ({ca_size} rows)",
            budget.total_sims
        )));
    }
    let mut log = Log::new(sut, objective, opts.execution);
    let batch = (0..ca_size).map(|r| (valuation(space, &ca.levels[r], &ca.points[r]), Some(r))).collect();
    log.batch(batch, Phase::Covering)?;
    if log.halted {
        return Ok(log.finish(Some(ca_size)));
    }

    let row_value: Vec<f64> = log.evals.iter().map(|e| e.objective).collect();
    let mut ranking: Vec<usize> = (0..ca_size).collect();
    ranking.sort_by(|&a, &b| row_value[a].total_cmp(&row_value[b]).then(a.cmp(&b)));

    let bounds = space.continuous_bounds();
    let mut remaining = budget.total_sims - ca_size;
    let base = continuation_seed(seed);
    for (rank, &row) in ranking.iter().enumerate() {
        let n = remaining.min(budget.per_case_cap);
        if n == 0 || log.halted {
            break;
        }
        remaining -= n;
        let mut rng = ChaCha8Rng::seed_from_u64(base);
        rng.set_stream(rank as u64);
        let levels = &ca.levels[row];
        if annealing && !bounds.is_empty() {
            let mut stopped = false;
            let step = |point: &[f64]| -> Result<f64, Option<FalsifyError>> {
                if log.halted {
                    stopped = true;
                    return Err(None);
                }
                log.one(valuation(space, levels, point), Phase::Continuation, Some(row)).map_err(Some)
            };
            match anneal(&ca.points[row], row_value[row], step, n, &bounds, &opts.sa, &mut rng) {
                Ok(_) | Err(None) => {}
                Err(Some(e)) => return Err(e),
            }
            if stopped {
                break;
            }
        } else {
            let batch =
                (0..n).map(|_| (valuation(space, levels, &uniform_point(space, &mut rng)), Some(row))).collect();
            log.batch(batch, Phase::Continuation)?;
        }
    }
    Ok(log.finish(Some(ca_size)))
}

/// Covering array, then uniform resampling of the continuous parameters
/// inside the best rows.
pub fn run_ca_ur<S: SystemUnderTest + ?Sized>(
    sut: &S,
    space: &ParameterSpace,
    objective: Objective,
    budget: &Budget,
    opts: &SearchOptions,
    seed: u64,
) -> Result<TrialResult, FalsifyError> {
    run_covering(sut, space, objective, budget, opts, seed, false)
}

/// Covering array, then simulated annealing over the continuous parameters
/// of the best rows, started at each row's bin centers.
pub fn run_ca_sa<S: SystemUnderTest + ?Sized>(
    sut: &S,
    space: &ParameterSpace,
    objective: Objective,
    budget: &Budget,
    opts: &SearchOptions,
    seed: u64,
) -> Result<TrialResult, FalsifyError> {
    run_covering(sut, space, objective, budget, opts, seed, true)
}

pub fn run_strategy<S: SystemUnderTest + ?Sized>(
    strategy: Strategy,
    sut: &S,
    space: &ParameterSpace,
    objective: Objective,
    budget: &Budget,
    opts: &SearchOptions,
    seed: u64,
) -> Result<TrialResult, FalsifyError> {
    match strategy {
        Strategy::GlobalUr => run_global_ur(sut, space, objective, budget, seed, opts.execution),
        Strategy::CaUr => run_ca_ur(sut, space, objective, budget, opts, seed),
        Strategy::CaSa => run_ca_sa(sut, space, objective, budget, opts, seed),
    }
}

//! Systems under test: parameter valuation in, robustness out.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use super::FalsifyError;
use crate::sim::perception::PerceptionParams;
use crate::sim::scenario::ScenarioConfig;
use crate::sim::simulate;
use crate::stl::{Formula, Monitor};
use crate::trace::{ParamValuation, ParameterSpace, Trace};

/// A black-box system whose runs are scored against a requirement.
pub trait SystemUnderTest: Sync {
    /// Runs one simulation and returns the robustness of the requirement
    /// at time 0.
    fn evaluate(&self, valuation: &ParamValuation) -> Result<f64, FalsifyError>;
}

impl<F> SystemUnderTest for F
where
    F: Fn(&ParamValuation) -> Result<f64, FalsifyError> + Sync,
{
    fn evaluate(&self, valuation: &ParamValuation) -> Result<f64, FalsifyError> {
        self(valuation)
    }
}

/// The built-in closed-loop simulator bound to a scenario template.
///
/// The perception seed is fixed for the lifetime of the SUT, so a given
/// valuation always produces the same trace.
#[derive(Debug, Clone)]
pub struct SimSut {
    pub scenario: ScenarioConfig,
    pub space: ParameterSpace,
    pub perception: PerceptionParams,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    monitor: Monitor,
}

impl SimSut {
    pub fn new(
        scenario: ScenarioConfig,
        space: ParameterSpace,
        perception: PerceptionParams,
        spec: &Formula,
        dt: f64,
        horizon: f64,
        seed: u64,
    ) -> Result<Self, FalsifyError> {
        crate::sim::validate_timing(dt, horizon)?;
        scenario.validate()?;
        perception.validate()?;
        let names = crate::sim::signal_names(scenario.agents.len());
        if let Some(unknown) = spec.signals().into_iter().find(|s| !names.contains(s)) {
            return Err(FalsifyError::Stl(crate::stl::StlError::UnknownSignal { name: unknown, offset: 0 }));
        }
        Ok(Self { scenario, space, perception, dt, horizon, seed, monitor: Monitor::new(spec) })
    }

    pub fn run(&self, valuation: &ParamValuation) -> Result<crate::sim::SimOutcome, FalsifyError> {
        let cfg = self.scenario.bind(&self.space, valuation)?;
        Ok(simulate(&cfg, &self.perception, self.dt, self.horizon, self.seed)?)
    }
}

impl SystemUnderTest for SimSut {
    fn evaluate(&self, valuation: &ParamValuation) -> Result<f64, FalsifyError> {
        let out = self.run(valuation)?;
        Ok(self.monitor.robustness_at(&out.trace, 0)?)
    }
}

/// An external simulator run as a subprocess: the valuation is written to
/// its stdin as JSON and a trace in CSV form is read from its stdout.
#[derive(Debug, Clone)]
pub struct ExternalSut {
    pub program: PathBuf,
    pub args: Vec<String>,
    monitor: Monitor,
}

impl ExternalSut {
    pub fn new(program: PathBuf, args: Vec<String>, spec: &Formula) -> Self {
        Self { program, args, monitor: Monitor::new(spec) }
    }

    pub fn run(&self, valuation: &ParamValuation) -> Result<Trace, FalsifyError> {
        let ext = |m: String| FalsifyError::External(format!("{}: {m}", self.program.display()));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ext(e.to_string()))?;
        let input = serde_json::to_vec(valuation).map_err(|e| ext(e.to_string()))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(&input)
            .map_err(|e| ext(format!("writing stdin: {e}")))?;
        let output = child.wait_with_output().map_err(|e| ext(e.to_string()))?;
        if !output.status.success() {
            return Err(ext(format!("exited with {}", output.status)));
        }
        Trace::read_csv(output.stdout.as_slice()).map_err(|e| ext(format!("bad trace: {e}")))
    }
}

impl SystemUnderTest for ExternalSut {
    fn evaluate(&self, valuation: &ParamValuation) -> Result<f64, FalsifyError> {
        let trace = self.run(valuation)?;
        Ok(self.monitor.robustness_at(&trace, 0)?)
    }
}

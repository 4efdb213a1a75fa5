//! Sampled traces, parameter spaces and parameter valuations.
//!
//! A [`Trace`] is stored column-major: one time vector plus one column per
//! named signal. Every constructor validates the trace invariants, so a
//! `Trace` value in hand is always non-empty, strictly increasing in time
//! and free of non-finite samples.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One sample of a trace: a timestamp and the value of every signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub values: BTreeMap<String, f64>,
}

/// A single invariant violation found while validating trace data.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceViolation {
    Empty,
    BadTime { index: usize, time: f64 },
    NonIncreasingTime { index: usize },
    NonFinite { signal: String, index: usize },
    MissingSignal { signal: String, index: usize },
    UnexpectedSignal { signal: String, index: usize },
    DuplicateSignal { signal: String },
    ColumnLength { signal: String, len: usize, expected: usize },
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "trace has no samples"),
            Self::BadTime { index, time } => {
                write!(f, "time {time} at index {index} is negative or non-finite")
            }
            Self::NonIncreasingTime { index } => write!(f, "non-increasing time at index {index}"),
            Self::NonFinite { signal, index } => {
                write!(f, "non-finite value of signal '{signal}' at index {index}")
            }
            Self::MissingSignal { signal, index } => {
                write!(f, "signal '{signal}' missing at index {index}")
            }
            Self::UnexpectedSignal { signal, index } => {
                write!(f, "undeclared signal '{signal}' at index {index}")
            }
            Self::DuplicateSignal { signal } => write!(f, "signal '{signal}' declared twice"),
            Self::ColumnLength { signal, len, expected } => {
                write!(f, "signal '{signal}' has {len} samples, expected {expected}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("invalid trace: {}", join_violations(.0))]
    Invalid(Vec<TraceViolation>),
    #[error("unknown signal '{0}'")]
    UnknownSignal(String),
    #[error("sample index {index} out of range (trace has {len} samples)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("trace csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace csv: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[TraceViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Checks a row-major list of samples against the trace invariants and
/// returns every violation found.
pub fn validate_samples(names: &[String], samples: &[Sample]) -> Result<(), Vec<TraceViolation>> {
    let mut out = Vec::new();
    if samples.is_empty() {
        out.push(TraceViolation::Empty);
    }
    let declared: BTreeSet<&str> = names.iter().map(String::as_str).collect();
    if declared.len() != names.len() {
        let mut seen = BTreeSet::new();
        for n in names {
            if !seen.insert(n.as_str()) {
                out.push(TraceViolation::DuplicateSignal { signal: n.clone() });
            }
        }
    }
    for (i, s) in samples.iter().enumerate() {
        check_time(i, s.time, samples.get(i.wrapping_sub(1)).map(|p| p.time), &mut out);
        for n in names {
            match s.values.get(n) {
                None => out.push(TraceViolation::MissingSignal { signal: n.clone(), index: i }),
                Some(v) if !v.is_finite() => {
                    out.push(TraceViolation::NonFinite { signal: n.clone(), index: i })
                }
                Some(_) => {}
            }
        }
        for k in s.values.keys() {
            if !declared.contains(k.as_str()) {
                out.push(TraceViolation::UnexpectedSignal { signal: k.clone(), index: i });
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn check_time(i: usize, t: f64, prev: Option<f64>, out: &mut Vec<TraceViolation>) {
    if !t.is_finite() || t < 0.0 {
        out.push(TraceViolation::BadTime { index: i, time: t });
    }
    if let Some(p) = prev {
        if !(t > p) {
            out.push(TraceViolation::NonIncreasingTime { index: i });
        }
    }
}

/// A non-empty, time-ordered sequence of samples over a fixed signal set.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    times: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Trace {
    /// Builds a trace from a time vector and one column per signal.
    pub fn from_columns(
        times: Vec<f64>,
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self, TraceError> {
        let trace = Self { times, names, columns };
        trace.validate().map_err(TraceError::Invalid)?;
        Ok(trace)
    }

    pub fn from_samples(names: Vec<String>, samples: &[Sample]) -> Result<Self, TraceError> {
        validate_samples(&names, samples).map_err(TraceError::Invalid)?;
        let times = samples.iter().map(|s| s.time).collect();
        let columns = names
            .iter()
            .map(|n| samples.iter().map(|s| s.values[n]).collect())
            .collect();
        Ok(Self { times, names, columns })
    }

    /// Re-checks every invariant on the stored data.
    pub fn validate(&self) -> Result<(), Vec<TraceViolation>> {
        let mut out = Vec::new();
        if self.times.is_empty() {
            out.push(TraceViolation::Empty);
        }
        if self.columns.len() != self.names.len() {
            out.push(TraceViolation::ColumnLength {
                signal: "<columns>".into(),
                len: self.columns.len(),
                expected: self.names.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for n in &self.names {
            if !seen.insert(n.as_str()) {
                out.push(TraceViolation::DuplicateSignal { signal: n.clone() });
            }
        }
        for (i, &t) in self.times.iter().enumerate() {
            check_time(i, t, i.checked_sub(1).map(|p| self.times[p]), &mut out);
        }
        for (name, col) in self.names.iter().zip(&self.columns) {
            if col.len() != self.times.len() {
                out.push(TraceViolation::ColumnLength {
                    signal: name.clone(),
                    len: col.len(),
                    expected: self.times.len(),
                });
            }
            for (i, v) in col.iter().enumerate() {
                if !v.is_finite() {
                    out.push(TraceViolation::NonFinite { signal: name.clone(), index: i });
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Always false for a constructed trace; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn signal_names(&self) -> &[String] {
        &self.names
    }

    pub fn has_signal(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// The full column of samples for `name`.
    pub fn signal(&self, name: &str) -> Result<&[f64], TraceError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
            .ok_or_else(|| TraceError::UnknownSignal(name.to_string()))
    }

    /// The stored value of `name` at sample `i`, without interpolation.
    pub fn signal_at(&self, name: &str, i: usize) -> Result<f64, TraceError> {
        let col = self.signal(name)?;
        col.get(i)
            .copied()
            .ok_or(TraceError::IndexOutOfRange { index: i, len: col.len() })
    }

    pub fn sample(&self, i: usize) -> Option<Sample> {
        let time = *self.times.get(i)?;
        let values = self
            .names
            .iter()
            .zip(&self.columns)
            .map(|(n, c)| (n.clone(), c[i]))
            .collect();
        Some(Sample { time, values })
    }

    /// Writes the trace as CSV with header `time,<signal1>,...`.
    ///
    /// Values use the shortest round-trip decimal representation, so reading
    /// the file back reproduces every sample bit-exactly.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TraceError> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = Vec::with_capacity(self.names.len() + 1);
        header.push("time");
        header.extend(self.names.iter().map(String::as_str));
        wr.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for i in 0..self.times.len() {
            row.clear();
            row.push(self.times[i].to_string());
            row.extend(self.columns.iter().map(|c| c[i].to_string()));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, TraceError> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rd.headers()?.clone();
        if header.get(0) != Some("time") {
            return Err(TraceError::Format("first column must be 'time'".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parse = |col: usize| -> Result<f64, TraceError> {
                let field = rec.get(col).unwrap_or("");
                field.parse::<f64>().map_err(|_| {
                    TraceError::Format(format!("row {}: bad number '{field}'", row + 1))
                })
            };
            times.push(parse(0)?);
            for (k, c) in columns.iter_mut().enumerate() {
                c.push(parse(k + 1)?);
            }
        }
        Self::from_columns(times, names, columns)
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<(), TraceError> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv_file(path: &Path) -> Result<Self, TraceError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// A finite discrete parameter with symbolic levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteParam {
    pub name: String,
    pub levels: Vec<String>,
}

/// A bounded continuous parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousParam {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl ContinuousParam {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Centers of `bins` equal-width bins over `[lower, upper]`.
    pub fn bin_centers(&self, bins: usize) -> Vec<f64> {
        let w = self.width() / bins as f64;
        (0..bins).map(|b| self.lower + w * (b as f64 + 0.5)).collect()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("parameter '{0}' declared more than once")]
    DuplicateName(String),
    #[error("discrete parameter '{0}' needs at least 2 levels")]
    TooFewLevels(String),
    #[error("continuous parameter '{name}' has lower {lower} >= upper {upper}")]
    EmptyInterval { name: String, lower: f64, upper: f64 },
    #[error("unknown parameter '{0}'")]
    UnknownParam(String),
    #[error("level {index} of '{name}' out of range (domain size {size})")]
    LevelOutOfRange { name: String, index: usize, size: usize },
    #[error("value {value} of '{name}' outside [{lower}, {upper}]")]
    ValueOutOfRange { name: String, value: f64, lower: f64, upper: f64 },
    #[error("parameter '{0}' has no value")]
    Unassigned(String),
}

/// Ordered mixed space of discrete domains and continuous intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct ParameterSpace {
    discrete: Vec<DiscreteParam>,
    continuous: Vec<ContinuousParam>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    #[serde(default)]
    discrete: Vec<DiscreteParam>,
    #[serde(default)]
    continuous: Vec<ContinuousParam>,
}

impl TryFrom<RawSpace> for ParameterSpace {
    type Error = SpaceError;
    fn try_from(r: RawSpace) -> Result<Self, SpaceError> {
        Self::new(r.discrete, r.continuous)
    }
}

impl From<ParameterSpace> for RawSpace {
    fn from(s: ParameterSpace) -> Self {
        Self { discrete: s.discrete, continuous: s.continuous }
    }
}

impl ParameterSpace {
    pub fn new(
        discrete: Vec<DiscreteParam>,
        continuous: Vec<ContinuousParam>,
    ) -> Result<Self, SpaceError> {
        let mut seen = BTreeSet::new();
        for name in discrete.iter().map(|d| &d.name).chain(continuous.iter().map(|c| &c.name)) {
            if !seen.insert(name.clone()) {
                return Err(SpaceError::DuplicateName(name.clone()));
            }
        }
        if let Some(d) = discrete.iter().find(|d| d.levels.len() < 2) {
            return Err(SpaceError::TooFewLevels(d.name.clone()));
        }
        if let Some(c) = continuous.iter().find(|c| !(c.lower < c.upper)) {
            return Err(SpaceError::EmptyInterval {
                name: c.name.clone(),
                lower: c.lower,
                upper: c.upper,
            });
        }
        Ok(Self { discrete, continuous })
    }

    pub fn discrete(&self) -> &[DiscreteParam] {
        &self.discrete
    }

    pub fn continuous(&self) -> &[ContinuousParam] {
        &self.continuous
    }

    pub fn discrete_sizes(&self) -> Vec<usize> {
        self.discrete.iter().map(|d| d.levels.len()).collect()
    }

    pub fn continuous_bounds(&self) -> Vec<(f64, f64)> {
        self.continuous.iter().map(|c| (c.lower, c.upper)).collect()
    }

    /// Parameter names in column order: discrete first, then continuous.
    pub fn names(&self) -> Vec<&str> {
        self.discrete
            .iter()
            .map(|d| d.name.as_str())
            .chain(self.continuous.iter().map(|c| c.name.as_str()))
            .collect()
    }

    /// Builds a valuation from positional discrete levels and continuous values.
    pub fn valuation(&self, levels: &[usize], values: &[f64]) -> Result<ParamValuation, SpaceError> {
        let v = ParamValuation {
            discrete_choice: self
                .discrete
                .iter()
                .zip(levels)
                .map(|(d, &l)| (d.name.clone(), l))
                .collect(),
            continuous_value: self
                .continuous
                .iter()
                .zip(values)
                .map(|(c, &x)| (c.name.clone(), x))
                .collect(),
        };
        self.check(&v)?;
        Ok(v)
    }

    /// Verifies that `v` assigns every parameter a value inside its domain.
    pub fn check(&self, v: &ParamValuation) -> Result<(), SpaceError> {
        for d in &self.discrete {
            let idx = *v
                .discrete_choice
                .get(&d.name)
                .ok_or_else(|| SpaceError::Unassigned(d.name.clone()))?;
            if idx >= d.levels.len() {
                return Err(SpaceError::LevelOutOfRange {
                    name: d.name.clone(),
                    index: idx,
                    size: d.levels.len(),
                });
            }
        }
        for c in &self.continuous {
            let x = *v
                .continuous_value
                .get(&c.name)
                .ok_or_else(|| SpaceError::Unassigned(c.name.clone()))?;
            if !(c.lower..=c.upper).contains(&x) {
                return Err(SpaceError::ValueOutOfRange {
                    name: c.name.clone(),
                    value: x,
                    lower: c.lower,
                    upper: c.upper,
                });
            }
        }
        for k in v.discrete_choice.keys().chain(v.continuous_value.keys()) {
            if !self.discrete.iter().any(|d| &d.name == k)
                && !self.continuous.iter().any(|c| &c.name == k)
            {
                return Err(SpaceError::UnknownParam(k.clone()));
            }
        }
        Ok(())
    }

    /// The symbolic level chosen for a discrete parameter.
    pub fn level_label<'a>(&'a self, v: &ParamValuation, name: &str) -> Option<&'a str> {
        let d = self.discrete.iter().find(|d| d.name == name)?;
        let idx = *v.discrete_choice.get(name)?;
        d.levels.get(idx).map(String::as_str)
    }
}

/// A point of a [`ParameterSpace`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamValuation {
    pub discrete_choice: BTreeMap<String, usize>,
    pub continuous_value: BTreeMap<String, f64>,
}

impl ParamValuation {
    /// Continuous values in the space's declared order.
    pub fn continuous_vector(&self, space: &ParameterSpace) -> Vec<f64> {
        space
            .continuous()
            .iter()
            .map(|c| self.continuous_value.get(&c.name).copied().unwrap_or(c.lower))
            .collect()
    }

    pub fn with_continuous(&self, space: &ParameterSpace, values: &[f64]) -> Self {
        let mut out = self.clone();
        for (c, &x) in space.continuous().iter().zip(values) {
            out.continuous_value.insert(c.name.clone(), x);
        }
        out
    }
}

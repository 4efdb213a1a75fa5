//! Quantitative (robust) semantics over sampled traces.

use super::ast::{Affine, Formula, Interval};
use super::StlError;
use crate::trace::Trace;

/// A formula prepared for repeated robustness evaluation.
///
/// Derived operators are rewritten once into the primitive fragment, and
/// evaluation then follows the primitive clauses only: `true` is `+inf`,
/// predicates are their affine margin, negation flips the sign, disjunction
/// is `max`, next reads index `i + 1` (or `-inf` past the end), and until is
/// the max over admissible `j` of `min(phi2(j), min_{i<=k<j} phi1(k))`.
#[derive(Debug, Clone)]
pub struct Monitor {
    core: Formula,
}

impl Monitor {
    pub fn new(phi: &Formula) -> Self {
        Self { core: phi.desugar() }
    }

    pub fn formula(&self) -> &Formula {
        &self.core
    }

    /// Robustness at sample `i`.
    pub fn robustness_at(&self, trace: &Trace, i: usize) -> Result<f64, StlError> {
        if i >= trace.len() {
            return Err(StlError::IndexOutOfRange { index: i, len: trace.len() });
        }
        value_at(&self.core, trace, i)
    }

    /// Robustness at every sample index.
    pub fn robustness_signal(&self, trace: &Trace) -> Result<Vec<f64>, StlError> {
        signal(&self.core, trace)
    }
}

/// Robustness of `phi` on `trace` at sample `i`.
pub fn robustness(phi: &Formula, trace: &Trace, i: usize) -> Result<f64, StlError> {
    Monitor::new(phi).robustness_at(trace, i)
}

fn affine_signal(expr: &Affine, trace: &Trace) -> Result<Vec<f64>, StlError> {
    let mut out = vec![expr.constant; trace.len()];
    for (name, c) in &expr.terms {
        let col = trace
            .signal(name)
            .map_err(|_| StlError::UnknownSignal { name: name.clone(), offset: 0 })?;
        for (o, v) in out.iter_mut().zip(col) {
            *o += c * v;
        }
    }
    Ok(out)
}

fn affine_at(expr: &Affine, trace: &Trace, i: usize) -> Result<f64, StlError> {
    let mut acc = expr.constant;
    for (name, c) in &expr.terms {
        let v = trace
            .signal_at(name, i)
            .map_err(|_| StlError::UnknownSignal { name: name.clone(), offset: 0 })?;
        acc += c * v;
    }
    Ok(acc)
}

/// Value of a primitive-fragment formula at a single index. Boolean
/// connectives recurse pointwise; temporal operators materialize the full
/// signals of their operands.
fn value_at(f: &Formula, trace: &Trace, i: usize) -> Result<f64, StlError> {
    match f {
        Formula::True => Ok(f64::INFINITY),
        Formula::Pred(p) => affine_at(&p.expr, trace, i),
        Formula::Not(a) => Ok(-value_at(a, trace, i)?),
        Formula::Or(a, b) => Ok(value_at(a, trace, i)?.max(value_at(b, trace, i)?)),
        Formula::Next(a) => {
            if i + 1 < trace.len() {
                value_at(a, trace, i + 1)
            } else {
                Ok(f64::NEG_INFINITY)
            }
        }
        Formula::Until(iv, a, b) => {
            let lhs = signal(a, trace)?;
            let rhs = signal(b, trace)?;
            Ok(until_at(iv, trace.times(), &lhs, &rhs, i))
        }
        other => unreachable!("derived operator {other:?} after desugaring"),
    }
}

fn signal(f: &Formula, trace: &Trace) -> Result<Vec<f64>, StlError> {
    let n = trace.len();
    match f {
        Formula::True => Ok(vec![f64::INFINITY; n]),
        Formula::Pred(p) => affine_signal(&p.expr, trace),
        Formula::Not(a) => Ok(signal(a, trace)?.into_iter().map(|v| -v).collect()),
        Formula::Or(a, b) => {
            let mut l = signal(a, trace)?;
            let r = signal(b, trace)?;
            for (x, y) in l.iter_mut().zip(r) {
                *x = x.max(y);
            }
            Ok(l)
        }
        Formula::Next(a) => {
            let mut s = signal(a, trace)?;
            s.remove(0);
            s.push(f64::NEG_INFINITY);
            Ok(s)
        }
        Formula::Until(iv, a, b) => {
            let lhs = signal(a, trace)?;
            let rhs = signal(b, trace)?;
            Ok((0..n).map(|i| until_at(iv, trace.times(), &lhs, &rhs, i)).collect())
        }
        other => unreachable!("derived operator {other:?} after desugaring"),
    }
}

fn until_at(iv: &Interval, times: &[f64], lhs: &[f64], rhs: &[f64], i: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    // min over lhs[i..j], maintained incrementally as j advances
    let mut prefix_min = f64::INFINITY;
    for j in i..times.len() {
        let d = times[j] - times[i];
        if iv.past(d) {
            break;
        }
        if iv.contains(d) {
            best = best.max(rhs[j].min(prefix_min));
        }
        prefix_min = prefix_min.min(lhs[j]);
        if prefix_min <= best {
            // later candidates are bounded by prefix_min
            break;
        }
    }
    best
}

//! Classical Boolean semantics, evaluated directly on the sugared syntax.
//!
//! This path shares nothing with the robust evaluator except the AST, so it
//! serves as an oracle for the sign of robustness.

use super::ast::{Formula, Interval};
use super::StlError;
use crate::trace::Trace;

/// Whether `phi` holds at sample `i` of `trace`.
pub fn eval_boolean(phi: &Formula, trace: &Trace, i: usize) -> Result<bool, StlError> {
    if i >= trace.len() {
        return Err(StlError::IndexOutOfRange { index: i, len: trace.len() });
    }
    Ok(truth(phi, trace)?[i])
}

fn window<'a>(iv: &'a Interval, times: &'a [f64], i: usize) -> impl Iterator<Item = usize> + 'a {
    (i..times.len()).filter(move |&j| iv.contains(times[j] - times[i]))
}

fn truth(f: &Formula, trace: &Trace) -> Result<Vec<bool>, StlError> {
    let n = trace.len();
    let times = trace.times();
    Ok(match f {
        Formula::True => vec![true; n],
        Formula::Pred(p) => {
            let mut vals = vec![p.expr.constant; n];
            for (name, c) in &p.expr.terms {
                let col = trace
                    .signal(name)
                    .map_err(|_| StlError::UnknownSignal { name: name.clone(), offset: 0 })?;
                for (v, x) in vals.iter_mut().zip(col) {
                    *v += c * x;
                }
            }
            vals.into_iter().map(|v| if p.strict { v > 0.0 } else { v >= 0.0 }).collect()
        }
        Formula::Not(a) => truth(a, trace)?.into_iter().map(|b| !b).collect(),
        Formula::Or(a, b) => zip(truth(a, trace)?, truth(b, trace)?, |x, y| x || y),
        Formula::And(a, b) => zip(truth(a, trace)?, truth(b, trace)?, |x, y| x && y),
        Formula::Implies(a, b) => zip(truth(a, trace)?, truth(b, trace)?, |x, y| !x || y),
        Formula::Next(a) => {
            let s = truth(a, trace)?;
            (0..n).map(|i| i + 1 < n && s[i + 1]).collect()
        }
        Formula::Eventually(iv, a) => {
            let s = truth(a, trace)?;
            (0..n).map(|i| window(iv, times, i).any(|j| s[j])).collect()
        }
        Formula::Always(iv, a) => {
            let s = truth(a, trace)?;
            (0..n).map(|i| window(iv, times, i).all(|j| s[j])).collect()
        }
        Formula::Until(iv, a, b) => {
            let l = truth(a, trace)?;
            let r = truth(b, trace)?;
            (0..n)
                .map(|i| window(iv, times, i).any(|j| r[j] && (i..j).all(|k| l[k])))
                .collect()
        }
        Formula::Release(iv, a, b) => {
            let l = truth(a, trace)?;
            let r = truth(b, trace)?;
            (0..n)
                .map(|i| window(iv, times, i).all(|j| r[j] || (i..j).any(|k| l[k])))
                .collect()
        }
    })
}

fn zip(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

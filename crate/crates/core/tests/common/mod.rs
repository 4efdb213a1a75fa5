//! Random formula/trace generation and brute-force oracles shared by the
//! integration tests.

#![allow(dead_code)]

use falsitav::stl::{Affine, Formula, Interval, Predicate};
use falsitav::trace::Trace;
use rand::Rng;

/// A predicate `s - c >= 0` or `c - s > 0` over one of `signals`, with a
/// threshold on a coarse grid so that ties happen.
pub fn random_predicate(rng: &mut impl Rng, signals: &[&str]) -> Formula {
    let name = signals[rng.random_range(0..signals.len())];
    let c = rng.random_range(-8..=8) as f64 * 0.25;
    let expr = if rng.random_bool(0.5) {
        Affine::signal(name).sub(Affine::constant(c))
    } else {
        Affine::constant(c).sub(Affine::signal(name))
    };
    let p = if rng.random_bool(0.5) { Predicate::ge(expr) } else { Predicate::gt(expr) };
    Formula::pred(p)
}

pub fn random_interval(rng: &mut impl Rng) -> Interval {
    if rng.random_bool(0.25) {
        return Interval::unbounded();
    }
    let lo = [0.0, 0.5, 1.0, 2.0][rng.random_range(0..4)];
    let hi = lo + [0.0, 0.5, 1.0, 3.0, f64::INFINITY][rng.random_range(0..5)];
    Interval {
        lo,
        hi,
        lo_closed: rng.random_bool(0.7) || lo == hi,
        hi_closed: hi.is_finite() && (rng.random_bool(0.7) || lo == hi),
    }
}

/// A formula of nesting depth at most `depth` using every operator.
pub fn random_formula(rng: &mut impl Rng, depth: usize, signals: &[&str]) -> Formula {
    if depth == 0 || rng.random_bool(0.2) {
        return if rng.random_bool(0.05) { Formula::True } else { random_predicate(rng, signals) };
    }
    let sub = |rng: &mut _| random_formula(rng, depth - 1, signals);
    match rng.random_range(0..9) {
        0 => Formula::not(sub(rng)),
        1 => Formula::or(sub(rng), sub(rng)),
        2 => Formula::and(sub(rng), sub(rng)),
        3 => Formula::implies(sub(rng), sub(rng)),
        4 => Formula::next(sub(rng)),
        5 => Formula::eventually(random_interval(rng), sub(rng)),
        6 => Formula::always(random_interval(rng), sub(rng)),
        7 => {
            let iv = random_interval(rng);
            Formula::until(iv, sub(rng), sub(rng))
        }
        _ => {
            let iv = random_interval(rng);
            Formula::release(iv, sub(rng), sub(rng))
        }
    }
}

/// A trace of 1..=`max_len` samples. Times step by multiples of 0.5 so
/// interval endpoints are hit exactly; values sit on a 0.25 grid.
pub fn random_trace(rng: &mut impl Rng, signals: &[&str], max_len: usize) -> Trace {
    let n = rng.random_range(1..=max_len);
    let mut t = rng.random_range(0..4) as f64 * 0.5;
    let mut times = Vec::with_capacity(n);
    for _ in 0..n {
        times.push(t);
        t += rng.random_range(1..=3) as f64 * 0.5;
    }
    let columns = signals
        .iter()
        .map(|_| (0..n).map(|_| rng.random_range(-10..=10) as f64 * 0.25).collect())
        .collect();
    Trace::from_columns(times, signals.iter().map(|s| s.to_string()).collect(), columns).unwrap()
}

fn margins(p: &Predicate, trace: &Trace) -> Vec<f64> {
    (0..trace.len())
        .map(|i| p.expr.constant + p.expr.terms.iter().map(|(s, c)| c * trace.signal_at(s, i).unwrap()).sum::<f64>())
        .collect()
}

fn window<'a>(iv: &'a Interval, times: &'a [f64], i: usize) -> impl Iterator<Item = usize> + 'a {
    (i..times.len()).filter(move |&j| {
        let d = times[j] - times[i];
        let above = if iv.lo_closed { d >= iv.lo } else { d > iv.lo };
        let below = if iv.hi_closed { d <= iv.hi } else { d < iv.hi };
        above && below
    })
}

/// Boolean satisfaction at every sample, straight from the definitions.
pub fn truth(f: &Formula, trace: &Trace) -> Vec<bool> {
    let n = trace.len();
    let times = trace.times();
    let both = |a: &Formula, b: &Formula, op: fn(bool, bool) -> bool| {
        let (l, r) = (truth(a, trace), truth(b, trace));
        (0..n).map(|i| op(l[i], r[i])).collect()
    };
    match f {
        Formula::True => vec![true; n],
        Formula::Pred(p) => margins(p, trace).into_iter().map(|m| if p.strict { m > 0.0 } else { m >= 0.0 }).collect(),
        Formula::Not(a) => truth(a, trace).into_iter().map(|b| !b).collect(),
        Formula::Or(a, b) => both(a, b, |x, y| x || y),
        Formula::And(a, b) => both(a, b, |x, y| x && y),
        Formula::Implies(a, b) => both(a, b, |x, y| !x || y),
        Formula::Next(a) => {
            let s = truth(a, trace);
            (0..n).map(|i| i + 1 < n && s[i + 1]).collect()
        }
        Formula::Eventually(iv, a) => {
            let s = truth(a, trace);
            (0..n).map(|i| window(iv, times, i).any(|j| s[j])).collect()
        }
        Formula::Always(iv, a) => {
            let s = truth(a, trace);
            (0..n).map(|i| window(iv, times, i).all(|j| s[j])).collect()
        }
        Formula::Until(iv, a, b) => {
            let (l, r) = (truth(a, trace), truth(b, trace));
            (0..n).map(|i| window(iv, times, i).any(|j| r[j] && (i..j).all(|k| l[k]))).collect()
        }
        Formula::Release(iv, a, b) => {
            let (l, r) = (truth(a, trace), truth(b, trace));
            (0..n).map(|i| window(iv, times, i).all(|j| r[j] || (i..j).any(|k| l[k]))).collect()
        }
    }
}

pub fn holds(f: &Formula, trace: &Trace, i: usize) -> bool {
    truth(f, trace)[i]
}

/// Robustness at every sample on the sugared syntax, without the monitor's
/// rewriting or early exits.
pub fn rho_signal(f: &Formula, trace: &Trace) -> Vec<f64> {
    let n = trace.len();
    let times = trace.times();
    let both = |a: &Formula, b: &Formula, op: fn(f64, f64) -> f64| {
        let (l, r) = (rho_signal(a, trace), rho_signal(b, trace));
        (0..n).map(|i| op(l[i], r[i])).collect()
    };
    let lo = f64::NEG_INFINITY;
    let hi = f64::INFINITY;
    match f {
        Formula::True => vec![hi; n],
        Formula::Pred(p) => margins(p, trace),
        Formula::Not(a) => rho_signal(a, trace).into_iter().map(|v| -v).collect(),
        Formula::Or(a, b) => both(a, b, f64::max),
        Formula::And(a, b) => both(a, b, f64::min),
        Formula::Implies(a, b) => both(a, b, |x, y| (-x).max(y)),
        Formula::Next(a) => {
            let s = rho_signal(a, trace);
            (0..n).map(|i| if i + 1 < n { s[i + 1] } else { lo }).collect()
        }
        Formula::Eventually(iv, a) => {
            let s = rho_signal(a, trace);
            (0..n).map(|i| window(iv, times, i).map(|j| s[j]).fold(lo, f64::max)).collect()
        }
        Formula::Always(iv, a) => {
            let s = rho_signal(a, trace);
            (0..n).map(|i| window(iv, times, i).map(|j| s[j]).fold(hi, f64::min)).collect()
        }
        Formula::Until(iv, a, b) => {
            let (l, r) = (rho_signal(a, trace), rho_signal(b, trace));
            (0..n)
                .map(|i| window(iv, times, i).map(|j| r[j].min(l[i..j].iter().copied().fold(hi, f64::min))).fold(lo, f64::max))
                .collect()
        }
        Formula::Release(iv, a, b) => {
            let (l, r) = (rho_signal(a, trace), rho_signal(b, trace));
            (0..n)
                .map(|i| window(iv, times, i).map(|j| r[j].max(l[i..j].iter().copied().fold(lo, f64::max))).fold(hi, f64::min))
                .collect()
        }
    }
}

pub fn rho(f: &Formula, trace: &Trace, i: usize) -> f64 {
    rho_signal(f, trace)[i]
}

/// `trace` with `offset(i)` added to signal `name` at every sample.
pub fn shifted(trace: &Trace, name: &str, offset: impl Fn(usize) -> f64) -> Trace {
    let names = trace.signal_names().to_vec();
    let columns = names
        .iter()
        .map(|s| {
            let col = trace.signal(s).unwrap();
            if s == name {
                col.iter().enumerate().map(|(i, v)| v + offset(i)).collect()
            } else {
                col.to_vec()
            }
        })
        .collect();
    Trace::from_columns(trace.times().to_vec(), names, columns).unwrap()
}

//! Descriptive statistics for trial minima.

use statrs::distribution::{Binomial, DiscreteCDF};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("samples must be finite and non-negative")]
    BadSample,
    #[error("paired samples differ in length ({0} vs {1})")]
    Unpaired(usize, usize),
}

/// Maximum-likelihood fit of a normal distribution truncated to `[0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedNormalFit {
    pub mean: f64,
    pub std: f64,
    /// Set when the samples carry no spread information.
    pub warning: Option<String>,
}

/// `ln Phi(x)` without underflow far in the lower tail.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills ratio asymptotics
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

fn log_likelihood(xs: &[f64], mu: f64, sigma: f64) -> f64 {
    let n = xs.len() as f64;
    let ss: f64 = xs.iter().map(|x| ((x - mu) / sigma).powi(2)).sum();
    -0.5 * ss - n * sigma.ln() - n * log_normal_cdf(mu / sigma)
}

/// Maximizes a unimodal-ish `f` on `[lo, hi]`: a coarse grid locates the
/// best cell, golden-section search refines it.
fn maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const GRID: usize = 64;
    let step = (hi - lo) / GRID as f64;
    let (mut best_x, mut best_f) = (lo, f(lo));
    for k in 1..=GRID {
        let x = lo + k as f64 * step;
        let v = f(x);
        if v > best_f {
            best_x = x;
            best_f = v;
        }
    }
    let (mut a, mut b) = ((best_x - step).max(lo), (best_x + step).min(hi));
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (x, v) = if fc > fd { (c, fc) } else { (d, fd) };
    if v >= best_f {
        (x, v)
    } else {
        (best_x, best_f)
    }
}

/// Fits `(mean, std)` of a normal truncated at zero by profile likelihood:
/// the outer search runs over the mean, the inner one over `ln std`.
pub fn fit_truncated_normal(samples: &[f64]) -> Result<TruncatedNormalFit, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: samples.len() });
    }
    if samples.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(StatsError::BadSample);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if samples.iter().all(|&x| x == samples[0]) {
        return Ok(TruncatedNormalFit {
            mean: samples[0],
            std: 0.0,
            warning: Some("all samples equal; spread is undetermined".into()),
        });
    }
    let profile = |mu: f64| -> (f64, f64) {
        maximize(|ls| log_likelihood(samples, mu, ls.exp()), (sd * 1e-2).ln(), (sd * 1e2).ln())
    };
    let (mu, _) = maximize(|mu| profile(mu).1, mean - 20.0 * sd, mean + 5.0 * sd);
    let (log_sigma, _) = profile(mu);
    Ok(TruncatedNormalFit { mean: mu, std: log_sigma.exp(), warning: None })
}

/// One-sided paired sign test of "`a` is smaller than `b`".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// `P(Bin(wins + losses, 1/2) >= wins)`; ties are dropped.
    pub p_value: f64,
}

pub fn sign_test_less(a: &[f64], b: &[f64]) -> Result<SignTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::Unpaired(a.len(), b.len()));
    }
    let wins = a.iter().zip(b).filter(|(x, y)| x < y).count();
    let losses = a.iter().zip(b).filter(|(x, y)| x > y).count();
    let ties = a.len() - wins - losses;
    let n = (wins + losses) as u64;
    let p_value = if wins == 0 {
        1.0
    } else {
        let bin = Binomial::new(0.5, n).expect("valid binomial");
        bin.sf(wins as u64 - 1)
    };
    Ok(SignTest { wins, losses, ties, p_value })
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn far_from_zero_matches_moments() {
        // deterministic pseudo-normal sample: mean 100, spread 1
        let xs: Vec<f64> = (0..400)
            .map(|i| {
                let u = (i as f64 + 0.5) / 400.0;
                100.0 + inverse_normal(u)
            })
            .collect();
        let m = mean(&xs);
        let s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
        let fit = fit_truncated_normal(&xs).unwrap();
        assert_relative_eq!(fit.mean, m, max_relative = 0.01);
        assert_relative_eq!(fit.std, s, max_relative = 0.01);
        assert!(fit.warning.is_none());
    }

    fn inverse_normal(u: f64) -> f64 {
        // bisection on the cdf; accuracy is ample for a test fixture
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if log_normal_cdf(mid).exp() < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn equal_samples_warn() {
        let fit = fit_truncated_normal(&[0.4, 0.4, 0.4]).unwrap();
        assert_eq!((fit.mean, fit.std), (0.4, 0.0));
        assert!(fit.warning.is_some());
    }

    #[test]
    fn small_sample_brackets() {
        let fit = fit_truncated_normal(&[0.1, 0.2, 0.3]).unwrap();
        assert!((0.1..=0.3).contains(&fit.mean), "{fit:?}");
        assert!(fit.std > 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_truncated_normal(&[1.0]).is_err());
        assert!(fit_truncated_normal(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn log_cdf_is_continuous_across_branches() {
        let a = log_normal_cdf(-29.999_999);
        let b = log_normal_cdf(-30.000_001);
        assert_relative_eq!(a, b, max_relative = 1e-6);
        assert_relative_eq!(log_normal_cdf(0.0), 0.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn sign_test_thresholds() {
        // 15 of 20 wins: P(X >= 15) = 21700 / 2^20
        let a: Vec<f64> = (0..20).map(|i| if i < 15 { 0.0 } else { 2.0 }).collect();
        let b = vec![1.0; 20];
        let t = sign_test_less(&a, &b).unwrap();
        assert_eq!((t.wins, t.losses, t.ties), (15, 5, 0));
        assert_relative_eq!(t.p_value, 21700.0 / 1048576.0, epsilon = 1e-12);
        let a: Vec<f64> = (0..20).map(|i| if i < 14 { 0.0 } else { 2.0 }).collect();
        assert!(sign_test_less(&a, &b).unwrap().p_value > 0.05);
        // ties are dropped
        let t = sign_test_less(&[0.0, 1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((t.wins, t.ties), (1, 2));
        assert_relative_eq!(t.p_value, 0.5, epsilon = 1e-12);
    }
}

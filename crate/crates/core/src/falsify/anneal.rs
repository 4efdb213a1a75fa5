//! Simulated annealing over a box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaParams {
    /// Initial temperature, in objective units.
    pub t0: f64,
    /// Temperature reached at the last proposal.
    pub t_final: f64,
    /// Proposal standard deviation at `t0`, as a fraction of each interval width.
    pub step_fraction: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self { t0: 1.0, t_final: 0.01, step_fraction: 0.1 }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<(), String> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.t0) && ok(self.t_final) && ok(self.step_fraction)) {
            return Err("sa parameters must be non-negative and finite".into());
        }
        Ok(())
    }

    /// Temperature of the `m`-th of `n` proposals under geometric cooling.
    pub fn temperature(&self, m: usize, n: usize) -> f64 {
        if self.t0 == 0.0 || n <= 1 {
            return self.t0;
        }
        if self.t_final <= 0.0 {
            return if m == 0 { self.t0 } else { 0.0 };
        }
        let alpha = (self.t_final / self.t0).powf(1.0 / (n - 1) as f64);
        self.t0 * alpha.powi(m as i32)
    }
}

/// Folds `v` back into `[lo, hi]` by mirror reflection at the bounds.
pub fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if w <= 0.0 {
        return lo;
    }
    let y = (v - lo).rem_euclid(2.0 * w);
    let folded = if y > w { 2.0 * w - y } else { y };
    (lo + folded).clamp(lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    /// Every evaluated point with its value, in evaluation order.
    pub history: Vec<(Vec<f64>, f64)>,
}

/// Minimizes `objective` with `evals` evaluations, the first at `init`.
pub fn simulated_annealing<E>(
    init: &[f64],
    objective: impl FnMut(&[f64]) -> Result<f64, E>,
    evals: usize,
    bounds: &[(f64, f64)],
    params: &SaParams,
    seed: u64,
) -> Result<SaResult, E> {
    let mut objective = objective;
    if evals == 0 {
        return Ok(SaResult { best_point: init.to_vec(), best_value: f64::INFINITY, history: Vec::new() });
    }
    let v0 = objective(init)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = anneal(init, v0, objective, evals - 1, bounds, params, &mut rng)?;
    res.history.insert(0, (init.to_vec(), v0));
    Ok(res)
}

/// Annealing from a point whose value is already known; spends exactly
/// `proposals` evaluations unless `objective` fails. The returned history
/// holds only the proposals.
pub fn anneal<E>(
    init: &[f64],
    init_value: f64,
    mut objective: impl FnMut(&[f64]) -> Result<f64, E>,
    proposals: usize,
    bounds: &[(f64, f64)],
    params: &SaParams,
    rng: &mut ChaCha8Rng,
) -> Result<SaResult, E> {
    assert_eq!(init.len(), bounds.len(), "one bound per coordinate");
    let mut current = init.to_vec();
    let mut current_value = init_value;
    let mut best = (current.clone(), init_value);
    let mut history = Vec::with_capacity(proposals);
    for m in 0..proposals {
        let temp = params.temperature(m, proposals);
        let scale = if params.t0 > 0.0 { (temp / params.t0).sqrt() } else { 1.0 };
        let proposal: Vec<f64> = current
            .iter()
            .zip(bounds)
            .map(|(&x, &(lo, hi))| {
                let z: f64 = rng.sample(StandardNormal);
                reflect(x + z * params.step_fraction * (hi - lo) * scale, lo, hi)
            })
            .collect();
        let u: f64 = rng.random();
        let value = objective(&proposal)?;
        history.push((proposal.clone(), value));
        if value < best.1 {
            best = (proposal.clone(), value);
        }
        let delta = value - current_value;
        if delta <= 0.0 || (temp > 0.0 && u < (-delta / temp).exp()) {
            current = proposal;
            current_value = value;
        }
    }
    Ok(SaResult { best_point: best.0, best_value: best.1, history })
}

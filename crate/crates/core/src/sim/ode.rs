//! Two-dimensional nonlinear ODE with a box-avoidance requirement.

use super::SimError;
use crate::trace::Trace;

const DIVERGENCE_LIMIT: f64 = 1.0e6;

/// Axis-aligned unsafe boxes `[x1_lo, x1_hi] x [x2_lo, x2_hi]`.
pub struct OdeBoxes;

impl OdeBoxes {
    pub const BOXES: [[f64; 4]; 2] = [[-1.6, -1.4, -1.1, -0.9], [3.4, 3.6, -1.2, -0.8]];

    /// Whether `(x1, x2)` lies strictly inside one of the boxes.
    pub fn strictly_inside(x1: f64, x2: f64) -> bool {
        Self::BOXES.iter().any(|b| x1 > b[0] && x1 < b[1] && x2 > b[2] && x2 < b[3])
    }
}

/// Requirement that the trajectory never enters either box.
pub fn box_avoidance_spec_text() -> String {
    OdeBoxes::BOXES
        .iter()
        .map(|b| {
            format!("always not (x1 >= {} and x1 <= {} and x2 >= {} and x2 <= {})", b[0], b[1], b[2], b[3])
        })
        .collect::<Vec<_>>()
        .join(" and ")
}

/// Right-hand side: `x1' = x1 - x2 + 0.1 t`, `x2' = x2 cos(2 pi x2) - x1 sin(2 pi x1) + 0.1 t`.
pub fn ode_derivative(t: f64, x: [f64; 2]) -> [f64; 2] {
    let tau = std::f64::consts::TAU;
    [x[0] - x[1] + 0.1 * t, x[1] * (tau * x[1]).cos() - x[0] * (tau * x[0]).sin() + 0.1 * t]
}

/// Integrates the system from `x0` with fixed-step RK4; the trace has
/// signals `x1`, `x2` sampled every `dt`.
pub fn simulate_ode_example(x0: (f64, f64), duration: f64, dt: f64) -> Result<Trace, SimError> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(SimError::InvalidConfig(format!("dt {dt} outside (0, 0.01]")));
    }
    if !(duration >= 0.0 && duration <= 10.0) {
        return Err(SimError::InvalidConfig(format!("duration {duration} outside [0, 10]")));
    }
    if !(x0.0.is_finite() && x0.1.is_finite()) {
        return Err(SimError::InvalidConfig("initial state must be finite".into()));
    }
    let steps = (duration / dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut x1 = Vec::with_capacity(steps + 1);
    let mut x2 = Vec::with_capacity(steps + 1);
    let mut x = [x0.0, x0.1];
    for k in 0..=steps {
        let t = k as f64 * dt;
        times.push(t);
        x1.push(x[0]);
        x2.push(x[1]);
        if k == steps {
            break;
        }
        x = rk4(t, x, dt);
        if !(x[0].abs() <= DIVERGENCE_LIMIT && x[1].abs() <= DIVERGENCE_LIMIT) {
            return Err(SimError::Diverged { time: t + dt, limit: DIVERGENCE_LIMIT });
        }
    }
    Trace::from_columns(times, vec!["x1".into(), "x2".into()], vec![x1, x2]).map_err(|e| SimError::Trace(e.to_string()))
}

fn rk4(t: f64, x: [f64; 2], h: f64) -> [f64; 2] {
    let shift = |x: [f64; 2], k: [f64; 2], s: f64| [x[0] + s * k[0], x[1] + s * k[1]];
    let k1 = ode_derivative(t, x);
    let k2 = ode_derivative(t + h / 2.0, shift(x, k1, h / 2.0));
    let k3 = ode_derivative(t + h / 2.0, shift(x, k2, h / 2.0));
    let k4 = ode_derivative(t + h, shift(x, k3, h));
    [
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

//! Collision-avoidance controller driven by perception output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use super::perception::{Detection, ObjectClass};
use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    /// Constant throttle used when no threat is predicted.
    pub throttle: f64,
    pub d_brake: f64,
    pub ttc_steer: f64,
    pub lookahead: f64,
    pub lookahead_step: f64,
    /// Magnitude of the evasive steering angle.
    pub steer_angle: f64,
    /// Half width of the corridor used for threat prediction.
    pub corridor_half_width: f64,
    /// Oldest previous detection still used for velocity differencing.
    pub track_memory: f64,
    pub lane_gain: f64,
    pub heading_gain: f64,
    pub max_recenter: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            throttle: 0.75,
            d_brake: 15.0,
            ttc_steer: 1.0,
            lookahead: 1.0,
            lookahead_step: 0.1,
            steer_angle: 0.25,
            corridor_half_width: 1.2,
            track_memory: 0.5,
            lane_gain: 0.5,
            heading_gain: 1.0,
            max_recenter: 0.3,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(format!("controller.{m}")));
        if !(0.0..=1.0).contains(&self.throttle) {
            return bad("throttle must lie in [0, 1]");
        }
        for (name, v) in [
            ("d_brake", self.d_brake),
            ("ttc_steer", self.ttc_steer),
            ("lookahead", self.lookahead),
            ("steer_angle", self.steer_angle),
            ("corridor_half_width", self.corridor_half_width),
            ("track_memory", self.track_memory),
            ("lane_gain", self.lane_gain),
            ("heading_gain", self.heading_gain),
            ("max_recenter", self.max_recenter),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(&format!("{name} must be non-negative and finite"));
            }
        }
        if !(self.lookahead_step.is_finite() && self.lookahead_step > 0.0) {
            return bad("lookahead_step must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub throttle: f64,
    pub brake: f64,
    pub steering: f64,
}

/// Ego state as seen by the controller, relative to its lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoView {
    pub time: f64,
    pub speed: f64,
    /// Heading relative to the road direction.
    pub heading: f64,
    /// Lateral offset of the ego from its lane center (left positive).
    pub lateral_offset: f64,
}

/// Per-object detection history used for velocity differencing.
#[derive(Debug, Clone, Default)]
pub struct Tracker {
    last: BTreeMap<usize, (f64, Vec2)>,
}

impl Tracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `det` and returns the relative velocity estimate, if a
    /// recent enough previous detection exists.
    fn update(&mut self, time: f64, det: &Detection, memory: f64) -> Option<Vec2> {
        let prev = self.last.insert(det.object, (time, det.position));
        prev.and_then(|(t0, p0)| {
            let dt = time - t0;
            (dt > 0.0 && dt <= memory).then(|| (det.position - p0) * (1.0 / dt))
        })
    }
}

fn nominal_half_extents(class: ObjectClass) -> Vec2 {
    match class {
        ObjectClass::Vehicle => Vec2::new(2.25, 0.9),
        ObjectClass::Pedestrian => Vec2::new(0.3, 0.3),
    }
}

/// One control step. Only objects detected in the current frame are
/// considered; each is extrapolated at constant relative velocity over the
/// lookahead, and any predicted intrusion into the corridor closer than
/// `d_brake` triggers full braking, plus evasive steering when the time to
/// collision is below `ttc_steer`.
pub fn control(detections: &[Detection], tracker: &mut Tracker, ego: &EgoView, p: &ControllerParams) -> Command {
    let mut threat = false;
    let mut steer_from: Option<(f64, f64)> = None; // (ttc, lateral position)
    for det in detections.iter().filter(|d| d.detected) {
        let vel = tracker.update(ego.time, det, p.track_memory).unwrap_or(Vec2::new(-ego.speed, 0.0));
        let half = nominal_half_extents(det.class);
        let steps = (p.lookahead / p.lookahead_step).round() as usize;
        let intrudes = (0..=steps).any(|k| {
            let q = det.position + vel * (k as f64 * p.lookahead_step);
            q.y.abs() < p.corridor_half_width + half.y && q.x + half.x > 0.0 && q.x - half.x < p.d_brake
        });
        if !intrudes {
            continue;
        }
        threat = true;
        let gap = (det.position.x - half.x).max(0.0);
        let closing = -vel.x;
        let ttc = if closing > 1e-9 { gap / closing } else { f64::INFINITY };
        if ttc < p.ttc_steer && steer_from.is_none_or(|(best, _)| ttc < best) {
            steer_from = Some((ttc, det.position.y));
        }
    }
    let recenter = (-p.heading_gain * ego.heading
        + (-p.lane_gain * ego.lateral_offset).atan2(ego.speed + 1.0))
    .clamp(-p.max_recenter, p.max_recenter);
    if threat {
        let steering = match steer_from {
            Some((_, y)) if y > 0.0 => -p.steer_angle,
            Some(_) => p.steer_angle,
            None => recenter,
        };
        Command { throttle: 0.0, brake: 1.0, steering }
    } else {
        Command { throttle: p.throttle, brake: 0.0, steering: recenter }
    }
}

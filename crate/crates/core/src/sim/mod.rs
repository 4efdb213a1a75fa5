//! Closed-loop driving simulator and the two-dimensional ODE benchmark.
//!
//! Each step builds the ground-truth scene, runs the surrogate detector,
//! asks the controller for a command and integrates the ego with a
//! kinematic bicycle model. Agents follow scripted trajectories.

pub mod control;
pub mod geometry;
mod ode;
pub mod perception;
pub mod scenario;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::trace::Trace;
use control::{control, Command, EgoView, Tracker};
use geometry::{segment_signed_distance, Rect, Shape, Vec2};
use perception::{perceive, Appearance, ObjectClass, PerceptionParams, SceneObject};
use scenario::{AgentConfig, AgentKind, RoadConfig, ScenarioConfig, SignalParams, VehicleParams};

pub use ode::{box_avoidance_spec_text, ode_derivative, simulate_ode_example, OdeBoxes};

/// Integration substeps per sample; collisions are checked after each.
pub const SUBSTEPS: usize = 4;
pub const PEDESTRIAN_RADIUS: f64 = 0.3;
/// Clearance kept between a stopping vehicle and the crosswalk.
pub const STOP_LINE_GAP: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parameter binding failed: {0}")]
    Binding(String),
    #[error("integration diverged at t = {time}: |x| exceeded {limit}")]
    Diverged { time: f64, limit: f64 },
    #[error("trace construction failed: {0}")]
    Trace(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub trace: Trace,
    pub collision: bool,
    /// Ego speed at first penetration, zero without a collision.
    pub collision_speed: f64,
    /// 1-based index of the first object hit.
    pub collision_object: Option<usize>,
    pub steps: usize,
}

/// Ego pose at the rear axle plus speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl EgoState {
    pub fn bumper_center(&self, v: &VehicleParams) -> Vec2 {
        Vec2::new(self.x, self.y) + Vec2::from_heading(self.heading) * v.bumper_offset()
    }

    /// Endpoints of the front bumper segment.
    pub fn bumper(&self, v: &VehicleParams) -> (Vec2, Vec2) {
        let c = self.bumper_center(v);
        let n = Vec2::from_heading(self.heading).perp() * (v.width / 2.0);
        (c - n, c + n)
    }

    fn step(&mut self, cmd: &Command, v: &VehicleParams, h: f64) {
        let accel = v.max_throttle_accel * cmd.throttle - v.drag * self.speed - v.max_brake * cmd.brake;
        self.speed = (self.speed + accel * h).clamp(0.0, v.speed_cap);
        let steer = cmd.steering.clamp(-v.max_steer, v.max_steer);
        self.x += self.speed * self.heading.cos() * h;
        self.y += self.speed * self.heading.sin() * h;
        self.heading += self.speed / v.wheelbase * steer.tan() * h;
    }
}

/// Spec-level signals at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecSignals {
    pub v_ego: f64,
    pub dist: Vec<f64>,
    pub front: Vec<f64>,
}

/// Computes `dist_i` (signed distance from the front bumper segment to each
/// object) and `front_i` (`+b_bool` when the object intersects the front
/// corridor, `-b_bool` otherwise).
pub fn extract_spec_signals(ego: &EgoState, vehicle: &VehicleParams, objects: &[Shape], sig: &SignalParams) -> SpecSignals {
    let (a, b) = ego.bumper(vehicle);
    let u = Vec2::from_heading(ego.heading);
    let corridor = Rect {
        center: ego.bumper_center(vehicle) + u * (sig.corridor_length / 2.0),
        heading: ego.heading,
        half_len: sig.corridor_length / 2.0,
        half_wid: vehicle.width / 2.0 + sig.corridor_margin,
    };
    SpecSignals {
        v_ego: ego.speed,
        dist: objects.iter().map(|s| segment_signed_distance(a, b, s)).collect(),
        front: objects
            .iter()
            .map(|s| if s.overlaps_rect(&corridor) { sig.b_bool } else { -sig.b_bool })
            .collect(),
    }
}

/// Scripted position of an agent at time `t`.
pub fn agent_position(agent: &AgentConfig, road: &RoadConfig, t: f64) -> Vec2 {
    let travelled = agent.speed * t;
    match agent.kind {
        AgentKind::ParkedVehicle => Vec2::new(agent.x, agent.y),
        AgentKind::StoppingVehicle => {
            let half = agent.model.dimensions().0 / 2.0;
            let stop = road.crosswalk_position - STOP_LINE_GAP - half;
            let x = if agent.x >= stop { agent.x } else { (agent.x + travelled).min(stop) };
            Vec2::new(x, agent.y)
        }
        AgentKind::CrosswalkPedestrian => {
            let (lo, hi) = (-road.sidewalk(), road.sidewalk());
            let span = hi - lo;
            let y0 = agent.y.clamp(lo, hi);
            // unfold the back-and-forth walk onto a circle of length 2 * span
            let s0 = if y0 <= 0.0 { y0 - lo } else { span + (hi - y0) };
            let s = (s0 + travelled).rem_euclid(2.0 * span);
            let y = if s <= span { lo + s } else { hi - (s - span) };
            Vec2::new(agent.x, y)
        }
        AgentKind::JaywalkingPedestrian => {
            let turn = road.lane_center(road.lane_count - 1);
            let leg = turn - agent.y;
            let y = if travelled < leg {
                agent.y + travelled
            } else if travelled < 2.0 * leg {
                turn - (travelled - leg)
            } else {
                agent.y
            };
            Vec2::new(agent.x, y)
        }
    }
}

fn agent_shape(agent: &AgentConfig, road: &RoadConfig, t: f64) -> Shape {
    let center = agent_position(agent, road, t);
    if agent.kind.is_pedestrian() {
        Shape::Disc { center, radius: PEDESTRIAN_RADIUS }
    } else {
        let (len, wid) = agent.model.dimensions();
        Shape::Rect(Rect { center, heading: 0.0, half_len: len / 2.0, half_wid: wid / 2.0 })
    }
}

fn appearance(agent: &AgentConfig) -> (ObjectClass, Appearance) {
    if agent.kind.is_pedestrian() {
        let colors = vec![agent.color, agent.pants.unwrap_or(agent.color)];
        (ObjectClass::Pedestrian, Appearance { colors, model_multiplier: 1.0 })
    } else {
        (ObjectClass::Vehicle, Appearance { colors: vec![agent.color], model_multiplier: agent.model.miss_multiplier() })
    }
}

/// Names of the trace columns produced by [`simulate`] for `objects` agents.
pub fn signal_names(objects: usize) -> Vec<String> {
    let mut names: Vec<String> =
        ["v_ego", "ego_x", "ego_y", "ego_heading", "throttle", "brake", "steering"].map(String::from).to_vec();
    for i in 1..=objects {
        names.extend([format!("dist_{i}"), format!("front_{i}"), format!("x_{i}"), format!("y_{i}")]);
    }
    names
}

pub fn validate_timing(dt: f64, horizon: f64) -> Result<(), SimError> {
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(SimError::InvalidConfig(format!("dt {dt} outside (0, 0.1]")));
    }
    if !(horizon > 0.0 && horizon <= 120.0) {
        return Err(SimError::InvalidConfig(format!("horizon {horizon} outside (0, 120]")));
    }
    Ok(())
}

struct Recorder {
    times: Vec<f64>,
    columns: Vec<Vec<f64>>,
}

impl Recorder {
    fn push(&mut self, t: f64, ego: &EgoState, cmd: &Command, sig: &SpecSignals, pos: &[Vec2]) {
        self.times.push(t);
        let head = [ego.speed, ego.x, ego.y, ego.heading, cmd.throttle, cmd.brake, cmd.steering];
        let mut c = self.columns.iter_mut();
        for v in head {
            c.next().expect("column").push(v);
        }
        for i in 0..pos.len() {
            for v in [sig.dist[i], sig.front[i], pos[i].x, pos[i].y] {
                c.next().expect("column").push(v);
            }
        }
    }
}

fn first_collision(sig: &SpecSignals) -> Option<usize> {
    sig.dist.iter().position(|&d| d < 0.0).map(|i| i + 1)
}

/// Runs the closed loop from the scenario's initial state for `horizon`
/// seconds, sampling every `dt`. The run stops at the first substep where
/// the bumper penetrates an object; that instant is recorded as a trailing
/// sample.
pub fn simulate(
    cfg: &ScenarioConfig,
    pp: &PerceptionParams,
    dt: f64,
    horizon: f64,
    seed: u64,
) -> Result<SimOutcome, SimError> {
    validate_timing(dt, horizon)?;
    cfg.validate()?;
    pp.validate()?;
    let road = &cfg.road;
    let vehicle = &cfg.ego.vehicle;
    let lane_y = road.lane_center(cfg.ego.lane);
    let mut ego = EgoState { x: cfg.ego.x, y: lane_y, heading: 0.0, speed: cfg.ego.speed };
    let looks: Vec<(ObjectClass, Appearance)> = cfg.agents.iter().map(appearance).collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.agents.len())
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((pp.seed_stream << 32) | (i as u64 + 1));
            rng
        })
        .collect();
    let mut tracker = Tracker::new();
    let names = signal_names(cfg.agents.len());
    let mut rec = Recorder { times: Vec::new(), columns: vec![Vec::new(); names.len()] };
    let steps = (horizon / dt).round() as usize;
    let h = dt / SUBSTEPS as f64;
    let shapes_at = |t: f64| -> Vec<Shape> { cfg.agents.iter().map(|a| agent_shape(a, road, t)).collect() };
    let centers = |shapes: &[Shape]| -> Vec<Vec2> { shapes.iter().map(Shape::center).collect() };

    let mut collision = None;
    let mut collision_speed = 0.0;
    let mut step = 0;
    loop {
        let t = step as f64 * dt;
        let shapes = shapes_at(t);
        let sig = extract_spec_signals(&ego, vehicle, &shapes, &cfg.signals);
        if let Some(obj) = first_collision(&sig) {
            // only reachable at t = 0: later penetrations stop at a substep
            let idle = Command { throttle: 0.0, brake: 0.0, steering: 0.0 };
            rec.push(t, &ego, &idle, &sig, &centers(&shapes));
            collision = Some(obj);
            collision_speed = ego.speed;
            break;
        }
        let bumper = ego.bumper_center(vehicle);
        let scene: Vec<SceneObject> = shapes
            .iter()
            .zip(&looks)
            .enumerate()
            .map(|(i, (s, (class, look)))| SceneObject {
                object: i + 1,
                position: (s.center() - bumper).rotate_into(ego.heading),
                class: *class,
                appearance: look.clone(),
            })
            .collect();
        let detections = perceive(&scene, pp, cfg.fog, &mut rngs);
        let view = EgoView { time: t, speed: ego.speed, heading: ego.heading, lateral_offset: ego.y - lane_y };
        let cmd = control(&detections, &mut tracker, &view, &cfg.controller);
        rec.push(t, &ego, &cmd, &sig, &centers(&shapes));
        if step == steps {
            break;
        }
        for k in 1..=SUBSTEPS {
            ego.step(&cmd, vehicle, h);
            let tk = t + k as f64 * h;
            let shapes = shapes_at(tk);
            let sig = extract_spec_signals(&ego, vehicle, &shapes, &cfg.signals);
            if let Some(obj) = first_collision(&sig) {
                rec.push(tk, &ego, &cmd, &sig, &centers(&shapes));
                collision = Some(obj);
                collision_speed = ego.speed;
                break;
            }
        }
        if collision.is_some() {
            break;
        }
        step += 1;
    }
    let trace = Trace::from_columns(rec.times, names, rec.columns).map_err(|e| SimError::Trace(e.to_string()))?;
    Ok(SimOutcome { trace, collision: collision.is_some(), collision_speed, collision_object: collision, steps: step })
}

#[cfg(test)]
mod tests {
    use super::scenario::{urban_scenario, urban_spec};
    use super::*;
    use crate::stl::robustness;
    use approx::assert_relative_eq;

    fn empty_road() -> ScenarioConfig {
        let mut cfg = urban_scenario();
        cfg.agents.clear();
        cfg
    }

    fn parked_ahead(x: f64) -> ScenarioConfig {
        let mut cfg = urban_scenario();
        let mut v = cfg.agents[0].clone();
        v.x = x;
        v.y = 0.0;
        cfg.agents = vec![v];
        cfg
    }

    fn blind() -> PerceptionParams {
        PerceptionParams { base_miss_rate: 0.95, contrast_table: Vec::new(), ..PerceptionParams::default() }
    }

    fn min_dist(out: &SimOutcome, objects: usize) -> f64 {
        (1..=objects)
            .flat_map(|i| out.trace.signal(&format!("dist_{i}")).unwrap().to_vec())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn empty_road_speeds_up_to_cruise() {
        let cfg = empty_road();
        let out = simulate(&cfg, &PerceptionParams::default(), 0.05, 30.0, 0).unwrap();
        assert!(!out.collision);
        assert_eq!(out.trace.len(), 601);
        let v = out.trace.signal("v_ego").unwrap();
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
        assert!(v.iter().all(|&s| s <= cfg.ego.vehicle.speed_cap));
        assert_relative_eq!(*v.last().unwrap(), 15.0, epsilon = 0.05);
    }

    #[test]
    fn dist_and_front_geometry() {
        let ego = EgoState { x: 0.0, y: 0.0, heading: 0.0, speed: 0.0 };
        let vp = VehicleParams::default();
        let sig = SignalParams::default();
        let bumper = vp.bumper_offset();
        let ahead = Shape::Rect(Rect { center: Vec2::new(bumper + 12.0, 0.0), heading: 0.0, half_len: 2.0, half_wid: 0.9 });
        let beside = Shape::Rect(Rect { center: Vec2::new(bumper + 5.0, 3.5), heading: 0.0, half_len: 2.0, half_wid: 0.9 });
        let overlapping = Shape::Disc { center: Vec2::new(bumper + 0.1, 0.0), radius: 0.3 };
        let s = extract_spec_signals(&ego, &vp, &[ahead, beside, overlapping], &sig);
        assert_relative_eq!(s.dist[0], 10.0, epsilon = 1e-12);
        assert_eq!(s.front[0], sig.b_bool);
        assert_eq!(s.front[1], -sig.b_bool);
        assert!(s.dist[2] < 0.0);
    }

    #[test]
    fn agent_scripts() {
        let cfg = urban_scenario();
        let road = &cfg.road;
        let jay = &cfg.agents[8];
        let turn = road.lane_center(2);
        let leg = turn - jay.y;
        assert_relative_eq!(agent_position(jay, road, leg / jay.speed).y, turn, epsilon = 1e-9);
        assert_relative_eq!(agent_position(jay, road, 2.0 * leg / jay.speed + 5.0).y, jay.y);
        let p1 = &cfg.agents[6];
        let span = 2.0 * road.sidewalk();
        for t in [0.0, 3.0, 11.0, 29.0] {
            let y = agent_position(p1, road, t).y;
            assert!(y.abs() <= road.sidewalk() + 1e-9);
        }
        assert_relative_eq!(agent_position(p1, road, 2.0 * span / p1.speed).y, p1.y, epsilon = 1e-9);
        let v2 = &cfg.agents[1];
        let stop = road.crosswalk_position - STOP_LINE_GAP - v2.model.dimensions().0 / 2.0;
        assert_relative_eq!(agent_position(v2, road, 30.0).x, stop);
    }

    #[test]
    fn perfect_perception_avoids_collision() {
        let mut cfg = urban_scenario();
        cfg.agents[8].speed = 0.0;
        let out = simulate(&cfg, &PerceptionParams::perfect(), 0.05, 30.0, 0).unwrap();
        assert!(!out.collision);
        assert!(min_dist(&out, 9) > 0.5);
    }

    #[test]
    fn blind_perception_collides() {
        let out = simulate(&urban_scenario(), &blind(), 0.05, 30.0, 0).unwrap();
        assert!(out.collision);
        assert!(out.collision_speed > 0.0);
        let last = out.trace.len() - 1;
        let obj = out.collision_object.unwrap();
        assert!(out.trace.signal_at(&format!("dist_{obj}"), last).unwrap() < 0.0);
        let r = robustness(&urban_spec(), &out.trace, 0).unwrap();
        assert!(r < 0.0);
    }

    #[test]
    fn collision_flag_matches_min_dist() {
        for seed in 0..5 {
            for pp in [PerceptionParams::default(), blind()] {
                let out = simulate(&urban_scenario(), &pp, 0.05, 30.0, seed).unwrap();
                assert_eq!(out.collision, min_dist(&out, 9) < 0.0);
                assert!(min_dist(&out, 9) >= -0.5);
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = simulate(&urban_scenario(), &PerceptionParams::default(), 0.05, 30.0, 3).unwrap();
        let b = simulate(&urban_scenario(), &PerceptionParams::default(), 0.05, 30.0, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_brake_never_speeds_up() {
        let vp = VehicleParams::default();
        let mut ego = EgoState { x: 0.0, y: 0.0, heading: 0.0, speed: 18.0 };
        let cmd = Command { throttle: 0.0, brake: 1.0, steering: 0.2 };
        let mut last = ego.speed;
        for _ in 0..200 {
            ego.step(&cmd, &vp, 0.0125);
            assert!(ego.speed <= last);
            last = ego.speed;
        }
        assert_eq!(ego.speed, 0.0);
    }

    #[test]
    fn larger_brake_distance_keeps_more_room() {
        let mut prev = f64::NEG_INFINITY;
        for d_brake in [5.0, 10.0, 15.0] {
            let mut cfg = parked_ahead(120.0);
            cfg.controller.d_brake = d_brake;
            let out = simulate(&cfg, &PerceptionParams::perfect(), 0.05, 30.0, 0).unwrap();
            let d = min_dist(&out, 1);
            assert!(d >= prev, "d_brake {d_brake}: {d} < {prev}");
            prev = d;
        }
    }

    #[test]
    fn rejects_bad_timing() {
        let cfg = urban_scenario();
        let pp = PerceptionParams::default();
        assert!(simulate(&cfg, &pp, 0.2, 30.0, 0).is_err());
        assert!(simulate(&cfg, &pp, 0.05, 121.0, 0).is_err());
        assert!(simulate(&cfg, &pp, 0.0, 10.0, 0).is_err());
    }
}

//! Scenario description, validation and parameter binding.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::control::ControllerParams;
use super::SimError;
use crate::stl::{parse, Formula};
use crate::trace::{ContinuousParam, DiscreteParam, ParamValuation, ParameterSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    ParkedVehicle,
    StoppingVehicle,
    CrosswalkPedestrian,
    JaywalkingPedestrian,
}

impl AgentKind {
    pub fn is_pedestrian(self) -> bool {
        matches!(self, AgentKind::CrosswalkPedestrian | AgentKind::JaywalkingPedestrian)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Green,
    Blue,
    White,
    Black,
}

impl Color {
    pub const ALL: [Color; 5] = [Color::Red, Color::Green, Color::Blue, Color::White, Color::Black];

    pub fn brightness(self) -> f64 {
        match self {
            Color::Black => 0.05,
            Color::Blue => 0.3,
            Color::Red => 0.4,
            Color::Green => 0.55,
            Color::White => 0.95,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::White => "white",
            Color::Black => "black",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Color {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Color::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| format!("unknown color '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleModel {
    Compact,
    #[default]
    Sedan,
    Hatchback,
    Suv,
    Van,
}

impl VehicleModel {
    pub const ALL: [VehicleModel; 5] =
        [VehicleModel::Compact, VehicleModel::Sedan, VehicleModel::Hatchback, VehicleModel::Suv, VehicleModel::Van];

    /// (length, width) in meters.
    pub fn dimensions(self) -> (f64, f64) {
        match self {
            VehicleModel::Compact => (3.8, 1.65),
            VehicleModel::Sedan => (4.6, 1.8),
            VehicleModel::Hatchback => (4.2, 1.75),
            VehicleModel::Suv => (4.8, 1.95),
            VehicleModel::Van => (5.2, 2.0),
        }
    }

    pub fn miss_multiplier(self) -> f64 {
        match self {
            VehicleModel::Compact => 1.4,
            VehicleModel::Sedan => 1.0,
            VehicleModel::Hatchback => 1.2,
            VehicleModel::Suv => 0.8,
            VehicleModel::Van => 0.7,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            VehicleModel::Compact => "compact",
            VehicleModel::Sedan => "sedan",
            VehicleModel::Hatchback => "hatchback",
            VehicleModel::Suv => "suv",
            VehicleModel::Van => "van",
        }
    }
}

impl FromStr for VehicleModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        VehicleModel::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| format!("unknown vehicle model '{s}'"))
    }
}

/// Ego vehicle geometry and longitudinal dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub length: f64,
    pub width: f64,
    /// Distance from the front axle to the front bumper.
    pub front_overhang: f64,
    pub max_brake: f64,
    pub max_throttle_accel: f64,
    pub drag: f64,
    pub speed_cap: f64,
    pub max_steer: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.8,
            length: 4.5,
            width: 1.8,
            front_overhang: 0.9,
            max_brake: 8.0,
            max_throttle_accel: 4.0,
            drag: 0.2,
            speed_cap: 20.0,
            max_steer: 0.5,
        }
    }
}

impl VehicleParams {
    /// Distance from the rear axle (the pose reference point) to the front bumper.
    pub fn bumper_offset(&self) -> f64 {
        self.wheelbase + self.front_overhang
    }

    /// Steady-state speed under constant throttle `theta`.
    pub fn cruise_speed(&self, theta: f64) -> f64 {
        (self.max_throttle_accel * theta / self.drag).min(self.speed_cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoConfig {
    #[serde(alias = "init_longitudinal_position")]
    pub x: f64,
    #[serde(alias = "init_speed")]
    pub speed: f64,
    pub lane: usize,
    #[serde(default)]
    pub vehicle: VehicleParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub name: String,
    pub kind: AgentKind,
    #[serde(default)]
    pub model: VehicleModel,
    /// Body color; the shirt for pedestrians.
    #[serde(alias = "shirt")]
    pub color: Color,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pants: Option<Color>,
    #[serde(alias = "longitudinal_position")]
    pub x: f64,
    #[serde(alias = "lateral_offset")]
    pub y: f64,
    #[serde(default)]
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadConfig {
    pub lane_count: usize,
    pub lane_width: f64,
    pub crosswalk_position: f64,
    #[serde(default = "default_road_length")]
    pub length: f64,
    /// Lateral distance from the outer lane edge to the pedestrian walkway.
    #[serde(default = "default_sidewalk_offset")]
    pub sidewalk_offset: f64,
}

fn default_road_length() -> f64 {
    300.0
}

fn default_sidewalk_offset() -> f64 {
    1.0
}

impl RoadConfig {
    pub fn half_width(&self) -> f64 {
        self.lane_count as f64 * self.lane_width / 2.0
    }

    /// Lateral coordinate of a lane center; lane 0 is the rightmost lane.
    pub fn lane_center(&self, lane: usize) -> f64 {
        (lane as f64 - (self.lane_count as f64 - 1.0) / 2.0) * self.lane_width
    }

    pub fn sidewalk(&self) -> f64 {
        self.half_width() + self.sidewalk_offset
    }
}

/// Parameters of the extracted `dist_i` / `front_i` signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalParams {
    pub corridor_margin: f64,
    pub corridor_length: f64,
    pub b_bool: f64,
}

impl Default for SignalParams {
    fn default() -> Self {
        Self { corridor_margin: 0.3, corridor_length: 30.0, b_bool: 1.0e4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub ego: EgoConfig,
    #[serde(default)]
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub fog: bool,
    pub road: RoadConfig,
    #[serde(default)]
    pub controller: ControllerParams,
    #[serde(default)]
    pub signals: SignalParams,
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        let road = &self.road;
        if road.lane_count == 0 {
            return bad("road.lane_count must be at least 1".into());
        }
        if !positive(road.lane_width) || !positive(road.length) || !finite_nonneg(road.sidewalk_offset) {
            return bad("road dimensions must be positive and finite".into());
        }
        if !(0.0..=road.length).contains(&road.crosswalk_position) {
            return bad(format!("road.crosswalk_position {} outside [0, {}]", road.crosswalk_position, road.length));
        }
        let ego = &self.ego;
        if ego.lane >= road.lane_count {
            return bad(format!("ego.lane {} but the road has {} lanes", ego.lane, road.lane_count));
        }
        if !(0.0..=road.length).contains(&ego.x) {
            return bad(format!("ego.x {} outside [0, {}]", ego.x, road.length));
        }
        let v = &ego.vehicle;
        for (name, val) in [
            ("wheelbase", v.wheelbase),
            ("length", v.length),
            ("width", v.width),
            ("max_brake", v.max_brake),
            ("max_throttle_accel", v.max_throttle_accel),
            ("drag", v.drag),
            ("speed_cap", v.speed_cap),
            ("max_steer", v.max_steer),
        ] {
            if !positive(val) {
                return bad(format!("ego.vehicle.{name} must be positive, got {val}"));
            }
        }
        if !finite_nonneg(v.front_overhang) {
            return bad("ego.vehicle.front_overhang must be non-negative".into());
        }
        if !finite_nonneg(ego.speed) || ego.speed > v.speed_cap {
            return bad(format!("ego.speed {} outside [0, {}]", ego.speed, v.speed_cap));
        }
        let lateral_limit = road.sidewalk() + 1.0;
        let mut names = BTreeSet::new();
        for (i, a) in self.agents.iter().enumerate() {
            let at = format!("agents[{i}] ('{}')", a.name);
            if a.name.is_empty() || a.name.contains('.') {
                return bad(format!("{at}: names must be non-empty and contain no '.'"));
            }
            if !names.insert(a.name.as_str()) {
                return bad(format!("{at}: duplicate agent name"));
            }
            if !(0.0..=road.length).contains(&a.x) {
                return bad(format!("{at}: x {} outside [0, {}]", a.x, road.length));
            }
            if !a.y.is_finite() || a.y.abs() > lateral_limit {
                return bad(format!("{at}: y {} outside [-{lateral_limit}, {lateral_limit}]", a.y));
            }
            if !finite_nonneg(a.speed) {
                return bad(format!("{at}: speed must be non-negative, got {}", a.speed));
            }
            if a.kind == AgentKind::JaywalkingPedestrian && a.y >= road.lane_center(road.lane_count - 1) {
                return bad(format!("{at}: a jaywalker must start right of the leftmost lane center"));
            }
        }
        self.controller.validate()?;
        let s = &self.signals;
        if !finite_nonneg(s.corridor_margin) || !positive(s.corridor_length) || !positive(s.b_bool) {
            return bad("signals parameters must be positive and finite".into());
        }
        Ok(())
    }

    fn agent_mut(&mut self, name: &str) -> Result<&mut AgentConfig, SimError> {
        self.agents
            .iter_mut()
            .find(|a| a.name == name)
            .ok_or_else(|| SimError::Binding(format!("no agent named '{name}'")))
    }

    /// Returns a copy with every parameter of `space` bound from `valuation`.
    ///
    /// Parameter names address scenario fields: `fog`, `ego.x`, `ego.speed`,
    /// and `<agent>.<field>` with field one of `x`, `y`, `speed`, `color`,
    /// `shirt`, `pants`, `model`.
    pub fn bind(&self, space: &ParameterSpace, valuation: &ParamValuation) -> Result<Self, SimError> {
        space.check(valuation).map_err(|e| SimError::Binding(e.to_string()))?;
        let mut cfg = self.clone();
        for p in space.discrete() {
            let level = &p.levels[valuation.discrete_choice[&p.name]];
            cfg.set_discrete(&p.name, level)?;
        }
        for p in space.continuous() {
            cfg.set_continuous(&p.name, valuation.continuous_value[&p.name])?;
        }
        Ok(cfg)
    }

    fn set_discrete(&mut self, name: &str, level: &str) -> Result<(), SimError> {
        let err = |m: String| SimError::Binding(format!("{name}: {m}"));
        if name == "fog" {
            self.fog = level.parse::<bool>().map_err(|_| err(format!("expected true/false, got '{level}'")))?;
            return Ok(());
        }
        let (agent, field) = name.split_once('.').ok_or_else(|| err("unknown parameter".into()))?;
        let a = self.agent_mut(agent)?;
        match field {
            "color" | "shirt" => a.color = level.parse().map_err(err)?,
            "pants" => a.pants = Some(level.parse().map_err(err)?),
            "model" => a.model = level.parse().map_err(err)?,
            _ => return Err(err(format!("field '{field}' is not discrete"))),
        }
        Ok(())
    }

    fn set_continuous(&mut self, name: &str, value: f64) -> Result<(), SimError> {
        let (target, field) =
            name.split_once('.').ok_or_else(|| SimError::Binding(format!("{name}: unknown parameter")))?;
        let slot = if target == "ego" {
            match field {
                "x" => &mut self.ego.x,
                "speed" => &mut self.ego.speed,
                _ => return Err(SimError::Binding(format!("{name}: unknown ego field"))),
            }
        } else {
            let a = self.agent_mut(target)?;
            match field {
                "x" => &mut a.x,
                "y" => &mut a.y,
                "speed" => &mut a.speed,
                _ => return Err(SimError::Binding(format!("{name}: field '{field}' is not continuous"))),
            }
        };
        *slot = value;
        Ok(())
    }
}

/// The built-in urban scenario: ego in the middle lane, six agent vehicles,
/// two crosswalk pedestrians and a jaywalker emerging between parked cars.
pub fn urban_scenario() -> ScenarioConfig {
    let vehicle = |name: &str, kind, color, model, x, y, speed| AgentConfig {
        name: name.into(),
        kind,
        model,
        color,
        pants: None,
        x,
        y,
        speed,
    };
    use AgentKind::*;
    use Color::*;
    use VehicleModel::*;
    let road = RoadConfig {
        lane_count: 3,
        lane_width: 3.5,
        crosswalk_position: 150.0,
        length: 300.0,
        sidewalk_offset: 1.0,
    };
    let (right, left) = (road.lane_center(0), road.lane_center(2));
    let walkway = road.sidewalk();
    let agents = vec![
        vehicle("v1", ParkedVehicle, Red, Sedan, 60.0, right, 0.0),
        vehicle("v2", StoppingVehicle, Green, Suv, 132.0, 0.0, 4.0),
        vehicle("v3", ParkedVehicle, Blue, Hatchback, 75.0, left, 0.0),
        vehicle("v4", ParkedVehicle, White, Van, 98.0, right, 0.0),
        vehicle("v5", ParkedVehicle, Black, Compact, 111.0, right, 0.0),
        vehicle("v6", ParkedVehicle, Red, Sedan, 120.0, left, 0.0),
        AgentConfig {
            name: "p1".into(),
            kind: CrosswalkPedestrian,
            model: Sedan,
            color: Blue,
            pants: Some(Black),
            x: 150.5,
            y: -walkway,
            speed: 1.2,
        },
        AgentConfig {
            name: "p2".into(),
            kind: CrosswalkPedestrian,
            model: Sedan,
            color: Green,
            pants: Some(Blue),
            x: 151.5,
            y: walkway,
            speed: 1.0,
        },
        AgentConfig {
            name: "jaywalker".into(),
            kind: JaywalkingPedestrian,
            model: Sedan,
            color: White,
            pants: Some(Blue),
            x: 104.5,
            y: -walkway,
            speed: 1.5,
        },
    ];
    ScenarioConfig {
        ego: EgoConfig { x: 10.0, speed: 10.0, lane: 1, vehicle: VehicleParams::default() },
        agents,
        fog: false,
        road,
        controller: ControllerParams::default(),
        signals: SignalParams::default(),
    }
}

/// Free parameters of the built-in scenario: colors and models of
/// vehicles 1 to 5, jaywalker shirt and pants, fog (13 discrete), ego start
/// position, vehicle 1 position and jaywalker speed (3 continuous).
pub fn urban_parameter_space() -> ParameterSpace {
    let colors: Vec<String> = Color::ALL.iter().map(|c| c.label().to_string()).collect();
    let models: Vec<String> = VehicleModel::ALL.iter().map(|m| m.label().to_string()).collect();
    let mut discrete = Vec::new();
    for v in 1..=5 {
        discrete.push(DiscreteParam { name: format!("v{v}.color"), levels: colors.clone() });
    }
    for v in 1..=5 {
        discrete.push(DiscreteParam { name: format!("v{v}.model"), levels: models.clone() });
    }
    discrete.push(DiscreteParam { name: "jaywalker.shirt".into(), levels: colors.clone() });
    discrete.push(DiscreteParam { name: "jaywalker.pants".into(), levels: colors });
    discrete.push(DiscreteParam { name: "fog".into(), levels: vec!["false".into(), "true".into()] });
    let continuous = vec![
        ContinuousParam { name: "ego.x".into(), lower: 0.0, upper: 20.0 },
        ContinuousParam { name: "v1.x".into(), lower: 40.0, upper: 80.0 },
        ContinuousParam { name: "jaywalker.speed".into(), lower: 0.0, upper: 3.0 },
    ];
    ParameterSpace::new(discrete, continuous).expect("built-in space is well formed")
}

/// Text of the no-collision requirement over `objects` indexed objects:
/// whenever the ego moves faster than `eps_speed`, no object is within
/// `eps_dist` inside the front corridor and no object overlaps the bumper.
pub fn collision_spec_text(objects: usize, eps_speed: f64, eps_dist: f64) -> String {
    let near: Vec<String> =
        (1..=objects).map(|i| format!("not (dist_{i} < {eps_dist} and front_{i} > 0)")).collect();
    let overlap: Vec<String> = (1..=objects).map(|i| format!("not (dist_{i} < 0)")).collect();
    let body: Vec<String> = near.into_iter().chain(overlap).collect();
    if body.is_empty() {
        return "always true".into();
    }
    format!("always (v_ego > {eps_speed} -> ({}))", body.join(" and "))
}

pub fn urban_spec_text() -> String {
    collision_spec_text(urban_scenario().agents.len(), 0.5, 0.5)
}

pub fn urban_spec() -> Formula {
    parse(&urban_spec_text()).expect("built-in specification parses")
}

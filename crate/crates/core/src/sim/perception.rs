//! Surrogate object detector with parameterized failure modes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use super::scenario::Color;
use super::SimError;

/// Upper bound on the per-frame miss probability.
pub const MAX_MISS_PROBABILITY: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    RoadDark,
    FogBright,
}

impl Background {
    pub fn brightness(self) -> f64 {
        match self {
            Background::RoadDark => 0.25,
            Background::FogBright => 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastEntry {
    pub color: Color,
    pub background: Background,
    pub multiplier: f64,
}

/// The contrast table implied by `gamma`: objects whose brightness is close
/// to the background are missed more often.
pub fn contrast_table(gamma: f64) -> Vec<ContrastEntry> {
    let mut out = Vec::new();
    for background in [Background::RoadDark, Background::FogBright] {
        for color in Color::ALL {
            let similarity = 1.0 - (color.brightness() - background.brightness()).abs();
            out.push(ContrastEntry { color, background, multiplier: 1.0 + gamma * similarity });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionParams {
    pub base_miss_rate: f64,
    pub fog_miss_multiplier: f64,
    pub contrast_table: Vec<ContrastEntry>,
    pub max_detection_range: f64,
    pub position_noise_std: f64,
    pub seed_stream: u64,
}

impl Default for PerceptionParams {
    fn default() -> Self {
        Self {
            base_miss_rate: 0.15,
            fog_miss_multiplier: 2.0,
            contrast_table: contrast_table(1.5),
            max_detection_range: 100.0,
            position_noise_std: 0.05,
            seed_stream: 0,
        }
    }
}

impl PerceptionParams {
    /// Perfect perception: nothing is missed and positions are exact.
    pub fn perfect() -> Self {
        Self { base_miss_rate: 0.0, position_noise_std: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(format!("perception.{m}")));
        if !(0.0..=1.0).contains(&self.base_miss_rate) {
            return bad(format!("base_miss_rate {} outside [0, 1]", self.base_miss_rate));
        }
        if !(self.fog_miss_multiplier.is_finite() && self.fog_miss_multiplier >= 1.0) {
            return bad(format!("fog_miss_multiplier {} must be at least 1", self.fog_miss_multiplier));
        }
        if !(self.max_detection_range.is_finite() && self.max_detection_range >= 0.0) {
            return bad("max_detection_range must be non-negative".into());
        }
        if !(self.position_noise_std.is_finite() && self.position_noise_std >= 0.0) {
            return bad("position_noise_std must be non-negative".into());
        }
        if let Some(e) = self.contrast_table.iter().find(|e| !(e.multiplier.is_finite() && e.multiplier >= 0.0)) {
            return bad(format!("contrast multiplier for {:?}/{:?} is invalid", e.color, e.background));
        }
        Ok(())
    }

    pub fn contrast(&self, color: Color, background: Background) -> f64 {
        self.contrast_table
            .iter()
            .find(|e| e.color == color && e.background == background)
            .map_or(1.0, |e| e.multiplier)
    }

    /// Per-frame miss probability of an object with the given appearance.
    pub fn miss_probability(&self, appearance: &Appearance, fog: bool) -> f64 {
        let background = if fog { Background::FogBright } else { Background::RoadDark };
        let contrast = appearance.colors.iter().map(|&c| self.contrast(c, background)).sum::<f64>()
            / appearance.colors.len().max(1) as f64;
        let fog_mult = if fog { self.fog_miss_multiplier } else { 1.0 };
        (self.base_miss_rate * fog_mult * contrast * appearance.model_multiplier).clamp(0.0, MAX_MISS_PROBABILITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Vehicle,
    Pedestrian,
}

/// Visual properties that drive the miss model.
#[derive(Debug, Clone, PartialEq)]
pub struct Appearance {
    /// Visible colors; their contrast multipliers are averaged.
    pub colors: Vec<Color>,
    pub model_multiplier: f64,
}

/// A ground-truth object expressed in the ego frame (origin at the front
/// bumper center, x forward, y left).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub object: usize,
    pub position: Vec2,
    pub class: ObjectClass,
    pub appearance: Appearance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub object: usize,
    /// Estimated position relative to the ego bumper, in the ego frame.
    pub position: Vec2,
    pub class: ObjectClass,
    pub detected: bool,
}

/// Runs the detector on one frame. `rngs[k]` is the stream of `scene[k]`;
/// every object consumes the same number of draws whether or not it is
/// seen, so streams stay aligned across frames.
pub fn perceive(scene: &[SceneObject], pp: &PerceptionParams, fog: bool, rngs: &mut [ChaCha8Rng]) -> Vec<Detection> {
    assert_eq!(scene.len(), rngs.len(), "one random stream per scene object");
    scene
        .iter()
        .zip(rngs.iter_mut())
        .map(|(obj, rng)| {
            let u: f64 = rng.random();
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            let in_range = obj.position.norm() <= pp.max_detection_range;
            let detected = in_range && u >= pp.miss_probability(&obj.appearance, fog);
            let noise = Vec2::new(nx, ny) * pp.position_noise_std;
            Detection {
                object: obj.object,
                position: if detected { obj.position + noise } else { obj.position },
                class: obj.class,
                detected,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn object(x: f64) -> SceneObject {
        SceneObject {
            object: 1,
            position: Vec2::new(x, 1.0),
            class: ObjectClass::Vehicle,
            appearance: Appearance { colors: vec![Color::Red], model_multiplier: 1.0 },
        }
    }

    fn stream() -> Vec<ChaCha8Rng> {
        vec![ChaCha8Rng::seed_from_u64(7)]
    }

    #[test]
    fn perfect_perception_is_identity() {
        let pp = PerceptionParams::perfect();
        let mut rngs = stream();
        for x in [1.0, 20.0, 99.0] {
            let d = perceive(&[object(x)], &pp, true, &mut rngs)[0];
            assert!(d.detected);
            assert_eq!(d.position, Vec2::new(x, 1.0));
        }
    }

    #[test]
    fn range_gate() {
        let pp = PerceptionParams::perfect();
        let d = perceive(&[object(200.0)], &pp, false, &mut stream())[0];
        assert!(!d.detected);
    }

    #[test]
    fn miss_probability_is_clamped() {
        let pp = PerceptionParams { base_miss_rate: 1.0, ..PerceptionParams::default() };
        let a = Appearance { colors: vec![Color::Blue], model_multiplier: 1.4 };
        assert_eq!(pp.miss_probability(&a, true), MAX_MISS_PROBABILITY);
    }

    #[test]
    fn contrast_follows_brightness_gap() {
        let pp = PerceptionParams::default();
        // blue (0.3) is close to the dark road (0.25), white (0.95) is far
        let dark = pp.contrast(Color::Blue, Background::RoadDark);
        let light = pp.contrast(Color::White, Background::RoadDark);
        assert!((dark - (1.0 + 1.5 * 0.95)).abs() < 1e-12);
        assert!((light - (1.0 + 1.5 * 0.3)).abs() < 1e-12);
        assert!(pp.contrast(Color::White, Background::FogBright) > pp.contrast(Color::Black, Background::FogBright));
    }

    #[test]
    fn empirical_miss_rate() {
        // table multiplier 1 for every color makes the miss probability the base rate
        let pp = PerceptionParams { base_miss_rate: 0.3, contrast_table: Vec::new(), ..PerceptionParams::default() };
        let mut rngs = stream();
        let frames = 10_000;
        let misses = (0..frames).filter(|_| !perceive(&[object(10.0)], &pp, false, &mut rngs)[0].detected).count();
        let rate = misses as f64 / frames as f64;
        assert!((rate - 0.3).abs() < 0.02, "rate {rate}");
    }
}

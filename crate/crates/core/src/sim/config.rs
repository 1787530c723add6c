//! Scenario configuration, loaded from TOML.
//!
//! Every section is optional; omitted keys fall back to the default indoor
//! scenario (5 m × 5 m × 3 m room, five ceiling LEDs, upward-facing
//! receiver). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{NoiseParams, PdParams, PowerNoise};
use crate::geometry::{CameraIntrinsics, Vec3};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoomConfig {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self {
            length: 5.0,
            width: 5.0,
            height: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedConfig {
    pub id: u32,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiltMode {
    /// Every LED points straight down.
    None,
    /// Each LED is tilted by exactly `theta_deg` towards a random azimuth.
    Fixed,
    /// Each LED is tilted by a uniform angle in `[0, theta_deg]`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TiltConfig {
    pub mode: TiltMode,
    pub theta_deg: f64,
}

impl Default for TiltConfig {
    fn default() -> Self {
        Self {
            mode: TiltMode::None,
            theta_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementMode {
    /// Uniform over the room volume, one position per trial.
    Uniform,
    /// Cell centers of a regular grid; one trial per point.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementConfig {
    pub mode: PlacementMode,
    pub grid_spacing_m: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            mode: PlacementMode::Uniform,
            grid_spacing_m: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationMode {
    /// Optical axis straight up.
    Up,
    /// Optical axis towards the centroid of the configured LEDs.
    TowardLeds,
    /// Optical axis tilted from vertical by a uniform angle up to
    /// `max_tilt_deg`, random azimuth.
    RandomTilt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrientationConfig {
    pub mode: OrientationMode,
    pub max_tilt_deg: f64,
}

impl Default for OrientationConfig {
    fn default() -> Self {
        Self {
            mode: OrientationMode::Up,
            max_tilt_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdConfig {
    pub area_m2: f64,
    pub filter_gain: f64,
    pub refractive_index: f64,
    pub fov_deg: f64,
    pub responsivity: f64,
}

impl Default for PdConfig {
    fn default() -> Self {
        Self {
            area_m2: 1e-4,
            filter_gain: 1.0,
            refractive_index: 1.5,
            fov_deg: 60.0,
            responsivity: 0.54,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraConfig {
    pub fu: f64,
    pub fv: f64,
    pub u0: f64,
    pub v0: f64,
    /// Optional sensor size in pixels; projections outside are rejected.
    pub width_px: Option<f64>,
    pub height_px: Option<f64>,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            fu: 800.0,
            fv: 800.0,
            u0: 320.0,
            v0: 240.0,
            width_px: None,
            height_px: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PowerNoiseConfig {
    Snr { snr_db: f64 },
    Std { std_w: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub power: PowerNoiseConfig,
    pub power_averages: u32,
    pub pixel_std_px: f64,
    pub image_averages: u32,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            power: PowerNoiseConfig::Snr { snr_db: 13.6 },
            power_averages: 1000,
            pixel_std_px: 2.0,
            image_averages: 10,
        }
    }
}

impl NoiseConfig {
    pub fn params(&self) -> NoiseParams {
        NoiseParams {
            power_noise: match self.power {
                PowerNoiseConfig::Snr { snr_db } => PowerNoise::Snr(snr_db),
                PowerNoiseConfig::Std { std_w } => PowerNoise::Std(std_w),
            },
            n_power_averages: self.power_averages,
            pixel_noise_std: self.pixel_std_px,
            n_image_averages: self.image_averages,
        }
    }

    pub fn noiseless() -> Self {
        Self {
            power: PowerNoiseConfig::Std { std_w: 0.0 },
            power_averages: 1,
            pixel_std_px: 0.0,
            image_averages: 1,
        }
    }
}

/// Lever arm between the camera center and the photodiode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OffsetConfig {
    pub magnitude_m: f64,
    /// Direction in the receiver frame; normalized on use.
    pub direction: [f64; 3],
}

impl Default for OffsetConfig {
    fn default() -> Self {
        Self {
            magnitude_m: 0.01,
            direction: [1.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmissionGate {
    /// Receiver must lie within the LED semi-angle.
    SemiAngle,
    /// Receiver must lie in front of the LED.
    Hemisphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub room: RoomConfig,
    pub leds: Vec<LedConfig>,
    pub led_semi_angle_deg: f64,
    pub led_tx_power_w: f64,
    pub led_tilt: TiltConfig,
    pub placement: PlacementConfig,
    pub orientation: OrientationConfig,
    pub pd: PdConfig,
    pub camera: CameraConfig,
    pub noise: NoiseConfig,
    pub d_pc: OffsetConfig,
    pub snr_gate_db: f64,
    pub emission_gate: EmissionGate,
    /// Trial count for uniform placement; grid placement runs every point.
    pub trials: usize,
    pub seed: u64,
    /// Record per-trial solver wall time. Off by default so output files
    /// depend only on the configuration.
    pub record_timing: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let leds = [
            [2.0, 2.0, 3.0],
            [2.0, 3.0, 3.0],
            [3.0, 3.0, 3.0],
            [3.0, 2.0, 3.0],
            [2.5, 2.5, 3.0],
        ];
        Self {
            room: RoomConfig::default(),
            leds: leds
                .iter()
                .enumerate()
                .map(|(i, &position)| LedConfig {
                    id: i as u32 + 1,
                    position,
                })
                .collect(),
            led_semi_angle_deg: 60.0,
            led_tx_power_w: 2.2,
            led_tilt: TiltConfig::default(),
            placement: PlacementConfig::default(),
            orientation: OrientationConfig::default(),
            pd: PdConfig::default(),
            camera: CameraConfig::default(),
            noise: NoiseConfig::default(),
            d_pc: OffsetConfig::default(),
            snr_gate_db: 13.6,
            emission_gate: EmissionGate::SemiAngle,
            trials: 10_000,
            seed: 0,
            record_timing: false,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn led_positions(&self) -> Vec<Vec3> {
        self.leds.iter().map(|l| Vec3::from(l.position)).collect()
    }

    pub fn pd_params(&self) -> Result<PdParams, ConfigError> {
        PdParams::new(
            self.pd.area_m2,
            self.pd.filter_gain,
            self.pd.refractive_index,
            self.pd.fov_deg.to_radians(),
            self.pd.responsivity,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics, ConfigError> {
        let c = &self.camera;
        CameraIntrinsics::new(c.fu, c.fv, c.u0, c.v0).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.room;
        if !(r.length > 0.0 && r.width > 0.0 && r.height > 0.0) {
            return invalid("room dimensions must be positive");
        }
        if self.leds.len() < 3 {
            return invalid("at least 3 LEDs are required");
        }
        for (i, led) in self.leds.iter().enumerate() {
            let [x, y, z] = led.position;
            if !((0.0..=r.length).contains(&x) && (0.0..=r.width).contains(&y) && (0.0..=r.height).contains(&z)) {
                return invalid(format!("LED {} lies outside the room", led.id));
            }
            if self.leds[..i].iter().any(|o| o.id == led.id) {
                return invalid(format!("duplicate LED id {}", led.id));
            }
        }
        let z0 = self.leds[0].position[2];
        if self.leds[..3].iter().any(|l| (l.position[2] - z0).abs() > 1e-9) {
            return invalid("the first three LEDs must share a height");
        }
        if !(self.led_semi_angle_deg > 0.0 && self.led_semi_angle_deg < 90.0) {
            return invalid("led_semi_angle_deg must be in (0, 90)");
        }
        if !(self.led_tx_power_w > 0.0) {
            return invalid("led_tx_power_w must be positive");
        }
        if !(self.led_tilt.theta_deg >= 0.0 && self.led_tilt.theta_deg < 90.0) {
            return invalid("led_tilt.theta_deg must be in [0, 90)");
        }
        if self.placement.mode == PlacementMode::Grid && !(self.placement.grid_spacing_m > 0.0) {
            return invalid("placement.grid_spacing_m must be positive");
        }
        if !(self.orientation.max_tilt_deg >= 0.0 && self.orientation.max_tilt_deg < 90.0) {
            return invalid("orientation.max_tilt_deg must be in [0, 90)");
        }
        self.pd_params()?;
        self.intrinsics()?;
        self.noise
            .params()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let d = Vec3::from(self.d_pc.direction);
        if !(self.d_pc.magnitude_m >= 0.0) || (self.d_pc.magnitude_m > 0.0 && !(d.norm() > 0.0)) {
            return invalid("d_pc needs a nonnegative magnitude and a nonzero direction");
        }
        if !self.snr_gate_db.is_finite() {
            return invalid("snr_gate_db must be finite");
        }
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ScenarioConfig::from_toml_str("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = ScenarioConfig {
            led_tilt: TiltConfig { mode: TiltMode::Random, theta_deg: 5.0 },
            ..ScenarioConfig::default()
        };
        cfg.noise.power = PowerNoiseConfig::Std { std_w: 1e-7 };
        cfg.camera.width_px = Some(640.0);
        let text = cfg.to_toml_string();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_sections() {
        let cfg = ScenarioConfig::from_toml_str(
            "seed = 7\n[led_tilt]\nmode = \"fixed\"\ntheta_deg = 30\n[noise.power]\nmode = \"std\"\nstd_w = 0.0\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.led_tilt.mode, TiltMode::Fixed);
        assert_eq!(cfg.noise.power, PowerNoiseConfig::Std { std_w: 0.0 });
        assert_eq!(cfg.noise.power_averages, 1000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "trails = 5",
            "[room]\nlenght = 5",
            "[noise.power]\nmode = \"snr\"\nsnr_db = 1\nextra = 2",
            "[led_tilt]\nmode = \"sideways\"",
        ] {
            assert!(matches!(ScenarioConfig::from_toml_str(text), Err(ConfigError::Parse(_))), "{text}");
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "trials = 0",
            "[room]\nlength = -1",
            "[pd]\nfov_deg = 100",
            "[[leds]]\nid = 1\nposition = [1, 1, 3]\n[[leds]]\nid = 2\nposition = [2, 1, 3]\n",
            "[[leds]]\nid = 1\nposition = [1, 1, 3]\n[[leds]]\nid = 2\nposition = [2, 1, 3]\n[[leds]]\nid = 3\nposition = [2, 2, 2.5]\n",
            "[[leds]]\nid = 1\nposition = [9, 1, 3]\n[[leds]]\nid = 2\nposition = [2, 1, 3]\n[[leds]]\nid = 3\nposition = [2, 2, 3]\n",
            "[noise]\nimage_averages = 0",
            "[camera]\nfu = 0",
        ] {
            assert!(matches!(ScenarioConfig::from_toml_str(text), Err(ConfigError::Invalid(_))), "{text}");
        }
    }
}

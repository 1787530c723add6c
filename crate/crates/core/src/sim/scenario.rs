//! Synthesis of one trial: receiver pose, LED tilts, and noisy camera and
//! photodiode measurements.

use std::f64::consts::TAU;

use nalgebra::Matrix3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use super::config::{
    ConfigError, EmissionGate, OrientationMode, PlacementMode, ScenarioConfig, TiltMode,
};
use crate::channel::{self, LedSource, NoiseParams, PdParams};
use crate::estimator::{LedAnchor, LedReading, Sighting};
use crate::geometry::{
    incidence_angle, look_along, project_world_to_pixel, CameraIntrinsics, PixelCoord, RigidPose,
    Vec3,
};

/// Margin below the SNR gate still accepted, so a fixed-SNR noise model
/// exactly at the gate passes despite rounding.
pub const SNR_GATE_SLACK_DB: f64 = 1e-9;

/// Why an LED cannot be used in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Infeasibility {
    /// LED is behind the camera or outside the image bounds.
    NotImageable,
    /// LED is outside the receiver field of view.
    OutsideFov,
    /// Receiver is outside the LED's emission cone.
    NotEmitting,
    /// Received signal is below the SNR gate.
    BelowSnrGate,
}

impl Infeasibility {
    pub fn stage(&self) -> &'static str {
        match self {
            Self::NotImageable => "not-imageable",
            Self::OutsideFov => "fov",
            Self::NotEmitting => "emission",
            Self::BelowSnrGate => "snr",
        }
    }
}

/// Ground truth and per-LED measurements for one trial.
#[derive(Debug, Clone)]
pub struct SynthesizedTrial {
    pub truth: Vec3,
    pub pose: RigidPose,
    pub pd_position: Vec3,
    pub leds: Vec<LedSource>,
    pub readings: Vec<Result<LedReading, Infeasibility>>,
}

impl SynthesizedTrial {
    /// Readings of the first `n` LEDs, or the first reason one is unusable.
    pub fn frame(&self, n: usize) -> Result<Vec<LedReading>, Infeasibility> {
        self.readings[..n].iter().copied().collect()
    }
}

/// A validated configuration with derived parameters.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub pd: PdParams,
    pub k: CameraIntrinsics,
    pub noise: NoiseParams,
    grid: Vec<Vec3>,
}

fn grid_axis(extent: f64, spacing: f64) -> Vec<f64> {
    let n = (extent / spacing).floor() as usize;
    (0..n).map(|i| (i as f64 + 0.5) * spacing).collect()
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let grid = if cfg.placement.mode == PlacementMode::Grid {
            let s = cfg.placement.grid_spacing_m;
            let xs = grid_axis(cfg.room.length, s);
            let ys = grid_axis(cfg.room.width, s);
            let zs = grid_axis(cfg.room.height, s);
            let mut pts = Vec::with_capacity(xs.len() * ys.len() * zs.len());
            for &z in &zs {
                for &y in &ys {
                    for &x in &xs {
                        pts.push(Vec3::new(x, y, z));
                    }
                }
            }
            if pts.is_empty() {
                return Err(ConfigError::Invalid("grid spacing exceeds the room".into()));
            }
            pts
        } else {
            Vec::new()
        };
        Ok(Self {
            pd: cfg.pd_params()?,
            k: cfg.intrinsics()?,
            noise: cfg.noise.params(),
            grid,
            cfg,
        })
    }

    pub fn n_trials(&self) -> usize {
        match self.cfg.placement.mode {
            PlacementMode::Uniform => self.cfg.trials,
            PlacementMode::Grid => self.grid.len(),
        }
    }

    /// Independent RNG stream for trial `index`.
    pub fn trial_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(index as u64);
        rng
    }

    fn led_normal<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        let max = self.cfg.led_tilt.theta_deg.to_radians();
        let theta = match self.cfg.led_tilt.mode {
            TiltMode::None => return -Vec3::z(),
            TiltMode::Fixed => max,
            TiltMode::Random => rng.random_range(0.0..=max),
        };
        let azimuth = rng.random_range(0.0..TAU);
        Vec3::new(
            theta.sin() * azimuth.cos(),
            theta.sin() * azimuth.sin(),
            -theta.cos(),
        )
    }

    fn receiver_rotation<R: Rng + ?Sized>(&self, position: &Vec3, rng: &mut R) -> Matrix3<f64> {
        match self.cfg.orientation.mode {
            OrientationMode::Up => Matrix3::identity(),
            OrientationMode::TowardLeds => {
                let leds = self.cfg.led_positions();
                let centroid = leds.iter().sum::<Vec3>() / leds.len() as f64;
                look_along(&(centroid - position), &Vec3::x())
            }
            OrientationMode::RandomTilt => {
                let tilt = rng.random_range(0.0..=self.cfg.orientation.max_tilt_deg.to_radians());
                let azimuth = rng.random_range(0.0..TAU);
                let axis = Vec3::new(
                    tilt.sin() * azimuth.cos(),
                    tilt.sin() * azimuth.sin(),
                    tilt.cos(),
                );
                look_along(&axis, &Vec3::x())
            }
        }
    }

    fn in_image(&self, px: &PixelCoord) -> bool {
        let c = &self.cfg.camera;
        c.width_px.is_none_or(|w| (0.0..=w).contains(&px.u))
            && c.height_px.is_none_or(|h| (0.0..=h).contains(&px.v))
    }

    /// Draws trial `index`. Grid placement ignores the RNG for the position.
    pub fn synthesize_trial<R: Rng + ?Sized>(&self, index: usize, rng: &mut R) -> SynthesizedTrial {
        let cfg = &self.cfg;
        let semi = cfg.led_semi_angle_deg.to_radians();
        let leds: Vec<LedSource> = cfg
            .leds
            .iter()
            .map(|l| {
                let normal = self.led_normal(rng);
                LedSource::new(l.id, Vec3::from(l.position), normal, semi, cfg.led_tx_power_w)
                    .expect("validated config")
            })
            .collect();
        let truth = match cfg.placement.mode {
            PlacementMode::Uniform => Vec3::new(
                rng.random_range(0.0..cfg.room.length),
                rng.random_range(0.0..cfg.room.width),
                rng.random_range(0.0..cfg.room.height),
            ),
            PlacementMode::Grid => self.grid[index],
        };
        let pose = RigidPose::new(self.receiver_rotation(&truth, rng), truth).expect("orthonormal");
        let axis = pose.optical_axis();
        let offset = Vec3::from(cfg.d_pc.direction);
        let pd_position = if cfg.d_pc.magnitude_m > 0.0 {
            truth + pose.camera_to_world_offset(&(offset.normalize() * cfg.d_pc.magnitude_m))
        } else {
            truth
        };

        let pixel_std = self.noise.pixel_noise_std / f64::from(self.noise.n_image_averages).sqrt();
        let pixel_noise = Normal::new(0.0, pixel_std).expect("finite std");
        let readings = leds
            .iter()
            .map(|led| {
                // noise is drawn for every LED so the stream layout does not
                // depend on which LEDs are visible
                let du = pixel_noise.sample(rng);
                let dv = pixel_noise.sample(rng);
                let true_power = channel::received_power(led, &pd_position, &axis, &self.pd)
                    .unwrap_or(0.0);
                let measured = channel::sample_measured_power(true_power, &self.noise, rng);

                let px = project_world_to_pixel(&led.position, &pose, &self.k)
                    .map_err(|_| Infeasibility::NotImageable)?;
                if incidence_angle(&pose.world_to_camera(&led.position)) > self.pd.fov {
                    return Err(Infeasibility::OutsideFov);
                }
                if !self.in_image(&px) {
                    return Err(Infeasibility::NotImageable);
                }
                let to_rx = pd_position - led.position;
                let cos_phi = led.normal.dot(&to_rx) / to_rx.norm();
                let emitting = match cfg.emission_gate {
                    EmissionGate::SemiAngle => cos_phi >= semi.cos(),
                    EmissionGate::Hemisphere => cos_phi > 0.0,
                };
                if !emitting {
                    return Err(Infeasibility::NotEmitting);
                }
                let snr = channel::snr_db(true_power, &self.pd, &self.noise).unwrap_or(f64::INFINITY);
                if snr < cfg.snr_gate_db - SNR_GATE_SLACK_DB || !(measured > 0.0) {
                    return Err(Infeasibility::BelowSnrGate);
                }
                Ok(LedReading {
                    sighting: Sighting {
                        led: LedAnchor {
                            id: led.id,
                            position: led.position,
                        },
                        pixel: PixelCoord::new(px.u + du, px.v + dv),
                    },
                    semi_angle: led.semi_angle,
                    tx_power: led.tx_power,
                    measured_power: measured,
                })
            })
            .collect();
        SynthesizedTrial {
            truth,
            pose,
            pd_position,
            leds,
            readings,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{NoiseConfig, PlacementConfig};

    fn noiseless() -> ScenarioConfig {
        ScenarioConfig {
            noise: NoiseConfig::noiseless(),
            d_pc: crate::sim::config::OffsetConfig { magnitude_m: 0.0, direction: [1.0, 0.0, 0.0] },
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn noiseless_trial_reproduces_geometry() {
        let scn = Scenario::new(noiseless()).unwrap();
        let mut checked = 0;
        for i in 0..200 {
            let t = scn.synthesize_trial(i, &mut scn.trial_rng(i));
            for (led, r) in t.leds.iter().zip(&t.readings) {
                let Ok(r) = r else { continue };
                let px = project_world_to_pixel(&led.position, &t.pose, &scn.k).unwrap();
                assert_eq!(r.sighting.pixel, px);
                let p = channel::received_power(led, &t.truth, &Vec3::z(), &scn.pd).unwrap();
                assert_eq!(r.measured_power, p);
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn same_seed_same_trials() {
        let scn = Scenario::new(ScenarioConfig::default()).unwrap();
        for i in [0, 5, 99] {
            let a = scn.synthesize_trial(i, &mut scn.trial_rng(i));
            let b = scn.synthesize_trial(i, &mut scn.trial_rng(i));
            assert_eq!(a.truth, b.truth);
            assert_eq!(a.readings, b.readings);
        }
        let a = scn.synthesize_trial(0, &mut scn.trial_rng(0));
        let b = scn.synthesize_trial(1, &mut scn.trial_rng(1));
        assert_ne!(a.truth, b.truth);
    }

    #[test]
    fn corner_receiver_with_narrow_fov_is_infeasible() {
        let mut cfg = noiseless();
        cfg.pd.fov_deg = 10.0;
        cfg.placement = PlacementConfig { mode: PlacementMode::Grid, grid_spacing_m: 0.5 };
        let scn = Scenario::new(cfg).unwrap();
        // (0.25, 0.25, 0.25) is the first grid point
        let t = scn.synthesize_trial(0, &mut scn.trial_rng(0));
        assert_eq!(t.truth, Vec3::new(0.25, 0.25, 0.25));
        assert_eq!(t.frame(3).unwrap_err(), Infeasibility::OutsideFov);
    }

    #[test]
    fn grid_covers_cell_centers() {
        let mut cfg = noiseless();
        cfg.placement = PlacementConfig { mode: PlacementMode::Grid, grid_spacing_m: 0.05 };
        let scn = Scenario::new(cfg).unwrap();
        assert_eq!(scn.n_trials(), 100 * 100 * 60);
        let last = scn.synthesize_trial(scn.n_trials() - 1, &mut scn.trial_rng(0)).truth;
        assert!((last - Vec3::new(4.975, 4.975, 2.975)).norm() < 1e-12);
    }

    #[test]
    fn offset_moves_the_photodiode() {
        let mut cfg = noiseless();
        cfg.d_pc.magnitude_m = 0.03;
        let scn = Scenario::new(cfg).unwrap();
        let t = scn.synthesize_trial(3, &mut scn.trial_rng(3));
        assert!(((t.pd_position - t.truth) - Vec3::new(0.03, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn emission_gate_modes() {
        let mut cfg = noiseless();
        cfg.led_semi_angle_deg = 20.0;
        cfg.placement = PlacementConfig { mode: PlacementMode::Grid, grid_spacing_m: 0.25 };
        let count = |cfg: &ScenarioConfig| {
            let scn = Scenario::new(cfg.clone()).unwrap();
            (0..scn.n_trials())
                .filter(|&i| scn.synthesize_trial(i, &mut scn.trial_rng(i)).frame(3).is_ok())
                .count()
        };
        let strict = count(&cfg);
        cfg.emission_gate = EmissionGate::Hemisphere;
        assert!(count(&cfg) > strict);
    }
}

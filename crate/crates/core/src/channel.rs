//! Line-of-sight Lambertian optical channel.
//!
//! Only the direct path is modelled. The photodiode shares the camera's
//! normal; its position may be displaced from the optical center by the rig
//! offset, which is handled by the simulation harness.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ChannelError {
    #[error("semi-angle {0} rad outside (0, pi/2)")]
    InvalidSemiAngle(f64),
    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("LED and receiver positions coincide")]
    CoincidentPositions,
    #[error("noise variance is zero")]
    ZeroNoise,
}

/// A ceiling-mounted Lambertian LED.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedSource {
    pub id: u32,
    pub position: Vec3,
    /// Unit normal of the emitting face (world frame).
    pub normal: Vec3,
    /// Half-power semi-angle, radians.
    pub semi_angle: f64,
    /// Optical transmit power, watts.
    pub tx_power: f64,
}

impl LedSource {
    pub fn new(
        id: u32,
        position: Vec3,
        normal: Vec3,
        semi_angle: f64,
        tx_power: f64,
    ) -> Result<Self, ChannelError> {
        if !((normal.norm() - 1.0).abs() < 1e-9) {
            return Err(ChannelError::InvalidParameter {
                name: "normal",
                value: normal.norm(),
            });
        }
        lambertian_order(semi_angle)?;
        if !(tx_power > 0.0) {
            return Err(ChannelError::InvalidParameter {
                name: "tx_power",
                value: tx_power,
            });
        }
        Ok(Self {
            id,
            position,
            normal,
            semi_angle,
            tx_power,
        })
    }

    pub fn lambertian_order(&self) -> f64 {
        lambertian_order(self.semi_angle).expect("validated at construction")
    }
}

/// Photodiode front-end parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdParams {
    /// Detector area, m².
    pub area: f64,
    pub filter_gain: f64,
    /// Refractive index of the optical concentrator.
    pub refractive_index: f64,
    /// Field of view, radians.
    pub fov: f64,
    /// Optical-to-electrical responsivity, A/W.
    pub responsivity: f64,
}

impl PdParams {
    pub fn new(
        area: f64,
        filter_gain: f64,
        refractive_index: f64,
        fov: f64,
        responsivity: f64,
    ) -> Result<Self, ChannelError> {
        let check = |ok: bool, name, value| {
            if ok {
                Ok(())
            } else {
                Err(ChannelError::InvalidParameter { name, value })
            }
        };
        check(area > 0.0, "area", area)?;
        check(filter_gain > 0.0, "filter_gain", filter_gain)?;
        check(refractive_index >= 1.0, "refractive_index", refractive_index)?;
        check(fov > 0.0 && fov <= PI / 2.0, "fov", fov)?;
        check(responsivity > 0.0, "responsivity", responsivity)?;
        Ok(Self {
            area,
            filter_gain,
            refractive_index,
            fov,
            responsivity,
        })
    }

    /// Concentrator gain inside the field of view.
    pub fn in_fov_gain(&self) -> f64 {
        let s = self.fov.sin();
        self.refractive_index * self.refractive_index / (s * s)
    }
}

/// How the per-measurement optical power noise is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerNoise {
    /// Fixed standard deviation in watts.
    Std(f64),
    /// Standard deviation chosen per measurement so that its SNR equals the
    /// given value in dB.
    Snr(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub power_noise: PowerNoise,
    pub n_power_averages: u32,
    /// Per-image pixel noise, pixels.
    pub pixel_noise_std: f64,
    pub n_image_averages: u32,
}

impl NoiseParams {
    pub fn noiseless() -> Self {
        Self {
            power_noise: PowerNoise::Std(0.0),
            n_power_averages: 1,
            pixel_noise_std: 0.0,
            n_image_averages: 1,
        }
    }

    /// Noise whose per-measurement power SNR is `snr_db`.
    pub fn with_target_snr(
        snr_db: f64,
        n_power_averages: u32,
        pixel_noise_std: f64,
        n_image_averages: u32,
    ) -> Self {
        Self {
            power_noise: PowerNoise::Snr(snr_db),
            n_power_averages,
            pixel_noise_std,
            n_image_averages,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |name, value| Err(ChannelError::InvalidParameter { name, value });
        match self.power_noise {
            PowerNoise::Std(s) if !(s >= 0.0) => return bad("power_noise_std", s),
            PowerNoise::Snr(db) if !db.is_finite() => return bad("power_snr_db", db),
            _ => {}
        }
        if self.n_power_averages == 0 {
            return bad("n_power_averages", 0.0);
        }
        if !(self.pixel_noise_std >= 0.0) {
            return bad("pixel_noise_std", self.pixel_noise_std);
        }
        if self.n_image_averages == 0 {
            return bad("n_image_averages", 0.0);
        }
        Ok(())
    }

    /// Standard deviation (watts) of a single power measurement.
    pub fn power_std_for(&self, true_power: f64) -> f64 {
        match self.power_noise {
            PowerNoise::Std(s) => s,
            PowerNoise::Snr(db) => true_power.abs() * 10f64.powf(-db / 20.0),
        }
    }
}

pub fn lambertian_order(semi_angle: f64) -> Result<f64, ChannelError> {
    if !(semi_angle > 0.0 && semi_angle < PI / 2.0) {
        return Err(ChannelError::InvalidSemiAngle(semi_angle));
    }
    Ok(-LN_2 / semi_angle.cos().ln())
}

/// Optical concentrator gain; the field-of-view boundary is included.
pub fn concentrator_gain(psi: f64, pd: &PdParams) -> f64 {
    if (0.0..=pd.fov).contains(&psi) {
        pd.in_fov_gain()
    } else {
        0.0
    }
}

/// Received-power constant `P_t (m+1) A T_s g / (2π)` for an in-FoV link.
pub fn link_constant(led: &LedSource, pd: &PdParams) -> f64 {
    let m = led.lambertian_order();
    led.tx_power * (m + 1.0) * pd.area * pd.filter_gain * pd.in_fov_gain() / (2.0 * PI)
}

/// Irradiance and incidence cosines of the link `led → rx_pos`, plus the
/// squared distance.
fn link_geometry(
    led: &LedSource,
    rx_pos: &Vec3,
    rx_normal: &Vec3,
) -> Result<(f64, f64, f64), ChannelError> {
    let d = rx_pos - led.position;
    let d2 = d.norm_squared();
    if d2 == 0.0 {
        return Err(ChannelError::CoincidentPositions);
    }
    let dist = d2.sqrt();
    let cos_phi = led.normal.dot(&d) / (led.normal.norm() * dist);
    let cos_psi = -rx_normal.dot(&d) / (rx_normal.norm() * dist);
    Ok((cos_phi.clamp(-1.0, 1.0), cos_psi.clamp(-1.0, 1.0), d2))
}

/// LoS DC gain between `led` and a photodiode at `rx_pos` with normal `rx_normal`.
pub fn channel_gain(
    led: &LedSource,
    rx_pos: &Vec3,
    rx_normal: &Vec3,
    pd: &PdParams,
) -> Result<f64, ChannelError> {
    let (cos_phi, cos_psi, d2) = link_geometry(led, rx_pos, rx_normal)?;
    if cos_phi <= 0.0 {
        return Ok(0.0);
    }
    let psi = cos_psi.acos();
    let g = concentrator_gain(psi, pd);
    if g == 0.0 || cos_psi <= 0.0 {
        return Ok(0.0);
    }
    let m = led.lambertian_order();
    Ok((m + 1.0) * pd.area / (2.0 * PI * d2) * cos_phi.powf(m) * pd.filter_gain * g * cos_psi)
}

pub fn received_power(
    led: &LedSource,
    rx_pos: &Vec3,
    rx_normal: &Vec3,
    pd: &PdParams,
) -> Result<f64, ChannelError> {
    Ok(led.tx_power * channel_gain(led, rx_pos, rx_normal, pd)?)
}

/// Electrical SNR in dB of a measurement of optical power `p_r`. A zero
/// received power maps to negative infinity.
pub fn snr_db(p_r: f64, pd: &PdParams, noise: &NoiseParams) -> Result<f64, ChannelError> {
    if p_r <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let sigma = pd.responsivity * noise.power_std_for(p_r);
    if sigma == 0.0 {
        return Err(ChannelError::ZeroNoise);
    }
    let signal = p_r * pd.responsivity;
    Ok(10.0 * ((signal * signal) / (sigma * sigma)).log10())
}

/// Average of `n_power_averages` noisy measurements of `true_power`.
///
/// The draws are i.i.d. Gaussian, so their mean is sampled directly from
/// `N(true_power, σ²/n)`.
pub fn sample_measured_power<R: Rng + ?Sized>(
    true_power: f64,
    noise: &NoiseParams,
    rng: &mut R,
) -> f64 {
    let sigma = noise.power_std_for(true_power);
    if sigma == 0.0 {
        return true_power;
    }
    let z: f64 = rng.sample(StandardNormal);
    true_power + z * sigma / f64::from(noise.n_power_averages.max(1)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table1_pd() -> PdParams {
        PdParams::new(1e-4, 1.0, 1.5, 60f64.to_radians(), 0.54).unwrap()
    }

    fn down_led(pos: Vec3) -> LedSource {
        LedSource::new(1, pos, -Vec3::z(), 60f64.to_radians(), 2.2).unwrap()
    }

    #[test]
    fn lambertian_order_examples() {
        assert_relative_eq!(lambertian_order(60f64.to_radians()).unwrap(), 1.0, epsilon = 1e-12);
        let m30 = -LN_2 / (30f64.to_radians().cos()).ln();
        assert_relative_eq!(lambertian_order(30f64.to_radians()).unwrap(), m30);
        assert_relative_eq!(m30, 4.8188, epsilon = 1e-4);
        let steep = lambertian_order(89.9f64.to_radians()).unwrap();
        assert!(steep.is_finite() && steep > 0.0 && steep < 1.0);
        assert!(lambertian_order(0.0).is_err());
        assert!(lambertian_order(PI / 2.0).is_err());
        assert!(lambertian_order(-0.1).is_err());
    }

    #[test]
    fn concentrator_gain_boundary() {
        let pd = table1_pd();
        assert_relative_eq!(concentrator_gain(0.0, &pd), 3.0, epsilon = 1e-12);
        assert_relative_eq!(concentrator_gain(pd.fov, &pd), 3.0, epsilon = 1e-12);
        assert_eq!(concentrator_gain(pd.fov + 1e-9, &pd), 0.0);
    }

    #[test]
    fn gain_on_axis_matches_hand_value() {
        let pd = table1_pd();
        let led = down_led(Vec3::new(2.5, 2.5, 3.0));
        let h = channel_gain(&led, &Vec3::new(2.5, 2.5, 1.0), &Vec3::z(), &pd).unwrap();
        let expected = 2.0 * 1e-4 / (2.0 * PI * 4.0) * 3.0;
        assert_relative_eq!(h, expected, max_relative = 1e-12);
        assert_relative_eq!(h, 2.3873e-5, max_relative = 1e-4);
        let p = received_power(&led, &Vec3::new(2.5, 2.5, 1.0), &Vec3::z(), &pd).unwrap();
        assert_relative_eq!(p, 2.2 * expected, max_relative = 1e-12);
        assert_relative_eq!(p, 5.2521e-5, max_relative = 1e-4);
    }

    #[test]
    fn gain_zero_outside_fov_or_behind_panel() {
        let pd = table1_pd();
        let led = down_led(Vec3::new(0.0, 0.0, 3.0));
        // 2 m below and 4 m aside: psi ~ 63.4° > 60°.
        assert_eq!(channel_gain(&led, &Vec3::new(4.0, 0.0, 1.0), &Vec3::z(), &pd).unwrap(), 0.0);
        // above the emitting face
        assert_eq!(channel_gain(&led, &Vec3::new(0.0, 0.0, 4.0), &-Vec3::z(), &pd).unwrap(), 0.0);
        assert_eq!(
            channel_gain(&led, &led.position, &Vec3::z(), &pd),
            Err(ChannelError::CoincidentPositions)
        );
        let p = received_power(&led, &Vec3::new(4.0, 0.0, 1.0), &Vec3::z(), &pd).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn inverse_square_and_linear_in_tx_power() {
        let pd = table1_pd();
        let led = down_led(Vec3::new(1.0, 1.0, 3.0));
        let dir = Vec3::new(0.3, 0.1, -1.0).normalize();
        let near = led.position + dir * 1.0;
        let far = led.position + dir * 2.0;
        let n = -dir;
        let p1 = received_power(&led, &near, &n, &pd).unwrap();
        let p2 = received_power(&led, &far, &n, &pd).unwrap();
        assert_relative_eq!(p1 / p2, 4.0, max_relative = 1e-12);
        let brighter = LedSource { tx_power: 4.4, ..led };
        let p3 = received_power(&brighter, &near, &n, &pd).unwrap();
        assert_relative_eq!(p3, 2.0 * p1, max_relative = 1e-12);
    }

    #[test]
    fn unit_order_closed_form_at_random_geometries() {
        let pd = table1_pd();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let led = LedSource::new(
                0,
                Vec3::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), 3.0),
                -Vec3::z(),
                60f64.to_radians(),
                1.0,
            )
            .unwrap();
            let rx = Vec3::new(
                rng.random_range(0.0..5.0),
                rng.random_range(0.0..5.0),
                rng.random_range(0.0..2.9),
            );
            // Receiver facing up: phi = psi.
            let d = (rx - led.position).norm();
            let cos = (led.position.z - rx.z) / d;
            let h = channel_gain(&led, &rx, &Vec3::z(), &pd).unwrap();
            let expected = if cos.acos() <= pd.fov {
                2.0 * pd.area / (2.0 * PI) * 3.0 * cos * cos / (d * d)
            } else {
                0.0
            };
            assert!((h - expected).abs() <= 1e-12 * expected.max(1e-30));
        }
    }

    #[test]
    fn snr_examples() {
        let pd = table1_pd();
        let noise = NoiseParams {
            power_noise: PowerNoise::Std(1e-6),
            ..NoiseParams::noiseless()
        };
        assert_relative_eq!(snr_db(1e-6, &pd, &noise).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(snr_db(10f64.sqrt() * 1e-6, &pd, &noise).unwrap(), 10.0, epsilon = 1e-12);
        assert_eq!(snr_db(0.0, &pd, &noise).unwrap(), f64::NEG_INFINITY);
        assert_eq!(snr_db(1e-6, &pd, &NoiseParams::noiseless()), Err(ChannelError::ZeroNoise));
        let fixed = NoiseParams::with_target_snr(13.6, 1000, 2.0, 10);
        assert_relative_eq!(snr_db(3.7e-5, &pd, &fixed).unwrap(), 13.6, epsilon = 1e-9);
    }

    #[test]
    fn measured_power_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(sample_measured_power(1e-5, &NoiseParams::noiseless(), &mut rng), 1e-5);

        let sigma = 1e-6;
        let noise = NoiseParams {
            power_noise: PowerNoise::Std(sigma),
            n_power_averages: 1000,
            ..NoiseParams::noiseless()
        };
        let samples: Vec<f64> = (0..10_000)
            .map(|_| sample_measured_power(1e-5, &noise, &mut rng))
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        let expected = sigma / 1000f64.sqrt();
        assert!((var.sqrt() / expected - 1.0).abs() < 0.1);

        let run = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..8).map(|_| sample_measured_power(1e-5, &noise, &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn parameter_validation() {
        assert!(PdParams::new(0.0, 1.0, 1.5, 1.0, 0.5).is_err());
        assert!(PdParams::new(1e-4, 1.0, 0.9, 1.0, 0.5).is_err());
        assert!(PdParams::new(1e-4, 1.0, 1.5, 1.7, 0.5).is_err());
        assert!(LedSource::new(0, Vec3::zeros(), Vec3::new(0.0, 0.0, -2.0), 1.0, 1.0).is_err());
        assert!(LedSource::new(0, Vec3::zeros(), -Vec3::z(), 1.0, 0.0).is_err());
        let bad = NoiseParams {
            n_image_averages: 0,
            ..NoiseParams::noiseless()
        };
        assert!(bad.validate().is_err());
    }
}

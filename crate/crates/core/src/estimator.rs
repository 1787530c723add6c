//! Three-LED position estimation from camera bearings and received power.
//!
//! The pipeline:
//!
//! 1. back-project each LED pixel to a bearing and read off its incidence
//!    angle against the optical axis;
//! 2. solve the law-of-cosines system for up to four candidate distance
//!    triples;
//! 3. invert the Lambertian link for each candidate to get the implied
//!    irradiance cosines and keep the candidate whose cosines fall inside
//!    the LEDs' emission band, relaxing the band in 5% steps if needed;
//! 4. trilaterate `(x, y)` by linear least squares and recover `z` below the
//!    LED plane.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use thiserror::Error;

use crate::channel::{self, PdParams};
use crate::geometry::{
    back_project_bearing, inter_bearing_angle, CameraIntrinsics, GeometryError,
    PixelCoord, Vec3,
};
use crate::p3p::{self, DistanceCandidateSet, P3pError, P3pProblem};

/// Relaxation step applied to the emission band.
pub const TOLERANCE_STEP: f64 = 0.05;
/// Number of relaxation steps; the last one is a tolerance of 1.0.
pub const MAX_TOLERANCE_STEPS: u32 = 20;
/// Absolute slack on the band edges so exact-arithmetic boundary cases
/// (e.g. an LED pointing straight at the receiver) are not rejected by
/// rounding.
pub const BAND_SLACK: f64 = 1e-9;
/// LEDs used for trilateration must share a height to this tolerance.
pub const COPLANAR_TOLERANCE: f64 = 1e-9;
/// Negative radicands above `-RADICAND_EPS` are clamped to zero.
pub const RADICAND_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PositionError {
    #[error("LEDs are not at a common height")]
    NotCoplanar,
    #[error("LEDs are collinear in plan view")]
    SingularGeometry,
    #[error("distance is shorter than the planar offset (radicand {0:e})")]
    InconsistentDistance(f64),
    #[error("recovered height {0} is above the ceiling")]
    AboveCeiling(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EstimateError {
    #[error("invalid measurement frame: {0}")]
    InvalidFrame(&'static str),
    #[error(transparent)]
    Bearing(#[from] GeometryError),
    #[error(transparent)]
    Distance(#[from] P3pError),
    #[error("incidence angle {0} rad is not below pi/2")]
    InvalidIncidence(f64),
    #[error("no candidate satisfies the emission band even at full tolerance")]
    Disambiguation,
    #[error(transparent)]
    Position(#[from] PositionError),
}

impl EstimateError {
    /// Short name of the pipeline stage that failed.
    pub fn stage(&self) -> &'static str {
        match self {
            Self::InvalidFrame(_) => "frame",
            Self::Bearing(_) => "bearing",
            Self::Distance(_) => "distance",
            Self::InvalidIncidence(_) => "irradiance",
            Self::Disambiguation => "disambiguation",
            Self::Position(_) => "position",
        }
    }
}

/// A known LED location, as broadcast over the visible light link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedAnchor {
    pub id: u32,
    pub position: Vec3,
}

/// An LED as seen by the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sighting {
    pub led: LedAnchor,
    pub pixel: PixelCoord,
}

/// Camera sighting plus the photodiode reading for the same LED.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedReading {
    pub sighting: Sighting,
    pub semi_angle: f64,
    pub tx_power: f64,
    /// Averaged received optical power, watts.
    pub measured_power: f64,
}

/// Exactly three LED readings with distinct ids.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    readings: [LedReading; 3],
    orders: [f64; 3],
    cos_semi: [f64; 3],
}

impl MeasurementFrame {
    pub fn new(readings: &[LedReading]) -> Result<Self, EstimateError> {
        let readings: [LedReading; 3] = readings
            .try_into()
            .map_err(|_| EstimateError::InvalidFrame("expected exactly 3 LEDs"))?;
        let ids = readings.map(|r| r.sighting.led.id);
        if ids[0] == ids[1] || ids[0] == ids[2] || ids[1] == ids[2] {
            return Err(EstimateError::InvalidFrame("duplicate LED ids"));
        }
        let mut orders = [0.0; 3];
        for (r, m) in readings.iter().zip(&mut orders) {
            if !(r.measured_power > 0.0 && r.measured_power.is_finite()) {
                return Err(EstimateError::InvalidFrame("measured power must be positive"));
            }
            *m = match channel::lambertian_order(r.semi_angle) {
                Ok(m) if r.tx_power > 0.0 => m,
                _ => return Err(EstimateError::InvalidFrame("invalid LED parameters")),
            };
        }
        let cos_semi = readings.map(|r| r.semi_angle.cos());
        Ok(Self { readings, orders, cos_semi })
    }

    pub fn readings(&self) -> &[LedReading; 3] {
        &self.readings
    }

    pub fn positions(&self) -> [Vec3; 3] {
        self.readings.map(|r| r.sighting.led.position)
    }
}

/// Outcome of the emission-band test for one distance candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEvaluation {
    pub index: usize,
    pub cosines: [f64; 3],
    pub feasible: bool,
    /// Tolerance at which the candidate first passes, if it ever does.
    pub passes_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub chosen: usize,
    pub distances: [f64; 3],
    pub tolerance: f64,
    pub n_feasible: usize,
    pub ambiguous: bool,
    pub evaluations: Vec<CandidateEvaluation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// Emission-band tolerance at which a candidate was accepted.
    pub tolerance: f64,
    pub n_candidates: usize,
    pub n_feasible: usize,
    /// Several candidates passed and one was drawn at random.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEstimate {
    pub position: Vec3,
    pub distances: [f64; 3],
    pub diagnostics: Diagnostics,
}

/// Per-frame constants of the inverted Lambertian link.
struct LinkInversion {
    inv_m: [f64; 3],
    /// `P_i / (C_i cos ψ_i)`
    scale: [f64; 3],
}

impl LinkInversion {
    fn new(frame: &MeasurementFrame, psi_est: &[f64; 3], pd: &PdParams) -> Result<Self, EstimateError> {
        if let Some(&bad) = psi_est.iter().find(|p| !(**p < std::f64::consts::FRAC_PI_2)) {
            return Err(EstimateError::InvalidIncidence(bad));
        }
        Self::from_cos_psi(frame, psi_est.map(f64::cos), pd)
    }

    fn from_cos_psi(frame: &MeasurementFrame, cos_psi: [f64; 3], pd: &PdParams) -> Result<Self, EstimateError> {
        let gain = pd.area * pd.filter_gain * pd.in_fov_gain() / (2.0 * std::f64::consts::PI);
        let mut inv_m = [0.0; 3];
        let mut scale = [0.0; 3];
        for (i, reading) in frame.readings.iter().enumerate() {
            if !(cos_psi[i] > 0.0) {
                return Err(EstimateError::InvalidIncidence(cos_psi[i].clamp(-1.0, 1.0).acos()));
            }
            let m = frame.orders[i];
            inv_m[i] = 1.0 / m;
            scale[i] = reading.measured_power / (reading.tx_power * (m + 1.0) * gain * cos_psi[i]);
        }
        Ok(Self { inv_m, scale })
    }

    fn cosines(&self, distances: &[f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| (self.scale[i] * distances[i] * distances[i]).powf(self.inv_m[i]))
    }
}

/// Irradiance cosines implied by a distance candidate, inverted from the
/// Lambertian link. Values are returned unclamped.
pub fn irradiance_cosines(
    distances: &[f64; 3],
    frame: &MeasurementFrame,
    psi_est: &[f64; 3],
    pd: &PdParams,
) -> Result<[f64; 3], EstimateError> {
    Ok(LinkInversion::new(frame, psi_est, pd)?.cosines(distances))
}

fn tolerance_at(step: u32) -> f64 {
    f64::from(step) * TOLERANCE_STEP
}

fn within_band(cosines: &[f64; 3], cos_semi: &[f64; 3], tolerance: f64) -> bool {
    cosines.iter().zip(cos_semi).all(|(&c, &cos_semi)| {
        let lo = cos_semi * (1.0 - tolerance) - BAND_SLACK;
        let hi = 1.0 + tolerance + BAND_SLACK;
        (lo..=hi).contains(&c)
    })
}

/// First relaxation step at which `cosines` pass the band.
fn first_passing_step(cosines: &[f64; 3], cos_semi: &[f64; 3]) -> Option<u32> {
    (0..=MAX_TOLERANCE_STEPS).find(|&s| within_band(cosines, cos_semi, tolerance_at(s)))
}

/// Picks the distance candidate consistent with the received powers.
///
/// A candidate is feasible at tolerance `t` when each implied irradiance
/// cosine lies in `[cos Φ½ (1 − t), 1 + t]`. The tolerance starts at zero and
/// grows in [`TOLERANCE_STEP`] increments until some candidate passes; ties
/// are broken uniformly at random with `rng`.
pub fn filter_candidates<R: Rng + ?Sized>(
    candidates: &DistanceCandidateSet,
    frame: &MeasurementFrame,
    psi_est: &[f64; 3],
    pd: &PdParams,
    rng: &mut R,
) -> Result<Selection, EstimateError> {
    select(candidates, frame, &LinkInversion::new(frame, psi_est, pd)?, rng)
}

fn select<R: Rng + ?Sized>(
    candidates: &DistanceCandidateSet,
    frame: &MeasurementFrame,
    link: &LinkInversion,
    rng: &mut R,
) -> Result<Selection, EstimateError> {
    if candidates.is_empty() {
        return Err(EstimateError::Distance(P3pError::NoSolution));
    }
    let mut evaluations = Vec::with_capacity(candidates.len());
    let mut steps = Vec::with_capacity(candidates.len());
    for (index, cand) in candidates.iter().enumerate() {
        let cosines = link.cosines(&cand.distances);
        let step = first_passing_step(&cosines, &frame.cos_semi);
        steps.push(step);
        evaluations.push(CandidateEvaluation {
            index,
            cosines,
            feasible: false,
            passes_at: step.map(tolerance_at),
        });
    }
    let accept = steps.iter().flatten().min().copied().ok_or(EstimateError::Disambiguation)?;
    let mut n_feasible = 0;
    for (e, s) in evaluations.iter_mut().zip(&steps) {
        e.feasible = *s == Some(accept);
        n_feasible += usize::from(e.feasible);
    }
    let ambiguous = n_feasible > 1;
    let pick = if ambiguous { rng.random_range(0..n_feasible) } else { 0 };
    let chosen = evaluations.iter().filter(|e| e.feasible).nth(pick).expect("pick < n_feasible").index;
    Ok(Selection {
        chosen,
        distances: candidates.candidates[chosen].distances,
        tolerance: tolerance_at(accept),
        n_feasible,
        ambiguous,
        evaluations,
    })
}

/// Planar position from three distances to LEDs at a common height.
pub fn lls_xy(distances: &[f64; 3], leds: &[Vec3; 3]) -> Result<(f64, f64), PositionError> {
    let [l1, l2, l3] = leds;
    if (l1.z - l2.z).abs() > COPLANAR_TOLERANCE || (l1.z - l3.z).abs() > COPLANAR_TOLERANCE {
        return Err(PositionError::NotCoplanar);
    }
    let a = Matrix2::new(l2.x - l1.x, l2.y - l1.y, l3.x - l1.x, l3.y - l1.y);
    let scale = a.abs().max().powi(2);
    if !(a.determinant().abs() >= 1e-9 * scale) || scale == 0.0 {
        return Err(PositionError::SingularGeometry);
    }
    let sq = |l: &Vec3| l.x * l.x + l.y * l.y;
    let [d1, d2, d3] = distances;
    let b = 0.5
        * Vector2::new(
            d1 * d1 - d2 * d2 + sq(l2) - sq(l1),
            d1 * d1 - d3 * d3 + sq(l3) - sq(l1),
        );
    // A is square and invertible here, so the least-squares solution is the
    // exact solve; LU avoids squaring the condition number.
    let x = a.lu().solve(&b).ok_or(PositionError::SingularGeometry)?;
    Ok((x.x, x.y))
}

/// Height of the receiver below `led1`, given its planar position.
pub fn z_from_distance(
    xy: (f64, f64),
    d1: f64,
    led1: &Vec3,
    ceiling_z: f64,
) -> Result<f64, PositionError> {
    let radicand = d1 * d1 - (led1.x - xy.0).powi(2) - (led1.y - xy.1).powi(2);
    if radicand < -RADICAND_EPS {
        return Err(PositionError::InconsistentDistance(radicand));
    }
    let z = led1.z - radicand.max(0.0).sqrt();
    if z > ceiling_z {
        return Err(PositionError::AboveCeiling(z));
    }
    Ok(z)
}

/// Measured bearings and the P3P problem they define.
pub(crate) fn bearing_problem(
    sightings: [&Sighting; 3],
    k: &CameraIntrinsics,
) -> Result<([Vec3; 3], P3pProblem), EstimateError> {
    let bearings = sightings.map(|s| back_project_bearing(&s.pixel, k));
    let pos = sightings.map(|s| s.led.position);
    let problem = P3pProblem::new(
        (pos[0] - pos[1]).norm(),
        (pos[0] - pos[2]).norm(),
        (pos[1] - pos[2]).norm(),
        inter_bearing_angle(&bearings[0], &bearings[1])?,
        inter_bearing_angle(&bearings[0], &bearings[2])?,
        inter_bearing_angle(&bearings[1], &bearings[2])?,
    )?;
    Ok((bearings, problem))
}

/// Position from a planar LLS fix and the first LED's distance.
pub(crate) fn trilaterate(distances: &[f64; 3], leds: &[Vec3; 3]) -> Result<Vec3, PositionError> {
    let xy = lls_xy(distances, leds)?;
    let z = z_from_distance(xy, distances[0], &leds[0], leds[0].z)?;
    Ok(Vec3::new(xy.0, xy.1, z))
}

/// Runs the full three-LED pipeline on one frame.
pub fn estimate_position<R: Rng + ?Sized>(
    frame: &MeasurementFrame,
    k: &CameraIntrinsics,
    pd: &PdParams,
    rng: &mut R,
) -> Result<PositionEstimate, EstimateError> {
    let r = &frame.readings;
    let (bearings, problem) = bearing_problem([&r[0].sighting, &r[1].sighting, &r[2].sighting], k)?;
    // bearings are unit vectors, so cos ψ is their optical-axis component
    let link = LinkInversion::from_cos_psi(frame, bearings.map(|b| b.z), pd)?;
    let candidates = p3p::solve(&problem)?;
    let selection = select(&candidates, frame, &link, rng)?;
    let position = trilaterate(&selection.distances, &frame.positions())?;
    Ok(PositionEstimate {
        position,
        distances: selection.distances,
        diagnostics: Diagnostics {
            tolerance: selection.tolerance,
            n_candidates: candidates.len(),
            n_feasible: selection.n_feasible,
            ambiguous: selection.ambiguous,
        },
    })
}

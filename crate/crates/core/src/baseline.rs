//! Vision-only four-LED baseline.
//!
//! Distances come from P3P on the first three LEDs; the fourth LED picks the
//! candidate whose implied receiver position best reproduces the measured
//! bearing angles to it. No received-power readings are used.

use thiserror::Error;

use crate::estimator::{
    bearing_problem, trilaterate, Diagnostics, EstimateError, PositionEstimate, Sighting,
};
use crate::geometry::{angle_between, back_project_bearing, inter_bearing_angle, CameraIntrinsics, Vec3};
use crate::p3p;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BaselineError {
    #[error("invalid frame: {0}")]
    InvalidFrame(&'static str),
    #[error(transparent)]
    Solve(#[from] EstimateError),
    #[error("no distance candidate yields a valid position")]
    NoCandidate,
}

impl BaselineError {
    pub fn stage(&self) -> &'static str {
        match self {
            Self::InvalidFrame(_) => "frame",
            Self::Solve(e) => e.stage(),
            Self::NoCandidate => "disambiguation",
        }
    }
}

/// A trilaterated candidate and its angular mismatch at the fourth LED.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedCandidate {
    pub distances: [f64; 3],
    pub position: Vec3,
    pub discrepancy: f64,
}

/// Sum over LEDs 1..3 of `|angle(L_i, L_4 seen from position) - measured|`.
pub fn fourth_led_discrepancy(position: &Vec3, leds: &[Vec3; 4], measured: &[f64; 3]) -> f64 {
    let to4 = leds[3] - position;
    (0..3)
        .map(|i| match angle_between(&(leds[i] - position), &to4) {
            Some(a) => (a - measured[i]).abs(),
            None => f64::INFINITY,
        })
        .sum()
}

/// All candidates that trilaterate, with their fourth-LED discrepancy.
pub fn rank_candidates(
    sightings: &[Sighting; 4],
    k: &CameraIntrinsics,
) -> Result<Vec<RankedCandidate>, BaselineError> {
    let (bearings, problem) = bearing_problem([&sightings[0], &sightings[1], &sightings[2]], k)?;
    let b4 = back_project_bearing(&sightings[3].pixel, k);
    let mut measured = [0.0; 3];
    for (m, b) in measured.iter_mut().zip(&bearings) {
        *m = inter_bearing_angle(b, &b4).map_err(EstimateError::from)?;
    }
    let leds = sightings.map(|s| s.led.position);
    let plane = [leds[0], leds[1], leds[2]];
    let candidates = p3p::solve(&problem).map_err(EstimateError::from)?;
    Ok(candidates
        .iter()
        .filter_map(|c| {
            let position = trilaterate(&c.distances, &plane).ok()?;
            Some(RankedCandidate {
                distances: c.distances,
                position,
                discrepancy: fourth_led_discrepancy(&position, &leds, &measured),
            })
        })
        .collect())
}

/// Estimates the receiver position from four LED sightings.
pub fn estimate_position_pnp(
    sightings: &[Sighting],
    k: &CameraIntrinsics,
) -> Result<PositionEstimate, BaselineError> {
    let sightings: &[Sighting; 4] = sightings
        .try_into()
        .map_err(|_| BaselineError::InvalidFrame("expected exactly 4 LEDs"))?;
    for i in 0..4 {
        for j in i + 1..4 {
            if sightings[i].led.id == sightings[j].led.id {
                return Err(BaselineError::InvalidFrame("duplicate LED ids"));
            }
        }
    }
    let ranked = rank_candidates(sightings, k)?;
    let best = ranked
        .iter()
        .min_by(|a, b| a.discrepancy.total_cmp(&b.discrepancy))
        .ok_or(BaselineError::NoCandidate)?;
    Ok(PositionEstimate {
        position: best.position,
        distances: best.distances,
        diagnostics: Diagnostics {
            tolerance: 0.0,
            n_candidates: ranked.len(),
            n_feasible: 1,
            ambiguous: false,
        },
    })
}

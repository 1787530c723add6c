//! Monte Carlo campaigns and their summary statistics.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ConfigError, ScenarioConfig};
use super::scenario::Scenario;
use crate::baseline::estimate_position_pnp;
use crate::estimator::{estimate_position, LedReading, MeasurementFrame, PositionEstimate, Sighting};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    /// Three LEDs, camera plus received power.
    Rp3p,
    /// Four LEDs, camera only.
    Pnp4,
}

impl Algorithm {
    pub fn n_leds(&self) -> usize {
        match self {
            Self::Rp3p => 3,
            Self::Pnp4 => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rp3p => "rp3p",
            Self::Pnp4 => "pnp4",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_id: usize,
    pub truth: Vec3,
    pub estimate: Option<Vec3>,
    pub pe: Option<f64>,
    pub feasible: bool,
    pub solve_time_s: Option<f64>,
    pub tolerance: Option<f64>,
    pub ambiguous: Option<bool>,
    pub failure_stage: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub algorithm: Algorithm,
    pub trials: Vec<TrialResult>,
    /// Fraction of trials with a usable frame and a successful solve.
    pub cr: f64,
    /// Position errors of successful trials, ascending.
    pub pe_sorted: Vec<f64>,
    pub mean_pe: Option<f64>,
    pub p50: Option<f64>,
    pub p80: Option<f64>,
    pub p95: Option<f64>,
    pub median_time_s: Option<f64>,
    pub failure_counts: BTreeMap<&'static str, usize>,
    pub n_ambiguous: usize,
}

/// Percentile `q ∈ [0, 1]` of ascending samples, linearly interpolated
/// between closest ranks.
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

/// Solver input, built before the clock starts. One lives per trial, so
/// the size gap between variants does not matter.
#[allow(clippy::large_enum_variant)]
enum Input {
    Rp3p(MeasurementFrame),
    Pnp4(Vec<Sighting>),
}

fn prepare(algorithm: Algorithm, frame: &[LedReading]) -> Result<Input, &'static str> {
    Ok(match algorithm {
        Algorithm::Rp3p => Input::Rp3p(MeasurementFrame::new(frame).map_err(|e| e.stage())?),
        Algorithm::Pnp4 => Input::Pnp4(frame.iter().map(|r| r.sighting).collect()),
    })
}

fn solve(
    scn: &Scenario,
    input: &Input,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<PositionEstimate, &'static str> {
    match input {
        Input::Rp3p(frame) => estimate_position(frame, &scn.k, &scn.pd, rng).map_err(|e| e.stage()),
        Input::Pnp4(sightings) => estimate_position_pnp(sightings, &scn.k).map_err(|e| e.stage()),
    }
}

/// Synthesizes and solves trial `index`.
pub fn run_trial(scn: &Scenario, algorithm: Algorithm, index: usize) -> TrialResult {
    let mut rng = scn.trial_rng(index);
    let trial = scn.synthesize_trial(index, &mut rng);
    let mut result = TrialResult {
        trial_id: index,
        truth: trial.truth,
        estimate: None,
        pe: None,
        feasible: false,
        solve_time_s: None,
        tolerance: None,
        ambiguous: None,
        failure_stage: None,
    };
    let frame = match trial.frame(algorithm.n_leds()) {
        Ok(f) => f,
        Err(why) => {
            result.failure_stage = Some(why.stage());
            return result;
        }
    };
    let input = match prepare(algorithm, &frame) {
        Ok(i) => i,
        Err(stage) => {
            result.failure_stage = Some(stage);
            return result;
        }
    };
    let start = scn.cfg.record_timing.then(Instant::now);
    let outcome = solve(scn, &input, &mut rng);
    result.solve_time_s = start.map(|s| s.elapsed().as_secs_f64());
    match outcome {
        Ok(est) => {
            result.feasible = true;
            result.estimate = Some(est.position);
            result.pe = Some((est.position - trial.truth).norm());
            result.tolerance = Some(est.diagnostics.tolerance);
            result.ambiguous = Some(est.diagnostics.ambiguous);
        }
        Err(stage) => result.failure_stage = Some(stage),
    }
    result
}

pub fn summarize(algorithm: Algorithm, trials: Vec<TrialResult>) -> MetricsReport {
    let mut pe_sorted: Vec<f64> = trials.iter().filter_map(|t| t.pe).collect();
    pe_sorted.sort_by(f64::total_cmp);
    let n_ok = pe_sorted.len();
    let mut times: Vec<f64> = trials.iter().filter_map(|t| t.solve_time_s).collect();
    times.sort_by(f64::total_cmp);
    let mut failure_counts = BTreeMap::new();
    for stage in trials.iter().filter_map(|t| t.failure_stage) {
        *failure_counts.entry(stage).or_insert(0) += 1;
    }
    MetricsReport {
        algorithm,
        cr: if trials.is_empty() { 0.0 } else { n_ok as f64 / trials.len() as f64 },
        mean_pe: (n_ok > 0).then(|| pe_sorted.iter().sum::<f64>() / n_ok as f64),
        p50: percentile(&pe_sorted, 0.5),
        p80: percentile(&pe_sorted, 0.8),
        p95: percentile(&pe_sorted, 0.95),
        median_time_s: percentile(&times, 0.5),
        n_ambiguous: trials.iter().filter(|t| t.ambiguous == Some(true)).count(),
        failure_counts,
        pe_sorted,
        trials,
    }
}

pub fn run_scenario(scn: &Scenario, algorithm: Algorithm) -> MetricsReport {
    let n = scn.n_trials();
    let trials: Vec<TrialResult> = if scn.cfg.record_timing {
        // serial so timings are not disturbed by other workers
        (0..n).map(|i| run_trial(scn, algorithm, i)).collect()
    } else {
        (0..n).into_par_iter().map(|i| run_trial(scn, algorithm, i)).collect()
    };
    summarize(algorithm, trials)
}

pub fn run_campaign(cfg: &ScenarioConfig, algorithm: Algorithm) -> Result<MetricsReport, ConfigError> {
    Ok(run_scenario(&Scenario::new(cfg.clone())?, algorithm))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageCell {
    pub algorithm: Algorithm,
    pub fov_deg: f64,
    pub tilt_deg: f64,
    pub cr: f64,
}

/// Coverage ratio for every receiver FoV and fixed LED tilt pair, keeping
/// the rest of `cfg` (usually grid placement).
pub fn coverage_sweep(
    cfg: &ScenarioConfig,
    algorithm: Algorithm,
    fovs_deg: &[f64],
    tilts_deg: &[f64],
) -> Result<Vec<CoverageCell>, ConfigError> {
    let mut cells = Vec::new();
    for &tilt_deg in tilts_deg {
        for &fov_deg in fovs_deg {
            let mut c = cfg.clone();
            c.pd.fov_deg = fov_deg;
            c.led_tilt.mode = if tilt_deg > 0.0 {
                super::config::TiltMode::Fixed
            } else {
                super::config::TiltMode::None
            };
            c.led_tilt.theta_deg = tilt_deg;
            let report = run_campaign(&c, algorithm)?;
            cells.push(CoverageCell {
                algorithm,
                fov_deg,
                tilt_deg,
                cr: report.cr,
            });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{NoiseConfig, OffsetConfig};

    #[test]
    fn percentile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&s, 0.5), Some(3.0));
        assert_eq!(percentile(&s, 0.8), Some(4.2));
        assert_eq!(percentile(&s, 0.0), Some(1.0));
        assert_eq!(percentile(&s, 1.0), Some(5.0));
        assert_eq!(percentile(&[], 0.5), None);
        assert_eq!(percentile(&[7.0], 0.95), Some(7.0));
    }

    #[test]
    fn noiseless_campaign_is_exact() {
        let cfg = ScenarioConfig {
            noise: NoiseConfig::noiseless(),
            d_pc: OffsetConfig { magnitude_m: 0.0, direction: [1.0, 0.0, 0.0] },
            trials: 2000,
            ..ScenarioConfig::default()
        };
        let pnp = run_campaign(&cfg, Algorithm::Pnp4).unwrap();
        assert!(pnp.cr > 0.0);
        assert!(pnp.mean_pe.unwrap() < 1e-6);
        let r = run_campaign(&cfg, Algorithm::Rp3p).unwrap();
        let unambiguous: Vec<f64> = r
            .trials
            .iter()
            .filter(|t| t.ambiguous == Some(false))
            .map(|t| t.pe.unwrap())
            .collect();
        assert!(!unambiguous.is_empty());
        assert!(unambiguous.iter().all(|&pe| pe < 1e-6));
    }

    #[test]
    fn report_invariants() {
        let cfg = ScenarioConfig { trials: 500, seed: 3, ..ScenarioConfig::default() };
        let r = run_campaign(&cfg, Algorithm::Rp3p).unwrap();
        assert!((0.0..=1.0).contains(&r.cr));
        assert!(r.pe_sorted.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.p50 <= r.p80 && r.p80 <= r.p95);
        let ok = r.trials.iter().filter(|t| t.feasible).count();
        assert_eq!(ok, r.pe_sorted.len());
        assert_eq!(r.failure_counts.values().sum::<usize>() + ok, 500);
        for t in &r.trials {
            if let (Some(e), Some(pe)) = (t.estimate, t.pe) {
                assert_eq!(pe, (e - t.truth).norm());
            }
        }
        assert_eq!(r.median_time_s, None);
    }

    #[test]
    fn parallel_and_serial_agree() {
        let cfg = ScenarioConfig { trials: 300, ..ScenarioConfig::default() };
        let scn = Scenario::new(cfg).unwrap();
        let par = run_scenario(&scn, Algorithm::Rp3p);
        let serial: Vec<TrialResult> = (0..300).map(|i| run_trial(&scn, Algorithm::Rp3p, i)).collect();
        assert_eq!(par.trials, serial);
    }
}

//! CSV export of campaign results.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::campaign::{CoverageCell, MetricsReport, TrialResult};

pub const TRIAL_HEADER: [&str; 13] = [
    "trial_id",
    "true_x",
    "true_y",
    "true_z",
    "est_x",
    "est_y",
    "est_z",
    "pe_m",
    "feasible",
    "solve_time_s",
    "tolerance_level",
    "ambiguous",
    "failure_stage",
];

pub const SUMMARY_HEADER: [&str; 6] =
    ["cr", "mean_pe_m", "p50_pe_m", "p80_pe_m", "p95_pe_m", "median_time_s"];

pub const SWEEP_HEADER: [&str; 10] = [
    "parameter",
    "value",
    "algorithm",
    "cr",
    "mean_pe_m",
    "p50_pe_m",
    "p80_pe_m",
    "p95_pe_m",
    "median_time_s",
    "n_trials",
];

pub const COVERAGE_HEADER: [&str; 4] = ["algorithm", "fov_deg", "tilt_deg", "cr"];

#[derive(Debug, Error)]
#[error("cannot write {path}: {source}")]
pub struct ExportError {
    pub path: PathBuf,
    #[source]
    pub source: csv::Error,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn trial_row(t: &TrialResult) -> [String; 13] {
    let est = |i: usize| opt(t.estimate.map(|e| e[i]));
    [
        t.trial_id.to_string(),
        t.truth.x.to_string(),
        t.truth.y.to_string(),
        t.truth.z.to_string(),
        est(0),
        est(1),
        est(2),
        opt(t.pe),
        t.feasible.to_string(),
        opt(t.solve_time_s),
        opt(t.tolerance),
        t.ambiguous.map(|a| a.to_string()).unwrap_or_default(),
        t.failure_stage.unwrap_or_default().to_string(),
    ]
}

pub fn summary_row(r: &MetricsReport) -> [String; 6] {
    [
        r.cr.to_string(),
        opt(r.mean_pe),
        opt(r.p50),
        opt(r.p80),
        opt(r.p95),
        opt(r.median_time_s),
    ]
}

fn write_csv<W: Write, R: IntoIterator<Item = Vec<String>>>(
    out: W,
    header: &[&str],
    rows: R,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn to_file<R: IntoIterator<Item = Vec<String>>>(
    path: &Path,
    header: &[&str],
    rows: R,
) -> Result<(), ExportError> {
    let err = |source| ExportError {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(|e| err(e.into()))?;
    write_csv(file, header, rows).map_err(err)
}

/// Writes one row per trial.
pub fn export_report(report: &MetricsReport, path: &Path) -> Result<(), ExportError> {
    to_file(path, &TRIAL_HEADER, report.trials.iter().map(|t| trial_row(t).to_vec()))
}

/// Writes the one-row campaign summary.
pub fn export_summary(report: &MetricsReport, path: &Path) -> Result<(), ExportError> {
    to_file(path, &SUMMARY_HEADER, [summary_row(report).to_vec()])
}

/// Sweep rows as `(parameter, value, report)`.
pub fn export_sweep(rows: &[(String, f64, MetricsReport)], path: &Path) -> Result<(), ExportError> {
    to_file(
        path,
        &SWEEP_HEADER,
        rows.iter().map(|(param, value, r)| {
            let mut row = vec![param.clone(), value.to_string(), r.algorithm.name().to_string()];
            row.extend(summary_row(r));
            row.push(r.trials.len().to_string());
            row
        }),
    )
}

pub fn export_coverage(cells: &[CoverageCell], path: &Path) -> Result<(), ExportError> {
    to_file(
        path,
        &COVERAGE_HEADER,
        cells.iter().map(|c| {
            vec![
                c.algorithm.name().to_string(),
                c.fov_deg.to_string(),
                c.tilt_deg.to_string(),
                c.cr.to_string(),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::campaign::{run_campaign, summarize, Algorithm};
    use crate::sim::config::ScenarioConfig;

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        export_report(&summarize(Algorithm::Rp3p, Vec::new()), &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), TRIAL_HEADER.join(",") + "\n");
    }

    #[test]
    fn rows_and_reexport() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScenarioConfig { trials: 3, ..ScenarioConfig::default() };
        let r = run_campaign(&cfg, Algorithm::Rp3p).unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        export_report(&r, &a).unwrap();
        export_report(&r, &b).unwrap();
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text, std::fs::read_to_string(&b).unwrap());
        for line in text.lines().skip(1) {
            assert_eq!(line.split(',').count(), 13);
        }
        export_summary(&r, &a).unwrap();
        let text = std::fs::read_to_string(&a).unwrap();
        assert!(text.starts_with("cr,mean_pe_m,p50_pe_m,p80_pe_m,p95_pe_m,median_time_s\n"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn unwritable_path_names_the_file() {
        let r = summarize(Algorithm::Pnp4, Vec::new());
        let err = export_report(&r, Path::new("/nonexistent/dir/out.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/out.csv"));
    }
}

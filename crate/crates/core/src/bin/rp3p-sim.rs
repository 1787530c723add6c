use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rp3p::sim::config::{PlacementMode, TiltMode};
use rp3p::sim::report::{export_coverage, export_summary, export_sweep, summary_row, SUMMARY_HEADER};
use rp3p::sim::{coverage_sweep, export_report, run_campaign, Algorithm, MetricsReport, ScenarioConfig};

#[derive(Parser)]
#[command(name = "rp3p-sim", about = "Monte Carlo evaluation of three-LED visible light positioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Rp3p,
    Pnp4,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Rp3p => Algorithm::Rp3p,
            AlgorithmArg::Pnp4 => Algorithm::Pnp4,
        }
    }
}

#[derive(Args)]
struct Common {
    /// TOML scenario file; defaults are used for anything it omits.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Algorithm to run; sweeps run both when omitted.
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trials per campaign (uniform placement only).
    #[arg(long)]
    trials: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn algorithms(&self) -> Vec<Algorithm> {
        match self.algorithm {
            Some(a) => vec![a.into()],
            None => vec![Algorithm::Rp3p, Algorithm::Pnp4],
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a single campaign and write per-trial results.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write the one-row summary here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Coverage ratio over receiver FoV and LED tilt, on a placement grid.
    SweepFov {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60,70,80")]
        fovs: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,10,30")]
        tilts: Vec<f64>,
    },
    /// Accuracy over fixed LED tilt angles.
    SweepTilt {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0,10,20,30,40,50,60")]
        tilts: Vec<f64>,
    },
    /// Accuracy over per-image pixel noise std.
    SweepImagenoise {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2,2.5,3,3.5,4")]
        stds: Vec<f64>,
    },
    /// Accuracy over camera-to-photodiode distance, in centimeters.
    SweepDpc {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0,1,3,6,10")]
        dpcs_cm: Vec<f64>,
    },
    /// Solver timing for both algorithms on the same trials.
    Bench {
        #[command(flatten)]
        common: Common,
    },
}

fn print_summary(label: &str, r: &MetricsReport) {
    println!("{label}");
    println!("{}", SUMMARY_HEADER.join(","));
    println!("{}", summary_row(r).join(","));
}

fn sweep<F>(common: &Common, param: &str, values: &[f64], apply: F) -> Result<()>
where
    F: Fn(&mut ScenarioConfig, f64),
{
    let base = common.load()?;
    let mut rows = Vec::new();
    for &v in values {
        for alg in common.algorithms() {
            let mut cfg = base.clone();
            apply(&mut cfg, v);
            let r = run_campaign(&cfg, alg)?;
            print_summary(&format!("{param}={v} algorithm={}", alg.name()), &r);
            rows.push((param.to_string(), v, r));
        }
    }
    if let Some(out) = &common.out {
        export_sweep(&rows, out)?;
    }
    Ok(())
}

fn write_report(path: Option<&Path>, r: &MetricsReport) -> Result<()> {
    if let Some(p) = path {
        export_report(r, p)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { common, summary } => {
            let cfg = common.load()?;
            let alg = common.algorithm.map(Algorithm::from).unwrap_or(Algorithm::Rp3p);
            let r = run_campaign(&cfg, alg)?;
            print_summary(&format!("algorithm={}", alg.name()), &r);
            write_report(common.out.as_deref(), &r)?;
            if let Some(p) = summary {
                export_summary(&r, &p)?;
            }
        }
        Command::SweepFov { common, fovs, tilts } => {
            let mut cfg = common.load()?;
            if common.config.is_none() {
                cfg.placement.mode = PlacementMode::Grid;
            }
            let mut cells = Vec::new();
            for alg in common.algorithms() {
                let c = coverage_sweep(&cfg, alg, &fovs, &tilts)?;
                for cell in &c {
                    println!(
                        "algorithm={} fov_deg={} tilt_deg={} cr={}",
                        alg.name(),
                        cell.fov_deg,
                        cell.tilt_deg,
                        cell.cr
                    );
                }
                cells.extend(c);
            }
            if let Some(out) = &common.out {
                export_coverage(&cells, out).context("writing coverage table")?;
            }
        }
        Command::SweepTilt { common, tilts } => sweep(&common, "tilt_deg", &tilts, |c, v| {
            c.led_tilt.mode = TiltMode::Fixed;
            c.led_tilt.theta_deg = v;
        })?,
        Command::SweepImagenoise { common, stds } => {
            sweep(&common, "pixel_std_px", &stds, |c, v| c.noise.pixel_std_px = v)?
        }
        Command::SweepDpc { common, dpcs_cm } => {
            sweep(&common, "d_pc_cm", &dpcs_cm, |c, v| c.d_pc.magnitude_m = v / 100.0)?
        }
        Command::Bench { common } => {
            let mut cfg = common.load()?;
            cfg.record_timing = true;
            let mut rows = Vec::new();
            for alg in common.algorithms() {
                let r = run_campaign(&cfg, alg)?;
                print_summary(&format!("algorithm={}", alg.name()), &r);
                rows.push(("bench".to_string(), 0.0, r));
            }
            if let Some(out) = &common.out {
                export_sweep(&rows, out)?;
            }
        }
    }
    Ok(())
}

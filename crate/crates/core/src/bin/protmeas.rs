use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use protmeas::analysis::{
    estimate_pj, estimate_pm, format_with_uncertainty, Calibration, Estimate, RegionPartition,
    ROI_MARGIN_SIGMAS,
};
use protmeas::detector::CountsGrid;
use protmeas::experiment::{
    emit_tables, load_report, parse_theta, run_experiment, run_tomography, simulate_calibration,
    state_label, table2_text, ExperimentConfig, Modes,
};
use protmeas::{Error, ErrorClass};

#[derive(Parser)]
#[command(name = "protmeas", version, about = "Protective vs projective polarization measurement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; every acquisition seed is derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Measurement branches to run: pj, pm or both.
    #[arg(long)]
    mode: Option<Modes>,
    /// Polarization angle, e.g. `pi/4` or `17pi/60`. Repeatable.
    #[arg(long = "state", value_parser = parse_state)]
    states: Vec<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Full protocol for every state: acquisitions, calibration, estimates, tomography, tables.
    Run(Common),
    /// Simulate calibration acquisitions and write calibration.json per state.
    Calibrate(Common),
    /// Estimate ⟨A⟩ from a saved grid and calibration.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        grid: PathBuf,
    },
    /// Simulated tomography of the outgoing PM and PJ states.
    Tomo(Common),
    /// Re-emit tables from the report.json in the output directory.
    Tables(Common),
}

fn parse_state(s: &str) -> Result<f64, String> {
    parse_theta(s).map_err(|e| e.to_string())
}

impl Common {
    fn config(&self) -> protmeas::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if !self.states.is_empty() {
            cfg.thetas = self.states.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

struct Failure {
    class: ErrorClass,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            class: e.class(),
            message: e.to_string(),
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> protmeas::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn run(common: &Common) -> Result<ExitCode, Failure> {
    let cfg = common.config()?;
    let report = run_experiment(&cfg).map_err(|e| Failure {
        class: e.class(),
        message: e.to_string(),
    })?;
    print!("{}", table2_text(&report)?.0);
    println!("wrote {} files to {}", report.files.len(), cfg.output_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn calibrate(common: &Common) -> Result<ExitCode, Failure> {
    let cfg = common.config()?;
    for (i, &theta) in cfg.thetas.iter().enumerate() {
        let cal = simulate_calibration(&cfg, i)?.calibrate(cfg.detector.pixel_pitch)?;
        let path = cfg.output_dir.join(format!("state_{i}")).join("calibration.json");
        write_json(&path, &cal)?;
        println!(
            "{}  x0 = {}  a = {}  -> {}",
            state_label(theta),
            format_with_uncertainty(cal.x0, cal.sigma_a),
            format_with_uncertainty(cal.a, cal.sigma_a),
            path.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn estimate(common: &Common, calibration: &Path, grid: &Path) -> Result<ExitCode, Failure> {
    let cfg = common.config()?;
    let cal: Calibration = serde_json::from_str(&fs::read_to_string(calibration).map_err(Error::from)?)
        .map_err(|e| Error::Config(format!("{}: {e}", calibration.display())))?;
    let grid = CountsGrid::from_text(&fs::read_to_string(grid).map_err(Error::from)?)?;
    let part = RegionPartition::from_calibration(&cal, ROI_MARGIN_SIGMAS);
    let pitch = cfg.detector.pixel_pitch;
    let mut estimates: Vec<Estimate> = Vec::new();
    if cfg.mode.pj() {
        estimates.push(estimate_pj(&grid, &cal, &part, pitch)?);
    }
    if cfg.mode.pm() {
        estimates.push(estimate_pm(&grid, &cal, &part, pitch)?);
    }
    println!("{}", serde_json::to_string_pretty(&estimates).map_err(Error::from)?);
    Ok(ExitCode::SUCCESS)
}

fn tomo(common: &Common) -> Result<ExitCode, Failure> {
    let cfg = common.config()?;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    for (i, &theta) in cfg.thetas.iter().enumerate() {
        let t = run_tomography(&cfg, i, theta)?;
        write_json(&cfg.output_dir.join(format!("state_{i}")).join("tomography.json"), &t)?;
        println!(
            "{}  F(PM,in) = {}  F(PJ,dec) = {}  P(PM) = {}  P(PJ) = {}",
            state_label(theta),
            fmt(t.fidelity_pm_in),
            fmt(t.fidelity_pj_dec),
            fmt(t.purity_pm),
            fmt(t.purity_pj)
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn tables(common: &Common) -> Result<ExitCode, Failure> {
    let dir = common
        .out
        .clone()
        .unwrap_or_else(|| ExperimentConfig::default().output_dir);
    let report = load_report(&dir)?;
    let status = emit_tables(&report, &dir)?;
    print!("{}", table2_text(&report)?.0);
    if status.is_complete() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: {} table cells are placeholders", status.placeholders);
        Ok(ExitCode::from(1))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Calibrate(c) => calibrate(c),
        Command::Estimate {
            common,
            calibration,
            grid,
        } => estimate(common, calibration, grid),
        Command::Tomo(c) => tomo(c),
        Command::Tables(c) => tables(c),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(match f.class {
                ErrorClass::Config => 2,
                ErrorClass::Simulation => 3,
                ErrorClass::Analysis => 4,
            })
        }
    }
}

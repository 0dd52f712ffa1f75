//! Full config-driven run: writes grids, calibrations, estimates, tomography
//! and both tables to a temporary directory.

use protmeas::experiment::{run_experiment, table1_text, table2_text, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("protmeas-example");
    let cfg = ExperimentConfig {
        output_dir: out.clone(),
        ..Default::default()
    };
    let report = run_experiment(&cfg)?;
    println!("{}", table1_text(&report)?.0);
    println!("{}", table2_text(&report)?.0);
    println!("{} files under {}", report.files.len(), out.display());
    Ok(())
}

//! Monte Carlo detection of a protected beam on the 32×32 pixel array,
//! printed as an x histogram.

use std::f64::consts::PI;

use protmeas::detector::{marginal_pdf, sample_events, AcquisitionLabel, DetectorConfig};
use protmeas::{evolve_pm, GaussianEnvelope, PolarizationKet};

fn main() -> protmeas::Result<()> {
    let env = GaussianEnvelope::new(9.72, 4.17)?;
    let (state, _) = evolve_pm(&PolarizationKet::linear(17.0 * PI / 60.0), &env, 7, 11.56 / 7.0)?;
    let cfg = DetectorConfig::default();
    let grid = sample_events(&state, 20_000, &cfg, 7, AcquisitionLabel::Pm)?;
    let pdf = marginal_pdf(&state);

    println!("{} counts (dark rate {} per pixel)", grid.total(), cfg.dark_rate);
    let xs = grid.x_marginal();
    let peak = *xs.iter().max().unwrap_or(&1) as f64;
    for (i, &c) in xs.iter().enumerate() {
        let x = cfg.pixel_center(i);
        let expected = 20_000.0 * pdf.mass(x - 0.5, x + 0.5);
        println!("{i:>3} {c:>6} {expected:>8.1} {}", "#".repeat((50.0 * c as f64 / peak) as usize));
    }
    Ok(())
}

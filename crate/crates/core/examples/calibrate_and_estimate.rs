//! Calibrate the pointer scale from H/V and polarizer acquisitions, then
//! estimate ⟨A⟩ projectively and protectively for one state.

use std::f64::consts::PI;

use protmeas::analysis::{estimate_pj, estimate_pm, RegionPartition, ROI_MARGIN_SIGMAS};
use protmeas::detector::{sample_events, AcquisitionLabel};
use protmeas::experiment::{simulate_calibration, ExperimentConfig};
use protmeas::{evolve_pj, evolve_pm, GaussianEnvelope, PolarizationKet};

fn main() -> protmeas::Result<()> {
    let cfg = ExperimentConfig {
        thetas: vec![17.0 * PI / 60.0],
        ..Default::default()
    };
    let pitch = cfg.detector.pixel_pitch;
    let calib = simulate_calibration(&cfg, 0)?.calibrate(pitch)?;
    println!(
        "x_H = {:.3} ± {:.3}  x_V = {:.3} ± {:.3}  a = {:.3} ± {:.3}  σ_beam = {:.3}",
        calib.x_h.value,
        calib.x_h.sigma,
        calib.x_v.value,
        calib.x_v.sigma,
        calib.a,
        calib.sigma_a,
        calib.sigma_beam
    );

    let pol = PolarizationKet::linear(cfg.thetas[0]);
    let env = GaussianEnvelope::new(cfg.beam_origin(), cfg.sigma)?;
    let pj_state = evolve_pj(&pol, &env, cfg.units, cfg.delta())?;
    let pm_state = evolve_pm(&pol, &env, cfg.units, cfg.delta())?.0.translated(cfg.polarizer_shift);
    let pj_grid = sample_events(&pj_state, cfg.n_photons, &cfg.detector, 1, AcquisitionLabel::Pj)?;
    let pm_grid = sample_events(&pm_state, cfg.n_photons, &cfg.detector, 2, AcquisitionLabel::Pm)?;

    let part = RegionPartition::from_calibration(&calib, ROI_MARGIN_SIGMAS);
    for est in [
        estimate_pj(&pj_grid, &calib, &part, pitch)?,
        estimate_pm(&pm_grid, &calib, &part, pitch)?,
    ] {
        println!("{:?}: {:.4} ± {:.4}", est.method, est.value, est.sigma);
    }
    println!("theory: {:.4}", (2.0 * cfg.thetas[0]).cos());
    Ok(())
}

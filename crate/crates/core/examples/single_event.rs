//! Single-photon estimates: a protected photon gives ⟨A⟩ with spread σ/a,
//! an unprotected one only says which eigenvalue region it hit.

use std::f64::consts::PI;

use protmeas::analysis::{estimate_pj_single, estimate_pm_single, RegionPartition, ROI_MARGIN_SIGMAS};
use protmeas::detector::sample_event_list;
use protmeas::experiment::{simulate_calibration, ExperimentConfig};
use protmeas::{evolve_pj, evolve_pm, GaussianEnvelope, PolarizationKet};

fn main() -> protmeas::Result<()> {
    let cfg = ExperimentConfig {
        thetas: vec![17.0 * PI / 60.0],
        ..Default::default()
    };
    let calib = simulate_calibration(&cfg, 0)?.calibrate(cfg.detector.pixel_pitch)?;
    let part = RegionPartition::from_calibration(&calib, ROI_MARGIN_SIGMAS);
    let pol = PolarizationKet::linear(cfg.thetas[0]);
    let env = GaussianEnvelope::new(cfg.beam_origin(), cfg.sigma)?;
    let pm = evolve_pm(&pol, &env, cfg.units, cfg.delta())?.0.translated(cfg.polarizer_shift);
    let pj = evolve_pj(&pol, &env, cfg.units, cfg.delta())?;

    let pm_events = sample_event_list(&pm, 10, &cfg.detector, 3)?;
    let pj_events = sample_event_list(&pj, 10, &cfg.detector, 4)?;
    println!("photon  PM estimate        PJ region");
    for (i, (m, j)) in pm_events.iter().zip(&pj_events).enumerate() {
        let e = estimate_pm_single(cfg.detector.pixel_center(m.ix), &calib, cfg.single_event_scale)?;
        let r = estimate_pj_single(cfg.detector.pixel_center(j.ix), &calib, &part);
        println!("{i:>6}  {:>7.3} ± {:.3}    {:+.0}", e.value, e.sigma, r.value);
    }
    println!("theory ⟨A⟩ = {:.3}", (2.0 * cfg.thetas[0]).cos());
    Ok(())
}

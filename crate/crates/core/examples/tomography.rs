//! Six-setting tomography of the outgoing polarization with and without
//! protection.

use std::f64::consts::PI;

use protmeas::tomography::{reconstruct, simulate_tomo_counts, TomoSetting};
use protmeas::{
    evolve_pj, evolve_pm, fidelity, purity, reduce_polarization, DecoherenceMode, DensityMatrix2,
    GaussianEnvelope, PolarizationKet,
};

fn main() -> protmeas::Result<()> {
    let env = GaussianEnvelope::new(9.72, 4.17)?;
    let settings = TomoSetting::standard();
    for (i, theta) in [PI / 4.0, 17.0 * PI / 60.0, PI / 8.0].into_iter().enumerate() {
        let pol = PolarizationKet::linear(theta);
        let rho_in = DensityMatrix2::pure(&pol);
        let pm = reduce_polarization(&evolve_pm(&pol, &env, 7, 11.56 / 7.0)?.0, DecoherenceMode::Exact);
        let pj = reduce_polarization(&evolve_pj(&pol, &env, 7, 11.56 / 7.0)?, DecoherenceMode::Exact);
        let rec_pm = reconstruct(&simulate_tomo_counts(&pm, &settings, 100_000, 2 * i as u64)?)?;
        let rec_pj = reconstruct(&simulate_tomo_counts(&pj, &settings, 100_000, 2 * i as u64 + 1)?)?;
        println!(
            "θ = {theta:.4}: F(PM, in) = {:.4}  F(PJ, in) = {:.4}  P(PM) = {:.3}  P(PJ) = {:.3}",
            fidelity(&rec_pm, &rho_in),
            fidelity(&rec_pj, &rho_in),
            purity(&rec_pm),
            purity(&rec_pj)
        );
    }
    Ok(())
}

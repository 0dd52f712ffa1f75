//! Survival probability and pointer bias as the number of protection units
//! grows at fixed total coupling.

use std::f64::consts::PI;

use protmeas::{evolve_pm, expectation_value, GaussianEnvelope, Observable2, PolarizationKet};

fn main() -> protmeas::Result<()> {
    let (x0, sigma, g_prime) = (9.72, 4.17, 11.56);
    let env = GaussianEnvelope::new(x0, sigma)?;
    let pol = PolarizationKet::linear(PI / 8.0);
    let truth = expectation_value(&Observable2::polarization(), &pol);
    let a = g_prime / 2.0;

    println!("{:>5} {:>10} {:>12}", "K", "survival", "bias");
    for units in [1, 2, 4, 7, 14, 28, 56] {
        let (state, survival) = evolve_pm(&pol, &env, units, g_prime / units as f64)?;
        let bias = (state.marginal_mean() - (x0 + a)) / a - truth;
        println!("{units:>5} {survival:>10.6} {bias:>12.3e}");
    }
    Ok(())
}

//! Protected evolution moves the whole beam by ⟨A⟩·g′/2; unprotected evolution
//! splits it into two eigenvalue peaks.
//!
//! ```text
//! cargo run --example pointer_shift
//! ```

use std::f64::consts::PI;

use protmeas::{
    evolve_pj, evolve_pm, expectation_value, GaussianEnvelope, Observable2, PolarizationKet,
};

fn main() -> protmeas::Result<()> {
    let (x0, sigma, g_prime, units) = (9.72, 4.17, 11.56, 7);
    let env = GaussianEnvelope::new(x0, sigma)?;
    let a = g_prime / 2.0;

    println!("{:>8} {:>8} {:>10} {:>10}", "theta", "<A>", "PM x̄", "PM (x̄-c)/a");
    for theta in [0.0, PI / 8.0, PI / 4.0, 17.0 * PI / 60.0, PI / 2.0] {
        let pol = PolarizationKet::linear(theta);
        let (pm, _) = evolve_pm(&pol, &env, units, g_prime / units as f64)?;
        let mean = pm.marginal_mean();
        println!(
            "{theta:>8.4} {:>8.4} {mean:>10.4} {:>10.4}",
            expectation_value(&Observable2::polarization(), &pol),
            (mean - (x0 + a)) / a
        );
    }

    // unprotected: print a coarse density profile
    let pj = evolve_pj(&PolarizationKet::linear(PI / 4.0), &env, units, g_prime / units as f64)?;
    println!("\nunprotected |Ψ(x)|² at θ = π/4");
    for i in 0..=15 {
        let x = 2.0 * i as f64;
        let d = pj.density(x);
        println!("{x:>5.1} {:<60}", "#".repeat((d * 600.0) as usize));
    }
    Ok(())
}

//! Calibration of the pointer scale, projective and protective ⟨A⟩
//! estimators, and propagation of their uncertainties.

mod calibration;
mod estimators;
pub mod fit;

pub use calibration::{calibrate, BeamShape, Calibration, Measured};
pub use estimators::{
    estimate_pj, estimate_pj_single, estimate_pm, estimate_pm_single, pj_from_counts,
    region_counts, tail_coefficients, tail_fractions, Estimate, Method, RegionCounts,
    RegionPartition, ROI_MARGIN_SIGMAS,
};

/// Formats `value` with its uncertainty in parentheses on the last digits,
/// e.g. `-0.19(2)` or `0.0012(14)`. Two uncertainty digits are kept when the
/// leading one is 1.
pub fn format_with_uncertainty(value: f64, sigma: f64) -> String {
    if !(sigma.is_finite() && sigma > 0.0) {
        return format!("{value:.3}");
    }
    let digits = |s: f64| {
        let exp = s.log10().floor() as i32;
        let lead = (s / 10f64.powi(exp)).floor() as i32;
        let sig = if lead == 1 { 2 } else { 1 };
        (sig - 1 - exp).max(0) as usize
    };
    let mut decimals = digits(sigma);
    // rounding can change the leading digit (0.0196 -> 0.020)
    let rounded = (sigma * 10f64.powi(decimals as i32)).round() / 10f64.powi(decimals as i32);
    decimals = digits(rounded);
    let scaled = (sigma * 10f64.powi(decimals as i32)).round();
    format!("{value:.decimals$}({})", scaled as u64)
}

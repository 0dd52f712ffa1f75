use serde::{Deserialize, Serialize};

use super::fit::{fit_gaussian, GaussianFit};
use crate::detector::CountsGrid;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// A position with its standard uncertainty, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub fn new(value: f64, sigma: f64) -> Self {
        Measured { value, sigma }
    }
}

/// Pointer calibration. `x0`, `a` and `sigma_a` are always derived from the
/// H and V centers; construct through [`Calibration::from_positions`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub id: String,
    pub x_h: Measured,
    pub x_v: Measured,
    /// Position of ⟨A⟩ = 0.
    pub x0: f64,
    /// Distance from `x0` to either eigenvalue position.
    pub a: f64,
    /// Uncertainty shared by `x0` and `a`.
    pub sigma_a: f64,
    /// Fitted intensity width of the H-polarized spot.
    pub sigma_beam: f64,
    pub y_center: f64,
    pub sigma_y: f64,
    /// Beam center with the polarizers alone in the path.
    pub x_pol: Measured,
    /// Beam center with a free optical path.
    pub x_void: Measured,
}

/// Inputs not derived from the H/V centers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamShape {
    pub sigma_beam: f64,
    pub y_center: f64,
    pub sigma_y: f64,
}

impl Calibration {
    pub fn from_positions(
        id: impl Into<String>,
        x_h: Measured,
        x_v: Measured,
        x_pol: Measured,
        x_void: Measured,
        beam: BeamShape,
    ) -> Self {
        Calibration {
            id: id.into(),
            x_h,
            x_v,
            x0: (x_h.value + x_v.value) / 2.0,
            a: (x_h.value - x_v.value) / 2.0,
            sigma_a: (x_h.sigma.powi(2) + x_v.sigma.powi(2)).sqrt() / 2.0,
            sigma_beam: beam.sigma_beam,
            y_center: beam.y_center,
            sigma_y: beam.sigma_y,
            x_pol,
            x_void,
        }
    }

    /// Endpoints corrected for the polarizer-induced displacement,
    /// `x' = x + x_pol - x_void`, with variances added in quadrature.
    pub fn corrected_endpoints(&self) -> (Measured, Measured) {
        let bias = self.x_pol.value - self.x_void.value;
        let extra = self.x_pol.sigma.powi(2) + self.x_void.sigma.powi(2);
        let corr = |m: Measured| Measured::new(m.value + bias, (m.sigma.powi(2) + extra).sqrt());
        (corr(self.x_h), corr(self.x_v))
    }

    /// Errors out when the calibration cannot map positions to ⟨A⟩.
    pub fn require_nondegenerate(&self) -> Result<()> {
        if !(self.a.abs() > 1e-9) || !self.a.is_finite() {
            return Err(Error::DegenerateCalibration(format!(
                "H and V centers coincide (a = {})",
                self.a
            )));
        }
        Ok(())
    }

    /// Every position shifted by `dx` (uncertainties unchanged).
    pub fn translated(&self, dx: f64) -> Self {
        let t = |m: Measured| Measured::new(m.value + dx, m.sigma);
        Calibration {
            x_h: t(self.x_h),
            x_v: t(self.x_v),
            x0: self.x0 + dx,
            x_pol: t(self.x_pol),
            x_void: t(self.x_void),
            ..self.clone()
        }
    }
}

pub(crate) fn profile_positions(n: usize, pitch: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * pitch).collect()
}

fn fit_axis(grid: &CountsGrid, pitch: f64, along_x: bool) -> Result<GaussianFit> {
    let (profile, n) = if along_x {
        (grid.x_marginal(), grid.nx)
    } else {
        (grid.y_marginal(), grid.ny)
    };
    let ys: Vec<f64> = profile.iter().map(|&c| c as f64).collect();
    fit_gaussian(&profile_positions(n, pitch), &ys).map_err(|reason| Error::FitFailure {
        grid: format!("{} (seed {})", grid.label, grid.seed),
        reason,
    })
}

/// Center averaged over repeated acquisitions. The uncertainty is the
/// standard deviation of the mean, or the fit's own standard error when only
/// one acquisition is available.
fn repeated_center(grids: &[CountsGrid], pitch: f64, what: &str) -> Result<(Measured, Vec<GaussianFit>)> {
    if grids.is_empty() {
        return Err(Error::FitFailure {
            grid: what.to_string(),
            reason: "no acquisitions".into(),
        });
    }
    let fits = grids
        .iter()
        .map(|g| fit_axis(g, pitch, true))
        .collect::<Result<Vec<_>>>()?;
    let n = fits.len() as f64;
    let mean = fits.iter().map(|f| f.center).sum::<f64>() / n;
    let sigma = if fits.len() >= 2 {
        let var = fits.iter().map(|f| (f.center - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        fits[0].center_err
    };
    Ok((Measured::new(mean, sigma), fits))
}

/// Calibration from repeated H, V, free-path and polarizer-only acquisitions.
pub fn calibrate(
    h: &[CountsGrid],
    v: &[CountsGrid],
    void: &[CountsGrid],
    pol: &[CountsGrid],
    pixel_pitch: f64,
) -> Result<Calibration> {
    let (x_h, h_fits) = repeated_center(h, pixel_pitch, "H-cal")?;
    let (x_v, _) = repeated_center(v, pixel_pitch, "V-cal")?;
    let (x_void, _) = repeated_center(void, pixel_pitch, "void")?;
    let (x_pol, _) = repeated_center(pol, pixel_pitch, "pol")?;
    let sigma_beam = h_fits.iter().map(|f| f.sigma).sum::<f64>() / h_fits.len() as f64;
    let y_fits = h
        .iter()
        .map(|g| fit_axis(g, pixel_pitch, false))
        .collect::<Result<Vec<_>>>()?;
    let y_center = y_fits.iter().map(|f| f.center).sum::<f64>() / y_fits.len() as f64;
    let sigma_y = y_fits.iter().map(|f| f.sigma).sum::<f64>() / y_fits.len() as f64;

    let seeds: Vec<u64> = h.iter().chain(v).chain(void).chain(pol).map(|g| g.seed).collect();
    let id = format!("cal-{:016x}", derive_seed(0, &seeds));
    Ok(Calibration::from_positions(
        id,
        x_h,
        x_v,
        x_pol,
        x_void,
        BeamShape {
            sigma_beam,
            y_center,
            sigma_y,
        },
    ))
}

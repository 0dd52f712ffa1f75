use serde::{Deserialize, Serialize};

use super::calibration::Calibration;
use crate::detector::CountsGrid;
use crate::error::{Error, Result};
use statrs::function::erf::erfc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "PJ")]
    Pj,
    #[serde(rename = "PM")]
    Pm,
    #[serde(rename = "PM-single")]
    PmSingle,
    #[serde(rename = "PJ-single")]
    PjSingle,
}

/// An expectation-value estimate ⟨A⟩ ± sigma.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
    pub method: Method,
    /// Signal counts (or count weight) the estimate is built from.
    pub counts_used: f64,
    pub calibration_id: String,
}

impl Estimate {
    /// A single projective event only says which eigenvalue region was hit;
    /// it carries no information about ⟨A⟩ itself.
    pub fn is_informative(&self) -> bool {
        self.method != Method::PjSingle
    }
}

/// Region layout on the detector: the boundary between the V and H regions
/// and the rectangular region of interest used for background estimation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    pub boundary: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Whether the H region lies at larger x than the V region.
    pub h_above: bool,
}

/// Default region-of-interest half-margin, in beam widths.
pub const ROI_MARGIN_SIGMAS: f64 = 3.5;

impl RegionPartition {
    /// Boundary at `x0`; region of interest extends `margin` beam widths past
    /// both eigenvalue positions and around the fitted vertical center.
    pub fn from_calibration(calib: &Calibration, margin: f64) -> Self {
        let (lo, hi) = if calib.x_h.value >= calib.x_v.value {
            (calib.x_v.value, calib.x_h.value)
        } else {
            (calib.x_h.value, calib.x_v.value)
        };
        RegionPartition {
            boundary: calib.x0,
            x_range: (lo - margin * calib.sigma_beam, hi + margin * calib.sigma_beam),
            y_range: (
                calib.y_center - margin * calib.sigma_y,
                calib.y_center + margin * calib.sigma_y,
            ),
            h_above: calib.x_h.value >= calib.x_v.value,
        }
    }

    pub fn validate(&self, calib: &Calibration) -> Result<()> {
        let (v, h) = if self.h_above {
            (calib.x_v.value, calib.x_h.value)
        } else {
            (-calib.x_v.value, -calib.x_h.value)
        };
        let b = if self.h_above { self.boundary } else { -self.boundary };
        if !(v < b && b < h) {
            return Err(Error::DegenerateCalibration(format!(
                "region boundary {} does not separate x_V = {} and x_H = {}",
                self.boundary, calib.x_v.value, calib.x_h.value
            )));
        }
        Ok(())
    }

    pub fn in_roi(&self, x: f64, y: f64) -> bool {
        (self.x_range.0..=self.x_range.1).contains(&x) && (self.y_range.0..=self.y_range.1).contains(&y)
    }

    pub fn is_h_side(&self, x: f64) -> bool {
        if self.h_above {
            x >= self.boundary
        } else {
            x < self.boundary
        }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Fractions of the H and V beam profiles (Gaussians of width `sigma`)
/// falling on the wrong side of `boundary`.
pub fn tail_fractions(x_h: f64, x_v: f64, sigma: f64, boundary: f64) -> (f64, f64) {
    let s = if x_h >= x_v { 1.0 } else { -1.0 };
    let c_h = std_normal_cdf(s * (boundary - x_h) / sigma);
    let c_v = 1.0 - std_normal_cdf(s * (boundary - x_v) / sigma);
    (c_h, c_v)
}

/// Tail coefficients `(c_H, c_V)` for the projective-count uncertainty.
pub fn tail_coefficients(calib: &Calibration, part: &RegionPartition) -> (f64, f64) {
    tail_fractions(calib.x_h.value, calib.x_v.value, calib.sigma_beam, part.boundary)
}

struct Background {
    per_pixel: f64,
}

fn background(grid: &CountsGrid, part: &RegionPartition, pitch: f64) -> Background {
    let (mut sum, mut n) = (0u64, 0u64);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            if !part.in_roi(ix as f64 * pitch, iy as f64 * pitch) {
                sum += grid.get(ix, iy);
                n += 1;
            }
        }
    }
    Background {
        per_pixel: if n > 0 { sum as f64 / n as f64 } else { 0.0 },
    }
}

/// Counts and dark estimates of the two projective regions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionCounts {
    pub n_h: f64,
    pub n_v: f64,
    pub dark_h: f64,
    pub dark_v: f64,
}

pub fn region_counts(grid: &CountsGrid, part: &RegionPartition, pitch: f64) -> RegionCounts {
    let bg = background(grid, part, pitch);
    let mut rc = RegionCounts {
        n_h: 0.0,
        n_v: 0.0,
        dark_h: 0.0,
        dark_v: 0.0,
    };
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let (x, y) = (ix as f64 * pitch, iy as f64 * pitch);
            if !part.in_roi(x, y) {
                continue;
            }
            let c = grid.get(ix, iy) as f64;
            if part.is_h_side(x) {
                rc.n_h += c;
                rc.dark_h += bg.per_pixel;
            } else {
                rc.n_v += c;
                rc.dark_v += bg.per_pixel;
            }
        }
    }
    rc
}

/// Count-ratio estimate and its propagated uncertainty, given region counts
/// and tail coefficients.
pub fn pj_from_counts(rc: &RegionCounts, c_h: f64, c_v: f64) -> Result<(f64, f64)> {
    let sig_h = rc.n_h - rc.dark_h;
    let sig_v = rc.n_v - rc.dark_v;
    let total = sig_h + sig_v;
    if !(total > 0.0) {
        return Err(Error::NoSignal(format!(
            "background-subtracted projective counts sum to {total}"
        )));
    }
    let value = (sig_h - sig_v) / total;

    let d_nh = 2.0 * sig_v / (total * total);
    let d_nv = -2.0 * sig_h / (total * total);
    let tails = (c_h * rc.n_h).powi(2) + (c_v * rc.n_v).powi(2);
    let var_nh = rc.n_h + tails;
    let var_nv = rc.n_v + tails;
    // dark terms enter with the opposite sign of their region's counts
    let var = d_nh * d_nh * (var_nh + rc.dark_h) + d_nv * d_nv * (var_nv + rc.dark_v);
    Ok((value, var.sqrt()))
}

/// Projective estimate from region counts.
pub fn estimate_pj(
    grid: &CountsGrid,
    calib: &Calibration,
    part: &RegionPartition,
    pixel_pitch: f64,
) -> Result<Estimate> {
    calib.require_nondegenerate()?;
    part.validate(calib)?;
    let rc = region_counts(grid, part, pixel_pitch);
    let (c_h, c_v) = tail_coefficients(calib, part);
    let (value, sigma) = pj_from_counts(&rc, c_h, c_v)?;
    Ok(Estimate {
        value,
        sigma,
        method: Method::Pj,
        counts_used: rc.n_h + rc.n_v - rc.dark_h - rc.dark_v,
        calibration_id: calib.id.clone(),
    })
}

/// Protective estimate: background-subtracted, count-weighted mean of the
/// per-pixel values `(x - x0')/a'`, with endpoints corrected for the
/// polarizer displacement.
///
/// The mean is taken over a window symmetric about the spot, as wide as the
/// region of interest and the detector edges allow; pixels straddling the
/// window edge count with the fraction of their width inside it. A spot near
/// the edge of the array would otherwise be pulled inwards by the missing
/// tail.
pub fn estimate_pm(
    grid: &CountsGrid,
    calib: &Calibration,
    part: &RegionPartition,
    pixel_pitch: f64,
) -> Result<Estimate> {
    calib.require_nondegenerate()?;
    let (xh, xv) = calib.corrected_endpoints();
    let span = xh.value - xv.value;
    let center = (xh.value + xv.value) / 2.0;
    let half = span / 2.0;
    let bg = background(grid, part, pixel_pitch).per_pixel;

    let mut pixels = Vec::new();
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let (x, y) = (ix as f64 * pixel_pitch, iy as f64 * pixel_pitch);
            let c = grid.get(ix, iy) as f64;
            if part.in_roi(x, y) && c > bg {
                pixels.push((x, c - bg));
            }
        }
    }
    if pixels.is_empty() {
        return Err(Error::NoSignal("no pixel above background in the region of interest".into()));
    }
    let edges = (
        part.x_range.0.max(-0.5 * pixel_pitch),
        part.x_range.1.min((grid.nx as f64 - 0.5) * pixel_pitch),
    );
    let samples = symmetric_window(&pixels, edges, pixel_pitch);
    let weight: f64 = samples.iter().map(|s| s.1).sum();
    if !(weight > 0.0) {
        return Err(Error::NoSignal("no signal weight inside the estimation window".into()));
    }
    let to_a = |x: f64| (x - center) / half;
    let value = samples.iter().map(|&(x, w)| to_a(x) * w).sum::<f64>() / weight;
    let spread = samples.iter().map(|&(x, w)| w * (to_a(x) - value).powi(2)).sum::<f64>() / weight;
    let var_mean = spread / weight;

    let var = var_mean
        + ((1.0 + value) / span).powi(2) * xh.sigma.powi(2)
        + ((1.0 - value) / span).powi(2) * xv.sigma.powi(2);
    Ok(Estimate {
        value,
        sigma: var.sqrt(),
        method: Method::Pm,
        counts_used: weight,
        calibration_id: calib.id.clone(),
    })
}

/// Reweights `(x, w)` pixels to a window `[m - h, m + h]` centred on their own
/// weighted mean `m`, with `h` the largest half-width that fits in `edges`.
/// Iterated to a fixed point.
fn symmetric_window(pixels: &[(f64, f64)], edges: (f64, f64), pitch: f64) -> Vec<(f64, f64)> {
    let mean = |ps: &[(f64, f64)]| {
        let w: f64 = ps.iter().map(|p| p.1).sum();
        ps.iter().map(|p| p.0 * p.1).sum::<f64>() / w
    };
    let clip = |m: f64| {
        let h = (m - edges.0).min(edges.1 - m).max(0.0);
        pixels
            .iter()
            .map(|&(x, w)| {
                let inside = ((x + pitch / 2.0).min(m + h) - (x - pitch / 2.0).max(m - h)).clamp(0.0, pitch);
                (x, w * inside / pitch)
            })
            .filter(|p| p.1 > 0.0)
            .collect::<Vec<_>>()
    };
    let mut m = mean(pixels);
    let mut window = clip(m);
    for _ in 0..100 {
        if window.is_empty() {
            break;
        }
        let next = mean(&window);
        let done = (next - m).abs() < 1e-12 * pitch;
        m = next;
        window = clip(m);
        if done {
            break;
        }
    }
    window
}

/// One protected photon at `pixel_x`. The uncertainty is the single-photon
/// spread `scale · sigma_beam / |a|`.
pub fn estimate_pm_single(pixel_x: f64, calib: &Calibration, scale: f64) -> Result<Estimate> {
    calib.require_nondegenerate()?;
    let (xh, xv) = calib.corrected_endpoints();
    let center = (xh.value + xv.value) / 2.0;
    let a = (xh.value - xv.value) / 2.0;
    Ok(Estimate {
        value: (pixel_x - center) / a,
        sigma: scale * calib.sigma_beam / a.abs(),
        method: Method::PmSingle,
        counts_used: 1.0,
        calibration_id: calib.id.clone(),
    })
}

/// One unprotected photon: only reports the eigenvalue region hit.
pub fn estimate_pj_single(pixel_x: f64, calib: &Calibration, part: &RegionPartition) -> Estimate {
    Estimate {
        value: if part.is_h_side(pixel_x) { 1.0 } else { -1.0 },
        sigma: 1.0,
        method: Method::PjSingle,
        counts_used: 1.0,
        calibration_id: calib.id.clone(),
    }
}

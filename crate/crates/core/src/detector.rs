//! Monte Carlo model of the single-photon pixel array.
//!
//! Photon positions along `x` are drawn from the exact position marginal of
//! the joint state; `y` follows a classical Gaussian beam profile. Pixel `i`
//! covers `[(i - ½)·pitch, (i + ½)·pitch)`, i.e. pixel centers sit on integer
//! multiples of the pitch. Dark counts are added per pixel as independent
//! Poisson draws.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng::{substream, tag};
use crate::state::JointState;
use crate::tomography::SettingLabel;

/// Photons per RNG substream. Fixed so that the sampled grid does not depend
/// on how many threads process the blocks.
const BLOCK: usize = 4096;
/// Resolution of the inverse-CDF table used for sampling `x`.
const CDF_POINTS: usize = 16_384;
/// Support half-width in units of σ.
const SUPPORT_SIGMAS: f64 = 12.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub nx: usize,
    pub ny: usize,
    /// Position units (px) per pixel.
    pub pixel_pitch: f64,
    pub beam_center_y: f64,
    pub beam_sigma_y: f64,
    /// Expected dark counts per pixel per acquisition.
    pub dark_rate: f64,
    pub detection_efficiency: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            nx: 32,
            ny: 32,
            pixel_pitch: 1.0,
            beam_center_y: 15.5,
            beam_sigma_y: 4.17,
            dark_rate: 0.02,
            detection_efficiency: 1.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::param("detector", "nx and ny must be >= 1"));
        }
        if !(self.pixel_pitch > 0.0) {
            return Err(Error::param("pixel_pitch", "must be > 0"));
        }
        if !(self.beam_sigma_y > 0.0) {
            return Err(Error::param("beam_sigma_y", "must be > 0"));
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(Error::param("dark_rate", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.detection_efficiency) {
            return Err(Error::param("detection_efficiency", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Pixel index containing position `pos`, if it is on the array.
    pub fn pixel_index(&self, pos: f64, n: usize) -> Option<usize> {
        let i = (pos / self.pixel_pitch + 0.5).floor();
        (i >= 0.0 && i < n as f64).then_some(i as usize)
    }

    /// Center position of pixel `i`.
    pub fn pixel_center(&self, i: usize) -> f64 {
        i as f64 * self.pixel_pitch
    }
}

/// What an acquisition was taken with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AcquisitionLabel {
    HCal,
    VCal,
    Pj,
    Pm,
    Void,
    Pol,
    Tomo(SettingLabel),
}

impl fmt::Display for AcquisitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AcquisitionLabel::HCal => f.write_str("H-cal"),
            AcquisitionLabel::VCal => f.write_str("V-cal"),
            AcquisitionLabel::Pj => f.write_str("PJ"),
            AcquisitionLabel::Pm => f.write_str("PM"),
            AcquisitionLabel::Void => f.write_str("void"),
            AcquisitionLabel::Pol => f.write_str("pol"),
            AcquisitionLabel::Tomo(s) => write!(f, "tomo-{s}"),
        }
    }
}

impl FromStr for AcquisitionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "H-cal" => AcquisitionLabel::HCal,
            "V-cal" => AcquisitionLabel::VCal,
            "PJ" => AcquisitionLabel::Pj,
            "PM" => AcquisitionLabel::Pm,
            "void" => AcquisitionLabel::Void,
            "pol" => AcquisitionLabel::Pol,
            other => match other.strip_prefix("tomo-") {
                Some(setting) => AcquisitionLabel::Tomo(setting.parse()?),
                None => return Err(Error::GridFormat(format!("unknown label `{other}`"))),
            },
        })
    }
}

impl TryFrom<String> for AcquisitionLabel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AcquisitionLabel> for String {
    fn from(l: AcquisitionLabel) -> String {
        l.to_string()
    }
}

/// Detector output for one acquisition. Counts are stored row-major
/// (`counts[y * nx + x]`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsGrid {
    pub nx: usize,
    pub ny: usize,
    pub counts: Vec<u64>,
    pub n_emitted: u64,
    pub seed: u64,
    pub label: AcquisitionLabel,
}

impl CountsGrid {
    pub fn zeros(nx: usize, ny: usize, label: AcquisitionLabel) -> Self {
        CountsGrid {
            nx,
            ny,
            counts: vec![0; nx * ny],
            n_emitted: 0,
            seed: 0,
            label,
        }
    }

    pub fn get(&self, ix: usize, iy: usize) -> u64 {
        self.counts[iy * self.nx + ix]
    }

    pub fn get_mut(&mut self, ix: usize, iy: usize) -> &mut u64 {
        &mut self.counts[iy * self.nx + ix]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts summed over rows, one entry per column.
    pub fn x_marginal(&self) -> Vec<u64> {
        let mut out = vec![0; self.nx];
        for row in self.counts.chunks(self.nx) {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }

    /// Counts summed over columns, one entry per row.
    pub fn y_marginal(&self) -> Vec<u64> {
        self.counts.chunks(self.nx).map(|r| r.iter().sum()).collect()
    }

    /// Plain-text grid: one header line, then `ny` rows of `nx` integers.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# label={}  seed={}  n_emitted={}\n",
            self.label, self.seed, self.n_emitted
        );
        for row in self.counts.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| Error::GridFormat("missing `#` header line".into()))?;
        let (mut label, mut seed, mut n_emitted) = (None, None, None);
        for field in header.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::GridFormat(format!("bad header field `{field}`")))?;
            let bad = |_| Error::GridFormat(format!("bad value for `{k}`"));
            match k {
                "label" => label = Some(v.parse::<AcquisitionLabel>()?),
                "seed" => seed = Some(v.parse::<u64>().map_err(bad)?),
                "n_emitted" => n_emitted = Some(v.parse::<u64>().map_err(bad)?),
                _ => {}
            }
        }
        let mut counts = Vec::new();
        let mut nx = None;
        let mut ny = 0;
        for line in lines {
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::GridFormat(format!("row {ny}: {e}")))?;
            match nx {
                None => nx = Some(row.len()),
                Some(n) if n != row.len() => {
                    return Err(Error::GridFormat(format!(
                        "row {ny} has {} entries, expected {n}",
                        row.len()
                    )))
                }
                _ => {}
            }
            counts.extend(row);
            ny += 1;
        }
        let missing = |k: &str| Error::GridFormat(format!("header lacks `{k}`"));
        Ok(CountsGrid {
            nx: nx.filter(|&n| n > 0).ok_or_else(|| Error::GridFormat("no data rows".into()))?,
            ny,
            counts,
            n_emitted: n_emitted.ok_or_else(|| missing("n_emitted"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            label: label.ok_or_else(|| missing("label"))?,
        })
    }

    /// `pixel,x,counts` table of the column marginal.
    pub fn x_histogram_csv(&self, cfg: &DetectorConfig) -> String {
        let mut s = String::from("pixel,x,counts\n");
        for (i, c) in self.x_marginal().iter().enumerate() {
            s.push_str(&format!("{i},{},{c}\n", cfg.pixel_center(i)));
        }
        s
    }
}

/// One detected signal photon, in arrival order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub ix: usize,
    pub iy: usize,
    pub x: f64,
    pub y: f64,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Position density `|Ψ(x)|²` of a joint state, held as a signed mixture of
/// equal-width normal densities (the cross terms of the Gaussian sum).
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalPdf {
    sigma: f64,
    /// `(weight, mean)`; weights sum to one but may be negative.
    components: Vec<(f64, f64)>,
}

impl MarginalPdf {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn components(&self) -> &[(f64, f64)] {
        &self.components
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let norm = 1.0 / (self.sigma * (2.0 * std::f64::consts::PI).sqrt());
        self.components
            .iter()
            .map(|&(w, m)| {
                let z = (x - m) / self.sigma;
                w * norm * (-0.5 * z * z).exp()
            })
            .sum::<f64>()
            .max(0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|&(w, m)| w * std_normal_cdf((x - m) / self.sigma))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// Probability mass in `[a, b)`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|&(w, m)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.components
            .iter()
            .map(|&(w, m)| w * (self.sigma * self.sigma + (m - mu) * (m - mu)))
            .sum()
    }

    /// Interval outside which the density is negligible.
    pub fn support(&self) -> (f64, f64) {
        let lo = self.components.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let hi = self.components.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        (lo - SUPPORT_SIGMAS * self.sigma, hi + SUPPORT_SIGMAS * self.sigma)
    }

    fn inverse_cdf_table(&self) -> InverseCdf {
        let (lo, hi) = self.support();
        let step = (hi - lo) / (CDF_POINTS - 1) as f64;
        let xs: Vec<f64> = (0..CDF_POINTS).map(|i| lo + i as f64 * step).collect();
        let mut running = 0.0_f64;
        let cdf = xs
            .iter()
            .map(|&x| {
                running = running.max(self.cdf(x));
                running
            })
            .collect();
        InverseCdf { xs, cdf }
    }
}

struct InverseCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    fn sample(&self, u: f64) -> f64 {
        let first = self.cdf[0];
        let last = *self.cdf.last().unwrap();
        let target = first + u * (last - first);
        let i = self.cdf.partition_point(|&c| c < target).clamp(1, self.xs.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        self.xs[i - 1] + t * (self.xs[i] - self.xs[i - 1])
    }
}

/// Exact position marginal of `state`, in absolute detector coordinates.
pub fn marginal_pdf(state: &JointState) -> MarginalPdf {
    let env = state.envelope();
    let terms = state.terms();
    let norm = state.norm_sqr();
    let mut components: Vec<(f64, f64)> = Vec::new();
    for (i, ti) in terms.iter().enumerate() {
        for tj in &terms[i..] {
            let same = std::ptr::eq(ti, tj);
            let w = (ti.amplitude.conj() * tj.amplitude * ti.pol.inner(&tj.pol)).re
                * env.overlap(ti.shift - tj.shift)
                * if same { 1.0 } else { 2.0 }
                / norm;
            let m = env.center() + (ti.shift + tj.shift) / 2.0;
            match components.iter_mut().find(|c| (c.1 - m).abs() < 1e-12) {
                Some(c) => c.0 += w,
                None => components.push((w, m)),
            }
        }
    }
    components.retain(|c| c.0 != 0.0);
    MarginalPdf {
        sigma: env.sigma(),
        components,
    }
}

/// Draws the signal events of one acquisition, in arrival order. Photons
/// lost to detection inefficiency or falling off the array are dropped.
pub fn sample_event_list(
    state: &JointState,
    n_photons: u64,
    cfg: &DetectorConfig,
    seed: u64,
) -> Result<Vec<Event>> {
    cfg.validate()?;
    if n_photons == 0 {
        return Ok(Vec::new());
    }
    let table = marginal_pdf(state).inverse_cdf_table();
    let beam_y = Normal::new(cfg.beam_center_y, cfg.beam_sigma_y)
        .map_err(|e| Error::param("beam_sigma_y", e.to_string()))?;
    let n_blocks = (n_photons as usize).div_ceil(BLOCK);
    let blocks: Vec<Vec<Event>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, &[tag("photons"), b as u64]);
            let in_block = BLOCK.min(n_photons as usize - b * BLOCK);
            let mut events = Vec::with_capacity(in_block);
            for _ in 0..in_block {
                let detected = rng.random::<f64>() < cfg.detection_efficiency;
                let x = table.sample(rng.random::<f64>());
                let y = beam_y.sample(&mut rng);
                if !detected {
                    continue;
                }
                if let (Some(ix), Some(iy)) = (cfg.pixel_index(x, cfg.nx), cfg.pixel_index(y, cfg.ny)) {
                    events.push(Event { ix, iy, x, y });
                }
            }
            events
        })
        .collect();
    Ok(blocks.into_iter().flatten().collect())
}

/// Bins `events` and adds Poisson dark counts.
pub fn grid_from_events(
    events: &[Event],
    n_photons: u64,
    cfg: &DetectorConfig,
    seed: u64,
    label: AcquisitionLabel,
) -> Result<CountsGrid> {
    cfg.validate()?;
    let mut grid = CountsGrid::zeros(cfg.nx, cfg.ny, label);
    grid.n_emitted = n_photons;
    grid.seed = seed;
    for e in events {
        *grid.get_mut(e.ix, e.iy) += 1;
    }
    if cfg.dark_rate > 0.0 {
        let dark = Poisson::new(cfg.dark_rate).map_err(|e| Error::param("dark_rate", e.to_string()))?;
        let mut rng = substream(seed, &[tag("dark")]);
        for c in grid.counts.iter_mut() {
            *c += dark.sample(&mut rng) as u64;
        }
    }
    Ok(grid)
}

/// Grid plus the ordered list of signal events behind it.
pub fn sample_acquisition(
    state: &JointState,
    n_photons: u64,
    cfg: &DetectorConfig,
    seed: u64,
    label: AcquisitionLabel,
) -> Result<(CountsGrid, Vec<Event>)> {
    let events = sample_event_list(state, n_photons, cfg, seed)?;
    let grid = grid_from_events(&events, n_photons, cfg, seed, label)?;
    Ok((grid, events))
}

/// Monte Carlo detection-event grid for `n_photons` photons in `state`.
pub fn sample_events(
    state: &JointState,
    n_photons: u64,
    cfg: &DetectorConfig,
    seed: u64,
    label: AcquisitionLabel,
) -> Result<CountsGrid> {
    sample_acquisition(state, n_photons, cfg, seed, label).map(|(g, _)| g)
}

//! Six-setting polarization tomography: binomial count simulation, linear
//! inversion through Pauli expectations, and projection onto the set of
//! physical states.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix2;
use crate::error::{Error, Result};
use crate::rng::{substream, tag};
use crate::state::PolarizationKet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SettingLabel {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl SettingLabel {
    pub const ALL: [SettingLabel; 6] = [
        SettingLabel::H,
        SettingLabel::V,
        SettingLabel::D,
        SettingLabel::A,
        SettingLabel::R,
        SettingLabel::L,
    ];

    pub fn ket(self) -> PolarizationKet {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let (h, v) = match self {
            SettingLabel::H => (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
            SettingLabel::V => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
            SettingLabel::D => (C64::new(r, 0.0), C64::new(r, 0.0)),
            SettingLabel::A => (C64::new(r, 0.0), C64::new(-r, 0.0)),
            SettingLabel::R => (C64::new(r, 0.0), C64::new(0.0, r)),
            SettingLabel::L => (C64::new(r, 0.0), C64::new(0.0, -r)),
        };
        PolarizationKet::normalized(h, v).expect("setting kets are normalized")
    }

    /// Bloch axis measured by this setting and the sign of its eigenvalue.
    fn axis(self) -> (usize, f64) {
        match self {
            SettingLabel::D => (0, 1.0),
            SettingLabel::A => (0, -1.0),
            SettingLabel::R => (1, 1.0),
            SettingLabel::L => (1, -1.0),
            SettingLabel::H => (2, 1.0),
            SettingLabel::V => (2, -1.0),
        }
    }
}

impl fmt::Display for SettingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for SettingLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SettingLabel::ALL
            .into_iter()
            .find(|l| l.to_string() == s)
            .ok_or_else(|| Error::GridFormat(format!("unknown tomography setting `{s}`")))
    }
}

/// A projective measurement setting of the HWP + QWP + polarizer stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TomoSetting {
    pub label: SettingLabel,
    pub projector: DensityMatrix2,
}

impl TomoSetting {
    pub fn new(label: SettingLabel) -> Self {
        TomoSetting {
            label,
            projector: DensityMatrix2::pure(&label.ket()),
        }
    }

    /// H, V, D, A, R, L.
    pub fn standard() -> Vec<TomoSetting> {
        SettingLabel::ALL.into_iter().map(TomoSetting::new).collect()
    }

    pub fn probability(&self, rho: &DensityMatrix2) -> f64 {
        rho.expectation(&self.projector.matrix()).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingCounts {
    pub label: SettingLabel,
    pub counts: u64,
    pub trials: u64,
}

/// Binomial(n, Tr(Πρ)) counts per setting. Each setting draws from its own
/// substream.
pub fn simulate_tomo_counts(
    rho: &DensityMatrix2,
    settings: &[TomoSetting],
    n_per_setting: u64,
    seed: u64,
) -> Result<Vec<SettingCounts>> {
    settings
        .iter()
        .map(|s| {
            let p = s.probability(rho);
            let dist = Binomial::new(n_per_setting, p)
                .map_err(|e| Error::param("n_per_setting", e.to_string()))?;
            let mut rng = substream(seed, &[tag("tomo"), tag(&s.label.to_string())]);
            Ok(SettingCounts {
                label: s.label,
                counts: dist.sample(&mut rng),
                trials: n_per_setting,
            })
        })
        .collect()
}

/// Counts from exact probabilities with a virtual sample size, for noiseless
/// checks.
pub fn expected_counts(rho: &DensityMatrix2, settings: &[TomoSetting], trials: u64) -> Vec<(SettingLabel, f64, u64)> {
    settings
        .iter()
        .map(|s| (s.label, s.probability(rho) * trials as f64, trials))
        .collect()
}

/// Linear inversion followed by projection to the nearest physical state.
/// Each Bloch component comes from its opposing pair of settings when both
/// are present, or from one setting alone.
pub fn reconstruct(counts: &[SettingCounts]) -> Result<DensityMatrix2> {
    let as_freq: Vec<(SettingLabel, f64, u64)> = counts
        .iter()
        .map(|c| (c.label, c.counts as f64, c.trials))
        .collect();
    reconstruct_from_frequencies(&as_freq)
}

/// Same as [`reconstruct`] but accepts fractional counts.
pub fn reconstruct_from_frequencies(counts: &[(SettingLabel, f64, u64)]) -> Result<DensityMatrix2> {
    let mut plus = [None::<(f64, u64)>; 3];
    let mut minus = [None::<(f64, u64)>; 3];
    for &(label, n, trials) in counts {
        let (axis, sign) = label.axis();
        let slot = if sign > 0.0 { &mut plus[axis] } else { &mut minus[axis] };
        let acc = slot.get_or_insert((0.0, 0));
        acc.0 += n;
        acc.1 += trials;
    }
    let mut r = [0.0; 3];
    for axis in 0..3 {
        r[axis] = match (plus[axis], minus[axis]) {
            (Some((np, _)), Some((nm, _))) if np + nm > 0.0 => (np - nm) / (np + nm),
            (Some((np, tp)), None) if tp > 0 => 2.0 * np / tp as f64 - 1.0,
            (None, Some((nm, tm))) if tm > 0 => 1.0 - 2.0 * nm / tm as f64,
            _ => {
                return Err(Error::UnderDetermined(format!(
                    "no usable counts for Bloch axis {}",
                    ["x", "y", "z"][axis]
                )))
            }
        };
    }
    // Eigenvalues (1 ± |r|)/2: clipping the negative one and renormalizing
    // is the same as pulling r back onto the unit sphere.
    Ok(DensityMatrix2::from_bloch(r))
}

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::state::DecoherenceMode;

/// Which measurement branches a run executes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modes {
    Pj,
    Pm,
    #[default]
    Both,
}

impl Modes {
    pub fn pj(self) -> bool {
        matches!(self, Modes::Pj | Modes::Both)
    }

    pub fn pm(self) -> bool {
        matches!(self, Modes::Pm | Modes::Both)
    }
}

impl std::str::FromStr for Modes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pj" => Ok(Modes::Pj),
            "pm" => Ok(Modes::Pm),
            "both" => Ok(Modes::Both),
            other => Err(Error::Config(format!("unknown mode `{other}` (pj | pm | both)"))),
        }
    }
}

/// Everything needed to reproduce a run. Stored as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Linear polarization angles of the prepared states, radians.
    pub thetas: Vec<f64>,
    /// Number of weak interaction units.
    pub units: usize,
    /// Total H/V separation after all units, px.
    pub g_prime: f64,
    /// Intensity width of the beam, px.
    pub sigma: f64,
    /// Detector x position of ⟨A⟩ = 0, px.
    pub pointer_center: f64,
    /// Beam displacement introduced by the polarizing plates, px.
    pub polarizer_shift: f64,
    pub n_photons: u64,
    pub n_calibration_repeats: usize,
    /// Multiplier on σ/a for single-event uncertainties.
    pub single_event_scale: f64,
    pub tomo_n_per_setting: u64,
    pub seed: u64,
    pub mode: Modes,
    pub decoherence: DecoherenceMode,
    pub output_dir: PathBuf,
    pub detector: DetectorConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            thetas: vec![FRAC_PI_4, 17.0 * PI / 60.0, FRAC_PI_8],
            units: 7,
            g_prime: 11.56,
            sigma: 4.17,
            pointer_center: 15.5,
            polarizer_shift: 0.25,
            n_photons: 10_000,
            n_calibration_repeats: 5,
            single_event_scale: 1.0,
            tomo_n_per_setting: 100_000,
            seed: 20_190_812,
            mode: Modes::Both,
            decoherence: DecoherenceMode::Exact,
            output_dir: PathBuf::from("out"),
            detector: DetectorConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Per-unit displacement of the H component.
    pub fn delta(&self) -> f64 {
        self.g_prime / self.units as f64
    }

    /// Detector x of the undisplaced (V) beam.
    pub fn beam_origin(&self) -> f64 {
        self.pointer_center - self.g_prime / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.thetas.is_empty() {
            return bad("`thetas` is empty".into());
        }
        for &t in &self.thetas {
            if !(-1e-12..=FRAC_PI_2 + 1e-12).contains(&t) {
                return bad(format!("theta {t} outside [0, π/2]"));
            }
        }
        if self.units == 0 {
            return bad("`units` must be >= 1".into());
        }
        for (name, v) in [
            ("g_prime", self.g_prime),
            ("sigma", self.sigma),
            ("single_event_scale", self.single_event_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("`{name}` must be positive, got {v}"));
            }
        }
        if !self.pointer_center.is_finite() || !self.polarizer_shift.is_finite() {
            return bad("positions must be finite".into());
        }
        if self.n_calibration_repeats == 0 {
            return bad("`n_calibration_repeats` must be >= 1".into());
        }
        if self.tomo_n_per_setting == 0 {
            return bad("`tomo_n_per_setting` must be >= 1".into());
        }
        if self.seed > i64::MAX as u64 {
            return bad("`seed` must fit in a signed 64-bit integer".into());
        }
        self.detector
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// Parses an angle in radians, accepting plain numbers and multiples of π
/// such as `pi/4`, `17pi/60`, `17*pi/60` or `0.5π`.
pub fn parse_theta(text: &str) -> Result<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Config(format!("cannot parse angle `{text}`"));
    let normalized = s.replace('π', "pi");
    let Some(idx) = normalized.find("pi") else {
        return normalized.parse::<f64>().map_err(|_| bad());
    };
    let (num, rest) = normalized.split_at(idx);
    let rest = &rest[2..];
    let num = num.trim_end_matches('*');
    let factor = if num.is_empty() {
        1.0
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    let divisor = match rest.strip_prefix('/') {
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
        None if rest.is_empty() => 1.0,
        None => return Err(bad()),
    };
    Ok(factor * PI / divisor)
}

/// Ket label for a linear polarization angle: `|H⟩`, `|V⟩`, `|+⟩`, `|17π/60⟩`.
pub fn state_label(theta: f64) -> String {
    let r = theta / PI;
    if r.abs() < 1e-12 {
        return "|H⟩".into();
    }
    if (theta - FRAC_PI_2).abs() < 1e-12 {
        return "|V⟩".into();
    }
    if (theta - FRAC_PI_4).abs() < 1e-12 {
        return "|+⟩".into();
    }
    for q in 1..=360u32 {
        let p = (r * q as f64).round();
        if p >= 1.0 && (r * q as f64 - p).abs() < 1e-9 {
            let p = p as u32;
            return match (p, q) {
                (1, 1) => "|π⟩".into(),
                (1, q) => format!("|π/{q}⟩"),
                (p, 1) => format!("|{p}π⟩"),
                (p, q) => format!("|{p}π/{q}⟩"),
            };
        }
    }
    format!("|θ={theta:.4}⟩")
}

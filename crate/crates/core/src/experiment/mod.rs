//! Config-driven end-to-end runs: the acquisition protocol for each prepared
//! state, calibration, estimation, tomography and report emission.

mod config;
mod tables;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    calibrate, estimate_pj, estimate_pj_single, estimate_pm, estimate_pm_single, Calibration,
    Estimate, RegionPartition, ROI_MARGIN_SIGMAS,
};
use crate::density::{fidelity, purity, DensityMatrix2};
use crate::detector::{sample_acquisition, AcquisitionLabel, CountsGrid, Event};
use crate::error::{Error, ErrorClass, Result};
use crate::rng::{derive_seed, tag};
use crate::state::{
    evolve_pj, evolve_pm, expectation_value, initial_state, reduce_polarization, GaussianEnvelope,
    JointState, Observable2, PolarizationKet,
};
use crate::tomography::{reconstruct, simulate_tomo_counts, TomoSetting};

pub use config::{parse_theta, state_label, ExperimentConfig, Modes};
pub use tables::{emit_tables, table1_text, table2_text, TableStatus};

/// Name of the marker file left behind by a failed run.
pub const FAILURE_MARKER: &str = "FAILED";

/// Pipeline stage, reported when a run aborts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Config,
    Acquisition,
    Calibration,
    Estimation,
    Tomography,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Acquisition => "acquisition",
            Stage::Calibration => "calibration",
            Stage::Estimation => "estimation",
            Stage::Tomography => "tomography",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct RunError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl RunError {
    /// Failure class for exit-status purposes. Calibration and estimation
    /// failures are analysis errors whatever the underlying cause.
    pub fn class(&self) -> ErrorClass {
        match self.stage {
            Stage::Config => ErrorClass::Config,
            Stage::Calibration | Stage::Estimation => ErrorClass::Analysis,
            _ => match self.source.class() {
                ErrorClass::Config => ErrorClass::Simulation,
                c => c,
            },
        }
    }
}

trait StageExt<T> {
    fn stage(self, stage: Stage) -> std::result::Result<T, RunError>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> std::result::Result<T, RunError> {
        self.map_err(|source| RunError { stage, source })
    }
}

/// Tomography metrics for one prepared state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyReport {
    pub rho_in: DensityMatrix2,
    pub rho_dec: Option<DensityMatrix2>,
    pub rec_pm: Option<DensityMatrix2>,
    pub rec_pj: Option<DensityMatrix2>,
    pub fidelity_pm_in: Option<f64>,
    pub fidelity_pj_dec: Option<f64>,
    pub fidelity_pm_pj: Option<f64>,
    pub purity_pm: Option<f64>,
    pub purity_pj: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub theta: f64,
    pub label: String,
    pub expectation_th: f64,
    pub calibration: Calibration,
    pub pj: Option<Estimate>,
    pub pm: Option<Estimate>,
    pub pm_single: Option<Estimate>,
    pub pj_single: Option<Estimate>,
    /// Probability that a photon passes all protection polarizers.
    pub pm_survival: Option<f64>,
    pub tomography: TomographyReport,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub states: Vec<StateReport>,
    /// Paths of every written file, relative to the output directory.
    pub files: Vec<String>,
}

/// Writes files under a root directory and remembers what was written.
/// Without a root nothing is written.
struct OutputDir {
    root: Option<PathBuf>,
    files: Vec<String>,
}

impl OutputDir {
    fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        let _ = fs::remove_file(root.join(FAILURE_MARKER));
        Ok(OutputDir {
            root: Some(root.to_path_buf()),
            files: Vec::new(),
        })
    }

    fn discard() -> Self {
        OutputDir {
            root: None,
            files: Vec::new(),
        }
    }

    fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let Some(root) = &self.root else {
            return Ok(());
        };
        let path = root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, &text)
    }

    fn write_grid(&mut self, dir: &str, name: &str, grid: &CountsGrid, cfg: &ExperimentConfig) -> Result<()> {
        self.write(&format!("{dir}/grids/{name}.txt"), &grid.to_text())?;
        self.write(
            &format!("{dir}/histograms/{name}.csv"),
            &grid.x_histogram_csv(&cfg.detector),
        )
    }
}

/// Fixed physical setup shared by every acquisition of a run.
struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    envelope: GaussianEnvelope,
}

impl<'a> Setup<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        Ok(Setup {
            cfg,
            envelope: GaussianEnvelope::new(cfg.beam_origin(), cfg.sigma)?,
        })
    }

    fn seed(&self, state_idx: usize, label: AcquisitionLabel, repeat: usize) -> u64 {
        derive_seed(
            self.cfg.seed,
            &[state_idx as u64, tag(&label.to_string()), repeat as u64],
        )
    }

    fn acquire(
        &self,
        state: &JointState,
        state_idx: usize,
        label: AcquisitionLabel,
        repeat: usize,
    ) -> Result<(CountsGrid, Vec<Event>)> {
        sample_acquisition(
            state,
            self.cfg.n_photons,
            &self.cfg.detector,
            self.seed(state_idx, label, repeat),
            label,
        )
    }

    fn pj_state(&self, pol: &PolarizationKet) -> Result<JointState> {
        evolve_pj(pol, &self.envelope, self.cfg.units, self.cfg.delta())
    }

    fn pm_state(&self, pol: &PolarizationKet) -> Result<(JointState, f64)> {
        let (s, survival) = evolve_pm(pol, &self.envelope, self.cfg.units, self.cfg.delta())?;
        Ok((s.translated(self.cfg.polarizer_shift), survival))
    }
}

/// Calibration acquisitions for one data set, grouped by kind.
pub struct CalibrationSet {
    pub h: Vec<CountsGrid>,
    pub v: Vec<CountsGrid>,
    pub void: Vec<CountsGrid>,
    pub pol: Vec<CountsGrid>,
}

impl CalibrationSet {
    pub fn calibrate(&self, pixel_pitch: f64) -> Result<Calibration> {
        calibrate(&self.h, &self.v, &self.void, &self.pol, pixel_pitch)
    }

    fn by_kind(&self) -> [(AcquisitionLabel, &[CountsGrid]); 4] {
        [
            (AcquisitionLabel::HCal, &self.h),
            (AcquisitionLabel::VCal, &self.v),
            (AcquisitionLabel::Pol, &self.pol),
            (AcquisitionLabel::Void, &self.void),
        ]
    }
}

fn repeated(
    setup: &Setup,
    state: &JointState,
    idx: usize,
    label: AcquisitionLabel,
) -> Result<Vec<CountsGrid>> {
    (0..setup.cfg.n_calibration_repeats)
        .map(|r| setup.acquire(state, idx, label, r).map(|(g, _)| g))
        .collect()
}

fn acquire_h_v(setup: &Setup, idx: usize) -> Result<(Vec<CountsGrid>, Vec<CountsGrid>)> {
    let h = setup.pj_state(&PolarizationKet::horizontal())?;
    let v = setup.pj_state(&PolarizationKet::vertical())?;
    Ok((
        repeated(setup, &h, idx, AcquisitionLabel::HCal)?,
        repeated(setup, &v, idx, AcquisitionLabel::VCal)?,
    ))
}

fn acquire_pol_void(
    setup: &Setup,
    idx: usize,
    pol: &PolarizationKet,
) -> Result<(Vec<CountsGrid>, Vec<CountsGrid>)> {
    let free = initial_state(pol, &setup.envelope);
    let with_polarizers = free.translated(setup.cfg.polarizer_shift);
    Ok((
        repeated(setup, &with_polarizers, idx, AcquisitionLabel::Pol)?,
        repeated(setup, &free, idx, AcquisitionLabel::Void)?,
    ))
}

/// Simulates only the calibration acquisitions (H, V, polarizers only, free
/// path) for the state at `state_idx` of the config.
pub fn simulate_calibration(cfg: &ExperimentConfig, state_idx: usize) -> Result<CalibrationSet> {
    cfg.validate()?;
    let theta = *cfg
        .thetas
        .get(state_idx)
        .ok_or_else(|| Error::Config(format!("no state with index {state_idx}")))?;
    let setup = Setup::new(cfg)?;
    let (h, v) = acquire_h_v(&setup, state_idx)?;
    let (pol, void) = acquire_pol_void(&setup, state_idx, &PolarizationKet::linear(theta))?;
    Ok(CalibrationSet { h, v, void, pol })
}

/// Simulated tomography of the PM and PJ outgoing polarization states.
pub fn run_tomography(
    cfg: &ExperimentConfig,
    state_idx: usize,
    theta: f64,
) -> Result<TomographyReport> {
    let setup = Setup::new(cfg)?;
    tomography(&setup, state_idx, &PolarizationKet::linear(theta))
}

fn tomography(setup: &Setup, idx: usize, pol: &PolarizationKet) -> Result<TomographyReport> {
    let cfg = setup.cfg;
    let settings = TomoSetting::standard();
    let rec = |true_rho: &DensityMatrix2, branch: &str| -> Result<DensityMatrix2> {
        let seed = derive_seed(cfg.seed, &[idx as u64, tag("tomo"), tag(branch)]);
        reconstruct(&simulate_tomo_counts(true_rho, &settings, cfg.tomo_n_per_setting, seed)?)
    };
    let rho_in = DensityMatrix2::pure(pol);
    let (rho_dec, rec_pj) = if cfg.mode.pj() {
        let rho = reduce_polarization(&setup.pj_state(pol)?, cfg.decoherence);
        (Some(rho), Some(rec(&rho, "PJ")?))
    } else {
        (None, None)
    };
    let rec_pm = if cfg.mode.pm() {
        let rho = reduce_polarization(&setup.pm_state(pol)?.0, cfg.decoherence);
        Some(rec(&rho, "PM")?)
    } else {
        None
    };
    Ok(TomographyReport {
        rho_in,
        rho_dec,
        fidelity_pm_in: rec_pm.map(|r| fidelity(&r, &rho_in)),
        fidelity_pj_dec: rec_pj.zip(rho_dec).map(|(r, d)| fidelity(&r, &d)),
        fidelity_pm_pj: rec_pm.zip(rec_pj).map(|(a, b)| fidelity(&a, &b)),
        purity_pm: rec_pm.map(|r| purity(&r)),
        purity_pj: rec_pj.map(|r| purity(&r)),
        rec_pm,
        rec_pj,
    })
}

fn run_state(
    setup: &Setup,
    idx: usize,
    theta: f64,
    out: &mut OutputDir,
) -> std::result::Result<StateReport, RunError> {
    let cfg = setup.cfg;
    let pitch = cfg.detector.pixel_pitch;
    let pol = PolarizationKet::linear(theta);
    let dir = format!("state_{idx}");
    use Stage::*;

    // acquisition order: H-cal, V-cal, PJ, PM, polarizers only, free path
    let (h, v) = acquire_h_v(setup, idx).stage(Acquisition)?;
    let pj = if cfg.mode.pj() {
        let s = setup.pj_state(&pol).stage(Acquisition)?;
        Some(setup.acquire(&s, idx, AcquisitionLabel::Pj, 0).stage(Acquisition)?)
    } else {
        None
    };
    let pm = if cfg.mode.pm() {
        let (s, survival) = setup.pm_state(&pol).stage(Acquisition)?;
        let acq = setup.acquire(&s, idx, AcquisitionLabel::Pm, 0).stage(Acquisition)?;
        Some((acq, survival))
    } else {
        None
    };
    let (pol_grids, void) = acquire_pol_void(setup, idx, &pol).stage(Acquisition)?;
    let cal_set = CalibrationSet {
        h,
        v,
        void,
        pol: pol_grids,
    };

    for (kind, grids) in cal_set.by_kind() {
        for (r, g) in grids.iter().enumerate() {
            out.write_grid(&dir, &format!("{kind}_{r}"), g, cfg).stage(Output)?;
        }
    }
    if let Some((g, _)) = &pj {
        out.write_grid(&dir, "PJ", g, cfg).stage(Output)?;
    }
    if let Some(((g, _), _)) = &pm {
        out.write_grid(&dir, "PM", g, cfg).stage(Output)?;
    }

    let calibration = cal_set.calibrate(pitch).stage(Calibration)?;
    out.write_json(&format!("{dir}/calibration.json"), &calibration)
        .stage(Output)?;
    let part = RegionPartition::from_calibration(&calibration, ROI_MARGIN_SIGMAS);

    let first_x = |events: &[Event]| events.first().map(|e| cfg.detector.pixel_center(e.ix));
    let (pj_est, pj_single) = match &pj {
        Some((g, events)) => (
            Some(estimate_pj(g, &calibration, &part, pitch).stage(Estimation)?),
            first_x(events).map(|x| estimate_pj_single(x, &calibration, &part)),
        ),
        None => (None, None),
    };
    let (pm_est, pm_single, pm_survival) = match &pm {
        Some(((g, events), survival)) => (
            Some(estimate_pm(g, &calibration, &part, pitch).stage(Estimation)?),
            first_x(events)
                .map(|x| estimate_pm_single(x, &calibration, cfg.single_event_scale))
                .transpose()
                .stage(Estimation)?,
            Some(*survival),
        ),
        None => (None, None, None),
    };
    let estimates: Vec<&Estimate> = [&pj_est, &pm_est, &pm_single, &pj_single]
        .into_iter()
        .flatten()
        .collect();
    out.write_json(&format!("{dir}/estimates.json"), &estimates)
        .stage(Output)?;

    let tomography = tomography(setup, idx, &pol).stage(Tomography)?;

    Ok(StateReport {
        theta,
        label: state_label(theta),
        expectation_th: expectation_value(&Observable2::polarization(), &pol),
        calibration,
        pj: pj_est,
        pm: pm_est,
        pm_single,
        pj_single,
        pm_survival,
        tomography,
    })
}

/// Runs the full protocol for the state at `state_idx` of the config in
/// memory, without writing any files.
pub fn simulate_state(
    cfg: &ExperimentConfig,
    state_idx: usize,
) -> std::result::Result<StateReport, RunError> {
    cfg.validate().stage(Stage::Config)?;
    let theta = *cfg
        .thetas
        .get(state_idx)
        .ok_or_else(|| Error::Config(format!("no state with index {state_idx}")))
        .stage(Stage::Config)?;
    let setup = Setup::new(cfg).stage(Stage::Config)?;
    run_state(&setup, state_idx, theta, &mut OutputDir::discard())
}

/// Runs the full protocol for every configured state and writes all outputs
/// under `cfg.output_dir`. On failure the files written so far are kept and a
/// `FAILED` marker naming the stage is added.
pub fn run_experiment(cfg: &ExperimentConfig) -> std::result::Result<RunReport, RunError> {
    cfg.validate().stage(Stage::Config)?;
    let setup = Setup::new(cfg).stage(Stage::Config)?;
    let mut out = OutputDir::create(&cfg.output_dir).stage(Stage::Output)?;

    let result: std::result::Result<RunReport, RunError> = (|| {
        let toml = cfg.to_toml_string().stage(Stage::Output)?;
        out.write("config.toml", &toml).stage(Stage::Output)?;
        let mut states = Vec::new();
        for (idx, &theta) in cfg.thetas.iter().enumerate() {
            states.push(run_state(&setup, idx, theta, &mut out)?);
        }
        let mut report = RunReport {
            states,
            files: Vec::new(),
        };
        let (_, table_files) = tables::write_tables(&report, &cfg.output_dir).stage(Stage::Output)?;
        out.files.extend(table_files);
        out.files.push("report.json".into());
        out.files.sort();
        report.files = out.files.clone();
        let mut text = serde_json::to_string_pretty(&report)
            .map_err(Error::from)
            .stage(Stage::Output)?;
        text.push('\n');
        fs::write(cfg.output_dir.join("report.json"), text)
            .map_err(Error::from)
            .stage(Stage::Output)?;
        Ok(report)
    })();

    if let Err(e) = &result {
        let _ = fs::write(
            cfg.output_dir.join(FAILURE_MARKER),
            format!("stage: {}\nerror: {}\n", e.stage, e.source),
        );
    }
    result
}

/// Loads a report written by [`run_experiment`].
pub fn load_report(dir: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(dir.join("report.json"))?;
    Ok(serde_json::from_str(&text)?)
}

//! Simulation and analysis toolkit for protective measurements of photon
//! polarization.
//!
//! A photon's polarization is weakly coupled to its transverse position by a
//! chain of birefringent units. With a polarizer after every unit (Zeno-type
//! protection) the state survives and the whole beam moves by an amount
//! proportional to ⟨A⟩ for `A = |H⟩⟨H| - |V⟩⟨V|`. Without protection the two
//! polarization components separate and ⟨A⟩ must be inferred from counts.
//!
//! The crate is organized bottom-up:
//!
//! * [`state`]: exact Gaussian-sum representation of the joint state and its evolution
//! * [`density`]: qubit density matrices, fidelity, purity
//! * [`detector`]: Monte Carlo detection on a pixel array
//! * [`analysis`]: calibration, expectation-value estimators and their uncertainties
//! * [`tomography`]: six-setting polarization tomography
//! * [`experiment`]: config-driven end-to-end runs and report tables

// `!(x > 0.0)` also rejects NaN; 2×2 matrix loops read better indexed.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod density;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod rng;
pub mod state;
pub mod tomography;

pub use density::{fidelity, purity, DensityMatrix2};
pub use error::{Error, ErrorClass, Result};
pub use state::{
    apply_protection, apply_weak_unit, evolve_pj, evolve_pm, expectation_value, initial_state,
    reduce_polarization, DecoherenceMode, GaussianEnvelope, JointState, Observable2,
    PolarizationKet,
};

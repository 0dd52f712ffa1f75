//! Single-qubit (polarization) density matrices and the two state metrics
//! used throughout the toolkit: Uhlmann fidelity and purity.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::PolarizationKet;

/// Tolerance used when validating Hermiticity, trace and positivity.
pub const DENSITY_TOL: f64 = 1e-10;

/// A 2×2 Hermitian, positive-semidefinite, unit-trace matrix in the {H, V}
/// basis. Serializes as a nested `[[[re, im], [re, im]], [[re, im], [re, im]]]`
/// array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[C64; 2]; 2]", into = "[[C64; 2]; 2]")]
pub struct DensityMatrix2 {
    m: [[C64; 2]; 2],
}

impl TryFrom<[[C64; 2]; 2]> for DensityMatrix2 {
    type Error = Error;

    fn try_from(m: [[C64; 2]; 2]) -> Result<Self> {
        DensityMatrix2::new(m)
    }
}

impl From<DensityMatrix2> for [[C64; 2]; 2] {
    fn from(rho: DensityMatrix2) -> Self {
        rho.m
    }
}

impl DensityMatrix2 {
    pub fn new(m: [[C64; 2]; 2]) -> Result<Self> {
        let herm = (m[0][1] - m[1][0].conj())
            .norm()
            .max(m[0][0].im.abs())
            .max(m[1][1].im.abs());
        if herm > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let rho = DensityMatrix2 { m };
        let tr = rho.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
        }
        let (lo, _) = rho.eigenvalues();
        if lo < -DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {lo:.3e}"
            )));
        }
        Ok(rho)
    }

    /// Builds the matrix without validation; callers guarantee the invariants.
    pub(crate) fn from_raw(m: [[C64; 2]; 2]) -> Self {
        DensityMatrix2 { m }
    }

    pub fn pure(ket: &PolarizationKet) -> Self {
        let c = [ket.c_h(), ket.c_v()];
        let mut m = [[C64::new(0.0, 0.0); 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = c[i] * c[j].conj();
            }
        }
        DensityMatrix2 { m }
    }

    pub fn maximally_mixed() -> Self {
        Self::from_bloch([0.0; 3])
    }

    /// ρ = (I + r·σ)/2. Vectors longer than 1 are rescaled onto the sphere.
    pub fn from_bloch(r: [f64; 3]) -> Self {
        let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        let scale = if len > 1.0 { 1.0 / len } else { 1.0 };
        let [x, y, z] = r.map(|c| c * scale);
        DensityMatrix2 {
            m: [
                [C64::new((1.0 + z) / 2.0, 0.0), C64::new(x / 2.0, -y / 2.0)],
                [C64::new(x / 2.0, y / 2.0), C64::new((1.0 - z) / 2.0, 0.0)],
            ],
        }
    }

    /// Returns a copy with both off-diagonal entries multiplied by `factor`.
    pub fn with_coherence_scaled(&self, factor: f64) -> Self {
        let mut m = self.m;
        m[0][1] *= factor;
        m[1][0] *= factor;
        DensityMatrix2 { m }
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[row][col]
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (self.m[0][0] + self.m[1][1]).re
    }

    pub fn determinant(&self) -> f64 {
        (self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]).re
    }

    pub fn bloch(&self) -> [f64; 3] {
        [
            2.0 * self.m[1][0].re,
            2.0 * self.m[1][0].im,
            (self.m[0][0] - self.m[1][1]).re,
        ]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_tr = self.trace() / 2.0;
        let diff = (self.m[0][0].re - self.m[1][1].re) / 2.0;
        let disc = (diff * diff + self.m[0][1].norm_sqr()).sqrt();
        (half_tr - disc, half_tr + disc)
    }

    /// Tr(Π ρ) for a projector (or any Hermitian operator) `op`.
    pub fn expectation(&self, op: &[[C64; 2]; 2]) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                acc += op[i][j] * self.m[j][i];
            }
        }
        acc.re
    }

    /// U ρ U†.
    pub fn conjugated(&self, u: &[[C64; 2]; 2]) -> Self {
        let mut tmp = [[C64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    tmp[i][j] += u[i][k] * self.m[k][j];
                }
            }
        }
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out[i][j] += tmp[i][k] * u[j][k].conj();
                }
            }
        }
        DensityMatrix2 { m: out }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        d
    }
}

/// Tr(ρ²).
pub fn purity(rho: &DensityMatrix2) -> f64 {
    let m = rho.m;
    (m[0][0].norm_sqr() + m[1][1].norm_sqr() + 2.0 * m[0][1].norm_sqr()).clamp(0.5, 1.0)
}

/// Uhlmann fidelity (squared convention) between two qubit states, using the
/// 2×2 closed form F = Tr(ρσ) + 2√(det ρ · det σ).
pub fn fidelity(a: &DensityMatrix2, b: &DensityMatrix2) -> f64 {
    let overlap = a.expectation(&b.m);
    let dets = a.determinant().max(0.0) * b.determinant().max(0.0);
    (overlap + 2.0 * dets.sqrt()).clamp(0.0, 1.0)
}

/// Fidelity with validation of both arguments, for matrices coming from
/// outside the crate (e.g. deserialized records).
pub fn checked_fidelity(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> Result<f64> {
    let a = DensityMatrix2::new(*a)?;
    let b = DensityMatrix2::new(*b)?;
    Ok(fidelity(&a, &b))
}

//! Joint polarization ⊗ transverse-position state of a single photon.
//!
//! The spatial part is always a coherent superposition of copies of one
//! Gaussian amplitude profile displaced by different amounts, so the state is
//! stored exactly as a list of `(amplitude, polarization ket, shift)` terms.
//! Every inner product reduces to the Gaussian overlap
//! `O(d) = exp(-d² / (8σ²))` between copies separated by `d`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix2;
use crate::error::{Error, Result};

/// Shifts closer than this (in pixels) are treated as identical when merging.
pub const SHIFT_MERGE_TOL: f64 = 1e-9;
/// Below this survival probability a protection step is considered to have
/// annihilated the state.
pub const MIN_SURVIVAL: f64 = 1e-12;

/// Terms smaller than this fraction of the largest one are discarded.
const NEGLIGIBLE_AMPLITUDE: f64 = 1e-14;
const KET_TOL: f64 = 1e-12;
const ZERO: C64 = C64::new(0.0, 0.0);

/// Polarization state `c_H|H⟩ + c_V|V⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarizationKet {
    c_h: C64,
    c_v: C64,
}

impl PolarizationKet {
    /// Linear polarization `cosθ|H⟩ + sinθ|V⟩`.
    pub fn linear(theta: f64) -> Self {
        PolarizationKet {
            c_h: C64::new(theta.cos(), 0.0),
            c_v: C64::new(theta.sin(), 0.0),
        }
    }

    pub fn horizontal() -> Self {
        PolarizationKet {
            c_h: C64::new(1.0, 0.0),
            c_v: ZERO,
        }
    }

    pub fn vertical() -> Self {
        PolarizationKet {
            c_h: ZERO,
            c_v: C64::new(1.0, 0.0),
        }
    }

    /// General ket; rejects amplitudes whose norm differs from 1 by more
    /// than 1e-12.
    pub fn new(c_h: C64, c_v: C64) -> Result<Self> {
        let norm_sqr = c_h.norm_sqr() + c_v.norm_sqr();
        if (norm_sqr - 1.0).abs() > KET_TOL {
            return Err(Error::InvalidKet { norm_sqr });
        }
        Ok(PolarizationKet { c_h, c_v })
    }

    pub fn normalized(c_h: C64, c_v: C64) -> Result<Self> {
        let norm = (c_h.norm_sqr() + c_v.norm_sqr()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidKet { norm_sqr: norm * norm });
        }
        Ok(PolarizationKet {
            c_h: c_h / norm,
            c_v: c_v / norm,
        })
    }

    pub fn c_h(&self) -> C64 {
        self.c_h
    }

    pub fn c_v(&self) -> C64 {
        self.c_v
    }

    pub fn components(&self) -> [C64; 2] {
        [self.c_h, self.c_v]
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &PolarizationKet) -> C64 {
        self.c_h.conj() * other.c_h + self.c_v.conj() * other.c_v
    }

    fn same_as(&self, other: &PolarizationKet) -> bool {
        (self.c_h - other.c_h).norm() < KET_TOL && (self.c_v - other.c_v).norm() < KET_TOL
    }
}

/// Gaussian transverse profile `φ0(x) ∝ exp(-(x - x0)² / (4σ²))`; `σ` is the
/// standard deviation of the intensity `|φ0|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianEnvelope {
    center: f64,
    sigma: f64,
}

impl GaussianEnvelope {
    pub fn new(center: f64, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be > 0, got {sigma}")));
        }
        if !center.is_finite() {
            return Err(Error::param("center", "must be finite"));
        }
        Ok(GaussianEnvelope { center, sigma })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Normalized amplitude of the copy displaced by `shift`, evaluated at `x`.
    pub fn amplitude(&self, x: f64, shift: f64) -> f64 {
        let u = x - self.center - shift;
        (2.0 * PI * self.sigma * self.sigma).powf(-0.25)
            * (-u * u / (4.0 * self.sigma * self.sigma)).exp()
    }

    /// ∫ φ0(x - a) φ0(x - b) dx for `d = a - b`.
    pub fn overlap(&self, d: f64) -> f64 {
        (-d * d / (8.0 * self.sigma * self.sigma)).exp()
    }
}

/// One term `amplitude · |pol⟩ ⊗ φ0(x - shift)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub amplitude: C64,
    pub pol: PolarizationKet,
    pub shift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    envelope: GaussianEnvelope,
    terms: Vec<Term>,
}

impl JointState {
    pub fn envelope(&self) -> &GaussianEnvelope {
        &self.envelope
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Builds a state from raw terms, merging duplicates. The result is not
    /// renormalized.
    pub fn from_terms(envelope: GaussianEnvelope, terms: impl IntoIterator<Item = Term>) -> Self {
        let mut merged: Vec<Term> = Vec::new();
        for t in terms {
            if t.amplitude == ZERO {
                continue;
            }
            match merged
                .iter_mut()
                .find(|m| m.pol.same_as(&t.pol) && (m.shift - t.shift).abs() < SHIFT_MERGE_TOL)
            {
                Some(m) => m.amplitude += t.amplitude,
                None => merged.push(t),
            }
        }
        // cos(π/2) and friends leave ~1e-17 residues; drop them relative to the largest term
        let largest = merged.iter().map(|t| t.amplitude.norm()).fold(0.0, f64::max);
        merged.retain(|t| t.amplitude.norm() > NEGLIGIBLE_AMPLITUDE * largest);
        JointState {
            envelope,
            terms: merged,
        }
    }

    /// Weighted pair sum `Σ_ij conj(a_i) a_j ⟨pol_i|pol_j⟩ O(d_i - d_j) f(d_i, d_j)`.
    fn pair_sum(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for ti in &self.terms {
            for tj in &self.terms {
                let w = ti.amplitude.conj() * tj.amplitude * ti.pol.inner(&tj.pol);
                acc += w.re * self.envelope.overlap(ti.shift - tj.shift) * f(ti.shift, tj.shift);
            }
        }
        acc
    }

    pub fn norm_sqr(&self) -> f64 {
        self.pair_sum(|_, _| 1.0)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > MIN_SURVIVAL) {
            return Err(Error::DegenerateProjection { survival: n });
        }
        let scale = 1.0 / n.sqrt();
        Ok(JointState {
            envelope: self.envelope,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    amplitude: t.amplitude * scale,
                    ..*t
                })
                .collect(),
        })
    }

    /// Polarization-resolved wavefunction `(Ψ_H(x), Ψ_V(x))`.
    pub fn wavefunction(&self, x: f64) -> [C64; 2] {
        let mut out = [ZERO; 2];
        for t in &self.terms {
            let phi = self.envelope.amplitude(x, t.shift);
            out[0] += t.amplitude * t.pol.c_h() * phi;
            out[1] += t.amplitude * t.pol.c_v() * phi;
        }
        out
    }

    /// `|Ψ(x)|²` summed over polarization.
    pub fn density(&self, x: f64) -> f64 {
        let [h, v] = self.wavefunction(x);
        h.norm_sqr() + v.norm_sqr()
    }

    /// ⟨x⟩ of the position marginal (absolute detector coordinates).
    pub fn marginal_mean(&self) -> f64 {
        self.envelope.center + self.pair_sum(|a, b| (a + b) / 2.0) / self.norm_sqr()
    }

    /// Same state with the whole spatial profile displaced by `dx`.
    pub fn translated(&self, dx: f64) -> Self {
        JointState {
            envelope: GaussianEnvelope {
                center: self.envelope.center + dx,
                sigma: self.envelope.sigma,
            },
            terms: self.terms.clone(),
        }
    }

    /// Polarization-resolved pair coefficients `Σ a_i conj(a_j) pol_i[r] conj(pol_j[c])`
    /// weighted by `g(d_i, d_j)`.
    fn reduced_entry(&self, row: usize, col: usize, g: impl Fn(f64, f64) -> f64) -> C64 {
        let mut acc = ZERO;
        for ti in &self.terms {
            for tj in &self.terms {
                let ci = ti.pol.components()[row];
                let cj = tj.pol.components()[col];
                acc += ti.amplitude * ci * (tj.amplitude * cj).conj() * g(ti.shift, tj.shift);
            }
        }
        acc
    }
}

/// A Hermitian operator on the polarization qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable2 {
    m: [[C64; 2]; 2],
}

impl Observable2 {
    pub fn new(m: [[C64; 2]; 2]) -> Result<Self> {
        let deviation = (m[0][1] - m[1][0].conj())
            .norm()
            .max(m[0][0].im.abs())
            .max(m[1][1].im.abs());
        if deviation > KET_TOL {
            return Err(Error::InvalidObservable { deviation });
        }
        Ok(Observable2 { m })
    }

    /// `A = |H⟩⟨H| - |V⟩⟨V|`
    pub fn polarization() -> Self {
        Observable2 {
            m: [
                [C64::new(1.0, 0.0), ZERO],
                [ZERO, C64::new(-1.0, 0.0)],
            ],
        }
    }

    /// `|ψ⟩⟨ψ|`
    pub fn projector(ket: &PolarizationKet) -> Self {
        Observable2 {
            m: DensityMatrix2::pure(ket).matrix(),
        }
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        self.m
    }
}

/// ⟨ψ|A|ψ⟩.
pub fn expectation_value(obs: &Observable2, pol: &PolarizationKet) -> f64 {
    let c = pol.components();
    let mut acc = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            acc += c[i].conj() * obs.m[i][j] * c[j];
        }
    }
    acc.re
}

/// `|ψ⟩ ⊗ φ0`, written as its H and V components, both unshifted.
pub fn initial_state(pol: &PolarizationKet, envelope: &GaussianEnvelope) -> JointState {
    JointState::from_terms(
        *envelope,
        [
            Term {
                amplitude: pol.c_h(),
                pol: PolarizationKet::horizontal(),
                shift: 0.0,
            },
            Term {
                amplitude: pol.c_v(),
                pol: PolarizationKet::vertical(),
                shift: 0.0,
            },
        ],
    )
}

/// One birefringent unit: displaces the H component by `delta` pixels and
/// leaves V untouched.
pub fn apply_weak_unit(state: &JointState, delta: f64) -> JointState {
    let terms = state.terms.iter().flat_map(|t| {
        [
            Term {
                amplitude: t.amplitude * t.pol.c_h(),
                pol: PolarizationKet::horizontal(),
                shift: t.shift + delta,
            },
            Term {
                amplitude: t.amplitude * t.pol.c_v(),
                pol: PolarizationKet::vertical(),
                shift: t.shift,
            },
        ]
    });
    JointState::from_terms(state.envelope, terms)
}

/// Applies `|ψ⟩⟨ψ| ⊗ 1`, renormalizes, and returns the pre-normalization
/// norm² as the survival probability.
pub fn apply_protection(state: &JointState, pol: &PolarizationKet) -> Result<(JointState, f64)> {
    let projected = JointState::from_terms(
        state.envelope,
        state.terms.iter().map(|t| Term {
            amplitude: t.amplitude * pol.inner(&t.pol),
            pol: *pol,
            shift: t.shift,
        }),
    );
    let survival = projected.norm_sqr();
    if !(survival >= MIN_SURVIVAL) {
        return Err(Error::DegenerateProjection { survival });
    }
    Ok((projected.normalized()?, survival))
}

fn check_evolution_args(units: usize, delta: f64) -> Result<()> {
    if units == 0 {
        return Err(Error::param("units", "need at least one weak interaction unit"));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::param("delta", format!("must be > 0, got {delta}")));
    }
    Ok(())
}

/// Protective measurement: `units` alternations of a weak unit and a
/// projection back onto `pol`. Returns the final state and the product of
/// all survival probabilities.
pub fn evolve_pm(
    pol: &PolarizationKet,
    envelope: &GaussianEnvelope,
    units: usize,
    delta: f64,
) -> Result<(JointState, f64)> {
    check_evolution_args(units, delta)?;
    let mut state = initial_state(pol, envelope);
    let mut total = 1.0;
    for _ in 0..units {
        let (next, survival) = apply_protection(&apply_weak_unit(&state, delta), pol)?;
        state = next;
        total *= survival;
    }
    Ok((state, total))
}

/// Projective measurement: `units` weak units with no protection.
pub fn evolve_pj(
    pol: &PolarizationKet,
    envelope: &GaussianEnvelope,
    units: usize,
    delta: f64,
) -> Result<JointState> {
    check_evolution_args(units, delta)?;
    let mut state = initial_state(pol, envelope);
    for _ in 0..units {
        state = apply_weak_unit(&state, delta);
    }
    Ok(state)
}

/// How the polarization state is obtained from the joint state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoherenceMode {
    /// Partial trace over position with exact amplitude overlaps.
    #[default]
    Exact,
    /// Populations from the exact trace; coherence of the undisturbed state
    /// damped by `exp(-g'²/(4σ²))`, with `g' = ⟨x⟩_H - ⟨x⟩_V`.
    Factorized,
}

/// Off-diagonal damping `exp(-g'²/(4σ²))` of the factorized model.
pub fn factorized_suppression(g_prime: f64, sigma: f64) -> f64 {
    (-g_prime * g_prime / (4.0 * sigma * sigma)).exp()
}

/// Off-diagonal damping `exp(-g'²/(8σ²))` from the amplitude overlap.
pub fn overlap_suppression(g_prime: f64, sigma: f64) -> f64 {
    (-g_prime * g_prime / (8.0 * sigma * sigma)).exp()
}

/// Separation `⟨x⟩_H - ⟨x⟩_V` between the H- and V-polarized position
/// marginals. Zero when either component is empty.
pub fn component_separation(state: &JointState) -> f64 {
    let env = state.envelope;
    let overlap = |a: f64, b: f64| env.overlap(a - b);
    let mean_of = |k: usize| {
        let p = state.reduced_entry(k, k, overlap).re;
        let m = state
            .reduced_entry(k, k, |a, b| env.overlap(a - b) * (a + b) / 2.0)
            .re;
        (p, m)
    };
    let (p_h, m_h) = mean_of(0);
    let (p_v, m_v) = mean_of(1);
    if p_h <= MIN_SURVIVAL || p_v <= MIN_SURVIVAL {
        return 0.0;
    }
    m_h / p_h - m_v / p_v
}

/// Reduced polarization density matrix of a normalized joint state.
pub fn reduce_polarization(state: &JointState, mode: DecoherenceMode) -> DensityMatrix2 {
    let env = state.envelope;
    let overlap = |a: f64, b: f64| env.overlap(a - b);
    let norm = state.norm_sqr();
    let mut m = [[ZERO; 2]; 2];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = state.reduced_entry(r, c, overlap) / norm;
        }
    }
    // Hermitize away rounding so validation downstream is exact.
    m[0][0] = C64::new(m[0][0].re, 0.0);
    m[1][1] = C64::new(m[1][1].re, 0.0);
    m[1][0] = m[0][1].conj();

    if mode == DecoherenceMode::Factorized {
        let (p_h, p_v) = (m[0][0].re, m[1][1].re);
        let phase = if m[0][1].norm() > 0.0 {
            m[0][1] / m[0][1].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let damp = factorized_suppression(component_separation(state), env.sigma);
        m[0][1] = phase * (p_h * p_v).sqrt() * damp;
        m[1][0] = m[0][1].conj();
    }
    DensityMatrix2::from_raw(m)
}

//! Independent reference implementations used by the integration tests.
//!
//! `GridState` evolves the joint state as two sampled wavefunctions on a
//! uniform periodic grid. Displacements are done spectrally with an FFT and
//! projections pointwise, so nothing is shared with the Gaussian-sum code in
//! the library beyond the physical definitions.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use protmeas::PolarizationKet;
use rustfft::FftPlanner;

pub const GRID_N: usize = 4096;

pub struct GridState {
    pub x_min: f64,
    pub dx: f64,
    pub h: Vec<C64>,
    pub v: Vec<C64>,
}

impl GridState {
    /// `φ0(x) ∝ exp(-(x-x0)²/(4σ²))`, polarization `pol`, on a grid of
    /// `GRID_N` points spanning `[x_min, x_min + span)`.
    pub fn initial(pol: &PolarizationKet, x0: f64, sigma: f64, x_min: f64, span: f64) -> Self {
        let dx = span / GRID_N as f64;
        let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
        let phi: Vec<f64> = (0..GRID_N)
            .map(|i| {
                let x = x_min + i as f64 * dx;
                norm * (-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp()
            })
            .collect();
        GridState {
            x_min,
            dx,
            h: phi.iter().map(|&p| pol.c_h() * p).collect(),
            v: phi.iter().map(|&p| pol.c_v() * p).collect(),
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// ψ(x) -> ψ(x - d) for the H component, via multiplication by
    /// `exp(-i k d)` in Fourier space.
    pub fn shift_h(&mut self, d: f64) {
        let n = GRID_N;
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_forward(n).process(&mut self.h);
        let span = n as f64 * self.dx;
        for (j, c) in self.h.iter_mut().enumerate() {
            let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            let k = 2.0 * PI * m / span;
            *c *= C64::from_polar(1.0, -k * d);
        }
        planner.plan_fft_inverse(n).process(&mut self.h);
        let scale = 1.0 / n as f64;
        for c in &mut self.h {
            *c *= scale;
        }
    }

    /// Pointwise projection onto `pol`; returns the norm² afterwards,
    /// without renormalizing.
    pub fn project(&mut self, pol: &PolarizationKet) -> f64 {
        for i in 0..GRID_N {
            let amp = pol.c_h().conj() * self.h[i] + pol.c_v().conj() * self.v[i];
            self.h[i] = pol.c_h() * amp;
            self.v[i] = pol.c_v() * amp;
        }
        self.norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.h.iter().chain(&self.v).map(|c| c.norm_sqr()).sum::<f64>() * self.dx
    }

    pub fn normalize(&mut self) {
        let s = self.norm_sqr().sqrt();
        for c in self.h.iter_mut().chain(self.v.iter_mut()) {
            *c /= s;
        }
    }

    pub fn density(&self, i: usize) -> f64 {
        self.h[i].norm_sqr() + self.v[i].norm_sqr()
    }

    pub fn mean_x(&self) -> f64 {
        let total: f64 = (0..GRID_N).map(|i| self.density(i)).sum();
        (0..GRID_N).map(|i| self.x(i) * self.density(i)).sum::<f64>() / total
    }

    /// Reduced polarization matrix `ρ_ab = ∫ ψ_a ψ_b* dx` over the H, V basis.
    pub fn reduced(&self) -> [[C64; 2]; 2] {
        let comps = [&self.h, &self.v];
        let mut m = [[C64::new(0.0, 0.0); 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                m[a][b] = comps[a]
                    .iter()
                    .zip(comps[b])
                    .map(|(p, q)| p * q.conj())
                    .sum::<C64>()
                    * self.dx;
            }
        }
        m
    }
}

/// Grid wide enough for every test geometry: 160 px at ~0.04 px resolution.
pub fn grid_initial(pol: &PolarizationKet, x0: f64, sigma: f64) -> GridState {
    GridState::initial(pol, x0, sigma, x0 - 70.0, 160.0)
}

/// Protected evolution on the grid. Returns the normalized state and the
/// cumulative survival probability.
pub fn grid_pm(pol: &PolarizationKet, x0: f64, sigma: f64, units: usize, delta: f64) -> (GridState, f64) {
    let mut g = grid_initial(pol, x0, sigma);
    let mut survival = 1.0;
    for _ in 0..units {
        g.shift_h(delta);
        survival *= g.project(pol);
        g.normalize();
    }
    (g, survival)
}

/// Unprotected evolution on the grid.
pub fn grid_pj(pol: &PolarizationKet, x0: f64, sigma: f64, units: usize, delta: f64) -> GridState {
    let mut g = grid_initial(pol, x0, sigma);
    for _ in 0..units {
        g.shift_h(delta);
    }
    g
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Standard normal CDF by direct quadrature of the density.
pub fn normal_cdf(z: f64) -> f64 {
    let lo = (-12.0_f64).min(z - 1.0);
    simpson(|t| (-t * t / 2.0).exp() / (2.0 * PI).sqrt(), lo, z, 20_000)
}

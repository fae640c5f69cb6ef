//! Grid-discretized pointer oracle.
//!
//! Pointers are sampled on a uniform periodic grid and shifted spectrally
//! (multiplication by `exp(∓i k g)` in Fourier space). Moments come from
//! plain quadrature sums, with no use of the closed-form Gaussian
//! overlaps. The qubit states entering W's measurement are written down by
//! hand for each frame:
//!
//! * rest frame: Alice has not measured yet, so the lab records `ε±` are
//!   orthogonal and W sees the mixture `½|++⟩⟨++| + ½|−−⟩⟨−−|`;
//! * primed frame with Alice in the x basis: each of her outcomes leaves a
//!   definite `ε±x` record, so the friend emits `|±x⟩|±x⟩` with probability ½.
//!
//! Every branch is a product state, so each pointer factorizes and only 1D
//! integrals are needed.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

pub const GRID_POINTS: usize = 4096;

pub struct PointerGrid {
    pub g: f64,
    pub w: f64,
    /// `∫ φ_a* φ_b` for shifts `a, b ∈ {+g, −g}`.
    pub overlap: [[C64; 2]; 2],
    /// `∫ x φ_a* φ_b`.
    pub position: [[C64; 2]; 2],
}

impl PointerGrid {
    pub fn new(g: f64, w: f64) -> Self {
        let n = GRID_POINTS;
        let half = g.abs() + 12.0 * w;
        let len = 2.0 * half;
        let dx = len / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| -half + i as f64 * dx).collect();
        let norm = (2.0 * PI * w * w).powf(-0.25);
        let phi: Vec<C64> = xs.iter().map(|x| C64::new(norm * (-x * x / (4.0 * w * w)).exp(), 0.0)).collect();

        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut spectrum = phi.clone();
        fwd.process(&mut spectrum);
        let shifted = |shift: f64| -> Vec<C64> {
            let mut s: Vec<C64> = spectrum
                .iter()
                .enumerate()
                .map(|(j, a)| {
                    let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                    let k = 2.0 * PI * m / len;
                    a * C64::from_polar(1.0, -k * shift)
                })
                .collect();
            inv.process(&mut s);
            s.iter().map(|v| v / n as f64).collect()
        };
        let pointers = [shifted(g), shifted(-g)];

        let mut overlap = [[C64::new(0.0, 0.0); 2]; 2];
        let mut position = [[C64::new(0.0, 0.0); 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for (i, x) in xs.iter().enumerate() {
                    let v = pointers[a][i].conj() * pointers[b][i] * dx;
                    overlap[a][b] += v;
                    position[a][b] += v * *x;
                }
            }
        }
        Self { g, w, overlap, position }
    }

    /// `(‖ψ‖², ∫ x |ψ|²)` for `ψ = ⟨+θ|q⟩` applied to a coupled pointer,
    /// where `q = q₊|+⟩ + q₋|−⟩`.
    pub fn postselected(&self, q: [C64; 2], theta: f64) -> (f64, f64) {
        let proj = [C64::new((theta / 2.0).cos(), 0.0), C64::new((theta / 2.0).sin(), 0.0)];
        let v = [proj[0] * q[0], proj[1] * q[1]];
        let mut n = C64::new(0.0, 0.0);
        let mut m = C64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                n += v[a].conj() * self.overlap[a][b] * v[b];
                m += v[a].conj() * self.position[a][b] * v[b];
            }
        }
        (n.re, m.re)
    }

    /// Unnormalized joint moment and success probability for a mixture of
    /// product emissions `q ⊗ q` with weights `p`.
    pub fn mixture(&self, branches: &[(f64, [C64; 2])], theta1: f64, theta2: f64) -> (f64, f64) {
        let (mut moment, mut success) = (0.0, 0.0);
        for (p, q) in branches {
            let (n1, m1) = self.postselected(*q, theta1);
            let (n2, m2) = self.postselected(*q, theta2);
            moment += p * m1 * m2;
            success += p * n1 * n2;
        }
        (moment, success)
    }
}

fn r(v: f64) -> C64 {
    C64::new(v, 0.0)
}

pub fn rest_frame_branches() -> Vec<(f64, [C64; 2])> {
    vec![(0.5, [r(1.0), r(0.0)]), (0.5, [r(0.0), r(1.0)])]
}

pub fn inverted_frame_branches() -> Vec<(f64, [C64; 2])> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![(0.5, [r(h), r(h)]), (0.5, [r(h), r(-h)])]
}

/// Oracle moments `(rest, inverted)` at one angle pair.
pub fn oracle_moments(grid: &PointerGrid, theta1: f64, theta2: f64) -> (f64, f64) {
    let (a, _) = grid.mixture(&rest_frame_branches(), theta1, theta2);
    let (b, _) = grid.mixture(&inverted_frame_branches(), theta1, theta2);
    (a, b)
}

/// Constant `k` in `k·g²·cosθ1·cosθ2` for the inverted frame, read off at
/// `θ1 = θ2 = 0`.
pub fn oracle_k(g: f64, w: f64) -> f64 {
    let grid = PointerGrid::new(g, w);
    oracle_moments(&grid, 0.0, 0.0).1 / (g * g)
}

pub fn angle_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i == n - 1 { PI } else { PI * i as f64 / (n - 1) as f64 }).collect()
}

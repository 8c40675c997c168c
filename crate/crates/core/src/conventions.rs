//! Quadrature and phase conventions shared by every module.
//!
//! * Quadratures are `X = a + a†` and `Y = -i(a - a†)`, so `[X, Y] = 2i` and the
//!   vacuum variance is exactly 1 (the shot-noise unit).
//! * Phase-space vectors are ordered `(X₁, Y₁, X₂, Y₂, …)`.
//! * A phase shift by `θ` maps `a → e^{iθ} a`, i.e. `X → X cosθ − Y sinθ`,
//!   `Y → X sinθ + Y cosθ`. A positive shift rotates a mean `(m, 0)` to `(0, m)`.
//! * The rotated quadrature read by a homodyne detector at LO angle `θ` is
//!   `X(θ) = X cosθ + Y sinθ = a e^{-iθ} + a† e^{iθ}`.
//!
//! A coherent state `|α⟩` therefore has mean `(2 Re α, 2 Im α)` and photon number
//! `(X̄² + Ȳ²)/4`.

use nalgebra::DMatrix;

/// Index of the `X` quadrature of `mode` in the phase-space vector.
#[inline]
pub const fn x_index(mode: usize) -> usize {
    2 * mode
}

/// Index of the `Y` quadrature of `mode` in the phase-space vector.
#[inline]
pub const fn y_index(mode: usize) -> usize {
    2 * mode + 1
}

/// Variance of a vacuum quadrature.
pub const VACUUM_VARIANCE: f64 = 1.0;

/// Standard symplectic form `Ω = ⊕ [[0, 1], [-1, 0]]` for `n_modes` modes, with
/// `[R_j, R_k] = 2i Ω_jk`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for m in 0..n_modes {
        omega[(x_index(m), y_index(m))] = 1.0;
        omega[(y_index(m), x_index(m))] = -1.0;
    }
    omega
}

/// Displacement of a weak tone of relative `depth` on a probe carrying
/// `photon_number` photons, returned as `(dx, dy)` for quadrature angle `theta`.
///
/// An amplitude modulation of depth `ε` shifts `X` by `2√I·ε`; a phase
/// modulation of depth `δ` shifts `Y` by `2√I·δ`.
pub fn tone_displacement(photon_number: f64, depth: f64, theta: f64) -> (f64, f64) {
    let amp = 2.0 * photon_number.sqrt() * depth;
    (amp * theta.cos(), amp * theta.sin())
}

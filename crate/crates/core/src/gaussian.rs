//! Multimode Gaussian states and the symplectic maps that act on them.
//!
//! A [`GaussianState`] is a mean phase-space vector plus a covariance matrix in
//! the conventions of [`crate::conventions`]. Every operation is pure: it
//! returns a new state and leaves its input untouched.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::conventions::{symplectic_form, x_index, y_index};
use crate::error::{invalid, Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Parameters of a non-degenerate parametric amplifier (two-mode squeezer).
///
/// Only the amplitude gain `G` is stored; the conjugate gain `g = √(G² − 1)` is
/// always derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpaParams {
    gain: f64,
    pub pump_phase: f64,
}

impl OpaParams {
    pub fn new(gain: f64, pump_phase: f64) -> Result<Self> {
        if !gain.is_finite() || gain < 1.0 {
            return Err(invalid(format!("OPA gain must be finite and >= 1, got {gain}")));
        }
        if !pump_phase.is_finite() {
            return Err(invalid("OPA pump phase must be finite"));
        }
        Ok(Self { gain, pump_phase })
    }

    /// Amplitude gain `G`.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Conjugate gain `g = √(G² − 1)`.
    pub fn conjugate_gain(&self) -> f64 {
        (self.gain * self.gain - 1.0).max(0.0).sqrt()
    }

    pub fn with_pump_phase(self, pump_phase: f64) -> Self {
        Self { pump_phase, ..self }
    }
}

/// A quadrature angle normalized to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct QuadratureAngle(f64);

impl QuadratureAngle {
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        Self(t)
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

impl From<f64> for QuadratureAngle {
    fn from(theta: f64) -> Self {
        Self::new(theta)
    }
}

impl From<QuadratureAngle> for f64 {
    fn from(angle: QuadratureAngle) -> f64 {
        angle.0
    }
}

/// Symplectic matrix of the two-mode squeezer `a' = G a + g e^{iφ} b†`,
/// `b' = G b + g e^{iφ} a†`, acting on `(X_a, Y_a, X_b, Y_b)`.
pub fn two_mode_squeezer_matrix(opa: &OpaParams) -> Matrix4<f64> {
    let big = opa.gain();
    let small = opa.conjugate_gain();
    let (s, c) = opa.pump_phase.sin_cos();
    Matrix4::new(
        big, 0.0, small * c, small * s, //
        0.0, big, small * s, -small * c, //
        small * c, small * s, big, 0.0, //
        small * s, -small * c, 0.0, big,
    )
}

/// Symplectic matrix of the beam splitter `a' = t a + r e^{iφ} b`,
/// `b' = −r e^{−iφ} a + t b` with `t = √T`, `r = √(1 − T)`.
pub fn beam_splitter_matrix(transmissivity: f64, phase: f64) -> Matrix4<f64> {
    let t = transmissivity.sqrt();
    let r = (1.0 - transmissivity).max(0.0).sqrt();
    let (s, c) = phase.sin_cos();
    Matrix4::new(
        t, 0.0, r * c, -r * s, //
        0.0, t, r * s, r * c, //
        -r * c, -r * s, t, 0.0, //
        r * s, -r * c, 0.0, t,
    )
}

/// Rotation `a → e^{iθ} a` of a single mode's `(X, Y)` pair.
pub fn phase_shift_matrix(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Mean vector and covariance matrix of an `n`-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    n_modes: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// The `n_modes`-mode vacuum: zero mean, identity covariance.
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid("a Gaussian state needs at least one mode"));
        }
        Ok(Self {
            n_modes,
            mean: DVector::zeros(2 * n_modes),
            cov: DMatrix::identity(2 * n_modes, 2 * n_modes),
        })
    }

    /// Builds a state from raw moments, checking dimensions and symmetry.
    ///
    /// Positivity and the uncertainty relation are checked lazily by
    /// [`GaussianState::symplectic_eigenvalues`].
    pub fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidState(format!(
                "mean vector length {dim} is not a positive even number"
            )));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::InvalidState(format!(
                "covariance is {}x{}, expected {dim}x{dim}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidState(format!(
                "covariance asymmetric by {asym:e}"
            )));
        }
        Ok(Self {
            n_modes: dim / 2,
            mean,
            cov,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return Err(invalid(format!(
                "mode {mode} out of range for {}-mode state",
                self.n_modes
            )));
        }
        Ok(())
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        self.check_mode(a)?;
        self.check_mode(b)?;
        if a == b {
            return Err(invalid(format!("two-mode operation needs distinct modes, got {a} twice")));
        }
        Ok(())
    }

    /// Adds `(dx, dy)` to the mean of `mode`.
    pub fn displace(&self, mode: usize, dx: f64, dy: f64) -> Result<Self> {
        self.check_mode(mode)?;
        let mut out = self.clone();
        out.mean[x_index(mode)] += dx;
        out.mean[y_index(mode)] += dy;
        Ok(out)
    }

    /// Applies `S` (acting on the listed modes' quadratures) to mean and covariance.
    fn apply_block<const D: usize>(
        &self,
        modes: &[usize],
        block: &nalgebra::SMatrix<f64, D, D>,
    ) -> Self {
        let full = self.embed(modes, block);
        Self {
            n_modes: self.n_modes,
            mean: &full * &self.mean,
            cov: &full * &self.cov * full.transpose(),
        }
    }

    fn embed<const D: usize>(
        &self,
        modes: &[usize],
        block: &nalgebra::SMatrix<f64, D, D>,
    ) -> DMatrix<f64> {
        let dim = 2 * self.n_modes;
        let idx: Vec<usize> = modes
            .iter()
            .flat_map(|&m| [x_index(m), y_index(m)])
            .collect();
        let mut full = DMatrix::identity(dim, dim);
        for (bi, &fi) in idx.iter().enumerate() {
            for (bj, &fj) in idx.iter().enumerate() {
                full[(fi, fj)] = block[(bi, bj)];
            }
        }
        full
    }

    pub fn apply_two_mode_squeezer(&self, mode_a: usize, mode_b: usize, opa: &OpaParams) -> Result<Self> {
        self.check_pair(mode_a, mode_b)?;
        Ok(self.apply_block(&[mode_a, mode_b], &two_mode_squeezer_matrix(opa)))
    }

    pub fn apply_beam_splitter(
        &self,
        mode_a: usize,
        mode_b: usize,
        transmissivity: f64,
        phase: f64,
    ) -> Result<Self> {
        self.check_pair(mode_a, mode_b)?;
        if !(0.0..=1.0).contains(&transmissivity) {
            return Err(invalid(format!(
                "transmissivity must lie in [0, 1], got {transmissivity}"
            )));
        }
        Ok(self.apply_block(&[mode_a, mode_b], &beam_splitter_matrix(transmissivity, phase)))
    }

    pub fn apply_phase_shift(&self, mode: usize, theta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        Ok(self.apply_block(&[mode], &phase_shift_matrix(theta)))
    }

    /// Pure-loss channel: mixes `mode` with vacuum on a beam splitter of
    /// transmissivity `eta`.
    pub fn apply_loss(&self, mode: usize, eta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(invalid(format!("loss efficiency must lie in [0, 1], got {eta}")));
        }
        let root = eta.sqrt();
        let (ix, iy) = (x_index(mode), y_index(mode));
        let mut out = self.clone();
        out.mean[ix] *= root;
        out.mean[iy] *= root;
        for i in [ix, iy] {
            for j in 0..2 * self.n_modes {
                out.cov[(i, j)] *= root;
                out.cov[(j, i)] *= root;
            }
        }
        out.cov[(ix, ix)] += 1.0 - eta;
        out.cov[(iy, iy)] += 1.0 - eta;
        Ok(out)
    }

    /// Mean and variance of `X(θ) = X cosθ + Y sinθ` on `mode` after a
    /// detection loss `eta_det`. Variances are in shot-noise units.
    pub fn homodyne_stats(&self, mode: usize, lo_phase: QuadratureAngle, eta_det: f64) -> Result<(f64, f64)> {
        let detected = self.apply_loss(mode, eta_det)?;
        let (s, c) = lo_phase.radians().sin_cos();
        let (ix, iy) = (x_index(mode), y_index(mode));
        let mean = c * detected.mean[ix] + s * detected.mean[iy];
        let var = c * c * detected.cov[(ix, ix)]
            + 2.0 * c * s * detected.cov[(ix, iy)]
            + s * s * detected.cov[(iy, iy)];
        Ok((mean, var))
    }

    /// `(X̄² + Ȳ²)/4 + (Var X + Var Y − 2)/4`.
    pub fn mean_photon_number(&self, mode: usize) -> Result<f64> {
        self.check_mode(mode)?;
        let (ix, iy) = (x_index(mode), y_index(mode));
        let coherent = (self.mean[ix].powi(2) + self.mean[iy].powi(2)) / 4.0;
        let noise = (self.cov[(ix, ix)] + self.cov[(iy, iy)] - 2.0) / 4.0;
        Ok((coherent + noise).max(0.0))
    }

    /// Symplectic spectrum of the covariance, one value per mode, nonincreasing.
    ///
    /// Computed as the square roots of the eigenvalues of `−(V^{1/2} Ω V^{1/2})²`,
    /// which come in degenerate pairs.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = SymmetricEigen::new(self.cov.clone());
        let min = eig.eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::InvalidState(format!(
                "covariance is not positive definite (smallest eigenvalue {min:e})"
            )));
        }
        let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let root = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
        let m = &root * symplectic_form(self.n_modes) * &root;
        let gram = m.transpose() * &m;
        let gram = (&gram + gram.transpose()) * 0.5;
        let mut squares: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().copied().collect();
        squares.sort_by(|a, b| b.total_cmp(a));
        Ok(squares
            .chunks(2)
            .map(|pair| (0.5 * (pair[0] + pair[1])).max(0.0).sqrt())
            .collect())
    }

    /// Reduced state of the listed modes (partial trace).
    pub fn reduce(&self, modes: &[usize]) -> Result<Self> {
        for &m in modes {
            self.check_mode(m)?;
        }
        if modes.is_empty() {
            return Err(invalid("cannot reduce to zero modes"));
        }
        let idx: Vec<usize> = modes
            .iter()
            .flat_map(|&m| [x_index(m), y_index(m)])
            .collect();
        let mean = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.cov[(idx[i], idx[j])]);
        Ok(Self {
            n_modes: modes.len(),
            mean,
            cov,
        })
    }

    /// Zeroes the mean, keeping only the noise.
    pub fn without_mean(&self) -> Self {
        Self {
            mean: DVector::zeros(self.mean.len()),
            ..self.clone()
        }
    }
}

/// One optical element of a linear Gaussian circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "element", rename_all = "snake_case")]
pub enum Element {
    Displace { mode: usize, dx: f64, dy: f64 },
    Squeezer { mode_a: usize, mode_b: usize, opa: OpaParams },
    BeamSplitter { mode_a: usize, mode_b: usize, transmissivity: f64, phase: f64 },
    PhaseShift { mode: usize, theta: f64 },
    Loss { mode: usize, eta: f64 },
}

impl Element {
    pub fn apply(&self, state: &GaussianState) -> Result<GaussianState> {
        match *self {
            Element::Displace { mode, dx, dy } => state.displace(mode, dx, dy),
            Element::Squeezer { mode_a, mode_b, ref opa } => state.apply_two_mode_squeezer(mode_a, mode_b, opa),
            Element::BeamSplitter { mode_a, mode_b, transmissivity, phase } => {
                state.apply_beam_splitter(mode_a, mode_b, transmissivity, phase)
            }
            Element::PhaseShift { mode, theta } => state.apply_phase_shift(mode, theta),
            Element::Loss { mode, eta } => state.apply_loss(mode, eta),
        }
    }
}

/// An ordered list of elements on a fixed number of modes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Circuit {
    pub n_modes: usize,
    pub elements: Vec<Element>,
}

impl Circuit {
    pub fn new(n_modes: usize) -> Self {
        Self {
            n_modes,
            elements: Vec::new(),
        }
    }

    pub fn push(&mut self, element: Element) -> &mut Self {
        self.elements.push(element);
        self
    }

    pub fn apply(&self, input: &GaussianState) -> Result<GaussianState> {
        if input.n_modes() != self.n_modes {
            return Err(invalid(format!(
                "circuit acts on {} modes, state has {}",
                self.n_modes,
                input.n_modes()
            )));
        }
        self.elements
            .iter()
            .try_fold(input.clone(), |state, el| el.apply(&state))
    }

    /// Output of the circuit fed with vacuum on every mode.
    pub fn run_from_vacuum(&self) -> Result<GaussianState> {
        self.apply(&GaussianState::vacuum(self.n_modes)?)
    }

    /// The same circuit with every displacement removed.
    pub fn noise_only(&self) -> Self {
        Self {
            n_modes: self.n_modes,
            elements: self
                .elements
                .iter()
                .filter(|e| !matches!(e, Element::Displace { .. }))
                .copied()
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn opa(g: f64, phase: f64) -> OpaParams {
        OpaParams::new(g, phase).unwrap()
    }

    #[test]
    fn vacuum_shapes() {
        let v = GaussianState::vacuum(3).unwrap();
        assert_eq!(v.mean().len(), 6);
        assert_eq!(v.cov(), &DMatrix::<f64>::identity(6, 6));
        assert!(GaussianState::vacuum(0).is_err());
        for th in [0.0, 1.0, 2.5, 4.0] {
            assert_eq!(v.homodyne_stats(0, th.into(), 1.0).unwrap(), (0.0, 1.0));
        }
    }

    #[test]
    fn displacement_makes_coherent_state() {
        let s = GaussianState::vacuum(1).unwrap().displace(0, 6.0, 0.0).unwrap();
        assert_eq!(s.mean().as_slice(), &[6.0, 0.0]);
        assert_eq!(s.cov(), &DMatrix::<f64>::identity(2, 2));
        assert_abs_diff_eq!(s.mean_photon_number(0).unwrap(), 9.0, epsilon = 1e-12);
        assert_eq!(s.displace(0, 0.0, 0.0).unwrap(), s);
        assert!(s.displace(1, 1.0, 0.0).is_err());
        let (m0, v0) = s.homodyne_stats(0, 0.0.into(), 1.0).unwrap();
        let (m1, v1) = s.homodyne_stats(0, FRAC_PI_2.into(), 1.0).unwrap();
        assert_abs_diff_eq!(m0, 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m1, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tone_displacement_scale() {
        let (dx, dy) = crate::conventions::tone_displacement(1e4, 0.01, 0.0);
        assert_abs_diff_eq!(dx, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dy, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn unit_gain_squeezer_is_identity() {
        let s = GaussianState::vacuum(2).unwrap().displace(0, 1.5, -0.3).unwrap();
        let out = s.apply_two_mode_squeezer(0, 1, &opa(1.0, 0.7)).unwrap();
        assert_abs_diff_eq!((&out.cov - &s.cov).amax(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((&out.mean - &s.mean).amax(), 0.0, epsilon = 1e-15);
        assert!(s.apply_two_mode_squeezer(1, 1, &opa(2.0, 0.0)).is_err());
        assert!(OpaParams::new(0.5, 0.0).is_err());
    }

    #[test]
    fn two_mode_squeezed_vacuum_moments() {
        let s = GaussianState::vacuum(2)
            .unwrap()
            .apply_two_mode_squeezer(0, 1, &opa(2.0, 0.0))
            .unwrap();
        assert_abs_diff_eq!(s.cov[(0, 0)], 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.cov[(1, 1)], 7.0, epsilon = 1e-12);
        // Var(X_a - X_b) = V_aa + V_bb - 2 V_ab
        let diff = s.cov[(0, 0)] + s.cov[(2, 2)] - 2.0 * s.cov[(0, 2)];
        assert_abs_diff_eq!(diff, 2.0 * (2.0 - 3f64.sqrt()).powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(diff, 0.143594, epsilon = 1e-6);
        assert_abs_diff_eq!(s.mean_photon_number(0).unwrap(), 3.0, epsilon = 1e-12);
        for th in [0.0, 0.4, 1.3, 3.0] {
            let (m, v) = s.homodyne_stats(0, th.into(), 1.0).unwrap();
            assert_abs_diff_eq!(m, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v, 7.0, epsilon = 1e-12);
        }
        let nu = s.symplectic_eigenvalues().unwrap();
        assert_eq!(nu.len(), 2);
        for v in nu {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn squeezer_amplifies_seed_mean() {
        let amp = 2.0 * 100.0;
        let s = GaussianState::vacuum(2)
            .unwrap()
            .displace(0, amp, 0.0)
            .unwrap()
            .apply_two_mode_squeezer(0, 1, &opa(2.0, 0.0))
            .unwrap();
        assert_abs_diff_eq!(s.mean[0], 2.0 * amp, epsilon = 1e-9);
        assert_abs_diff_eq!(s.mean[2], 3f64.sqrt() * amp, epsilon = 1e-9);
    }

    #[test]
    fn beam_splitter_examples() {
        let coh = GaussianState::vacuum(2).unwrap().displace(0, 4.0, 2.0).unwrap();
        let id = coh.apply_beam_splitter(0, 1, 1.0, 0.3).unwrap();
        assert_abs_diff_eq!((&id.mean - &coh.mean).amax(), 0.0, epsilon = 1e-15);
        let half = coh.apply_beam_splitter(0, 1, 0.5, 0.0).unwrap();
        let r = 0.5f64.sqrt();
        assert_abs_diff_eq!(half.mean[0], 4.0 * r, epsilon = 1e-12);
        assert_abs_diff_eq!(half.mean[1], 2.0 * r, epsilon = 1e-12);
        assert_abs_diff_eq!(half.mean[2].abs(), 4.0 * r, epsilon = 1e-12);
        assert_abs_diff_eq!((half.cov() - DMatrix::<f64>::identity(4, 4)).amax(), 0.0, epsilon = 1e-12);
        assert!(coh.apply_beam_splitter(0, 1, 1.2, 0.0).is_err());
        assert!(coh.apply_beam_splitter(0, 0, 0.5, 0.0).is_err());

        // Var 7 mixed with vacuum.
        let hot = GaussianState::vacuum(3)
            .unwrap()
            .apply_two_mode_squeezer(0, 1, &opa(2.0, 0.0))
            .unwrap()
            .apply_beam_splitter(0, 2, 0.5, 0.0)
            .unwrap();
        assert_abs_diff_eq!(hot.cov[(0, 0)], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hot.cov[(4, 4)], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn phase_shift_examples() {
        let s = GaussianState::vacuum(1).unwrap().displace(0, 3.0, 0.0).unwrap();
        assert_eq!(s.apply_phase_shift(0, 0.0).unwrap(), s);
        let q = s.apply_phase_shift(0, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(q.mean[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.mean[1], 3.0, epsilon = 1e-12);
        let full = s.apply_phase_shift(0, 2.0 * PI).unwrap();
        assert_abs_diff_eq!((&full.mean - &s.mean).amax(), 0.0, epsilon = 1e-12);
        assert!(s.apply_phase_shift(2, 1.0).is_err());
    }

    #[test]
    fn loss_examples() {
        let tmsv = GaussianState::vacuum(2)
            .unwrap()
            .apply_two_mode_squeezer(0, 1, &opa(2.0, 0.0))
            .unwrap()
            .displace(0, 5.0, 1.0)
            .unwrap();
        assert_eq!(tmsv.apply_loss(0, 1.0).unwrap(), tmsv);
        let dead = tmsv.apply_loss(0, 0.0).unwrap();
        assert_abs_diff_eq!(dead.mean[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dead.cov[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dead.cov[(0, 2)], 0.0, epsilon = 1e-15);
        let lossy = tmsv.apply_loss(0, 0.72).unwrap();
        assert_abs_diff_eq!(lossy.cov[(0, 0)], 5.32, epsilon = 1e-12);
        assert_abs_diff_eq!(lossy.cov[(0, 2)], tmsv.cov[(0, 2)] * 0.72f64.sqrt(), epsilon = 1e-12);
        assert!(tmsv.apply_loss(0, -0.1).is_err());
        assert!(tmsv.apply_loss(0, 1.5).is_err());

        let arm = lossy.reduce(&[0]).unwrap();
        let nu = arm.symplectic_eigenvalues().unwrap();
        let closed = (arm.cov[(0, 0)] * arm.cov[(1, 1)]).sqrt();
        assert_abs_diff_eq!(nu[0], closed, epsilon = 1e-9);
        assert_abs_diff_eq!(nu[0], 5.32, epsilon = 1e-9);
    }

    #[test]
    fn symplectic_eigenvalues_vacuum_and_errors() {
        for n in 1..5 {
            let nu = GaussianState::vacuum(n).unwrap().symplectic_eigenvalues().unwrap();
            assert_eq!(nu.len(), n);
            assert!(nu.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
        let bad = GaussianState::from_moments(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert!(matches!(bad.symplectic_eigenvalues(), Err(Error::InvalidState(_))));
        assert!(GaussianState::from_moments(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0])).is_err());
    }

    #[test]
    fn quadrature_angle_normalizes() {
        assert_abs_diff_eq!(QuadratureAngle::new(-FRAC_PI_2).radians(), 1.5 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(QuadratureAngle::new(2.0 * PI).radians(), 0.0, epsilon = 1e-12);
        assert!(QuadratureAngle::new(-1e-18).radians() < 2.0 * PI);
    }
}

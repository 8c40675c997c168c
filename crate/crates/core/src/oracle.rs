//! Operator-level ground truth.
//!
//! [`build_transfer`] propagates annihilation-operator coefficients
//! (Bogoliubov algebra over complex numbers) through a circuit, independently
//! of the real covariance engine in [`crate::gaussian`]. Each output mode is
//! written as `a_out = Σ_k u_k a_k + v_k a_k†` over all inputs, including the
//! fresh vacuum introduced by every loss channel.
//!
//! [`closed_form_snr`] evaluates the textbook SNR formulas for the three
//! measurement schemes.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::gaussian::{Circuit, Element, QuadratureAngle};
use crate::schemes::{SchemeInstance, SchemeKind};

/// Origin of one input column of a [`TransferMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InputLabel {
    /// One of the circuit's own input modes.
    Mode(usize),
    /// Vacuum injected by the loss element at `element` acting on `mode`.
    LossVacuum { element: usize, mode: usize },
}

/// Coefficients of one output annihilation operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorRow {
    /// Coefficients of the input annihilation operators.
    pub u: Vec<Complex64>,
    /// Coefficients of the input creation operators.
    pub v: Vec<Complex64>,
}

impl OperatorRow {
    fn unit(n_inputs: usize, k: usize) -> Self {
        let mut u = vec![Complex64::new(0.0, 0.0); n_inputs];
        u[k] = Complex64::new(1.0, 0.0);
        Self {
            u,
            v: vec![Complex64::new(0.0, 0.0); n_inputs],
        }
    }

    fn scaled(&self, c: Complex64) -> Self {
        Self {
            u: self.u.iter().map(|x| x * c).collect(),
            v: self.v.iter().map(|x| x * c).collect(),
        }
    }

    /// Row of the hermitian conjugate `a_out†`, expressed in the same basis.
    pub fn dagger(&self) -> Self {
        Self {
            u: self.v.iter().map(|x| x.conj()).collect(),
            v: self.u.iter().map(|x| x.conj()).collect(),
        }
    }

    fn add(&self, other: &Self) -> Self {
        Self {
            u: self.u.iter().zip(&other.u).map(|(a, b)| a + b).collect(),
            v: self.v.iter().zip(&other.v).map(|(a, b)| a + b).collect(),
        }
    }

    fn push_column(&mut self) {
        self.u.push(Complex64::new(0.0, 0.0));
        self.v.push(Complex64::new(0.0, 0.0));
    }

    /// `Σ|u_k|² − Σ|v_k|²`, which equals 1 for a bosonic mode.
    pub fn commutator(&self) -> f64 {
        self.u.iter().map(|c| c.norm_sqr()).sum::<f64>() - self.v.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

/// Linear map from all input operators to every output mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMap {
    pub input_labels: Vec<InputLabel>,
    pub rows: Vec<OperatorRow>,
}

impl TransferMap {
    pub fn n_outputs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_labels.len()
    }

    /// Dense coefficient matrix with rows `(a₁, a₁†, a₂, a₂†, …)` over columns
    /// `(a₁, a₁†, …)` of the inputs. Odd rows are the conjugates of even rows.
    pub fn coeffs(&self) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(2 * self.rows.len());
        for row in &self.rows {
            for r in [row.clone(), row.dagger()] {
                out.push(r.u.iter().zip(&r.v).flat_map(|(u, v)| [*u, *v]).collect());
            }
        }
        out
    }
}

/// Composes the operator map of a circuit containing only squeezers, beam
/// splitters, phase shifts and losses.
pub fn build_transfer(circuit: &Circuit) -> Result<TransferMap> {
    let n = circuit.n_modes;
    let mut labels: Vec<InputLabel> = (0..n).map(InputLabel::Mode).collect();
    let mut rows: Vec<OperatorRow> = (0..n).map(|k| OperatorRow::unit(n, k)).collect();
    let check = |m: usize| {
        if m >= n {
            Err(invalid(format!("mode {m} out of range for {n}-mode circuit")))
        } else {
            Ok(())
        }
    };

    for (idx, element) in circuit.elements.iter().enumerate() {
        match *element {
            Element::Displace { .. } => {
                return Err(Error::UnsupportedElement(format!(
                    "element {idx} is a displacement; the operator oracle handles noise circuits only"
                )))
            }
            Element::Squeezer { mode_a, mode_b, opa } => {
                check(mode_a)?;
                check(mode_b)?;
                if mode_a == mode_b {
                    return Err(invalid("squeezer needs distinct modes"));
                }
                let big = Complex64::new(opa.gain(), 0.0);
                let small = Complex64::from_polar(opa.conjugate_gain(), opa.pump_phase);
                let a = rows[mode_a].clone();
                let b = rows[mode_b].clone();
                rows[mode_a] = a.scaled(big).add(&b.dagger().scaled(small));
                rows[mode_b] = b.scaled(big).add(&a.dagger().scaled(small));
            }
            Element::BeamSplitter { mode_a, mode_b, transmissivity, phase } => {
                check(mode_a)?;
                check(mode_b)?;
                if mode_a == mode_b {
                    return Err(invalid("beam splitter needs distinct modes"));
                }
                if !(0.0..=1.0).contains(&transmissivity) {
                    return Err(invalid("transmissivity outside [0, 1]"));
                }
                let t = Complex64::new(transmissivity.sqrt(), 0.0);
                let r = (1.0 - transmissivity).sqrt();
                let a = rows[mode_a].clone();
                let b = rows[mode_b].clone();
                rows[mode_a] = a.scaled(t).add(&b.scaled(Complex64::from_polar(r, phase)));
                rows[mode_b] = b.scaled(t).add(&a.scaled(-Complex64::from_polar(r, -phase)));
            }
            Element::PhaseShift { mode, theta } => {
                check(mode)?;
                rows[mode] = rows[mode].scaled(Complex64::from_polar(1.0, theta));
            }
            Element::Loss { mode, eta } => {
                check(mode)?;
                if !(0.0..=1.0).contains(&eta) {
                    return Err(invalid("loss efficiency outside [0, 1]"));
                }
                labels.push(InputLabel::LossVacuum { element: idx, mode });
                for row in rows.iter_mut() {
                    row.push_column();
                }
                let col = labels.len() - 1;
                let row = &mut rows[mode];
                for c in row.u.iter_mut().chain(row.v.iter_mut()) {
                    *c *= eta.sqrt();
                }
                row.u[col] = Complex64::new((1.0 - eta).sqrt(), 0.0);
            }
        }
    }
    Ok(TransferMap {
        input_labels: labels,
        rows,
    })
}

/// Transfer map of a scheme's noise circuit, detection losses included.
pub fn build_scheme_transfer(scheme: &SchemeInstance) -> Result<TransferMap> {
    build_transfer(&scheme.noise_circuit(true)?)
}

/// Variance of `X(θ) = a e^{−iθ} + a† e^{iθ}` at output mode `port`, all
/// inputs in vacuum. Writing `X(θ) = Σ_k c_k a_k + h.c.` with
/// `c_k = u_k e^{−iθ} + v_k* e^{iθ}`, the vacuum variance is `Σ_k |c_k|²`.
pub fn oracle_homodyne_variance(map: &TransferMap, port: usize, theta: QuadratureAngle) -> Result<f64> {
    let row = map
        .rows
        .get(port)
        .ok_or_else(|| invalid(format!("port {port} out of range for {} outputs", map.n_outputs())))?;
    let lo = Complex64::from_polar(1.0, -theta.radians());
    Ok(row
        .u
        .iter()
        .zip(&row.v)
        .map(|(u, v)| (u * lo + v.conj() * lo.conj()).norm_sqr())
        .sum())
}

/// Parameters of the closed-form SNR formulas. Only the fields relevant to
/// `scheme_kind` are read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormInput {
    pub scheme_kind: SchemeKind,
    pub i_ps: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub g1: f64,
    pub g2: f64,
    pub g: f64,
}

/// Closed-form SNR of the amplitude (`X`) and phase (`Y`) readouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormSnr {
    pub x: f64,
    pub y: f64,
    /// True when the formula holds only asymptotically (SUI, `g₂ ≫ g₁`).
    pub asymptotic: bool,
}

fn conj_gain(big: f64) -> f64 {
    (big * big - 1.0).max(0.0).sqrt()
}

/// * BS: `(2 I ε², 2 I δ²)`
/// * SUI (for `g₂ ≫ g₁`): `2 (G₁ + g₁)² I ε²` and the same with `δ`
/// * AMP: `(4 G² I ε² / (G² + g²), 4 g² I δ² / (G² + g²))`
pub fn closed_form_snr(input: &ClosedFormInput) -> ClosedFormSnr {
    let i = input.i_ps;
    let (e2, d2) = (input.epsilon.powi(2), input.delta.powi(2));
    match input.scheme_kind {
        SchemeKind::Bs => ClosedFormSnr {
            x: 2.0 * i * e2,
            y: 2.0 * i * d2,
            asymptotic: false,
        },
        SchemeKind::Sui => {
            let boost = 2.0 * (input.g1 + conj_gain(input.g1)).powi(2);
            ClosedFormSnr {
                x: boost * i * e2,
                y: boost * i * d2,
                asymptotic: true,
            }
        }
        SchemeKind::Amp => {
            let big2 = input.g * input.g;
            let small2 = big2 - 1.0;
            ClosedFormSnr {
                x: 4.0 * big2 * i * e2 / (big2 + small2),
                y: 4.0 * small2 * i * d2 / (big2 + small2),
                asymptotic: false,
            }
        }
    }
}

/// The two enhancement factors quoted for the SUI over the classical schemes:
/// the formula quotient `(G₁ + g₁)²` and `G₁² + g₁²`.
pub fn reference_enhancements(g1: f64) -> (f64, f64) {
    let small = conj_gain(g1);
    ((g1 + small).powi(2), g1 * g1 + small * small)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::OpaParams;
    use approx::assert_abs_diff_eq;

    fn single_opa(g: f64) -> Circuit {
        let mut c = Circuit::new(2);
        c.push(Element::Squeezer {
            mode_a: 0,
            mode_b: 1,
            opa: OpaParams::new(g, 0.0).unwrap(),
        });
        c
    }

    #[test]
    fn single_opa_coefficients() {
        let map = build_transfer(&single_opa(2.0)).unwrap();
        let row = &map.rows[0];
        assert_abs_diff_eq!(row.u[0].re, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(row.v[1].re, 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(row.u[1].norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(row.v[0].norm(), 0.0, epsilon = 1e-12);
        for row in &map.rows {
            assert_abs_diff_eq!(row.commutator(), 1.0, epsilon = 1e-10);
        }
        for k in 0..8 {
            let th = QuadratureAngle::new(k as f64 * 0.7);
            assert_abs_diff_eq!(oracle_homodyne_variance(&map, 0, th).unwrap(), 7.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_and_loss() {
        let map = build_transfer(&Circuit::new(3)).unwrap();
        for (m, row) in map.rows.iter().enumerate() {
            for k in 0..3 {
                let expect = if k == m { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(row.u[k].re, expect);
                assert_abs_diff_eq!(row.v[k].norm(), 0.0);
            }
            assert_abs_diff_eq!(oracle_homodyne_variance(&map, m, 1.1.into()).unwrap(), 1.0, epsilon = 1e-15);
        }
        let mut c = Circuit::new(1);
        c.push(Element::Loss { mode: 0, eta: 0.3 });
        let map = build_transfer(&c).unwrap();
        assert_eq!(map.input_labels[1], InputLabel::LossVacuum { element: 0, mode: 0 });
        assert_abs_diff_eq!(map.rows[0].u[0].re, 0.3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(map.rows[0].u[1].re, 0.7f64.sqrt(), epsilon = 1e-15);
        assert!(oracle_homodyne_variance(&map, 1, 0.0.into()).is_err());
    }

    #[test]
    fn displacement_is_rejected() {
        let mut c = Circuit::new(1);
        c.push(Element::Displace { mode: 0, dx: 1.0, dy: 0.0 });
        assert!(matches!(build_transfer(&c), Err(Error::UnsupportedElement(_))));
    }

    #[test]
    fn coeffs_rows_are_conjugate_pairs() {
        let mut c = single_opa(1.7);
        c.push(Element::BeamSplitter { mode_a: 0, mode_b: 1, transmissivity: 0.3, phase: 0.4 });
        c.push(Element::PhaseShift { mode: 1, theta: 0.9 });
        let map = build_transfer(&c).unwrap();
        let m = map.coeffs();
        for pair in m.chunks(2) {
            for k in 0..map.n_inputs() {
                assert_abs_diff_eq!((pair[1][2 * k] - pair[0][2 * k + 1].conj()).norm(), 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!((pair[1][2 * k + 1] - pair[0][2 * k].conj()).norm(), 0.0, epsilon = 1e-15);
            }
        }
    }

    fn input(kind: SchemeKind) -> ClosedFormInput {
        ClosedFormInput {
            scheme_kind: kind,
            i_ps: 1e4,
            epsilon: 0.01,
            delta: 0.01,
            g1: 2.0,
            g2: 9.0,
            g: 9.0,
        }
    }

    #[test]
    fn closed_form_examples() {
        let bs = closed_form_snr(&input(SchemeKind::Bs));
        assert_abs_diff_eq!(bs.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bs.y, 2.0, epsilon = 1e-12);
        let sui = closed_form_snr(&input(SchemeKind::Sui));
        assert_abs_diff_eq!(sui.x, 2.0 * (2.0 + 3f64.sqrt()).powi(2), epsilon = 1e-9);
        assert_abs_diff_eq!(sui.x, 27.856, epsilon = 1e-3);
        assert!(sui.asymptotic);
        let amp = closed_form_snr(&input(SchemeKind::Amp));
        assert_abs_diff_eq!(amp.x, 4.0 * 81.0 / 161.0, epsilon = 1e-12);
        assert_abs_diff_eq!(amp.y, 4.0 * 80.0 / 161.0, epsilon = 1e-12);
        assert_abs_diff_eq!(amp.x, 2.0124, epsilon = 1e-4);
        assert_abs_diff_eq!(amp.y, 1.9876, epsilon = 1e-4);
    }

    #[test]
    fn amplifier_tends_to_beam_splitter() {
        let bs = closed_form_snr(&input(SchemeKind::Bs));
        let amp = closed_form_snr(&ClosedFormInput { g: 10.0, ..input(SchemeKind::Amp) });
        assert!((amp.x / bs.x - 1.0).abs() < 0.01);
        assert!((amp.y / bs.y - 1.0).abs() < 0.01);
    }

    #[test]
    fn enhancement_references() {
        let (quot, sum) = reference_enhancements(2.0);
        assert_abs_diff_eq!(quot, 13.928, epsilon = 1e-3);
        assert_abs_diff_eq!(sum, 7.0, epsilon = 1e-12);
        assert_eq!(reference_enhancements(1.0), (1.0, 1.0));
    }
}

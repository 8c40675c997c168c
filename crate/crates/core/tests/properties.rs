use std::f64::consts::TAU;

use proptest::prelude::*;
use su11_core::conventions::symplectic_form;
use su11_core::gaussian::{beam_splitter_matrix, two_mode_squeezer_matrix};
use su11_core::oracle::{build_scheme_transfer, oracle_homodyne_variance};
use su11_core::schemes::{port_snr, InternalLossArms, PhaseSetting};
use su11_core::{build_scheme, Circuit, Element, LossBudget, OpaParams, PortName, QuadratureAngle, SchemeKind, SchemeParams};

fn element(n_modes: usize) -> impl Strategy<Value = Element> {
    let pair = (0..n_modes, 1..n_modes).prop_map(move |(a, d)| (a, (a + d) % n_modes));
    prop_oneof![
        (pair.clone(), 1.0..2.0f64, 0.0..TAU).prop_map(|((mode_a, mode_b), g, phi)| Element::Squeezer {
            mode_a,
            mode_b,
            opa: OpaParams::new(g, phi).unwrap(),
        }),
        (pair, 0.0..=1.0f64, 0.0..TAU).prop_map(|((mode_a, mode_b), transmissivity, phase)| Element::BeamSplitter {
            mode_a,
            mode_b,
            transmissivity,
            phase,
        }),
        (0..n_modes, 0.0..TAU).prop_map(|(mode, theta)| Element::PhaseShift { mode, theta }),
        (0..n_modes, 0.0..=1.0f64).prop_map(|(mode, eta)| Element::Loss { mode, eta }),
        (0..n_modes, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(mode, dx, dy)| Element::Displace { mode, dx, dy }),
    ]
}

fn circuit() -> impl Strategy<Value = Circuit> {
    (2usize..=5).prop_flat_map(|n| {
        prop::collection::vec(element(n), 0..6).prop_map(move |elements| Circuit { n_modes: n, elements })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn squeezer_and_splitter_are_symplectic(g in 1.0..20.0f64, phi in 0.0..TAU, t in 0.0..=1.0f64) {
        let omega = nalgebra::Matrix4::from_iterator(symplectic_form(2).iter().copied());
        for s in [two_mode_squeezer_matrix(&OpaParams::new(g, phi).unwrap()), beam_splitter_matrix(t, phi)] {
            let d = (s * omega * s.transpose() - omega).amax();
            prop_assert!(d < 1e-12 * g * g, "defect {d}");
        }
    }

    #[test]
    fn states_stay_physical(c in circuit()) {
        let nu = c.run_from_vacuum().unwrap().symplectic_eigenvalues().unwrap();
        prop_assert!(nu.iter().all(|&v| v >= 1.0 - 1e-9), "{nu:?}");
    }

    #[test]
    fn lossless_circuits_stay_pure(c in circuit()) {
        let mut c = c;
        c.elements.retain(|e| !matches!(e, Element::Loss { .. }));
        let nu = c.run_from_vacuum().unwrap().symplectic_eigenvalues().unwrap();
        let prod: f64 = nu.iter().product();
        prop_assert!((prod - 1.0).abs() < 1e-9, "Πν = {prod}");
    }

    #[test]
    fn loss_composes(c in circuit(), e1 in 0.0..=1.0f64, e2 in 0.0..=1.0f64, mode in 0usize..2) {
        let s = c.run_from_vacuum().unwrap();
        let a = s.apply_loss(mode, e1).unwrap().apply_loss(mode, e2).unwrap();
        let b = s.apply_loss(mode, e1 * e2).unwrap();
        let scale = 1.0 + s.cov().amax() + s.mean().amax();
        prop_assert!((a.cov() - b.cov()).amax() < 1e-12 * scale);
        prop_assert!((a.mean() - b.mean()).amax() < 1e-12 * scale);
    }

    #[test]
    fn homodyne_rotation_identity(c in circuit(), theta in 0.0..TAU, mode in 0usize..2) {
        let s = c.run_from_vacuum().unwrap();
        let (m1, v1) = s.homodyne_stats(mode, QuadratureAngle::new(theta), 1.0).unwrap();
        let (m0, v0) = s.apply_phase_shift(mode, -theta).unwrap().homodyne_stats(mode, QuadratureAngle::new(0.0), 1.0).unwrap();
        let scale = 1.0 + s.cov().amax() + s.mean().amax();
        prop_assert!((m1 - m0).abs() < 1e-12 * scale && (v1 - v0).abs() < 1e-12 * scale);
    }

    #[test]
    fn beam_splitter_conserves_photons(c in circuit(), t in 0.0..=1.0f64, phi in 0.0..TAU) {
        let s = c.run_from_vacuum().unwrap();
        let n = |st: &su11_core::GaussianState| st.mean_photon_number(0).unwrap() + st.mean_photon_number(1).unwrap();
        let after = s.apply_beam_splitter(0, 1, t, phi).unwrap();
        prop_assert!((n(&after) - n(&s)).abs() < 1e-12 * (1.0 + n(&s)));
    }

    #[test]
    fn scheme_oracle_agrees(
        kind in prop_oneof![Just(SchemeKind::Bs), Just(SchemeKind::Amp), Just(SchemeKind::Sui)],
        g1 in 1.0..3.0f64,
        g2 in 1.0..10.0f64,
        phi in 0.0..TAU,
        eta in (0.3..=1.0f64, 0.3..=1.0f64, 0.3..=1.0f64, 0.3..=1.0f64),
        tap in any::<bool>(),
        both in any::<bool>(),
    ) {
        let losses = LossBudget { eta_internal: eta.0, eta_signal_det: eta.1, eta_idler_det: eta.2, eta_tap_det: eta.3 };
        let s = build_scheme(&SchemeParams {
            gain_g1: g1,
            gain_g2: g2,
            interferometer_phase: PhaseSetting::Fixed(phi),
            losses,
            internal_loss_arms: if both { InternalLossArms::Both } else { InternalLossArms::Idler },
            tap_enabled: tap,
            ..SchemeParams::new(kind)
        }).unwrap();
        let map = build_scheme_transfer(&s).unwrap();
        for ch in &s.ports {
            let a = s.port_variance(ch.port_name).unwrap();
            let b = oracle_homodyne_variance(&map, ch.port_name.mode(), s.readout_angle(ch)).unwrap();
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn snr_scales_with_depth_squared(depth in 0.001..0.05f64, g2 in 1.0..10.0f64) {
        let mut p = SchemeParams { gain_g2: g2, ..SchemeParams::new(SchemeKind::Sui) };
        p.tones[0].depth = depth;
        let s = build_scheme(&p).unwrap();
        p.tones[0].depth = 0.01;
        let r = build_scheme(&p).unwrap();
        let a = port_snr(&s, PortName::Signal, 0).unwrap();
        let b = port_snr(&r, PortName::Signal, 0).unwrap();
        prop_assert!((a / b - (depth / 0.01).powi(2)).abs() < 1e-9 * (depth / 0.01).powi(2));
    }
}

use std::f64::consts::FRAC_1_SQRT_2;

use hdcpf::linalg::{inner, max_diff_up_to_phase, CMatrix};
use hdcpf::qudit::{heralding_efficiency, Port};
use hdcpf::{
    correction_unitary, cpf_oracle, ideal_hd_bs, run_protocol, subspace_hadamard, AuxiliaryConfig, BellOutcome,
    Complex64, Error, QuditState64,
};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn cpf_is_controlled_z_for_qubits() {
    let u = cpf_oracle::<f64>(2).unwrap();
    let want = CMatrix::from_diagonal(&[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]);
    assert!(u.max_abs_diff(&want) < TOL);
    assert_eq!(cpf_oracle::<f64>(1).unwrap_err(), Error::InvalidDimension(1));
}

#[test]
fn cpf_flips_superposition_partner() {
    let h = FRAC_1_SQRT_2;
    let mut amps = vec![c(0.0, 0.0); 16];
    amps[3 * 4 + 1] = c(h, 0.0);
    amps[3 * 4 + 3] = c(h, 0.0);
    let psi = QuditState64::new(4, amps.clone()).unwrap();
    let out = psi.apply(&cpf_oracle(4).unwrap()).unwrap();
    amps[15] = c(-h, 0.0);
    assert!(max_diff_up_to_phase(&amps, out.amplitudes()) < TOL);
    assert!((out.amp(3, 3) - c(-h, 0.0)).norm() < TOL);
}

#[test]
fn cpf_fixes_ground_state() {
    for d in 2..7 {
        let psi = QuditState64::basis(d, 0, 0).unwrap();
        assert_eq!(psi.apply(&cpf_oracle(d).unwrap()).unwrap(), psi);
    }
}

#[test]
fn cpf_structure() {
    for d in 2..7 {
        let u = cpf_oracle::<f64>(d).unwrap();
        assert!(u.is_diagonal(0.0));
        assert!((&u * &u).max_abs_diff(&CMatrix::identity(d * d)) < TOL);
        for m in 0..d {
            for n in 0..d {
                assert_eq!(u[(m * d + n, m * d + n)], u[(n * d + m, n * d + m)]);
            }
        }
    }
}

#[test]
fn hd_routing() {
    let bs = ideal_hd_bs(4).unwrap();
    assert_eq!(bs.route(Port::A, 3).unwrap(), (Port::D, 3));
    assert_eq!(bs.route(Port::B, 1).unwrap(), (Port::D, 1));
    assert_eq!(bs.route(Port::A, 0).unwrap(), (Port::C, 0));
    assert_eq!(bs.route(Port::B, 3).unwrap(), (Port::C, 3));
    let m = bs.matrix::<f64>();
    assert!(m.unitarity_defect() < TOL);
    // Relabel D -> A, C -> B and route again.
    for port in [Port::A, Port::B] {
        for l in 0..4 {
            let (o, l1) = bs.route(port, l).unwrap();
            let back = if o == Port::D { Port::A } else { Port::B };
            let (o2, l2) = bs.route(back, l1).unwrap();
            let back2 = if o2 == Port::D { Port::A } else { Port::B };
            assert_eq!((back2, l2), (port, l));
        }
    }
    assert!(ideal_hd_bs(1).is_err());
}

#[test]
fn subspace_hadamard_examples() {
    let h = subspace_hadamard::<f64>(0, 2).unwrap();
    let r = FRAC_1_SQRT_2;
    let want = CMatrix::from_fn(2, 2, |i, j| c(if i == 1 && j == 1 { -r } else { r }, 0.0));
    assert!(h.max_abs_diff(&want) < TOL);
    let h4 = subspace_hadamard::<f64>(1, 4).unwrap();
    assert!((&h4 * &h4).max_abs_diff(&CMatrix::identity(4)) < TOL);
    let e1 = h4.column(1);
    let want = [c(0.0, 0.0), c(r, 0.0), c(0.0, 0.0), c(r, 0.0)];
    assert!(e1.iter().zip(want).all(|(a, b)| (a - b).norm() < TOL));
    assert_eq!(subspace_hadamard::<f64>(3, 4).unwrap_err(), Error::InvalidSubspace { p: 3, d: 4 });
}

#[test]
fn corrections() {
    let d = 4;
    let id = CMatrix::<f64>::identity(d * d);
    assert!(correction_unitary::<f64>(BellOutcome::PhiPlus, d).unwrap().max_abs_diff(&id) < TOL);
    let u1 = correction_unitary::<f64>(BellOutcome::PhiMinus, d).unwrap();
    for m in 0..d {
        for n in 0..d {
            let want = if m == 3 { -1.0 } else { 1.0 };
            assert!((u1[(m * d + n, m * d + n)] - c(want, 0.0)).norm() < TOL);
        }
    }
    let u4 = correction_unitary::<f64>(BellOutcome::PsiPlus, d).unwrap();
    let both = correction_unitary::<f64>(BellOutcome::PsiMinus, d).unwrap();
    assert!((&u1 * &u4).max_abs_diff(&both) < TOL);
}

#[test]
fn top_top_input_heralds_minus_itself() {
    let psi = QuditState64::basis(4, 3, 3).unwrap();
    let out = run_protocol(&psi, AuxiliaryConfig::new(1, 4).unwrap()).unwrap();
    let b = &out[&BellOutcome::PhiPlus];
    assert!((b.probability - 1.0 / 16.0).abs() < TOL);
    assert!((b.state.amp(3, 3) - c(-1.0, 0.0)).norm() < TOL);
}

#[test]
fn efficiency_with_two_accepted_outcomes() {
    let psi = QuditState64::basis(4, 2, 3).unwrap();
    let out = run_protocol(&psi, AuxiliaryConfig { p: 0 }).unwrap();
    let total = heralding_efficiency(&out, &BellOutcome::ALL);
    assert!((total - 0.25).abs() < TOL);
    let two = heralding_efficiency(&out, &[BellOutcome::PhiPlus, BellOutcome::PsiPlus]);
    assert!((two - 0.125).abs() < TOL);
}

#[test]
fn protocol_rejects_bad_input() {
    let psi = QuditState64::basis(4, 0, 0).unwrap();
    assert_eq!(
        run_protocol(&psi, AuxiliaryConfig { p: 3 }).unwrap_err(),
        Error::InvalidSubspace { p: 3, d: 4 }
    );
    assert!(matches!(QuditState64::new(2, vec![c(1.0, 0.0); 4]), Err(Error::NotNormalized(_))));
}

#[test]
fn json_round_trip() {
    let psi = QuditState64::normalized(3, (0..9).map(|k| c(k as f64, 1.0 - k as f64)).collect()).unwrap();
    let back = QuditState64::from_json(3, &psi.to_json()).unwrap();
    assert!(max_diff_up_to_phase(psi.amplitudes(), back.amplitudes()) < 1e-15);
    assert!(QuditState64::from_json(3, &serde_json::json!([[0, 0, 0.5]])).is_err());
    assert!(QuditState64::from_json(3, &serde_json::json!([[5, 0, 1.0, 0.0]])).is_err());
}

fn random_state(d: usize) -> impl Strategy<Value = QuditState64> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d).prop_filter_map("zero vector", move |v| {
        QuditState64::normalized(d, v.into_iter().map(|(a, b)| c(a, b)).collect()).ok()
    })
}

fn d_and_state() -> impl Strategy<Value = (usize, QuditState64)> {
    (2usize..7).prop_flat_map(|d| (Just(d), random_state(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn heralded_states_match_oracle((d, psi) in d_and_state(), pseed in 0usize..100) {
        let p = pseed % (d - 1);
        let ideal = psi.apply(&cpf_oracle(d).unwrap()).unwrap();
        let out = run_protocol(&psi, AuxiliaryConfig::new(p, d).unwrap()).unwrap();
        for (_, b) in out {
            prop_assert!(inner(ideal.amplitudes(), b.state.amplitudes()).norm() >= 1.0 - TOL);
            prop_assert!(max_diff_up_to_phase(ideal.amplitudes(), b.state.amplitudes()) < 1e-9);
            prop_assert!((b.probability - 1.0 / 16.0).abs() <= TOL);
        }
    }

    #[test]
    fn auxiliary_subspace_does_not_matter((d, psi) in (3usize..7).prop_flat_map(|d| (Just(d), random_state(d)))) {
        let a = run_protocol(&psi, AuxiliaryConfig::new(0, d).unwrap()).unwrap();
        let b = run_protocol(&psi, AuxiliaryConfig::new(d - 2, d).unwrap()).unwrap();
        for o in BellOutcome::ALL {
            prop_assert!(max_diff_up_to_phase(a[&o].state.amplitudes(), b[&o].state.amplitudes()) < 1e-9);
        }
    }
}

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use hdcpf::linalg::{fidelity, max_diff_up_to_phase};
use hdcpf::mode_space::{compose_transforms, Conventions, Mode, ModeSpace, Pol, SinglePhotonState};
use hdcpf::oam_d4::*;
use hdcpf::qudit::{cpf_oracle, run_protocol, AuxiliaryConfig, BellOutcome, Port, QuditState};
use hdcpf::{Complex64, Error};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pipeline() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| Pipeline::new().unwrap())
}

/// Closed-form O1 action: `(pol_out, amp)` for input `pol` at OAM `l`.
fn o1_closed(pol: Pol, l: i64) -> (Pol, Complex64) {
    let ph = Complex64::from_polar(1.0, -(l as f64) * PI / 2.0);
    let even = l.rem_euclid(2) == 0;
    match (pol, even) {
        (Pol::H, true) => (Pol::H, ph),
        (Pol::H, false) => (Pol::V, ph),
        (Pol::V, true) => (Pol::V, -ph),
        (Pol::V, false) => (Pol::H, -ph),
    }
}

/// Closed-form O2 action: amplitudes on `(H, V)` at `-l`.
fn o2_closed(pol: Pol, l: i64) -> (Complex64, Complex64) {
    let x = (l - 1) as f64;
    let pre = Complex64::from_polar(1.0, -x * PI / 4.0);
    let e = Complex64::from_polar(1.0, x * PI / 2.0);
    let (minus, plus) = ((cx(1.0, 0.0) - e) / 2.0, (cx(1.0, 0.0) + e) / 2.0);
    let i = cx(0.0, 1.0);
    match pol {
        Pol::H => (pre * minus, pre * i * plus),
        Pol::V => (-pre * plus, -pre * i * minus),
    }
}

#[test]
fn o1_matches_closed_form_on_window() {
    let g = build_ok_cnot(1, 4).unwrap();
    let s = g.space().clone();
    for l in -4..=4 {
        for pol in Pol::ALL {
            let col = s.index(&Mode::new("A", pol, l)).unwrap();
            let (po, a) = o1_closed(pol, l);
            for row in 0..s.dim() {
                let want = if row == s.index(&Mode::new("A", po, -l)).unwrap() { a } else { cx(0.0, 0.0) };
                assert!((g.transform.entry(row, col) - want).norm() < TOL, "pol {pol} l {l} row {row}");
            }
        }
    }
}

#[test]
fn o2_matches_closed_form_on_window() {
    let g = build_ok_cnot(2, 4).unwrap();
    let s = g.space().clone();
    for l in -4..=4 {
        for pol in Pol::ALL {
            let col = s.index(&Mode::new("A", pol, l)).unwrap();
            let (h, v) = o2_closed(pol, l);
            let rh = s.index(&Mode::new("A", Pol::H, -l)).unwrap();
            let rv = s.index(&Mode::new("A", Pol::V, -l)).unwrap();
            for row in 0..s.dim() {
                let want = if row == rh {
                    h
                } else if row == rv {
                    v
                } else {
                    cx(0.0, 0.0)
                };
                assert!((g.transform.entry(row, col) - want).norm() < TOL, "pol {pol} l {l} row {row}");
            }
        }
    }
}

fn act(k: u8, pol: Pol, l: i64) -> SinglePhotonState<f64> {
    let g = build_ok_cnot(k, 4).unwrap();
    let s = SinglePhotonState::basis(g.space().clone(), &Mode::new("A", pol, l)).unwrap();
    g.transform.apply(&s).unwrap()
}

#[test]
fn ok_cnot_examples() {
    assert!((act(1, Pol::H, 1).amp(&Mode::new("A", Pol::V, -1)) - cx(0.0, -1.0)).norm() < TOL);
    assert!((act(2, Pol::H, 1).amp(&Mode::new("A", Pol::V, -1)) - cx(0.0, 1.0)).norm() < TOL);
    assert!((act(2, Pol::V, 1).amp(&Mode::new("A", Pol::H, -1)) - cx(-1.0, 0.0)).norm() < TOL);
    assert!(matches!(build_ok_cnot(3, 4), Err(Error::InvalidParameter(_))));
    assert!(build_ok_cnot(1, 4).unwrap().transform.unitarity_defect() < TOL);
}

#[test]
fn transcripts_match_with_frozen_conventions() {
    for t in [Transcript::port_a(), Transcript::port_b()] {
        let r = transcript_check(&HdBeamSplitter::standard(), &t).unwrap();
        assert!(r.is_ok(), "{:?}", r.first_divergence);
        assert!(r.lines_checked >= 10);
    }
}

#[test]
fn pbs_phase_fault_is_flagged_at_first_pbs() {
    let mut conv = Conventions::frozen();
    conv.elements.pbs_reflection_phase = -0.5;
    let bs = HdBeamSplitter::standard().with_conventions(conv);
    let r = transcript_check(&bs, &Transcript::port_a()).unwrap();
    assert_eq!(r.first_divergence.unwrap().step, 2);
}

#[test]
fn missing_phase_plate_is_flagged_at_its_step() {
    let bs = HdBeamSplitter::standard().without_element(5, "PP");
    let r = transcript_check(&bs, &Transcript::port_a()).unwrap();
    assert_eq!(r.first_divergence.unwrap().step, 5);
    let r = transcript_check(&bs, &Transcript::port_b()).unwrap();
    assert_eq!(r.first_divergence.unwrap().step, 5);
}

#[test]
fn hd_splitter_routes_both_ports() {
    let (bs, t) = build_hd_beamsplitter(4).unwrap();
    let s = t.space().clone();
    let a = [cx(0.1, 0.2), cx(-0.3, 0.4), cx(0.5, 0.0), cx(0.0, -0.6)];
    let n: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let terms: Vec<_> =
        OAM_ALPHABET.iter().zip(a).map(|(&l, c)| (Mode::new("A", Pol::H, l), c / n)).collect();
    let out = t.apply(&SinglePhotonState::from_terms(s.clone(), &terms).unwrap()).unwrap();
    for (k, &l) in OAM_ALPHABET.iter().enumerate() {
        let port = if l == 1 { "D" } else { "C" };
        assert!((out.amp(&Mode::new(port, Pol::H, l)) - a[k] / n).norm() < TOL);
    }
    assert!((out.probability() - 1.0).abs() < TOL);

    let b = [cx(0.6, 0.0), cx(0.0, 0.8)];
    let inb = SinglePhotonState::from_terms(
        s.clone(),
        &[(Mode::new("B", Pol::H, -1), b[0]), (Mode::new("B", Pol::H, 1), b[1])],
    )
    .unwrap();
    let out = t.apply(&inb).unwrap();
    assert!((out.amp(&Mode::new("C", Pol::H, 1)) - b[1]).norm() < TOL);
    assert!((out.amp(&Mode::new("D", Pol::H, -1)) - b[0]).norm() < TOL);

    let zero = SinglePhotonState::basis(s.clone(), &Mode::new("A", Pol::H, 0)).unwrap();
    let out = t.apply(&zero).unwrap();
    assert!((out.amp(&Mode::new("C", Pol::H, 0)) - cx(1.0, 0.0)).norm() < TOL);
    let d = s.path_index(&bs.port(Port::D)).unwrap();
    let on_d: f64 = out.amplitudes().iter().enumerate().filter(|(i, _)| s.path_of(*i) == d).map(|(_, a)| a.norm_sqr()).sum();
    assert!(on_d < TOL);
    assert!(t.unitarity_defect() < TOL);
}

#[test]
fn splitter_needs_two_oam_units_of_headroom() {
    assert!(matches!(build_hd_beamsplitter(1), Err(Error::TruncationOverflow { .. })));
}

#[test]
fn core_splitter_d_encoding() {
    let st = pipeline().stage();
    let d1 = &st.encodings[0];
    assert!((d1[&1].amp(&Mode::new("1D", Pol::V, -1)) - cx(-1.0, 0.0)).norm() < TOL);
    assert!((d1[&3].amp(&Mode::new("1D", Pol::H, 1)) - cx(0.0, -1.0)).norm() < TOL);
}

#[test]
fn table_rows_reach_their_targets() {
    for r in table_a1() {
        let (s, p) = prepare_input(&r).unwrap();
        let want = r.target_state().unwrap();
        let err = max_diff_up_to_phase(want.amplitudes(), s.amplitudes());
        assert!(err < TOL, "{r}: {err}");
        assert!(p > 0.0 && p <= 1.0 + TOL);
        if r.kind == RecipeKind::Direct {
            assert_eq!(p, 1.0);
        }
    }
    assert_eq!(table_a1().len(), 10);
}

#[test]
fn table_examples() {
    let (s, _) = prepare_input(&PreparationRecipe::lookup("1").unwrap()).unwrap();
    assert!((s.amp(&Mode::new(PREP_PATH, Pol::H, -2)).norm() - 1.0).abs() < TOL);
    let (s, _) = prepare_input(&PreparationRecipe::lookup("row6").unwrap()).unwrap();
    let ph = s.amp(&Mode::new(PREP_PATH, Pol::H, -1));
    assert!((ph.norm() - FRAC_1_SQRT_2).abs() < TOL);
    assert!((s.amp(&Mode::new(PREP_PATH, Pol::H, 1)) - ph).norm() < TOL);
    let (s, p) = prepare_input(&PreparationRecipe::lookup("0++1").unwrap()).unwrap();
    assert_eq!(p, 1.0);
    assert!((s.amp(&Mode::new(PREP_PATH, Pol::H, 0)) - cx(FRAC_1_SQRT_2, 0.0)).norm() < TOL);
    assert!(matches!(PreparationRecipe::lookup("row11"), Err(Error::UnknownRecipe(_))));
}

#[test]
fn auxiliary_photon() {
    let s = prepare_auxiliary().unwrap();
    assert!((s.probability() - 1.0).abs() < TOL);
    let want = SinglePhotonState::from_terms(
        s.space().clone(),
        &[
            (Mode::new(PREP_PATH, Pol::V, -1), cx(FRAC_1_SQRT_2, 0.0)),
            (Mode::new(PREP_PATH, Pol::H, 1), cx(FRAC_1_SQRT_2, 0.0)),
        ],
    )
    .unwrap();
    assert!((fidelity(want.amplitudes(), s.amplitudes()) - 1.0).abs() < TOL);
}

fn arm(first: usize) -> (hdcpf::ModeTransform64, std::sync::Arc<ModeSpace>) {
    let s = ModeSpace::new(["a", "b", "M1", "M1m", "M2", "M2m"], 4).unwrap();
    let conv = Conventions::frozen();
    let parts: Vec<_> = stage_elements("a", "b", &conv)[first..first + 3].iter().map(|e| e.transform(&s, &conv).unwrap()).collect();
    (compose_transforms(&s, &parts).unwrap(), s)
}

#[test]
fn photon_two_arm_moves_oam_into_polarization() {
    let (t, s) = arm(0);
    let out = t.apply(&SinglePhotonState::basis(s.clone(), &Mode::new("a", Pol::H, 1)).unwrap()).unwrap();
    assert!((out.amp(&Mode::new("a", Pol::V, 0)).norm() - 1.0).abs() < TOL);
    let out = t.apply(&SinglePhotonState::basis(s.clone(), &Mode::new("a", Pol::V, -1)).unwrap()).unwrap();
    assert!((out.amp(&Mode::new("a", Pol::H, 0)).norm() - 1.0).abs() < TOL);
}

#[test]
fn photon_three_arm_is_a_hadamard() {
    let (t, s) = arm(3);
    let out = t.apply(&SinglePhotonState::basis(s.clone(), &Mode::new("b", Pol::V, -1)).unwrap()).unwrap();
    let a = SinglePhotonState::from_terms(
        s.clone(),
        &[(Mode::new("b", Pol::H, 0), cx(0.0, FRAC_1_SQRT_2)), (Mode::new("b", Pol::V, 0), cx(0.0, -FRAC_1_SQRT_2))],
    )
    .unwrap();
    assert!(max_diff_up_to_phase(a.amplitudes(), out.amplitudes()) < TOL);
}

#[test]
fn decoder_resolves_the_phi_pair() {
    let dec = &pipeline().stage().decoder;
    let want: std::collections::BTreeSet<_> = [BellOutcome::PhiPlus, BellOutcome::PhiMinus].into_iter().collect();
    assert_eq!(dec.distinguishable(), want);
    let img = &dec.images[&BellOutcome::PhiPlus];
    assert!((img.norm_sqr() - 1.0).abs() < TOL);
    for (cfg, _) in img.terms() {
        let p = pattern_of(pipeline().space(), cfg.indices());
        assert_eq!(dec.decode(&p), Decoded::Bell(BellOutcome::PhiPlus), "{p}");
    }
    for b in BellOutcome::ALL {
        for c in BellOutcome::ALL {
            let ov = dec.images[&b].inner(&dec.images[&c]).norm();
            assert!((ov - if b == c { 1.0 } else { 0.0 }).abs() < TOL);
        }
    }
}

fn superpose(a: usize, b: usize) -> [Complex64; 4] {
    let mut v = [cx(0.0, 0.0); 4];
    v[a] = cx(FRAC_1_SQRT_2, 0.0);
    v[b] = cx(FRAC_1_SQRT_2, 0.0);
    v
}

#[test]
fn control_in_three_flips_target_superposition() {
    let mut e3 = [cx(0.0, 0.0); 4];
    e3[3] = cx(1.0, 0.0);
    let input = CpfInput::Joint(QuditState::product(&e3, &superpose(1, 3)).unwrap());
    let run = run_cpf_d4(&input, &[BellOutcome::PhiPlus], &NoiseSpec::noiseless()).unwrap();
    let mut minus = superpose(1, 3);
    minus[3] = -minus[3];
    let want = QuditState::product(&e3, &minus).unwrap();
    assert!((run.fidelity_to(&want) - 1.0).abs() < 1e-10);
    assert!(run.pure.is_some());
}

#[test]
fn product_superpositions_become_entangled() {
    let input = CpfInput::Joint(QuditState::product(&superpose(1, 3), &superpose(1, 3)).unwrap());
    let run = run_cpf_d4_with(pipeline(), &input, &[BellOutcome::PhiPlus], &NoiseSpec::noiseless()).unwrap();
    let mut amps = vec![cx(0.0, 0.0); 16];
    amps[4 + 1] = cx(0.5, 0.0);
    amps[4 + 3] = cx(0.5, 0.0);
    amps[3 * 4 + 1] = cx(0.5, 0.0);
    amps[3 * 4 + 3] = cx(-0.5, 0.0);
    let want = QuditState::new(4, amps).unwrap();
    assert!((run.fidelity_to(&want) - 1.0).abs() < 1e-10);
}

#[test]
fn accepting_two_outcomes_heralds_one_eighth() {
    for (m, n) in [(0, 0), (3, 3), (1, 2)] {
        let run = run_cpf_d4_with(
            pipeline(),
            &CpfInput::levels(m, n).unwrap(),
            &[BellOutcome::PhiPlus, BellOutcome::PsiPlus],
            &NoiseSpec::noiseless(),
        )
        .unwrap();
        assert!((run.probability - 0.125).abs() < 1e-10, "{m}{n}: {}", run.probability);
    }
}

#[test]
fn product_input_must_use_the_alphabet() {
    let s = ModeSpace::new([PREP_PATH], 4).unwrap();
    let bad = SinglePhotonState::basis(s.clone(), &Mode::new(PREP_PATH, Pol::H, 2)).unwrap();
    let ok = SinglePhotonState::basis(s.clone(), &Mode::new(PREP_PATH, Pol::H, 0)).unwrap();
    let r = run_cpf_d4_with(pipeline(), &CpfInput::Product(bad, ok.clone()), &[BellOutcome::PhiPlus], &NoiseSpec::noiseless());
    assert!(matches!(r, Err(Error::EncodingError(_))));
    let v = SinglePhotonState::basis(s, &Mode::new(PREP_PATH, Pol::V, 0)).unwrap();
    let r = run_cpf_d4_with(pipeline(), &CpfInput::Product(v, ok), &[BellOutcome::PhiPlus], &NoiseSpec::noiseless());
    assert!(matches!(r, Err(Error::EncodingError(_))));
}

#[test]
fn all_prepared_pairs_follow_the_oracle() {
    let states: Vec<_> = table_a1().iter().map(|r| prepare_input(r).unwrap().0).collect();
    let oracle = cpf_oracle::<f64>(4).unwrap();
    let mut probs = Vec::new();
    for a in &states {
        for b in &states {
            let input = CpfInput::Product(a.clone(), b.clone());
            let psi = input.to_qudit().unwrap();
            let run = run_cpf_d4_with(pipeline(), &input, &[BellOutcome::PhiPlus], &NoiseSpec::noiseless()).unwrap();
            let want = psi.apply(&oracle).unwrap();
            assert!(run.fidelity_to(&want) >= 1.0 - 1e-8);
            probs.push(run.probability);
        }
    }
    assert_eq!(probs.len(), 100);
    for p in &probs {
        assert!((p - probs[0]).abs() < 1e-10);
    }
    assert!((probs[0] - 1.0 / 16.0).abs() < 1e-10);
}

#[test]
fn noise_realizations_are_reproducible_and_degrade_fidelity() {
    let noise = NoiseSpec { phase_jitter: 0.4, seed: 7, trajectories: 16, ..NoiseSpec::default() };
    let input = CpfInput::Joint(QuditState::product(&superpose(0, 1), &superpose(0, 1)).unwrap());
    let a = run_cpf_d4_with(pipeline(), &input, &[BellOutcome::PhiPlus], &noise).unwrap();
    let b = run_cpf_d4_with(pipeline(), &input, &[BellOutcome::PhiPlus], &noise).unwrap();
    assert_eq!(a.rho, b.rho);
    let want = input.to_qudit().unwrap().apply(&cpf_oracle(4).unwrap()).unwrap();
    let f = a.fidelity_to(&want);
    assert!(f < 1.0 - 1e-3 && f > 0.3, "{f}");
    assert!(a.pure.is_none());
    assert!((a.rho.trace().re - 1.0).abs() < 1e-12);
}

#[test]
fn loss_scales_heralding_probability() {
    let noise = NoiseSpec { loss: 0.1, ..NoiseSpec::default() };
    let run = run_cpf_d4_with(pipeline(), &CpfInput::levels(2, 1).unwrap(), &[BellOutcome::PhiPlus], &noise).unwrap();
    assert!((run.probability - 0.9f64.powi(4) / 16.0).abs() < 1e-12);
    let bad = NoiseSpec { visibility: 1.5, ..NoiseSpec::default() };
    assert!(run_cpf_d4_with(pipeline(), &CpfInput::levels(0, 0).unwrap(), &[BellOutcome::PhiPlus], &bad).is_err());
}

fn random_state() -> impl Strategy<Value = QuditState<f64>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16).prop_filter_map("non-zero", |v| {
        QuditState::normalized(4, v.into_iter().map(|(r, i)| cx(r, i)).collect()).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matches_the_abstract_protocol(psi in random_state()) {
        let abs = run_protocol(&psi, AuxiliaryConfig::new(1, 4).unwrap()).unwrap();
        let run = pipeline().run_direct(&psi, None).unwrap();
        for b in BellOutcome::ALL {
            let v = &run.branches[&b];
            let p: f64 = v.iter().map(|a| a.norm_sqr()).sum();
            prop_assert!((p - abs[&b].probability).abs() < 1e-10);
            let s = QuditState::normalized(4, v.clone()).unwrap();
            prop_assert!((fidelity(s.amplitudes(), abs[&b].state.amplitudes()) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn heralding_rate_is_input_independent(psi in random_state()) {
        let run = run_cpf_d4_with(pipeline(), &CpfInput::Joint(psi), &[BellOutcome::PhiPlus], &NoiseSpec::noiseless()).unwrap();
        prop_assert!((run.probability - 1.0 / 16.0).abs() < 1e-10);
    }
}

#[test]
fn branch_maps_match_direct_runs_under_noise() {
    let spec = NoiseSpec { phase_jitter: 1.3, oam_dephasing: 0.4, visibility: 0.7, seed: 21, ..NoiseSpec::default() };
    let draws: Vec<_> = spec.realizations(3, 0).unwrap().into_iter().map(Some).collect();
    let maps = pipeline().branch_maps(&draws, 0.0).unwrap();
    for (r, m) in draws.iter().zip(&maps.realizations) {
        for j in [0usize, 6, 13, 15] {
            let run = pipeline().run_direct(&QuditState::basis(4, j / 4, j % 4).unwrap(), r.as_ref()).unwrap();
            for (b, v) in &run.branches {
                let col = m[b].column(j);
                let diff = v.iter().zip(&col).map(|(a, c)| (a - c).norm()).fold(0.0, f64::max);
                assert!(diff < 1e-10, "{b:?} input {j}: {diff}");
            }
        }
    }
}

use std::sync::OnceLock;

use hdcpf::analysis::*;
use hdcpf::linalg::CMatrix;
use hdcpf::qudit::BellOutcome;
use hdcpf::{Complex64, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ideal() -> &'static Channel {
    static CH: OnceLock<Channel> = OnceLock::new();
    CH.get_or_init(|| Channel::new(&NoiseSpec::noiseless(), &[BellOutcome::PhiPlus]).unwrap())
}

#[test]
fn bounds_examples() {
    assert_eq!(hofmann_bounds(0.82, 0.82).unwrap(), [0.64, 0.82]);
    assert_eq!(hofmann_bounds(1.0, 1.0).unwrap(), [1.0, 1.0]);
    assert_eq!(hofmann_bounds(0.9, 0.7).unwrap(), [0.6, 0.7]);
    assert_eq!(hofmann_bounds(0.3, 0.4).unwrap(), [0.0, 0.3]);
    assert!(matches!(hofmann_bounds(1.1, 0.5), Err(Error::InvalidParameter(_))));
    assert!(matches!(hofmann_bounds(0.5, -0.1), Err(Error::InvalidParameter(_))));
}

#[test]
fn table_sizes() {
    assert_eq!(BasisTable::zx().len(), 16);
    assert_eq!(BasisTable::xz().len(), 16);
    assert_eq!(BasisTable::table_a3().len(), 7);
    assert_eq!(BasisTable::zx().labels()[0], "-2|-2+0");
    assert_eq!(BasisTable::xz().labels()[1], "-2+0|-1");
    assert_eq!("zx".parse::<BasisName>().unwrap(), BasisName::ZX);
}

#[test]
fn noiseless_fidelities_are_one() {
    let r = fidelity_report(ideal(), None, 0).unwrap();
    assert!((r.f_zx - 1.0).abs() < 1e-10 && (r.f_xz - 1.0).abs() < 1e-10);
    assert_eq!(r.bounds, [1.0, 1.0]);
    assert!((r.heralding_probability - 1.0 / 16.0).abs() < 1e-10);
    assert!(r.zx.is_permutation(1e-10) && r.xz.is_permutation(1e-10));
}

#[test]
fn flip_rows_follow_the_gate() {
    let zx = BasisTable::zx();
    let labels = zx.labels();
    let m = run_fidelity_experiment(BasisName::ZX, None, &NoiseSpec::noiseless()).unwrap();
    let flipped: Vec<&str> = m.flipped().iter().map(|&i| labels[i].as_str()).collect();
    assert_eq!(flipped, ["+1|-1++1", "+1|-1-+1"]);
    let i = labels.iter().position(|l| l == "+1|-1++1").unwrap();
    assert_eq!(labels[m.expected[i]], "+1|-1-+1");

    let xz = BasisTable::xz();
    let m = run_fidelity_experiment(BasisName::XZ, None, &NoiseSpec::noiseless()).unwrap();
    let flipped: Vec<String> = m.flipped().iter().map(|&i| xz.labels()[i].clone()).collect();
    assert_eq!(flipped, ["-1++1|+1", "-1-+1|+1"]);
    assert!(run_fidelity_experiment(BasisName::TableA3, None, &NoiseSpec::noiseless()).is_err());
}

#[test]
fn shot_mode_tallies() {
    let m = run_fidelity_experiment(BasisName::ZX, Some(500), &NoiseSpec { seed: 3, ..NoiseSpec::default() }).unwrap();
    let c = m.counts.as_ref().unwrap();
    assert!(c.iter().all(|row| row.iter().sum::<u64>() == 500));
    assert_eq!(m.fidelity(), 1.0);
    let csv = m.to_csv().unwrap();
    assert_eq!(csv.lines().count(), 1 + 256);
    assert!(csv.starts_with("input,outcome,probability,count\n"));
    let mat = m.matrix_csv().unwrap();
    assert_eq!(mat.lines().count(), 17);
}

#[test]
fn stabilizer_examples() {
    assert_eq!(stabilizer_fidelity(1.0, 1.0, 1.0).unwrap(), 1.0);
    assert_eq!(stabilizer_fidelity(0.0, 0.0, 0.0).unwrap(), 0.25);
    assert_eq!(stabilizer_fidelity(-1.0, -1.0, 1.0).unwrap(), 0.0);
    assert!(stabilizer_fidelity(1.5, 0.0, 0.0).is_err());
}

/// Target projector rebuilt from the 16 products of {I, X, Y, Z} on the
/// two-level subspace; coefficients from tr(P |psi><psi|) / 4.
#[test]
fn target_projector_pauli_expansion() {
    let psi = entangled_target();
    let proj = CMatrix::from_fn(16, 16, |i, j| psi[i] * psi[j].conj());
    let mut id = CMatrix::zeros(4, 4);
    id[(1, 1)] = Complex64::new(1.0, 0.0);
    id[(3, 3)] = Complex64::new(1.0, 0.0);
    let ops = [id, embedded_pauli(Pauli::X), embedded_pauli(Pauli::Y), embedded_pauli(Pauli::Z)];
    let mut rebuilt = CMatrix::zeros(16, 16);
    let mut nonzero = Vec::new();
    for (a, pa) in ops.iter().enumerate() {
        for (b, pb) in ops.iter().enumerate() {
            let p = pa.kron(pb);
            let coef = (&proj * &p).trace() / 4.0;
            if coef.norm() > 1e-12 {
                nonzero.push((a, b, coef.re));
            }
            for i in 0..16 {
                for j in 0..16 {
                    rebuilt[(i, j)] += p[(i, j)] * coef;
                }
            }
        }
    }
    assert!(rebuilt.max_abs_diff(&proj) < 1e-12);
    // I, ZX, XZ, YY with weight 1/4 each.
    assert_eq!(nonzero, vec![(0, 0, 0.25), (1, 3, 0.25), (2, 2, 0.25), (3, 1, 0.25)]);
}

fn random_subspace_rho(rng: &mut impl Rng) -> CMatrix<f64> {
    let idx = [5usize, 7, 13, 15];
    let vals: Vec<Complex64> = (0..16).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let a = CMatrix::from_fn(4, 4, |i, j| vals[i * 4 + j]);
    let m = &a * &a.adjoint();
    let tr = m.trace().re;
    let mut rho = CMatrix::zeros(16, 16);
    for (i, &r) in idx.iter().enumerate() {
        for (j, &c) in idx.iter().enumerate() {
            rho[(r, c)] = m[(i, j)] / tr;
        }
    }
    rho
}

#[test]
fn stabilizer_fidelity_matches_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let psi = entangled_target();
    for _ in 0..100 {
        let rho = random_subspace_rho(&mut rng);
        let [e1, e2, e3] = stabilizer_expectations(&rho);
        let rv = rho.mul_vec(&psi);
        let direct: Complex64 = psi.iter().zip(&rv).map(|(a, b)| a.conj() * b).sum();
        assert!((stabilizer_fidelity(e1, e2, e3).unwrap() - direct.re).abs() < 1e-12);
    }
}

#[test]
fn superposition_suite_noiseless() {
    let res = superposition_suite(ideal(), None, 0).unwrap();
    assert_eq!(res.len(), 7);
    for r in &res[..6] {
        assert!((r.fidelity - 1.0).abs() < 1e-10, "state {} gave {}", r.index, r.fidelity);
    }
    let e = res[6].stabilizers.unwrap();
    assert!(e.iter().all(|x| (x - 1.0).abs() < 1e-10));
    assert!((res[6].fidelity - 1.0).abs() < 1e-10);
}

#[test]
fn all_zero_noise_equals_noiseless() {
    let spec = NoiseSpec { seed: 99, ..NoiseSpec::default() };
    let a = run_fidelity_experiment(BasisName::XZ, None, &spec).unwrap();
    let b = run_fidelity_experiment(BasisName::XZ, None, &NoiseSpec::noiseless()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn large_jitter_averages_locking_observable() {
    assert!((locking_observable(ideal()).unwrap() - 1.0).abs() < 1e-10);
    let spec = NoiseSpec { phase_jitter: 50.0, trajectories: 4000, seed: 5, ..NoiseSpec::default() };
    let ch = Channel::new(&spec, &[BellOutcome::PhiPlus]).unwrap();
    let p = locking_observable(&ch).unwrap();
    // Standard error of the mean of (1+cos)/2 over 4000 draws is about 0.006.
    assert!((p - 0.5).abs() < 0.03, "{p}");
}

#[test]
fn loss_scales_heralding() {
    let p = 0.2;
    let lossy = Channel::new(&NoiseSpec { loss: p, ..NoiseSpec::default() }, &[BellOutcome::PhiPlus]).unwrap();
    let v = BasisTable::zx().vector(5);
    let (_, h0) = ideal().output(&v).unwrap();
    let (_, h1) = lossy.output(&v).unwrap();
    assert!((h1 / h0 - (1.0f64 - p).powi(4)).abs() < 1e-12);

    // Monte Carlo survival of four independent photons.
    let draws = NoiseSpec { loss: p, seed: 1, ..NoiseSpec::default() }.realizations(20000, 9).unwrap();
    let survive = draws.iter().filter(|r| !r.any_loss()).count() as f64 / 20000.0;
    assert!((survive - 0.8f64.powi(4)).abs() < 0.015, "{survive}");
}

#[test]
fn bounds_are_recomputable() {
    let spec = NoiseSpec { oam_dephasing: 0.5, trajectories: 24, seed: 2, ..NoiseSpec::default() };
    let ch = Channel::new(&spec, &[BellOutcome::PhiPlus]).unwrap();
    let r = fidelity_report(&ch, None, 0).unwrap();
    assert!(r.f_zx < 1.0 && r.f_xz < 1.0);
    assert_eq!(r.bounds, hofmann_bounds(r.f_zx, r.f_xz).unwrap());
    assert!(r.bounds[0] <= r.bounds[1]);
}

#[test]
fn shot_noise_scales_as_inverse_sqrt() {
    let spec = NoiseSpec { oam_dephasing: 0.6, trajectories: 16, seed: 4, ..NoiseSpec::default() };
    let ch = Channel::new(&spec, &[BellOutcome::PhiPlus]).unwrap();
    let table = BasisTable::zx();
    let (exact, _) = measure_table(&ch, &table, None, 0).unwrap();
    let f = exact.fidelity();
    let var: f64 = (0..16).map(|i| {
        let p = exact.probabilities[i][exact.expected[i]];
        p * (1.0 - p)
    }).sum::<f64>() / 256.0;
    for shots in [200u64, 3200] {
        let sigma = (var / shots as f64).sqrt();
        for seed in 0..20 {
            let (m, _) = measure_table(&ch, &table, Some(shots), seed).unwrap();
            assert!((m.fidelity() - f).abs() <= 3.0 * sigma + 1e-12, "shots {shots} seed {seed}");
        }
    }
}

#[test]
fn process_fidelity_noiseless_is_one() {
    assert!((ideal().process_fidelity().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn dephasing_calibration_reaches_target() {
    let pipeline = hdcpf::oam_d4::Pipeline::new().unwrap();
    let base = NoiseSpec { seed: 1, trajectories: 64, ..NoiseSpec::default() };
    let spec = calibrate_dephasing(&pipeline, &base, 0.82).unwrap();
    // Pure dephasing gives F_ZX = (1 + exp(-s^2))/2 on average, so s is near 0.67.
    assert!((spec.oam_dephasing - 0.6680).abs() < 0.05, "{}", spec.oam_dephasing);
    let ch = Channel::with_pipeline(pipeline, &spec, &[BellOutcome::PhiPlus]).unwrap();
    let r = fidelity_report(&ch, None, 0).unwrap();
    assert!((r.f_zx - 0.82).abs() < 1e-9);
    assert!((r.bounds[0] - 0.64).abs() < 0.03 && (r.bounds[1] - 0.82).abs() < 0.03, "{:?}", r.bounds);
    assert!(calibrate_dephasing(&hdcpf::oam_d4::Pipeline::new().unwrap(), &base, 1.5).is_err());
}

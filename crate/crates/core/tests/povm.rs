use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use bt_core::operator::{DensityState, HermitianOperator};
use bt_core::povm::{
    discretize_povm, naimark_dilate, q_pairing_slack, run_noise_trials, variance_identity_check,
    verify_noise_inequality, write_trials_csv, DiscretePOVM, TRIAL_CSV_HEADER,
};
use bt_core::quantization::{coherent_state, noise_operator, spectral_norm, Quantizer, ToeplitzQuantizer};
use bt_core::smearing::heat_quantizer;
use bt_core::sphere::{SphereFunction, SpherePoint};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

#[test]
fn sphere_povm_resolves_identity_with_rank_one_elements() {
    let k = 5;
    let q = ToeplitzQuantizer::new(k, 2).unwrap();
    let p = discretize_povm(&q);
    let ones = vec![1.0; p.len()];
    let total = p.integrate(&ones).unwrap();
    assert!((&total - &HermitianOperator::identity(k + 1)).operator_norm() < 1e-10);
    for (i, e) in p.elements().iter().enumerate() {
        let ev = e.eigenvalues();
        assert_abs_diff_eq!(ev[k], (k + 1) as f64 * q.grid().weight(i), epsilon = 1e-13);
        assert!(ev[..k].iter().all(|x| x.abs() < 1e-13));
    }
}

#[test]
fn sampled_integral_is_the_toeplitz_operator() {
    let q = ToeplitzQuantizer::new(7, 3).unwrap();
    let p = discretize_povm(&q);
    let f = SphereFunction::random(3, &mut ChaCha8Rng::seed_from_u64(4));
    let lhs = p.integrate(&p.sample(&f).unwrap()).unwrap();
    assert!((&lhs - &q.quantize(&f).unwrap()).operator_norm() < 1e-12);
}

#[test]
fn discrete_noise_matches_quantizer_noise() {
    let k = 9;
    let q = ToeplitzQuantizer::new(k, 2).unwrap();
    let p = discretize_povm(&q);
    let z = SphereFunction::z();
    let discrete = p.noise_operator(&p.sample(&z).unwrap()).unwrap();
    let continuous = noise_operator(&q, &z).unwrap();
    assert!((&discrete - &continuous).operator_norm() < 1e-10);
}

#[test]
fn noise_of_constant_outcomes_vanishes() {
    let p = discretize_povm(&ToeplitzQuantizer::new(4, 0).unwrap());
    let n = p.noise_operator(&vec![3.5; p.len()]).unwrap();
    assert!(n.operator_norm() < 1e-12);
}

#[test]
fn dilation_of_small_sphere_povm_is_isometric() {
    let p = discretize_povm(&ToeplitzQuantizer::new(2, 0).unwrap());
    let d = naimark_dilate(&p).unwrap();
    assert!(d.isometry_defect() < 1e-12);
    assert_eq!(d.dilated_dim(), 3 * p.len());
    let v = d.isometry();
    for q in [0, p.len() / 2, p.len() - 1] {
        assert!(spectral_norm(&(d.compressed_projector(q) - p.elements()[q].matrix())) < 1e-10);
    }
    let vv = v.adjoint() * &v;
    assert!(spectral_norm(&(vv - bt_core::operator::CMatrix::identity(3, 3))) < 1e-12);
}

#[test]
fn incomplete_families_are_rejected() {
    let half = HermitianOperator::from_real_diagonal(&[0.5, 0.5]);
    assert!(DiscretePOVM::new(vec![half.clone()], vec![]).is_err());
    let p = DiscretePOVM::new(vec![half.clone(), half], vec![]).unwrap();
    assert!(p.integrate(&[1.0]).is_err());
    assert!(p.sample(&SphereFunction::z()).is_err());
}

#[test]
fn noise_inequality_on_random_states_at_level_eight() {
    let k = 8;
    let p = discretize_povm(&ToeplitzQuantizer::new(k, 1).unwrap());
    let u = p.sample(&SphereFunction::z()).unwrap();
    let v = p.sample(&SphereFunction::x()).unwrap();
    let min = (0..100)
        .map(|s| verify_noise_inequality(&p, &u, &v, &DensityState::random(k + 1, s)).unwrap().slack)
        .fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-10, "{min:e}");
}

#[test]
fn randomized_noise_trials_hold_and_serialize() {
    let trials = run_noise_trials(&[2, 4, 8], 340, 17).unwrap();
    assert!(trials.len() >= 1000);
    let min = trials.iter().map(|t| t.result.slack).fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-10, "{min:e}");
    assert_eq!(trials, run_noise_trials(&[2, 4, 8], 340, 17).unwrap());

    let mut buf = Vec::new();
    write_trials_csv(&mut buf, &trials[..3]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], TRIAL_CSV_HEADER);
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,2,"));
}

#[test]
fn commutator_transfers_to_pairing() {
    let p = discretize_povm(&ToeplitzQuantizer::new(3, 0).unwrap());
    let d = naimark_dilate(&p).unwrap();
    let s = random_values(p.len(), 1);
    let t = random_values(p.len(), 2);
    let (cs, ct) = (d.compress(&s).unwrap(), d.compress(&t).unwrap());
    let lhs = &cs * &ct - &ct * &cs;
    let rhs = d.q_pairing(&t, &s).unwrap() - d.q_pairing(&s, &t).unwrap();
    assert!(spectral_norm(&(lhs - rhs)) < 1e-9);
}

#[test]
fn variance_identity_cases() {
    let k = 16;
    let q = ToeplitzQuantizer::new(k, 2).unwrap();
    let north = coherent_state(k, &SpherePoint::north()).density();
    assert!(variance_identity_check(&q, &SphereFunction::z(), &north).unwrap() <= 1e-10);
    assert!(variance_identity_check(&q, &SphereFunction::constant(-1.5), &north).unwrap() <= 1e-12);

    // k·Var(T(z)) on the equatorial coherent state tends to −c₊(z,z) = 1
    let ks = [32usize, 64, 128];
    let vals: Vec<f64> = ks
        .iter()
        .map(|&k| {
            let q = ToeplitzQuantizer::new(k, 1).unwrap();
            let eq = coherent_state(k, &SpherePoint::new(PI / 2.0, 0.3)).density();
            k as f64 * eq.variance(&q.quantize(&SphereFunction::z()).unwrap()).unwrap()
        })
        .collect();
    assert!((vals[2] - 1.0).abs() < 0.035);
    assert!((vals[2] - 1.0).abs() < (vals[0] - 1.0).abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dilation_reconstructs_integrals(seed in 0u64..10_000, k in 1usize..6) {
        let p = discretize_povm(&ToeplitzQuantizer::new(k, 0).unwrap());
        let d = naimark_dilate(&p).unwrap();
        let u = random_values(p.len(), seed);
        let a = d.compress(&u).unwrap();
        let b = p.integrate(&u).unwrap();
        prop_assert!(spectral_norm(&(a - b.matrix())) < 1e-10);
        let via = d.q_pairing(&u, &u).unwrap();
        let direct = p.noise_operator(&u).unwrap();
        prop_assert!(spectral_norm(&(via - direct.matrix())) < 1e-9);
    }

    #[test]
    fn pairing_obeys_cauchy_schwarz(seed in 0u64..10_000, k in 1usize..6) {
        let p = discretize_povm(&ToeplitzQuantizer::new(k, 0).unwrap());
        let d = naimark_dilate(&p).unwrap();
        let s = random_values(p.len(), seed);
        let t = random_values(p.len(), seed + 1);
        let state = DensityState::random(k + 1, seed + 2);
        prop_assert!(q_pairing_slack(&d, &s, &t, &state).unwrap() >= -1e-10);
    }

    #[test]
    fn pairing_of_equal_observables_is_positive(seed in 0u64..10_000, k in 1usize..6) {
        let p = discretize_povm(&ToeplitzQuantizer::new(k, 0).unwrap());
        let d = naimark_dilate(&p).unwrap();
        let s = random_values(p.len(), seed);
        let m = d.q_pairing(&s, &s).unwrap();
        let h = HermitianOperator::from_matrix((&m + m.adjoint()) * Complex64::new(0.5, 0.0)).unwrap();
        prop_assert!(h.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn variance_identity_holds_for_smeared_quantizers(seed in 0u64..10_000, t in 0.0..0.5f64) {
        let k = 10;
        let q = heat_quantizer(k, 4, t).unwrap();
        let f = SphereFunction::random(2, &mut ChaCha8Rng::seed_from_u64(seed));
        let state = DensityState::random(k + 1, seed);
        prop_assert!(variance_identity_check(&q, &f, &state).unwrap() <= 1e-10);
    }
}

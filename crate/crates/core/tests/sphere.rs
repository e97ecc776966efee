use std::f64::consts::{PI, TAU};

use approx::assert_abs_diff_eq;
use bt_core::sphere::{parse_function, QuadratureGrid, SphereFunction, SpherePoint};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn coeff_err(a: &SphereFunction, b: &SphereFunction) -> f64 {
    (a - b).coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()))
}

fn random(band: usize, seed: u64) -> SphereFunction {
    SphereFunction::random(band, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn grid_integrates_fourth_moment_of_z() {
    let grid = QuadratureGrid::build(4);
    let samples: Vec<f64> = grid.nodes().iter().map(|p| p.theta.cos().powi(4)).collect();
    assert_abs_diff_eq!(grid.integrate(&samples), 0.2, epsilon = 1e-14);
}

#[test]
fn second_legendre_on_equator() {
    let p = SpherePoint::new(PI / 2.0, 1.3);
    assert_abs_diff_eq!(SphereFunction::legendre(2).evaluate(&p), -0.5, epsilon = 1e-14);
}

#[test]
fn legendre_product_expansion() {
    let lhs = SphereFunction::legendre(1).multiply(&SphereFunction::legendre(2));
    let rhs = &(SphereFunction::legendre(3) * 0.6) + &(SphereFunction::legendre(1) * 0.4);
    assert!(coeff_err(&lhs, &rhs) < 1e-13);
}

#[test]
fn laplacian_of_p2() {
    let p2 = SphereFunction::legendre(2);
    assert!(coeff_err(&p2.laplacian(), &(&p2 * 12.0)) < 1e-13);
}

#[test]
fn heat_flow_of_z_decays_with_first_eigenvalue() {
    let s = 0.37;
    let z = SphereFunction::z();
    let flowed = z.heat_flow(s).unwrap();
    assert!(coeff_err(&flowed, &(&z * (-4.0 * s).exp())) < 1e-15);
    assert!(z.heat_flow(-1.0).is_err());
}

#[test]
fn gradient_pairing_of_legendre_pair() {
    let p1 = SphereFunction::legendre(1);
    let p3 = SphereFunction::legendre(3);
    let lhs = p1.grad_pairing(&SphereFunction::legendre(2));
    let rhs = (&p1 - &p3) * 2.4;
    assert!(coeff_err(&lhs, &rhs) < 1e-12);
}

#[test]
fn coordinate_brackets() {
    let (x, y, z) = (SphereFunction::x(), SphereFunction::y(), SphereFunction::z());
    assert!(coeff_err(&x.poisson_bracket(&y), &(&z * 2.0)) < 1e-13);
    assert!(coeff_err(&y.poisson_bracket(&z), &(&x * 2.0)) < 1e-13);
    assert!(coeff_err(&z.poisson_bracket(&x), &(&y * 2.0)) < 1e-13);
}

#[test]
fn bracket_with_z_is_azimuthal_derivative() {
    let f = random(4, 11);
    let b = SphereFunction::z().poisson_bracket(&f);
    // ∂_φ is the rotation derivative about the z axis
    let expect = f.rotation_derivative([0.0, 0.0, 1.0]) * -2.0;
    assert!(coeff_err(&b, &expect) < 1e-12);
}

#[test]
fn legendre_sup_is_one() {
    for n in [1, 5, 17, 40] {
        let p = SphereFunction::legendre(n);
        let (lo, hi) = p.extrema();
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-9);
        assert!(lo >= -1.0 - 1e-9);
        assert_abs_diff_eq!(p.sup_norm(), 1.0, epsilon = 1e-9);
    }
}

#[test]
fn parsed_expressions_match_constructors() {
    let f = parse_function("x*y + 0.5*z - P2").unwrap();
    let expect = &(&SphereFunction::x().multiply(&SphereFunction::y()) + &(SphereFunction::z() * 0.5))
        - &SphereFunction::legendre(2);
    assert!(coeff_err(&f, &expect) < 1e-14);
    assert!(parse_function("x +").is_err());
}

#[test]
fn projection_recovers_band_limited_samples() {
    let f = random(6, 3);
    let grid = QuadratureGrid::build(12);
    let g = SphereFunction::project(&f.evaluate_on(&grid), &grid, 6).unwrap();
    assert!(coeff_err(&f, &g) < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bracket_is_antisymmetric_and_leibniz(seed in 0u64..1000) {
        let f = random(2, seed);
        let g = random(2, seed + 1);
        let h = random(2, seed + 2);
        prop_assert!(coeff_err(&f.poisson_bracket(&g), &-g.poisson_bracket(&f)) < 1e-12);
        let lhs = f.poisson_bracket(&g.multiply(&h));
        let rhs = &f.poisson_bracket(&g).multiply(&h) + &g.multiply(&f.poisson_bracket(&h));
        prop_assert!(coeff_err(&lhs, &rhs) < 1e-11);
    }

    #[test]
    fn laplacian_is_self_adjoint(seed in 0u64..1000) {
        let f = random(4, seed);
        let g = random(4, seed + 7);
        let a = f.multiply(&g.laplacian()).mean();
        let b = f.laplacian().multiply(&g).mean();
        prop_assert!((a - b).abs() < 1e-11 * (1.0 + a.abs()));
        // Green's identity: ∫ f Δf = ∫ |∇f|²
        let e = f.grad_pairing(&f).mean();
        prop_assert!((f.multiply(&f.laplacian()).mean() - e).abs() < 1e-11 * (1.0 + e));
        prop_assert!(e >= 0.0);
    }

    #[test]
    fn product_evaluates_pointwise(seed in 0u64..1000, theta in 0.0..PI, phi in 0.0..TAU) {
        let f = random(3, seed);
        let g = random(3, seed + 3);
        let p = SpherePoint::new(theta, phi);
        let direct = f.evaluate(&p) * g.evaluate(&p);
        prop_assert!((f.multiply(&g).evaluate(&p) - direct).abs() < 1e-12);
    }

    #[test]
    fn heat_flow_is_a_semigroup(seed in 0u64..1000, s in 0.0..0.5f64, t in 0.0..0.5f64) {
        let f = random(5, seed);
        let a = f.heat_flow(s).unwrap().heat_flow(t).unwrap();
        let b = f.heat_flow(s + t).unwrap();
        prop_assert!(coeff_err(&a, &b) < 1e-13);
    }
}

//! Property tests: AD against the finite-difference oracle, printer/parser
//! inversion on random trees, and generator invariants.

use minlp_select::expr::{classify_curvature, eval, grad, Curvature};
use minlp_select::model::{generate_instance, parse_expr, print_expr, GeneratorSpec, VariableMeta};
use minlp_select::testing::{
    finite_difference_grad, random_expr, random_interior_point, relative_error,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gradient_matches_finite_differences_on_random_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240915);
    let n_vars = 3;
    let mut checked = 0usize;
    let mut failures = 0usize;
    let mut attempts = 0usize;

    while checked < 1000 && attempts < 5000 {
        attempts += 1;
        let e = random_expr(&mut rng, n_vars, 6);
        let point = random_interior_point(&mut rng, n_vars);
        let Ok(value) = eval(&e, &point) else { continue };
        if !value.is_finite() || value.abs() > 1e8 {
            continue;
        }
        let Ok(ad) = grad(&e, &point) else { continue };
        let Some(fd) = finite_difference_grad(&e, &point, 1e-6) else {
            continue;
        };
        checked += 1;
        let worst = ad
            .iter()
            .zip(&fd)
            .map(|(a, f)| relative_error(*a, *f))
            .fold(0.0, f64::max);
        if worst > 1e-6 {
            failures += 1;
        }
    }

    assert_eq!(checked, 1000, "could not evaluate enough random trees");
    // the finite-difference oracle itself degrades on razor-edge samples;
    // at least 99% must agree tightly
    assert!(
        failures <= 10,
        "{failures} of {checked} trees disagreed with the oracle"
    );
}

#[test]
fn eval_and_grad_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let e = random_expr(&mut rng, 2, 5);
        let point = random_interior_point(&mut rng, 2);
        if let Ok(v1) = eval(&e, &point) {
            assert_eq!(v1.to_bits(), eval(&e, &point).unwrap().to_bits());
        }
        if let Ok(g1) = grad(&e, &point) {
            assert_eq!(g1, grad(&e, &point).unwrap());
        }
    }
}

#[test]
fn printer_inverts_parser_on_random_trees() {
    let vars: Vec<VariableMeta> = ["u", "v", "w"]
        .iter()
        .map(|n| VariableMeta::continuous(n, None, None))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..500 {
        let e = random_expr(&mut rng, vars.len(), 5);
        let printed = print_expr(&e, &vars);
        let reparsed = parse_expr(&printed, &vars)
            .unwrap_or_else(|err| panic!("`{printed}` failed to reparse: {err}"));
        assert_eq!(reparsed, e, "printed as `{printed}`");
    }
}

#[test]
fn curvature_is_sound_against_sampling() {
    // sampled midpoint-convexity violations refute convexity claims; a
    // sound classifier never gets refuted
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let n_vars = 2;
    for _ in 0..400 {
        let e = random_expr(&mut rng, n_vars, 4);
        let curvature = classify_curvature(&e);
        if !matches!(curvature, Curvature::Convex | Curvature::Affine) {
            continue;
        }
        for _ in 0..40 {
            let a = random_interior_point(&mut rng, n_vars);
            let b = random_interior_point(&mut rng, n_vars);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let (Ok(fa), Ok(fb), Ok(fm)) = (eval(&e, &a), eval(&e, &b), eval(&e, &mid)) else {
                continue;
            };
            if fa.is_finite() && fb.is_finite() && fm.is_finite() {
                assert!(
                    fm <= 0.5 * (fa + fb) + 1e-7 * (1.0 + fa.abs() + fb.abs()),
                    "{curvature:?} refuted by midpoint sample"
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn generation_is_pure_in_the_seed(seed in 0u64..5000, binaries in 1usize..4, cons in 0usize..5) {
        let spec = GeneratorSpec {
            n_binary: binaries,
            n_constraints: cons,
            seed,
            ..GeneratorSpec::default()
        };
        let a = generate_instance(&spec).unwrap();
        let b = generate_instance(&spec).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn generated_bodies_always_classify_convex(seed in 0u64..5000) {
        let p = generate_instance(&GeneratorSpec { seed, ..GeneratorSpec::default() }).unwrap();
        prop_assert!(p.first_nonconvex_body().is_none());
        prop_assert!(!p.discrete_indices().is_empty());
    }
}

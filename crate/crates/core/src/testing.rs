//! Support for randomized checks: seeded random expression trees and the
//! finite-difference gradient oracle. Used by this crate's property tests
//! and by the acceptance suite; not part of the solver API proper.

use crate::expr::{eval, Expr};
use rand::Rng;

/// Central-difference gradient, the independent oracle for reverse-mode AD.
/// Returns `None` when a probe point leaves the expression's domain.
pub fn finite_difference_grad(e: &Expr, point: &[f64], step: f64) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let mut hi = point.to_vec();
        let mut lo = point.to_vec();
        hi[i] += step;
        lo[i] -= step;
        let (fh, fl) = (eval(e, &hi).ok()?, eval(e, &lo).ok()?);
        if !fh.is_finite() || !fl.is_finite() {
            return None;
        }
        out.push((fh - fl) / (2.0 * step));
    }
    Some(out)
}

/// Random expression tree over `n_vars` variables with depth at most
/// `depth`. Arguments of `log`, `sqrt`, and fractional powers are built
/// positive-at-positive-points so the trees evaluate on `[0.3, 2.5]^n`.
pub fn random_expr(rng: &mut impl Rng, n_vars: usize, depth: usize) -> Expr {
    build(rng, n_vars, depth, false)
}

/// A point in the interior region where [`random_expr`] trees are defined.
pub fn random_interior_point(rng: &mut impl Rng, n_vars: usize) -> Vec<f64> {
    (0..n_vars).map(|_| rng.gen_range(0.3..2.5)).collect()
}

fn build(rng: &mut impl Rng, n_vars: usize, depth: usize, positive: bool) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return leaf(rng, n_vars, positive);
    }
    if positive {
        // positivity-preserving combinators over positive points
        return match rng.gen_range(0..5) {
            0 => Expr::sum(vec![
                build(rng, n_vars, depth - 1, true),
                build(rng, n_vars, depth - 1, true),
            ]),
            1 => Expr::product(vec![
                build(rng, n_vars, depth - 1, true),
                build(rng, n_vars, depth - 1, true),
            ]),
            2 => Expr::exp(damped(build(rng, n_vars, depth - 1, false))),
            3 => Expr::sqrt(build(rng, n_vars, depth - 1, true)),
            _ => Expr::sum(vec![
                Expr::Const(rng.gen_range(0.5..2.0)),
                Expr::sqrt(build(rng, n_vars, depth - 1, true)),
            ]),
        };
    }
    match rng.gen_range(0..8) {
        0 | 1 => {
            let k = rng.gen_range(2..=3);
            Expr::sum((0..k).map(|_| build(rng, n_vars, depth - 1, false)).collect())
        }
        2 => Expr::product(vec![
            build(rng, n_vars, depth - 1, false),
            build(rng, n_vars, depth - 1, false),
        ]),
        3 => {
            let exponent = *[2.0, 3.0, 4.0].get(rng.gen_range(0..3)).unwrap();
            Expr::pow(build(rng, n_vars, depth - 1, false), exponent)
        }
        4 => Expr::neg(build(rng, n_vars, depth - 1, false)),
        5 => Expr::exp(damped(build(rng, n_vars, depth - 1, false))),
        6 => Expr::log(build(rng, n_vars, depth - 1, true)),
        _ => Expr::sqrt(build(rng, n_vars, depth - 1, true)),
    }
}

// keeps exp arguments small enough that values stay finite
fn damped(e: Expr) -> Expr {
    Expr::product(vec![Expr::Const(0.1), e])
}

fn leaf(rng: &mut impl Rng, n_vars: usize, positive: bool) -> Expr {
    if positive {
        if rng.gen_bool(0.5) {
            Expr::Const(rng.gen_range(0.2..2.5))
        } else {
            Expr::Var(rng.gen_range(0..n_vars))
        }
    } else if rng.gen_bool(0.4) {
        Expr::Const(rng.gen_range(-2.5..2.5))
    } else {
        Expr::Var(rng.gen_range(0..n_vars))
    }
}

/// Relative agreement measure used by the AD-vs-FD checks.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

//! Finite-difference gradient checking.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Step size that balances truncation and round-off error for f64
/// central differences on well-scaled problems.
pub const DEFAULT_EPS: f64 = 1e-5;

/// Central-difference gradient of a scalar function at `point`.
///
/// Evaluates `f` twice per coordinate. Fails if any evaluation returns a
/// non-finite value, naming the coordinate that was perturbed.
pub fn finite_diff_gradient<S, F>(mut f: F, point: &[S], eps: S) -> Result<Vec<S>>
where
    S: Scalar,
    F: FnMut(&[S]) -> S,
{
    let two = S::from_f64_lossy(2.0);
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let plus = f(&x);
        x[i] = orig - eps;
        let minus = f(&x);
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFiniteEval { coordinate: i });
        }
        grad.push((plus - minus) / (two * eps));
    }
    Ok(grad)
}

/// Relative error between two gradient entries, floored so near-zero
/// pairs compare absolutely instead of blowing up.
pub fn relative_error<S: Scalar>(a: S, b: S) -> S {
    let floor = S::from_f64_lossy(1e-8);
    let denom = a.abs().max(b.abs()).max(floor);
    (a - b).abs() / denom
}

/// Worst relative error over two gradients of equal length.
pub fn max_relative_error<S: Scalar>(a: &[S], b: &[S]) -> S {
    assert_eq!(a.len(), b.len(), "gradient length mismatch");
    let mut worst = S::zero();
    for (&x, &y) in a.iter().zip(b) {
        worst = worst.max(relative_error(x, y));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quadratic_gradient() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let g = finite_diff_gradient(f, &[3.0], DEFAULT_EPS).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-8, "got {}", g[0]);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = finite_diff_gradient(|_: &[f64]| 42.0, &[1.0, -2.0], DEFAULT_EPS).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn non_finite_eval_names_coordinate() {
        let f = |x: &[f64]| if x[1] > 0.5 { f64::NAN } else { 0.0 };
        let err = finite_diff_gradient(f, &[0.0, 0.5], DEFAULT_EPS).unwrap_err();
        match err {
            crate::error::Error::NonFiniteEval { coordinate } => assert_eq!(coordinate, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn relative_error_floors_near_zero() {
        assert!(relative_error(0.0_f64, 1e-12) < 1e-3);
        assert!((relative_error(2.0_f64, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn max_relative_error_picks_worst() {
        let worst = max_relative_error(&[1.0_f64, 2.0, 3.0], &[1.0, 2.2, 3.0]);
        assert!((worst - 0.2 / 2.2).abs() < 1e-12);
    }

    proptest! {
        // Central differences are exact (to round-off) on polynomials of
        // degree at most two.
        #[test]
        fn quadratic_exactness(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64,
                               x in -2.0..2.0f64) {
            let f = move |p: &[f64]| a * p[0] * p[0] + b * p[0] + c;
            let g = finite_diff_gradient(f, &[x], 1e-4).unwrap();
            let exact = 2.0 * a * x + b;
            prop_assert!(relative_error(g[0], exact) < 1e-6,
                         "fd {} vs exact {}", g[0], exact);
        }
    }
}

//! Minimum-variance unbiased fusion of two correlated estimators.
//!
//! Given estimators A and B of a common quantity C, with error variances
//! `var_a`, `var_b` and error covariance `cov_ab`, the best unbiased
//! linear combination `q1 A + q2 B` (with `q1 + q2 = 1`) has
//!
//! ```text
//! q1 = alpha1 / (alpha1 + alpha2),   alpha1 = var_b - cov_ab,
//! q2 = alpha2 / (alpha1 + alpha2),   alpha2 = var_a - cov_ab.
//! ```
//!
//! This is the same arithmetic a sigmoid gate performs: a gate whose
//! pre-activation equals `ln(alpha2/alpha1)` outputs `alpha2/(alpha1 +
//! alpha2)`, the optimal weight of the second (new) estimate, leaving
//! `alpha1/(alpha1 + alpha2)` on the first via the complement.

use crate::error::{Error, Result};
use crate::numerics::{sigmoid_scalar, SplitMix64};
use crate::scalar::Scalar;

/// Error variances of two estimators and their error covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionProblem<S: Scalar = f64> {
    pub var_a: S,
    pub var_b: S,
    pub cov_ab: S,
}

/// Optimal mixing weights; `q1 + q2 == 1` holds exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionWeights<S: Scalar = f64> {
    pub q1: S,
    pub q2: S,
    pub alpha1: S,
    pub alpha2: S,
}

/// Tolerance below which the two estimators are treated as identical and
/// no unique optimum exists.
const DEGENERACY_TOL: f64 = 1e-12;

/// Closed-form optimal weights. Fails when `var_a - 2 cov_ab + var_b`,
/// the variance of A - B, is below tolerance: then the estimators are
/// indistinguishable and every convex combination performs identically.
pub fn optimal_weights<S: Scalar>(p: &FusionProblem<S>) -> Result<FusionWeights<S>> {
    let alpha1 = p.var_b - p.cov_ab;
    let alpha2 = p.var_a - p.cov_ab;
    let denom = alpha1 + alpha2;
    if denom <= S::from_f64_lossy(DEGENERACY_TOL) {
        return Err(Error::DegenerateFusion);
    }
    let mut q1 = alpha1 / denom;
    let mut q2 = S::one() - q1;
    // One complement is exact only when q1 lands near [0, 1]. Strongly
    // correlated problems push q1 outside that range, where rounding can
    // leave q1 + q2 one ulp off; alternating complements closes the pair
    // within a round or two.
    for _ in 0..8 {
        if q1 + q2 == S::one() {
            break;
        }
        q1 = S::one() - q2;
        if q1 + q2 == S::one() {
            break;
        }
        q2 = S::one() - q1;
    }
    Ok(FusionWeights { q1, q2, alpha1, alpha2 })
}

/// Variance of `q1 A + q2 B - C` for any weights with `q1 + q2 = 1`.
pub fn fused_variance<S: Scalar>(p: &FusionProblem<S>, w: &FusionWeights<S>) -> S {
    let two = S::from_f64_lossy(2.0);
    w.q1 * w.q1 * p.var_a + two * w.q1 * w.q2 * p.cov_ab + w.q2 * w.q2 * p.var_b
}

/// Empirical bias and variance of the fused estimator over `n` draws.
#[derive(Clone, Copy, Debug)]
pub struct MonteCarloReport {
    pub empirical_bias: f64,
    pub empirical_variance: f64,
}

/// Samples C ~ N(0,1) and jointly Gaussian errors with the problem's
/// (co)variances, fuses with the optimal weights, and measures the bias
/// and variance of `fused - C`.
pub fn monte_carlo_fusion_check(
    p: &FusionProblem<f64>,
    n: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if n < 1000 {
        return Err(Error::InvalidConfig {
            name: "n".into(),
            message: format!("{n} draws is too few, need at least 1000"),
        });
    }
    if p.var_a < 0.0 || p.var_b < 0.0 || p.cov_ab * p.cov_ab > p.var_a * p.var_b * (1.0 + 1e-9) {
        return Err(Error::InfeasibleCovariance {
            var_a: p.var_a,
            var_b: p.var_b,
            cov_ab: p.cov_ab,
        });
    }
    let w = optimal_weights(p)?;

    // Cholesky factor of the 2x2 error covariance.
    let l11 = p.var_a.sqrt();
    let l21 = if l11 > 0.0 { p.cov_ab / l11 } else { 0.0 };
    let l22 = (p.var_b - l21 * l21).max(0.0).sqrt();

    let mut rng = SplitMix64::new(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let c = rng.normal();
        let z1 = rng.normal();
        let z2 = rng.normal();
        let a = c + l11 * z1;
        let b = c + l21 * z1 + l22 * z2;
        let err = w.q1 * a + w.q2 * b - c;
        sum += err;
        sum_sq += err * err;
    }
    let mean = sum / n as f64;
    Ok(MonteCarloReport {
        empirical_bias: mean,
        empirical_variance: sum_sq / n as f64 - mean * mean,
    })
}

/// The mixing weight a sigmoid gate with this bias assigns to its
/// transform path at zero input; the carry path gets the complement.
/// Satisfies `gate_bias_to_mix(b) + gate_bias_to_mix(-b) == 1`.
pub fn gate_bias_to_mix<S: Scalar>(bias: S) -> S {
    sigmoid_scalar(bias)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force minimizer of the fused variance over a q1 grid,
    /// independent of the closed form.
    fn grid_search_q1(p: &FusionProblem<f64>) -> f64 {
        let step = 1e-4;
        let mut best_q1 = -1.0;
        let mut best_var = f64::INFINITY;
        let mut k = 0;
        loop {
            let q1 = -1.0 + step * k as f64;
            if q1 > 2.0 {
                break;
            }
            let q2 = 1.0 - q1;
            let var = q1 * q1 * p.var_a + 2.0 * q1 * q2 * p.cov_ab + q2 * q2 * p.var_b;
            if var < best_var {
                best_var = var;
                best_q1 = q1;
            }
            k += 1;
        }
        best_q1
    }

    fn random_feasible(rng: &mut SplitMix64) -> FusionProblem<f64> {
        let var_a = 0.1 + 3.9 * rng.next_f64();
        let var_b = 0.1 + 3.9 * rng.next_f64();
        let rho = 1.8 * rng.next_f64() - 0.9;
        FusionProblem {
            var_a,
            var_b,
            cov_ab: rho * (var_a * var_b).sqrt(),
        }
    }

    #[test]
    fn symmetric_independent_problem_splits_evenly() {
        let w = optimal_weights(&FusionProblem { var_a: 1.0, var_b: 1.0, cov_ab: 0.0 }).unwrap();
        assert_eq!(w.q1, 0.5);
        assert_eq!(w.q2, 0.5);
    }

    #[test]
    fn lower_variance_estimator_gets_larger_weight() {
        let p: FusionProblem = FusionProblem { var_a: 1.0, var_b: 3.0, cov_ab: 0.0 };
        let w = optimal_weights(&p).unwrap();
        assert!((w.q1 - 0.75).abs() < 1e-15);
        assert!((w.q2 - 0.25).abs() < 1e-15);
        assert!((grid_search_q1(&p) - 0.75).abs() < 1e-4);
    }

    #[test]
    fn symmetric_correlated_problem_still_splits_evenly() {
        let p = FusionProblem { var_a: 2.0, var_b: 2.0, cov_ab: 1.0 };
        let w = optimal_weights(&p).unwrap();
        assert_eq!(w.q1, 0.5);
        assert!((grid_search_q1(&p) - 0.5).abs() < 1e-4);
    }

    #[test]
    fn degenerate_problem_rejected() {
        let p = FusionProblem { var_a: 1.0, var_b: 1.0, cov_ab: 1.0 };
        let err = optimal_weights(&p).unwrap_err();
        assert!(matches!(err, Error::DegenerateFusion), "{err}");
        assert!(err.to_string().contains("indistinguishable"));
    }

    #[test]
    fn closed_form_matches_grid_search() {
        let mut rng = SplitMix64::new(0);
        for i in 0..200 {
            let p = random_feasible(&mut rng);
            let w = optimal_weights(&p).unwrap();
            let grid = grid_search_q1(&p);
            assert!(
                (w.q1 - grid).abs() <= 1e-4 + 1e-12,
                "problem {i}: closed form {} vs grid {grid} for {p:?}",
                w.q1
            );
        }
    }

    #[test]
    fn weights_always_sum_to_one_exactly() {
        let mut rng = SplitMix64::new(1);
        for _ in 0..1000 {
            let p = random_feasible(&mut rng);
            let w = optimal_weights(&p).unwrap();
            assert_eq!(w.q1 + w.q2, 1.0);
        }
    }

    #[test]
    fn fused_variance_values() {
        let p = FusionProblem { var_a: 1.0, var_b: 1.0, cov_ab: 0.0 };
        let w = optimal_weights(&p).unwrap();
        assert_eq!(fused_variance(&p, &w), 0.5);

        let keep_a = FusionWeights { q1: 1.0, q2: 0.0, alpha1: 0.0, alpha2: 0.0 };
        let p2 = FusionProblem { var_a: 1.7, var_b: 3.0, cov_ab: 0.4 };
        assert_eq!(fused_variance(&p2, &keep_a), 1.7);

        let p3: FusionProblem = FusionProblem { var_a: 1.0, var_b: 3.0, cov_ab: 0.0 };
        let w3 = optimal_weights(&p3).unwrap();
        let v3 = fused_variance(&p3, &w3);
        assert!((v3 - 0.75).abs() < 1e-15);
        assert!(v3 < 1.0);
    }

    #[test]
    fn optimal_never_worse_than_either_input_for_positive_alphas() {
        let mut rng = SplitMix64::new(2);
        let mut checked = 0;
        while checked < 300 {
            let p = random_feasible(&mut rng);
            let w = optimal_weights(&p).unwrap();
            if w.alpha1 < 0.0 || w.alpha2 < 0.0 {
                continue;
            }
            let v = fused_variance(&p, &w);
            assert!(v <= p.var_a + 1e-12 && v <= p.var_b + 1e-12, "{p:?} gave {v}");
            checked += 1;
        }
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let p = FusionProblem { var_a: 1.0, var_b: 1.0, cov_ab: 0.0 };
        let report = monte_carlo_fusion_check(&p, 1_000_000, 0).unwrap();
        assert!(report.empirical_bias.abs() < 4.0 * (0.5f64 / 1e6).sqrt(), "bias {}", report.empirical_bias);
        assert!((report.empirical_variance - 0.5).abs() < 0.01);

        let p2 = FusionProblem { var_a: 1.0, var_b: 3.0, cov_ab: 0.0 };
        let report2 = monte_carlo_fusion_check(&p2, 1_000_000, 1).unwrap();
        assert!((report2.empirical_variance - 0.75).abs() / 0.75 < 0.02);
    }

    #[test]
    fn perfect_second_estimator_dominates() {
        let p = FusionProblem { var_a: 1.0, var_b: 0.0, cov_ab: 0.0 };
        let w = optimal_weights(&p).unwrap();
        assert_eq!(w.q2, 1.0);
        let report = monte_carlo_fusion_check(&p, 10_000, 2).unwrap();
        assert!(report.empirical_variance < 1e-6, "variance {}", report.empirical_variance);
    }

    #[test]
    fn infeasible_covariance_rejected() {
        let p = FusionProblem { var_a: 1.0, var_b: 1.0, cov_ab: 1.5 };
        assert!(matches!(
            monte_carlo_fusion_check(&p, 10_000, 0),
            Err(Error::InfeasibleCovariance { .. })
        ));
        assert!(matches!(
            monte_carlo_fusion_check(&FusionProblem { var_a: 1.0, var_b: 1.0, cov_ab: 0.0 }, 10, 0),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn gate_bias_mixing_values() {
        assert_eq!(gate_bias_to_mix(0.0), 0.5);

        // A gate whose pre-activation is ln(alpha2/alpha1) with alpha1=1,
        // alpha2=3 weights the transform path 3/4; the carry path gets
        // alpha1/(alpha1+alpha2) = 1/4 through the complement.
        let b = 3.0_f64.ln();
        assert!((gate_bias_to_mix(b) - 0.75).abs() < 1e-12);
        assert!((1.0 - gate_bias_to_mix(b) - 0.25).abs() < 1e-12);

        // The default init bias -1 starts a block at roughly 27% new
        // estimate, 73% carry.
        assert!((gate_bias_to_mix(-1.0_f64) - 0.268_941_421_369_995_1).abs() < 1e-12);
    }

    #[test]
    fn gate_bias_mixing_complements() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..500 {
            let b = 20.0 * rng.next_f64() - 10.0;
            let s = gate_bias_to_mix(b) + gate_bias_to_mix(-b);
            assert!((s - 1.0).abs() < 1e-12, "bias {b}");
        }
    }
}

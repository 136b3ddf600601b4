//! Dense linear algebra, pointwise nonlinearities, deterministic RNG,
//! and a finite-difference gradient oracle.

mod gradcheck;
mod matrix;
mod rng;

pub use gradcheck::{finite_diff_gradient, max_relative_error, relative_error, DEFAULT_EPS};
pub use matrix::{relu, sigmoid, sigmoid_scalar, tanh, Matrix};
pub use rng::SplitMix64;

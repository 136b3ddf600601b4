//! Dense feedforward networks built from skip-connected blocks.
//!
//! The crate implements six block forms (plain, residual, and four gated
//! skip variants), composes them into stages joined by learned
//! projections, and trains them with plain SGD. Around that core sits a
//! diagnostics suite that measures how blocks within a stage refine a
//! shared representation: per-block estimation-error profiles, residual
//! mean checks, lesion sweeps, and within-stage shuffle sweeps. A small
//! closed-form estimator-fusion module connects gate activations to
//! minimum-variance combination of two correlated estimates.
//!
//! All numeric kernels are generic over the scalar type via [`Scalar`];
//! the pipeline (training, diagnostics, file formats) is pinned to `f64`
//! through the aliases below. Everything is seeded and deterministic:
//! identical configuration and seed reproduce outputs bit for bit.

pub mod blocks;
pub mod cli;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod fusion;
pub mod numerics;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use blocks::{
    Activation, BlockParams, BlockVariant, ForwardTrace, Gradients, Network, NetworkSpec,
    StageSpec,
};
pub use numerics::{Matrix, SplitMix64};

/// Row-major dense matrix of 64-bit reals, the working type of the pipeline.
pub type Matrix2D = Matrix<f64>;

//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrix data length {len} does not match {rows}x{cols}")]
    BadDataLength { rows: usize, cols: usize, len: usize },

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid value for {name}: {message}")]
    InvalidConfig { name: String, message: String },

    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("stage index {stage} out of range ({stages} stages)")]
    StageOutOfRange { stage: usize, stages: usize },

    #[error("block index {block} out of range in stage {stage} ({blocks} blocks)")]
    BlockOutOfRange { stage: usize, block: usize, blocks: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("non-finite function value while perturbing coordinate {coordinate}")]
    NonFiniteEval { coordinate: usize },

    #[error("estimators indistinguishable: variance of the difference is below tolerance")]
    DegenerateFusion,

    #[error("infeasible covariance: |{cov_ab}| exceeds sqrt({var_a} * {var_b})")]
    InfeasibleCovariance { var_a: f64, var_b: f64, cov_ab: f64 },

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },

    #[error("stale trace: {0}")]
    StaleTrace(String),

    #[error("no skip path: every stage uses plain blocks")]
    NoSkipPath,

    #[error("stage {stage} has a single block, nothing to shuffle")]
    SingleBlockStage { stage: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("idx file {path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    IdxBadMagic { path: String, expected: u32, found: u32 },

    #[error("idx file {path}: truncated while reading {what}")]
    IdxTruncated { path: String, what: &'static str },

    #[error("idx file {path}: {extra} trailing bytes after payload")]
    IdxTrailing { path: String, extra: usize },

    #[error("idx count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("usage: {0}")]
    Usage(String),
}

//! Width-preserving blocks and their composition into staged networks.
//!
//! A network is an input projection, one or more stages of equal-width
//! blocks, a learned affine projection between consecutive stages, and an
//! output projection producing logits. Every block combines a learned
//! transform `H` of its input `x` with `x` itself according to the chosen
//! [`BlockVariant`], so each stage repeatedly revises one representation
//! instead of building a new one per layer.

mod checkpoint;
pub use checkpoint::{load_checkpoint, save_checkpoint};

use crate::error::{Error, Result};
use crate::numerics::{relu, sigmoid, tanh, Matrix, SplitMix64};
use crate::scalar::Scalar;
use std::fmt;

/// Pointwise nonlinearity applied inside the transform path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply<S: Scalar>(self, m: &Matrix<S>) -> Matrix<S> {
        match self {
            Activation::Tanh => tanh(m),
            Activation::Relu => relu(m),
        }
    }

    /// Derivative expressed through the activation output itself.
    fn derivative_from_output<S: Scalar>(self, h: &Matrix<S>) -> Matrix<S> {
        match self {
            Activation::Tanh => h.map(|v| S::one() - v * v),
            Activation::Relu => h.map(|v| if v > S::zero() { S::one() } else { S::zero() }),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidConfig {
                name: "activation".into(),
                message: format!("unknown activation {other:?}, expected tanh or relu"),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Tanh),
            1 => Ok(Activation::Relu),
            other => Err(Error::Checkpoint(format!("unknown activation code {other}"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Functional form of a block with input `x`, transform `H`, and sigmoid
/// gates `T` (transform gate) and `C` (carry gate):
///
/// | variant  | output                    |
/// |----------|---------------------------|
/// | Plain    | `H`                       |
/// | Residual | `H + x`                   |
/// | TOnly    | `H.T + x`                 |
/// | COnly    | `H + x.C`                 |
/// | Coupled  | `H.T + x.(1 - T)`         |
/// | Full     | `H.T + x.C`               |
///
/// where `.` is the elementwise product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockVariant {
    Plain,
    Residual,
    TOnly,
    COnly,
    Coupled,
    Full,
}

impl BlockVariant {
    pub const ALL: [BlockVariant; 6] = [
        BlockVariant::Plain,
        BlockVariant::Residual,
        BlockVariant::TOnly,
        BlockVariant::COnly,
        BlockVariant::Coupled,
        BlockVariant::Full,
    ];

    /// Whether the form references the transform gate T.
    pub fn has_t(self) -> bool {
        matches!(
            self,
            BlockVariant::TOnly | BlockVariant::Coupled | BlockVariant::Full
        )
    }

    /// Whether the form references the carry gate C.
    pub fn has_c(self) -> bool {
        matches!(self, BlockVariant::COnly | BlockVariant::Full)
    }

    /// Whether the input reaches the output through an identity path.
    pub fn has_skip(self) -> bool {
        !matches!(self, BlockVariant::Plain)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(BlockVariant::Plain),
            "residual" => Ok(BlockVariant::Residual),
            "t-only" => Ok(BlockVariant::TOnly),
            "c-only" => Ok(BlockVariant::COnly),
            "coupled" => Ok(BlockVariant::Coupled),
            "full" => Ok(BlockVariant::Full),
            other => Err(Error::InvalidConfig {
                name: "variant".into(),
                message: format!(
                    "unknown variant {other:?}, expected plain, residual, t-only, c-only, coupled, or full"
                ),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BlockVariant::Plain => "plain",
            BlockVariant::Residual => "residual",
            BlockVariant::TOnly => "t-only",
            BlockVariant::COnly => "c-only",
            BlockVariant::Coupled => "coupled",
            BlockVariant::Full => "full",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BlockVariant::Plain => 0,
            BlockVariant::Residual => 1,
            BlockVariant::TOnly => 2,
            BlockVariant::COnly => 3,
            BlockVariant::Coupled => 4,
            BlockVariant::Full => 5,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        BlockVariant::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::Checkpoint(format!("unknown variant code {code}")))
    }
}

impl fmt::Display for BlockVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One affine map `x W + b` with `b` broadcast over rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine<S: Scalar = f64> {
    pub weight: Matrix<S>,
    pub bias: Matrix<S>,
}

impl<S: Scalar> Affine<S> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(inputs, outputs),
            bias: Matrix::zeros(1, outputs),
        }
    }

    /// Gaussian weights scaled by `weight_std`, constant bias. Weight
    /// entries are drawn row-major, so the draw order is part of the
    /// initialization contract.
    fn init(rng: &mut SplitMix64, inputs: usize, outputs: usize, weight_std: f64, bias: f64) -> Self {
        let weight = Matrix::from_fn(inputs, outputs, |_, _| {
            S::from_f64_lossy(rng.normal() * weight_std)
        });
        let bias = Matrix::from_fn(1, outputs, |_, _| S::from_f64_lossy(bias));
        Self { weight, bias }
    }

    pub fn apply(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        x.matmul(&self.weight)?.broadcast_add_row(&self.bias)
    }

    /// Accumulates parameter gradients into `grads` and returns the
    /// gradient with respect to the input.
    fn backward(&self, input: &Matrix<S>, d_out: &Matrix<S>, grads: &mut Affine<S>) -> Result<Matrix<S>> {
        grads.weight.add_assign(&input.transpose().matmul(d_out)?)?;
        grads.bias.add_assign(&d_out.col_sums())?;
        d_out.matmul(&self.weight.transpose())
    }
}

/// Parameters of one block. Gate affines are present exactly when the
/// variant's form references them. A lesioned block keeps its parameters
/// but acts as the identity map.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams<S: Scalar = f64> {
    pub h: Affine<S>,
    pub t: Option<Affine<S>>,
    pub c: Option<Affine<S>>,
    pub lesioned: bool,
}

impl<S: Scalar> BlockParams<S> {
    fn zeros(variant: BlockVariant, width: usize) -> Self {
        Self {
            h: Affine::zeros(width, width),
            t: variant.has_t().then(|| Affine::zeros(width, width)),
            c: variant.has_c().then(|| Affine::zeros(width, width)),
            lesioned: false,
        }
    }
}

/// One stage: a run of `blocks` equal-width blocks sharing a variant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageSpec {
    pub width: usize,
    pub blocks: usize,
    pub variant: BlockVariant,
}

/// Architecture description; [`Network::new`] turns it into parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub stages: Vec<StageSpec>,
    pub activation: Activation,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidSpec("input_dim must be positive".into()));
        }
        if self.output_dim == 0 {
            return Err(Error::InvalidSpec("output_dim must be positive".into()));
        }
        if self.stages.is_empty() {
            return Err(Error::InvalidSpec("at least one stage required".into()));
        }
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.width == 0 {
                return Err(Error::InvalidSpec(format!("stage {i} has zero width")));
            }
            if stage.blocks == 0 {
                return Err(Error::InvalidSpec(format!("stage {i} has zero blocks")));
            }
        }
        Ok(())
    }

    pub fn total_blocks(&self) -> usize {
        self.stages.iter().map(|s| s.blocks).sum()
    }

    /// True when at least one stage's variant carries the input forward
    /// through an identity path.
    pub fn has_skip(&self) -> bool {
        self.stages.iter().any(|s| s.variant.has_skip())
    }
}

/// All parameters of a network, in a fixed canonical order: input
/// projection, then per stage its blocks (each h, t, c) followed by the
/// projection into the next stage, then the output projection. The same
/// order is used for initialization draws, flattening, optimizer state,
/// and checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams<S: Scalar = f64> {
    pub input_proj: Affine<S>,
    pub stages: Vec<Vec<BlockParams<S>>>,
    pub inter_projs: Vec<Affine<S>>,
    pub output_proj: Affine<S>,
}

/// Gradients mirror the parameter structure entry for entry.
pub type Gradients<S> = NetworkParams<S>;

impl<S: Scalar> NetworkParams<S> {
    /// All-zero parameters of the shape the spec dictates.
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let first = spec.stages[0].width;
        let last = spec.stages[spec.stages.len() - 1].width;
        Self {
            input_proj: Affine::zeros(spec.input_dim, first),
            stages: spec
                .stages
                .iter()
                .map(|s| (0..s.blocks).map(|_| BlockParams::zeros(s.variant, s.width)).collect())
                .collect(),
            inter_projs: spec
                .stages
                .windows(2)
                .map(|w| Affine::zeros(w[0].width, w[1].width))
                .collect(),
            output_proj: Affine::zeros(last, spec.output_dim),
        }
    }

    /// Parameter matrices in canonical order.
    pub fn matrices(&self) -> Vec<&Matrix<S>> {
        let mut out = vec![&self.input_proj.weight, &self.input_proj.bias];
        for (s, stage) in self.stages.iter().enumerate() {
            for block in stage {
                out.push(&block.h.weight);
                out.push(&block.h.bias);
                if let Some(t) = &block.t {
                    out.push(&t.weight);
                    out.push(&t.bias);
                }
                if let Some(c) = &block.c {
                    out.push(&c.weight);
                    out.push(&c.bias);
                }
            }
            if s < self.inter_projs.len() {
                out.push(&self.inter_projs[s].weight);
                out.push(&self.inter_projs[s].bias);
            }
        }
        out.push(&self.output_proj.weight);
        out.push(&self.output_proj.bias);
        out
    }

    /// Mutable view in the same canonical order.
    pub fn matrices_mut(&mut self) -> Vec<&mut Matrix<S>> {
        let mut out = vec![&mut self.input_proj.weight, &mut self.input_proj.bias];
        let n_inter = self.inter_projs.len();
        let mut inter = self.inter_projs.iter_mut();
        for (s, stage) in self.stages.iter_mut().enumerate() {
            for block in stage.iter_mut() {
                out.push(&mut block.h.weight);
                out.push(&mut block.h.bias);
                if let Some(t) = &mut block.t {
                    out.push(&mut t.weight);
                    out.push(&mut t.bias);
                }
                if let Some(c) = &mut block.c {
                    out.push(&mut c.weight);
                    out.push(&mut c.bias);
                }
            }
            if s < n_inter {
                let proj = inter.next().expect("projection per non-final stage");
                out.push(&mut proj.weight);
                out.push(&mut proj.bias);
            }
        }
        out.push(&mut self.output_proj.weight);
        out.push(&mut self.output_proj.bias);
        out
    }

    pub fn param_count(&self) -> usize {
        self.matrices().iter().map(|m| m.len()).sum()
    }
}

/// Per-block activation record from a forward pass.
#[derive(Clone, Debug)]
pub struct BlockTrace<S: Scalar = f64> {
    pub input: Matrix<S>,
    /// Transform output; `None` for a lesioned block.
    pub h: Option<Matrix<S>>,
    pub t: Option<Matrix<S>>,
    pub c: Option<Matrix<S>>,
    pub output: Matrix<S>,
}

#[derive(Clone, Debug)]
pub struct StageTrace<S: Scalar = f64> {
    pub blocks: Vec<BlockTrace<S>>,
}

impl<S: Scalar> StageTrace<S> {
    pub fn output(&self) -> &Matrix<S> {
        &self.blocks.last().expect("stage has blocks").output
    }
}

/// Everything recorded during one forward pass, enough to run the
/// backward pass or inspect per-block activations.
#[derive(Clone, Debug)]
pub struct ForwardTrace<S: Scalar = f64> {
    pub input: Matrix<S>,
    pub stages: Vec<StageTrace<S>>,
    pub logits: Matrix<S>,
}

impl<S: Scalar> ForwardTrace<S> {
    pub fn total_blocks(&self) -> usize {
        self.stages.iter().map(|s| s.blocks.len()).sum()
    }

    pub fn block_output(&self, stage: usize, block: usize) -> &Matrix<S> {
        &self.stages[stage].blocks[block].output
    }
}

/// Activations computed by a single block.
pub struct BlockForward<S: Scalar = f64> {
    pub output: Matrix<S>,
    pub h: Option<Matrix<S>>,
    pub t: Option<Matrix<S>>,
    pub c: Option<Matrix<S>>,
}

fn require_gate<'a, S: Scalar>(gate: &'a Option<Affine<S>>, name: &str) -> Result<&'a Affine<S>> {
    gate.as_ref()
        .ok_or_else(|| Error::InvalidSpec(format!("variant references gate {name} but parameters are missing")))
}

/// Evaluates one block on a batch. Gate activations are returned when
/// the variant uses them; a lesioned block passes its input through.
pub fn forward_block<S: Scalar>(
    variant: BlockVariant,
    activation: Activation,
    params: &BlockParams<S>,
    x: &Matrix<S>,
) -> Result<BlockForward<S>> {
    if params.lesioned {
        return Ok(BlockForward {
            output: x.clone(),
            h: None,
            t: None,
            c: None,
        });
    }
    let h = activation.apply(&params.h.apply(x)?);
    let t = if variant.has_t() {
        Some(sigmoid(&require_gate(&params.t, "T")?.apply(x)?))
    } else {
        None
    };
    let c = if variant.has_c() {
        Some(sigmoid(&require_gate(&params.c, "C")?.apply(x)?))
    } else {
        None
    };
    let output = match variant {
        BlockVariant::Plain => h.clone(),
        BlockVariant::Residual => h.add(x)?,
        BlockVariant::TOnly => h.hadamard(t.as_ref().unwrap())?.add(x)?,
        BlockVariant::COnly => h.add(&x.hadamard(c.as_ref().unwrap())?)?,
        BlockVariant::Coupled => {
            let t = t.as_ref().unwrap();
            let carry = t.map(|v| S::one() - v);
            h.hadamard(t)?.add(&x.hadamard(&carry)?)?
        }
        BlockVariant::Full => h
            .hadamard(t.as_ref().unwrap())?
            .add(&x.hadamard(c.as_ref().unwrap())?)?,
    };
    Ok(BlockForward { output, h: Some(h), t, c })
}

/// Reverse-mode pass for one block. `upstream` is the loss gradient at
/// the block output; parameter gradients accumulate into `grads` and the
/// gradient at the block input is returned.
fn backward_block<S: Scalar>(
    variant: BlockVariant,
    activation: Activation,
    params: &BlockParams<S>,
    trace: &BlockTrace<S>,
    upstream: &Matrix<S>,
    grads: &mut BlockParams<S>,
) -> Result<Matrix<S>> {
    if params.lesioned {
        return Ok(upstream.clone());
    }
    let x = &trace.input;
    let h = trace
        .h
        .as_ref()
        .ok_or_else(|| Error::StaleTrace("missing transform activation".into()))?;

    let d_h = match variant {
        BlockVariant::Plain | BlockVariant::Residual | BlockVariant::COnly => upstream.clone(),
        BlockVariant::TOnly | BlockVariant::Coupled | BlockVariant::Full => {
            upstream.hadamard(trace.t.as_ref().expect("gated trace"))?
        }
    };
    let d_t = match variant {
        BlockVariant::TOnly | BlockVariant::Full => Some(upstream.hadamard(h)?),
        BlockVariant::Coupled => Some(upstream.hadamard(&h.sub(x)?)?),
        _ => None,
    };
    let d_c = if variant.has_c() {
        Some(upstream.hadamard(x)?)
    } else {
        None
    };

    let mut d_x = match variant {
        BlockVariant::Plain => Matrix::zeros(x.rows(), x.cols()),
        BlockVariant::Residual | BlockVariant::TOnly => upstream.clone(),
        BlockVariant::COnly | BlockVariant::Full => {
            upstream.hadamard(trace.c.as_ref().expect("carry trace"))?
        }
        BlockVariant::Coupled => {
            let t = trace.t.as_ref().expect("gated trace");
            upstream.hadamard(&t.map(|v| S::one() - v))?
        }
    };

    let d_pre_h = d_h.hadamard(&activation.derivative_from_output(h))?;
    d_x.add_assign(&params.h.backward(x, &d_pre_h, &mut grads.h)?)?;

    if let Some(d_t) = d_t {
        let t = trace.t.as_ref().expect("gated trace");
        let d_pre = d_t.hadamard(&t.map(|v| v * (S::one() - v)))?;
        let gate = require_gate(&params.t, "T")?;
        let gate_grads = grads.t.as_mut().expect("gradient slot for T");
        d_x.add_assign(&gate.backward(x, &d_pre, gate_grads)?)?;
    }
    if let Some(d_c) = d_c {
        let c = trace.c.as_ref().expect("carry trace");
        let d_pre = d_c.hadamard(&c.map(|v| v * (S::one() - v)))?;
        let gate = require_gate(&params.c, "C")?;
        let gate_grads = grads.c.as_mut().expect("gradient slot for C");
        d_x.add_assign(&gate.backward(x, &d_pre, gate_grads)?)?;
    }
    Ok(d_x)
}

/// A parameterized network: spec plus parameters.
#[derive(Clone, Debug)]
pub struct Network<S: Scalar = f64> {
    spec: NetworkSpec,
    params: NetworkParams<S>,
}

impl<S: Scalar> Network<S> {
    /// Builds and initializes a network from its spec.
    ///
    /// Weights are Gaussian with standard deviation sqrt(2/fan_in) for
    /// transform and projection weights and sqrt(1/fan_in) for gate
    /// weights. Transform-gate biases start at -1 (blocks initially pass
    /// their input through mostly unchanged), carry-gate biases at +1,
    /// all other biases at 0. All draws come from one SplitMix64 stream
    /// seeded with `spec.seed`, in canonical parameter order, so equal
    /// seeds give bitwise-equal networks.
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = SplitMix64::new(spec.seed);
        let first = spec.stages[0].width;
        let input_proj = Affine::init(
            &mut rng,
            spec.input_dim,
            first,
            (2.0 / spec.input_dim as f64).sqrt(),
            0.0,
        );
        let mut stages = Vec::with_capacity(spec.stages.len());
        let mut inter_projs = Vec::new();
        for (s, stage) in spec.stages.iter().enumerate() {
            let w = stage.width;
            let h_std = (2.0 / w as f64).sqrt();
            let gate_std = (1.0 / w as f64).sqrt();
            let mut blocks = Vec::with_capacity(stage.blocks);
            for _ in 0..stage.blocks {
                let h = Affine::init(&mut rng, w, w, h_std, 0.0);
                let t = stage
                    .variant
                    .has_t()
                    .then(|| Affine::init(&mut rng, w, w, gate_std, -1.0));
                let c = stage
                    .variant
                    .has_c()
                    .then(|| Affine::init(&mut rng, w, w, gate_std, 1.0));
                blocks.push(BlockParams { h, t, c, lesioned: false });
            }
            stages.push(blocks);
            if s + 1 < spec.stages.len() {
                let next = spec.stages[s + 1].width;
                inter_projs.push(Affine::init(&mut rng, w, next, (2.0 / w as f64).sqrt(), 0.0));
            }
        }
        let last = spec.stages[spec.stages.len() - 1].width;
        let output_proj = Affine::init(
            &mut rng,
            last,
            spec.output_dim,
            (2.0 / last as f64).sqrt(),
            0.0,
        );
        Ok(Self {
            spec,
            params: NetworkParams {
                input_proj,
                stages,
                inter_projs,
                output_proj,
            },
        })
    }

    /// Reassembles a network from a spec and existing parameters,
    /// checking every shape and gate slot against the spec.
    pub fn from_parts(spec: NetworkSpec, params: NetworkParams<S>) -> Result<Self> {
        spec.validate()?;
        let expect = NetworkParams::<S>::zeros(&spec);
        let got = params.matrices();
        let want = expect.matrices();
        if got.len() != want.len() {
            return Err(Error::InvalidSpec(format!(
                "parameter structure has {} matrices, spec requires {}",
                got.len(),
                want.len()
            )));
        }
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            if g.shape() != w.shape() {
                return Err(Error::InvalidSpec(format!(
                    "parameter matrix {i} has shape {}x{}, spec requires {}x{}",
                    g.rows(),
                    g.cols(),
                    w.rows(),
                    w.cols()
                )));
            }
        }
        for (stage, (blocks, sspec)) in params.stages.iter().zip(&spec.stages).enumerate() {
            for (b, block) in blocks.iter().enumerate() {
                if block.t.is_some() != sspec.variant.has_t() || block.c.is_some() != sspec.variant.has_c() {
                    return Err(Error::InvalidSpec(format!(
                        "stage {stage} block {b}: gate parameters do not match variant {}",
                        sspec.variant
                    )));
                }
            }
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &NetworkParams<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut NetworkParams<S> {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    fn check_stage_block(&self, stage: usize, block: usize) -> Result<()> {
        let stages = self.spec.stages.len();
        if stage >= stages {
            return Err(Error::StageOutOfRange { stage, stages });
        }
        let blocks = self.spec.stages[stage].blocks;
        if block >= blocks {
            return Err(Error::BlockOutOfRange { stage, block, blocks });
        }
        Ok(())
    }

    /// Runs the network on a batch (rows are samples), recording every
    /// intermediate activation.
    pub fn forward(&self, x: &Matrix<S>) -> Result<ForwardTrace<S>> {
        if x.cols() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                op: "network input",
                left_rows: x.rows(),
                left_cols: x.cols(),
                right_rows: x.rows(),
                right_cols: self.spec.input_dim,
            });
        }
        let mut cur = self.params.input_proj.apply(x)?;
        let mut stages = Vec::with_capacity(self.spec.stages.len());
        for (s, stage) in self.spec.stages.iter().enumerate() {
            let mut blocks = Vec::with_capacity(stage.blocks);
            for params in &self.params.stages[s] {
                let fwd = forward_block(stage.variant, self.spec.activation, params, &cur)?;
                let next = fwd.output.clone();
                blocks.push(BlockTrace {
                    input: cur,
                    h: fwd.h,
                    t: fwd.t,
                    c: fwd.c,
                    output: fwd.output,
                });
                cur = next;
            }
            stages.push(StageTrace { blocks });
            if s < self.params.inter_projs.len() {
                cur = self.params.inter_projs[s].apply(&cur)?;
            }
        }
        let logits = self.params.output_proj.apply(&cur)?;
        Ok(ForwardTrace {
            input: x.clone(),
            stages,
            logits,
        })
    }

    /// Forward pass keeping only the logits.
    pub fn logits(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        Ok(self.forward(x)?.logits)
    }

    fn check_trace(&self, trace: &ForwardTrace<S>, loss_grad: &Matrix<S>) -> Result<()> {
        if trace.stages.len() != self.spec.stages.len() {
            return Err(Error::StaleTrace(format!(
                "trace has {} stages, network has {}",
                trace.stages.len(),
                self.spec.stages.len()
            )));
        }
        let batch = trace.input.rows();
        if trace.input.cols() != self.spec.input_dim {
            return Err(Error::StaleTrace(format!(
                "trace input width {} does not match network input {}",
                trace.input.cols(),
                self.spec.input_dim
            )));
        }
        for (s, (st, sspec)) in trace.stages.iter().zip(&self.spec.stages).enumerate() {
            if st.blocks.len() != sspec.blocks {
                return Err(Error::StaleTrace(format!(
                    "stage {s} trace has {} blocks, spec has {}",
                    st.blocks.len(),
                    sspec.blocks
                )));
            }
            for (b, bt) in st.blocks.iter().enumerate() {
                if bt.output.shape() != (batch, sspec.width) {
                    return Err(Error::StaleTrace(format!(
                        "stage {s} block {b} output is {}x{}, expected {}x{}",
                        bt.output.rows(),
                        bt.output.cols(),
                        batch,
                        sspec.width
                    )));
                }
            }
        }
        if loss_grad.shape() != trace.logits.shape() {
            return Err(Error::StaleTrace(format!(
                "loss gradient is {}x{}, logits are {}x{}",
                loss_grad.rows(),
                loss_grad.cols(),
                trace.logits.rows(),
                trace.logits.cols()
            )));
        }
        Ok(())
    }

    /// Gradients of a scalar loss with respect to every parameter, given
    /// the loss gradient at the logits and the trace that produced them.
    pub fn backward(&self, trace: &ForwardTrace<S>, loss_grad: &Matrix<S>) -> Result<Gradients<S>> {
        self.check_trace(trace, loss_grad)?;
        let mut grads = NetworkParams::zeros(&self.spec);
        let last_stage = self.spec.stages.len() - 1;
        let mut d = self.params.output_proj.backward(
            trace.stages[last_stage].output(),
            loss_grad,
            &mut grads.output_proj,
        )?;
        for s in (0..self.spec.stages.len()).rev() {
            let stage = &self.spec.stages[s];
            for b in (0..stage.blocks).rev() {
                d = backward_block(
                    stage.variant,
                    self.spec.activation,
                    &self.params.stages[s][b],
                    &trace.stages[s].blocks[b],
                    &d,
                    &mut grads.stages[s][b],
                )?;
            }
            if s > 0 {
                d = self.params.inter_projs[s - 1].backward(
                    trace.stages[s - 1].output(),
                    &d,
                    &mut grads.inter_projs[s - 1],
                )?;
            }
        }
        self.params.input_proj.backward(&trace.input, &d, &mut grads.input_proj)?;
        Ok(grads)
    }

    /// Copy with one block replaced by the identity map. The original is
    /// untouched; trace shapes are preserved because the block stays in
    /// place.
    pub fn lesion(&self, stage: usize, block: usize) -> Result<Self> {
        let mut out = self.clone();
        out.set_lesioned(stage, block, true)?;
        Ok(out)
    }

    pub fn set_lesioned(&mut self, stage: usize, block: usize, lesioned: bool) -> Result<()> {
        self.check_stage_block(stage, block)?;
        self.params.stages[stage][block].lesioned = lesioned;
        Ok(())
    }

    pub fn is_lesioned(&self, stage: usize, block: usize) -> Result<bool> {
        self.check_stage_block(stage, block)?;
        Ok(self.params.stages[stage][block].lesioned)
    }

    /// Copy with the blocks of one stage reordered: position `i` of the
    /// result holds block `perm[i]` of the original stage.
    pub fn shuffle_stage(&self, stage: usize, perm: &[usize]) -> Result<Self> {
        let stages = self.spec.stages.len();
        if stage >= stages {
            return Err(Error::StageOutOfRange { stage, stages });
        }
        let blocks = self.spec.stages[stage].blocks;
        if perm.len() != blocks {
            return Err(Error::InvalidPermutation(format!(
                "length {} does not match {} blocks",
                perm.len(),
                blocks
            )));
        }
        let mut seen = vec![false; blocks];
        for &p in perm {
            if p >= blocks {
                return Err(Error::InvalidPermutation(format!(
                    "index {p} out of range for {blocks} blocks"
                )));
            }
            if seen[p] {
                return Err(Error::InvalidPermutation(format!("index {p} repeated")));
            }
            seen[p] = true;
        }
        let mut out = self.clone();
        out.params.stages[stage] = perm
            .iter()
            .map(|&p| self.params.stages[stage][p].clone())
            .collect();
        Ok(out)
    }

    /// All parameters as one flat vector in canonical order.
    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_count());
        for m in self.params.matrices() {
            out.extend_from_slice(m.data());
        }
        out
    }

    /// Overwrites all parameters from a flat vector in canonical order.
    pub fn set_from_flat(&mut self, flat: &[S]) -> Result<()> {
        let expected = self.param_count();
        if flat.len() != expected {
            return Err(Error::BadDataLength {
                rows: 1,
                cols: expected,
                len: flat.len(),
            });
        }
        let mut offset = 0;
        for m in self.params.matrices_mut() {
            let n = m.len();
            m.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

//! Measurement harnesses for the refinement view of skip networks:
//! per-block estimation-error profiles, residual mean checks, lesion
//! sweeps, and within-stage shuffle sweeps.

use crate::blocks::Network;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SplitMix64};
use crate::train::evaluate;

/// Mean and standard deviation of one block's estimation error, pooled
/// over samples and units.
#[derive(Clone, Copy, Debug)]
pub struct BlockErrorStats {
    pub mean_error: f64,
    pub std_error: f64,
}

/// Per-stage, per-block estimation-error statistics.
#[derive(Clone, Debug)]
pub struct EstimationProfile {
    pub stages: Vec<Vec<BlockErrorStats>>,
}

impl EstimationProfile {
    /// CSV rows `stage,block,mean_err,std_err`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,block,mean_err,std_err\n");
        for (s, stage) in self.stages.iter().enumerate() {
            for (b, stats) in stage.iter().enumerate() {
                out.push_str(&format!("{s},{b},{},{}\n", stats.mean_error, stats.std_error));
            }
        }
        out
    }
}

fn pooled_stats(errors: &Matrix<f64>) -> BlockErrorStats {
    let n = errors.len() as f64;
    let mut mean = 0.0;
    for &v in errors.data() {
        mean += v;
    }
    mean /= n;
    let mut var = 0.0;
    for &v in errors.data() {
        let d = v - mean;
        var += d * d;
    }
    BlockErrorStats {
        mean_error: mean,
        std_error: (var / n).sqrt(),
    }
}

/// Treats the last block's output of each stage as that stage's settled
/// representation and measures every block's deviation from it.
///
/// For block k of a stage with settled output A, the estimation error is
/// `output_k - A`; its mean and standard deviation are pooled over all
/// samples and units. The last block of each stage is therefore exactly
/// zero in both columns, by construction.
pub fn estimation_error_profile(
    net: &Network<f64>,
    dataset: &Dataset,
    n_samples: usize,
) -> Result<EstimationProfile> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if n_samples == 0 || n_samples > dataset.len() {
        return Err(Error::InvalidConfig {
            name: "n_samples".into(),
            message: format!("{n_samples} samples requested, dataset has {}", dataset.len()),
        });
    }
    let indices: Vec<usize> = (0..n_samples).collect();
    let (inputs, _) = dataset.minibatch(&indices);
    let trace = net.forward(&inputs)?;
    let mut stages = Vec::with_capacity(trace.stages.len());
    for stage in &trace.stages {
        let settled = stage.output();
        let mut blocks = Vec::with_capacity(stage.blocks.len());
        for block in &stage.blocks {
            let errors = block.output.sub(settled)?;
            blocks.push(pooled_stats(&errors));
        }
        stages.push(blocks);
    }
    Ok(EstimationProfile { stages })
}

/// Mean and standard deviation of a block's additive update.
#[derive(Clone, Copy, Debug)]
pub struct ResidualStats {
    pub mean: f64,
    pub std: f64,
}

/// Per-block statistics of `output - input`, the update each block
/// applies on top of its identity path. Only meaningful for networks
/// with at least one skip-carrying stage; a plain-only network is
/// rejected.
pub fn residual_mean_check(net: &Network<f64>, dataset: &Dataset) -> Result<Vec<Vec<ResidualStats>>> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if !net.spec().has_skip() {
        return Err(Error::NoSkipPath);
    }
    let indices: Vec<usize> = (0..dataset.len()).collect();
    let (inputs, _) = dataset.minibatch(&indices);
    let trace = net.forward(&inputs)?;
    let mut out = Vec::with_capacity(trace.stages.len());
    for stage in &trace.stages {
        let mut blocks = Vec::with_capacity(stage.blocks.len());
        for block in &stage.blocks {
            let residual = block.output.sub(&block.input)?;
            let stats = pooled_stats(&residual);
            blocks.push(ResidualStats {
                mean: stats.mean_error,
                std: stats.std_error,
            });
        }
        out.push(blocks);
    }
    Ok(out)
}

/// Accuracy after replacing one block with the identity map.
#[derive(Clone, Copy, Debug)]
pub struct LesionEntry {
    pub stage: usize,
    pub block: usize,
    pub accuracy: f64,
}

/// One lesion evaluation per block, against the intact baseline.
#[derive(Clone, Debug)]
pub struct LesionReport {
    pub baseline: f64,
    pub chance: f64,
    pub entries: Vec<LesionEntry>,
}

impl LesionReport {
    /// CSV rows `stage,block,accuracy,baseline,chance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,block,accuracy,baseline,chance\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.stage, e.block, e.accuracy, self.baseline, self.chance
            ));
        }
        out
    }
}

/// Evaluates the network with each block lesioned in turn. The input
/// network is never mutated.
pub fn lesion_sweep(net: &Network<f64>, dataset: &Dataset) -> Result<LesionReport> {
    let baseline = evaluate(net, dataset)?.accuracy;
    let chance = 1.0 / dataset.num_classes as f64;
    let mut entries = Vec::new();
    for (stage, sspec) in net.spec().stages.iter().enumerate() {
        for block in 0..sspec.blocks {
            let lesioned = net.lesion(stage, block)?;
            let accuracy = evaluate(&lesioned, dataset)?.accuracy;
            entries.push(LesionEntry { stage, block, accuracy });
        }
    }
    Ok(LesionReport { baseline, chance, entries })
}

/// One permutation of a stage's blocks and the resulting accuracy.
#[derive(Clone, Debug)]
pub struct ShuffleEntry {
    pub perm_id: usize,
    pub permutation: Vec<usize>,
    /// Kendall tau distance from the identity order.
    pub tau: usize,
    pub accuracy: f64,
}

/// Shuffle-sweep results; entry 0 is always the identity permutation.
#[derive(Clone, Debug)]
pub struct ShuffleReport {
    pub baseline: f64,
    pub entries: Vec<ShuffleEntry>,
}

impl ShuffleReport {
    /// CSV rows `perm_id,tau,accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("perm_id,tau,accuracy\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.perm_id, e.tau, e.accuracy));
        }
        out
    }
}

/// Evaluates `n_perms` random reorderings of one stage's blocks (plus
/// the identity), recording each permutation's distance from the
/// original order.
pub fn shuffle_sweep(
    net: &Network<f64>,
    stage: usize,
    n_perms: usize,
    seed: u64,
    dataset: &Dataset,
) -> Result<ShuffleReport> {
    let stages = net.spec().stages.len();
    if stage >= stages {
        return Err(Error::StageOutOfRange { stage, stages });
    }
    let blocks = net.spec().stages[stage].blocks;
    if blocks < 2 {
        return Err(Error::SingleBlockStage { stage });
    }
    let baseline = evaluate(net, dataset)?.accuracy;
    let mut entries = vec![ShuffleEntry {
        perm_id: 0,
        permutation: (0..blocks).collect(),
        tau: 0,
        accuracy: baseline,
    }];
    let mut rng = SplitMix64::new(seed);
    for perm_id in 1..=n_perms {
        let perm = rng.permutation(blocks);
        let shuffled = net.shuffle_stage(stage, &perm)?;
        let accuracy = evaluate(&shuffled, dataset)?.accuracy;
        entries.push(ShuffleEntry {
            perm_id,
            tau: kendall_tau_distance(&perm),
            permutation: perm,
            accuracy,
        });
    }
    Ok(ShuffleReport { baseline, entries })
}

/// Number of discordant pairs between `perm` and the identity order:
/// pairs i < j with perm[i] > perm[j].
pub fn kendall_tau_distance(perm: &[usize]) -> usize {
    let mut count = 0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                count += 1;
            }
        }
    }
    count
}

/// Ranks with ties sharing their average rank.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either input has no rank variation.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "rank correlation needs paired data");
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let mean = (n + 1) as f64 / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..n {
        let dx = rx[i] - mean;
        let dy = ry[i] - mean;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return 0.0;
    }
    cov / (var_x * var_y).sqrt()
}

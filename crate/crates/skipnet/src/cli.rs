//! Command-line entry point: flag and config-file handling, subcommand
//! dispatch, CSV and checkpoint emission.

use std::fs;
use std::path::{Path, PathBuf};

use crate::blocks::{
    load_checkpoint, save_checkpoint, BlockVariant, Network, NetworkParams, NetworkSpec, StageSpec,
};
use crate::config::{RunConfig, Task};
use crate::data::{load_idx, make_feature_swap, make_spirals, Dataset};
use crate::diagnostics::{estimation_error_profile, lesion_sweep, shuffle_sweep};
use crate::error::{Error, Result};
use crate::fusion::{fused_variance, monte_carlo_fusion_check, optimal_weights, FusionProblem};
use crate::train::{evaluate, train, TrainConfig};

/// Every random decision derives from the master seed plus a fixed
/// offset per concern, so changing one knob never silently reseeds
/// another.
pub const SEED_DATA: u64 = 0;
pub const SEED_SPLIT: u64 = 1;
pub const SEED_NET: u64 = 2;
pub const SEED_TRAIN: u64 = 3;
pub const SEED_SHUFFLE: u64 = 4;
pub const SEED_MC: u64 = 5;

/// Seeds for independent random streams derived from one master seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_add(stream)
}

const USAGE: &str = "usage: skipnet <subcommand> [--flag value ...]\n\
subcommands: train, eval, profile, lesion, shuffle, compare-variants, fusion-demo\n\
run `skipnet --help` for the full flag list";

const FLAG_DOCS: &[(&str, &str, &str)] = &[
    ("config", "(none)", "key=value file applied before other flags"),
    ("task", "spirals", "dataset: spirals, feature-swap, or idx"),
    ("classes", "3", "spiral arm count"),
    ("n-per-class", "200", "spiral samples per class"),
    ("noise-std", "0.08", "spiral position noise"),
    ("swap-n", "4096", "feature-swap sample count"),
    ("swap-dim", "17", "feature-swap feature count (type bit + features)"),
    ("idx-images", "(none)", "IDX image file, required for task idx"),
    ("idx-labels", "(none)", "IDX label file, required for task idx"),
    ("val-fraction", "0.2", "fraction held out for validation"),
    ("stages", "16x4,16x4", "stage list, WIDTHxBLOCKS comma separated"),
    ("variant", "coupled", "plain, residual, t-only, c-only, coupled, or full"),
    ("activation", "tanh", "block nonlinearity: tanh or relu"),
    ("epochs", "100", "training epochs"),
    ("batch-size", "32", "minibatch size"),
    ("learning-rate", "0.1", "initial SGD learning rate"),
    ("momentum", "0.9", "SGD momentum, in [0, 1)"),
    ("lr-decay", "0.97", "per-epoch learning-rate multiplier"),
    ("seed", "0", "master seed for data, init, and training"),
    ("out-dir", "out", "directory receiving CSVs and checkpoints"),
    ("checkpoint", "OUT_DIR/checkpoint.bin", "checkpoint file path"),
    ("profile-samples", "512", "samples used by `profile` (clamped to dataset size)"),
    ("shuffle-stage", "0", "stage index reordered by `shuffle`"),
    ("shuffle-perms", "50", "permutations sampled per shuffle sweep"),
    ("compare-seeds", "5", "seeds per variant in `compare-variants` (alias: --seeds)"),
];

fn print_help() {
    println!("skipnet: train and dissect small skip-connected classifiers");
    println!();
    println!("{USAGE}");
    println!();
    println!("  train             train a network, write metrics.csv and a checkpoint");
    println!("  eval              report loss/accuracy of a checkpoint on the task data");
    println!("  profile           per-block estimation-error profile -> profile.csv");
    println!("  lesion            accuracy with each block bypassed -> lesion.csv");
    println!("  shuffle           accuracy under block reorderings -> shuffle.csv");
    println!("  compare-variants  train all six block variants at matched parameter");
    println!("                    counts, rank by median validation accuracy -> compare.csv");
    println!("  fusion-demo       closed-form vs Monte Carlo estimator fusion -> fusion.csv");
    println!();
    println!("flags (defaults in parentheses):");
    for (flag, default, doc) in FLAG_DOCS {
        println!("  --{flag:<17} {doc} ({default})");
    }
    println!();
    println!("Flags override config-file values, which override defaults.");
    println!("Reruns with identical settings reproduce output files byte for byte.");
}

/// Runs one subcommand. Returns the process exit status: 0 on success,
/// 2 for usage errors, 1 for everything else.
pub fn run(args: &[String]) -> i32 {
    if args.iter().any(|a| a == "--help" || a == "-h") {
        print_help();
        return 0;
    }
    match dispatch(args) {
        Ok(()) => 0,
        Err(Error::Usage(message)) => {
            eprintln!("error: {message}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(args: &[String]) -> Result<()> {
    let Some(command) = args.first() else {
        return Err(Error::Usage(USAGE.into()));
    };
    let cfg = parse_flags(&args[1..])?;
    match command.as_str() {
        "train" => cmd_train(&cfg),
        "eval" => cmd_eval(&cfg),
        "profile" => cmd_profile(&cfg),
        "lesion" => cmd_lesion(&cfg),
        "shuffle" => cmd_shuffle(&cfg),
        "compare-variants" => cmd_compare(&cfg),
        "fusion-demo" => cmd_fusion_demo(&cfg),
        other => Err(Error::Usage(format!("unknown subcommand {other:?}\n{USAGE}"))),
    }
}

/// Builds the effective config: defaults, then any `--config` files in
/// order, then the remaining flags in order.
fn parse_flags(args: &[String]) -> Result<RunConfig> {
    let mut files = Vec::new();
    let mut pairs = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Usage(format!("unexpected argument {arg:?}")))?;
        let value = args
            .get(i + 1)
            .ok_or_else(|| Error::Usage(format!("flag --{key} needs a value")))?;
        if key == "config" {
            files.push(value.clone());
        } else {
            pairs.push((key.replace('-', "_"), value.clone()));
        }
        i += 2;
    }
    let mut cfg = RunConfig::default();
    for file in &files {
        cfg.load_file(file)?;
    }
    for (key, value) in &pairs {
        cfg.set(key, value).map_err(|e| match e {
            Error::InvalidConfig { name, message } if message == "unknown key" => {
                Error::Usage(format!("unknown flag --{}", name.replace('_', "-")))
            }
            other => other,
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Materializes the configured task's dataset.
pub fn build_dataset(cfg: &RunConfig) -> Result<Dataset> {
    match cfg.task {
        Task::Spirals => make_spirals(
            cfg.n_per_class,
            cfg.classes,
            cfg.noise_std,
            sub_seed(cfg.seed, SEED_DATA),
        ),
        Task::FeatureSwap => {
            make_feature_swap(cfg.swap_n, cfg.swap_dim, sub_seed(cfg.seed, SEED_DATA))
        }
        Task::Idx => load_idx(
            cfg.idx_images.as_deref().expect("validated"),
            cfg.idx_labels.as_deref().expect("validated"),
        ),
    }
}

/// Network shape implied by the config for the given data dimensions.
pub fn network_spec(cfg: &RunConfig, input_dim: usize, output_dim: usize) -> NetworkSpec {
    NetworkSpec {
        input_dim,
        output_dim,
        stages: cfg
            .stages
            .iter()
            .map(|&(width, blocks)| StageSpec { width, blocks, variant: cfg.variant })
            .collect(),
        activation: cfg.activation,
        seed: sub_seed(cfg.seed, SEED_NET),
    }
}

fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        momentum: cfg.momentum,
        lr_decay: cfg.lr_decay,
        seed: sub_seed(cfg.seed, SEED_TRAIN),
    }
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&dir).map_err(|source| Error::File {
        path: cfg.out_dir.clone(),
        source,
    })?;
    Ok(dir)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| Error::File {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    fs::write(path, contents).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

fn split_data(cfg: &RunConfig, data: &Dataset) -> Result<(Dataset, Dataset)> {
    data.split(cfg.val_fraction, sub_seed(cfg.seed, SEED_SPLIT))
}

/// The split diagnostics should score against: the validation split
/// when one exists, otherwise the whole dataset.
fn eval_split(cfg: &RunConfig, data: Dataset) -> Result<(Dataset, &'static str)> {
    if cfg.val_fraction > 0.0 {
        let (_, val) = split_data(cfg, &data)?;
        Ok((val, "validation split"))
    } else {
        Ok((data, "full dataset"))
    }
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let dir = ensure_out_dir(cfg)?;
    let data = build_dataset(cfg)?;
    let (train_set, val_set) = split_data(cfg, &data)?;
    let net = Network::new(network_spec(cfg, data.features(), data.num_classes))?;
    println!(
        "training {} on {} ({} train / {} val samples, {} parameters)",
        cfg.variant,
        cfg.task,
        train_set.len(),
        val_set.len(),
        net.param_count()
    );
    let (net, metrics) = train(net, &train_set, &val_set, &train_config(cfg))?;
    let metrics_path = dir.join("metrics.csv");
    write_file(&metrics_path, &metrics.to_csv())?;
    let ckpt_path = cfg.checkpoint_path();
    save_checkpoint(&net, &ckpt_path)?;
    if let Some(last) = metrics.history.last() {
        println!(
            "epoch {}: train acc {:.4}, val acc {:.4}",
            last.epoch, last.train_acc, last.val_acc
        );
    }
    println!("wrote {} and {}", metrics_path.display(), ckpt_path.display());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let net = load_checkpoint(cfg.checkpoint_path())?;
    let data = build_dataset(cfg)?;
    let (train_set, val_set) = split_data(cfg, &data)?;
    let m = evaluate(&net, &train_set)?;
    println!("train: loss {:.6}, accuracy {:.4} ({} samples)", m.loss, m.accuracy, train_set.len());
    if !val_set.is_empty() {
        let m = evaluate(&net, &val_set)?;
        println!("val:   loss {:.6}, accuracy {:.4} ({} samples)", m.loss, m.accuracy, val_set.len());
    }
    Ok(())
}

fn cmd_profile(cfg: &RunConfig) -> Result<()> {
    let dir = ensure_out_dir(cfg)?;
    let net = load_checkpoint(cfg.checkpoint_path())?;
    let data = build_dataset(cfg)?;
    let n = cfg.profile_samples.min(data.len());
    let profile = estimation_error_profile(&net, &data, n)?;
    let path = dir.join("profile.csv");
    write_file(&path, &profile.to_csv())?;
    println!("profiled {n} samples; wrote {}", path.display());
    Ok(())
}

fn cmd_lesion(cfg: &RunConfig) -> Result<()> {
    let dir = ensure_out_dir(cfg)?;
    let net = load_checkpoint(cfg.checkpoint_path())?;
    let data = build_dataset(cfg)?;
    let (eval_set, split_name) = eval_split(cfg, data)?;
    let report = lesion_sweep(&net, &eval_set)?;
    let path = dir.join("lesion.csv");
    write_file(&path, &report.to_csv())?;
    let worst = report
        .entries
        .iter()
        .min_by(|a, b| a.accuracy.total_cmp(&b.accuracy))
        .expect("networks have at least one block");
    println!(
        "baseline {:.4} on {split_name}; worst lesion stage {} block {} -> {:.4} (chance {:.4})",
        report.baseline, worst.stage, worst.block, worst.accuracy, report.chance
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_shuffle(cfg: &RunConfig) -> Result<()> {
    let dir = ensure_out_dir(cfg)?;
    let net = load_checkpoint(cfg.checkpoint_path())?;
    let data = build_dataset(cfg)?;
    let (eval_set, split_name) = eval_split(cfg, data)?;
    let report = shuffle_sweep(
        &net,
        cfg.shuffle_stage,
        cfg.shuffle_perms,
        sub_seed(cfg.seed, SEED_SHUFFLE),
        &eval_set,
    )?;
    let path = dir.join("shuffle.csv");
    write_file(&path, &report.to_csv())?;
    let worst = report
        .entries
        .iter()
        .min_by(|a, b| a.accuracy.total_cmp(&b.accuracy))
        .expect("sweep includes the identity");
    println!(
        "baseline {:.4} on {split_name}; {} permutations of stage {}; worst {:.4} at tau {}",
        report.baseline,
        report.entries.len() - 1,
        cfg.shuffle_stage,
        worst.accuracy,
        worst.tau
    );
    println!("wrote {}", path.display());
    Ok(())
}

/// One variant's matched-width comparison result.
#[derive(Clone, Debug)]
pub struct VariantOutcome {
    pub variant: BlockVariant,
    /// Stage widths after scaling for parameter parity.
    pub widths: Vec<usize>,
    pub params: usize,
    /// Final validation accuracy per seed.
    pub accuracies: Vec<f64>,
    pub median: f64,
}

fn param_count_for(cfg: &RunConfig, variant: BlockVariant, widths: &[usize], input_dim: usize, output_dim: usize) -> usize {
    let spec = NetworkSpec {
        input_dim,
        output_dim,
        stages: widths
            .iter()
            .zip(&cfg.stages)
            .map(|(&width, &(_, blocks))| StageSpec { width, blocks, variant })
            .collect(),
        activation: cfg.activation,
        seed: 0,
    };
    NetworkParams::<f64>::zeros(&spec).param_count()
}

/// Scales stage widths so `variant` lands within 5% of the parameter
/// count an ungated network has at the configured widths. Gated
/// variants shrink; Plain and Residual keep their widths.
pub fn parity_widths(
    cfg: &RunConfig,
    variant: BlockVariant,
    input_dim: usize,
    output_dim: usize,
) -> Result<(Vec<usize>, usize)> {
    let base_widths: Vec<usize> = cfg.stages.iter().map(|&(w, _)| w).collect();
    let target = param_count_for(cfg, BlockVariant::Plain, &base_widths, input_dim, output_dim);
    let count = |widths: &[usize]| param_count_for(cfg, variant, widths, input_dim, output_dim);

    // Uniform scale first: scan scalings of the first stage width,
    // carrying the other stages proportionally.
    let w0 = base_widths[0];
    let mut best: Option<(Vec<usize>, usize)> = None;
    for candidate in 1..=2 * w0 {
        let widths: Vec<usize> = base_widths
            .iter()
            .map(|&w| ((w * candidate + w0 / 2) / w0).max(1))
            .collect();
        let params = count(&widths);
        let better = match &best {
            Some((_, p)) => params.abs_diff(target) < p.abs_diff(target),
            None => true,
        };
        if better {
            best = Some((widths, params));
        }
    }
    let (mut widths, mut params) = best.expect("candidate range is non-empty");

    // Uniform steps are coarse (one width step moves every stage), so
    // refine one stage at a time until no single-stage nudge improves
    // parity. The gap shrinks on every accepted step, so this stops.
    loop {
        let mut improved = false;
        for stage in 0..widths.len() {
            for delta in [-1i64, 1] {
                let w = widths[stage] as i64 + delta;
                if w < 1 {
                    continue;
                }
                let mut cand = widths.clone();
                cand[stage] = w as usize;
                let p = count(&cand);
                if p.abs_diff(target) < params.abs_diff(target) {
                    widths = cand;
                    params = p;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }

    if params.abs_diff(target) as f64 > 0.05 * target as f64 {
        return Err(Error::InvalidSpec(format!(
            "no width of {variant} lands within 5% of {target} parameters (closest: {params})"
        )));
    }
    Ok((widths, params))
}

/// Trains every block variant at matched parameter counts over several
/// seeds and ranks them by median validation accuracy.
pub fn compare_variants(cfg: &RunConfig) -> Result<Vec<VariantOutcome>> {
    if cfg.val_fraction <= 0.0 {
        return Err(Error::InvalidConfig {
            name: "val_fraction".into(),
            message: "compare-variants needs a validation split".into(),
        });
    }
    let probe = build_dataset(cfg)?;
    let (input_dim, output_dim) = (probe.features(), probe.num_classes);
    drop(probe);

    let mut outcomes = Vec::new();
    for variant in BlockVariant::ALL {
        let (widths, params) = parity_widths(cfg, variant, input_dim, output_dim)?;
        let mut accuracies = Vec::with_capacity(cfg.compare_seeds);
        for run in 0..cfg.compare_seeds {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = cfg.seed.wrapping_add(10 * run as u64);
            run_cfg.variant = variant;
            run_cfg.stages = widths
                .iter()
                .zip(&cfg.stages)
                .map(|(&w, &(_, blocks))| (w, blocks))
                .collect();
            let data = build_dataset(&run_cfg)?;
            let (train_set, val_set) = split_data(&run_cfg, &data)?;
            let net = Network::new(network_spec(&run_cfg, input_dim, output_dim))?;
            let (_, metrics) = train(net, &train_set, &val_set, &train_config(&run_cfg))?;
            accuracies.push(metrics.accuracy);
        }
        let median = median(&accuracies);
        outcomes.push(VariantOutcome { variant, widths, params, accuracies, median });
    }
    outcomes.sort_by(|a, b| b.median.total_cmp(&a.median));
    Ok(outcomes)
}

fn median(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// CSV rows `variant,widths,params,median_val_acc,min_val_acc,max_val_acc`,
/// ranked by median.
pub fn compare_csv(outcomes: &[VariantOutcome]) -> String {
    let mut out = String::from("variant,widths,params,median_val_acc,min_val_acc,max_val_acc\n");
    for o in outcomes {
        let min = o.accuracies.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = o.accuracies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let widths = o
            .widths
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join("/");
        out.push_str(&format!("{},{widths},{},{},{min},{max}\n", o.variant, o.params, o.median));
    }
    out
}

fn cmd_compare(cfg: &RunConfig) -> Result<()> {
    let dir = ensure_out_dir(cfg)?;
    println!(
        "training 6 variants x {} seeds on {} ({} epochs each)",
        cfg.compare_seeds, cfg.task, cfg.epochs
    );
    let outcomes = compare_variants(cfg)?;
    let path = dir.join("compare.csv");
    write_file(&path, &compare_csv(&outcomes))?;
    println!("{:<10} {:>8} {:>16}", "variant", "params", "median val acc");
    for o in &outcomes {
        println!("{:<10} {:>8} {:>16.4}", o.variant.to_string(), o.params, o.median);
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Representative fusion problems for the demo table: equal and unequal
/// variances, correlated pairs, and a near-redundant pair.
const DEMO_PROBLEMS: &[(f64, f64, f64)] = &[
    (1.0, 1.0, 0.0),
    (1.0, 3.0, 0.0),
    (2.0, 2.0, 1.0),
    (1.0, 0.25, 0.1),
    (4.0, 1.0, -0.5),
    (0.5, 0.45, 0.3),
];

const DEMO_MC_DRAWS: usize = 100_000;

fn cmd_fusion_demo(cfg: &RunConfig) -> Result<()> {
    let dir = ensure_out_dir(cfg)?;
    let mut csv = String::from("var_a,var_b,cov_ab,q1,fused_var,mc_var\n");
    for (row, &(var_a, var_b, cov_ab)) in DEMO_PROBLEMS.iter().enumerate() {
        let problem = FusionProblem { var_a, var_b, cov_ab };
        let weights = optimal_weights(&problem)?;
        let fused = fused_variance(&problem, &weights);
        let mc = monte_carlo_fusion_check(
            &problem,
            DEMO_MC_DRAWS,
            sub_seed(cfg.seed, SEED_MC).wrapping_add(row as u64),
        )?;
        csv.push_str(&format!(
            "{var_a},{var_b},{cov_ab},{},{fused},{}\n",
            weights.q1, mc.empirical_variance
        ));
    }
    print!("{csv}");
    let path = dir.join("fusion.csv");
    write_file(&path, &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(args: &[&str]) -> Vec<String> {
        args.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn flags_override_defaults() {
        let cfg = parse_flags(&strings(&[
            "--learning-rate", "0.05",
            "--variant", "full",
            "--stages", "8x2",
        ]))
        .unwrap();
        assert_eq!(cfg.learning_rate, 0.05);
        assert_eq!(cfg.variant, BlockVariant::Full);
        assert_eq!(cfg.stages, vec![(8, 2)]);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        std::fs::write(&file, "learning_rate = 0.05\nepochs = 3\n").unwrap();
        let cfg = parse_flags(&strings(&[
            "--config", file.to_str().unwrap(),
            "--learning-rate", "0.1",
        ]))
        .unwrap();
        assert_eq!(cfg.learning_rate, 0.1);
        assert_eq!(cfg.epochs, 3);
    }

    #[test]
    fn usage_errors_are_distinguished() {
        assert!(matches!(
            parse_flags(&strings(&["--no-such-flag", "1"])),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            parse_flags(&strings(&["--seed"])),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            parse_flags(&strings(&["stray"])),
            Err(Error::Usage(_))
        ));
        // A bad value is a config error, not a usage error.
        assert!(matches!(
            parse_flags(&strings(&["--momentum", "1.5"])),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn help_lists_every_config_key() {
        let keys: Vec<&str> = FLAG_DOCS.iter().map(|(k, _, _)| *k).collect();
        let mut cfg = RunConfig::default();
        for key in keys {
            if key == "config" {
                continue;
            }
            // Every documented flag must map to a real config key.
            let probe = cfg.set(&key.replace('-', "_"), "");
            if let Err(Error::InvalidConfig { message, .. }) = &probe {
                assert_ne!(message, "unknown key", "--{key} has no config field");
            }
        }
    }

    #[test]
    fn seed_streams_are_distinct() {
        let streams = [SEED_DATA, SEED_SPLIT, SEED_NET, SEED_TRAIN, SEED_SHUFFLE, SEED_MC];
        for (i, &a) in streams.iter().enumerate() {
            for &b in &streams[i + 1..] {
                assert_ne!(sub_seed(7, a), sub_seed(7, b));
            }
        }
    }

    #[test]
    fn parity_widths_shrink_gated_variants() {
        let mut cfg = RunConfig::default();
        cfg.stages = vec![(16, 4), (16, 4)];
        let base = param_count_for(&cfg, BlockVariant::Plain, &[16, 16], 2, 3);

        for variant in BlockVariant::ALL {
            let (widths, params) = parity_widths(&cfg, variant, 2, 3).unwrap();
            let gap = params.abs_diff(base) as f64 / base as f64;
            assert!(gap <= 0.05, "{variant}: {params} vs {base}");
            if variant.has_t() || variant.has_c() {
                assert!(widths[0] < 16, "{variant} should shrink, got {widths:?}");
            } else {
                assert_eq!(widths, vec![16, 16]);
            }
        }

        // Two gates shrink harder than one.
        let (full_w, _) = parity_widths(&cfg, BlockVariant::Full, 2, 3).unwrap();
        let (coupled_w, _) = parity_widths(&cfg, BlockVariant::Coupled, 2, 3).unwrap();
        assert!(full_w[0] < coupled_w[0]);
    }

    #[test]
    fn median_handles_even_and_odd_counts() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn build_dataset_honors_task() {
        let mut cfg = RunConfig::default();
        cfg.set("task", "feature-swap").unwrap();
        cfg.set("swap_n", "64").unwrap();
        let ds = build_dataset(&cfg).unwrap();
        assert_eq!(ds.len(), 64);
        assert_eq!(ds.features(), 17);
        assert_eq!(ds.num_classes, 2);
    }

    #[test]
    fn network_spec_uses_derived_seed() {
        let mut cfg = RunConfig::default();
        cfg.seed = 100;
        let spec = network_spec(&cfg, 2, 3);
        assert_eq!(spec.seed, sub_seed(100, SEED_NET));
        assert_eq!(spec.input_dim, 2);
        assert_eq!(spec.output_dim, 3);
        assert_eq!(spec.stages.len(), 2);
    }
}

//! Run configuration: flat key=value settings shared by every CLI
//! subcommand, loadable from a file and overridable by flags.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::blocks::{Activation, BlockVariant};
use crate::error::{Error, Result};

/// Which dataset a run trains and evaluates on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Task {
    /// Synthetic interleaved spirals, one arm per class.
    Spirals,
    /// Synthetic binary task whose informative features depend on a
    /// per-sample type bit.
    FeatureSwap,
    /// Images and labels loaded from a pair of IDX files.
    Idx,
}

impl Task {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "spirals" => Ok(Task::Spirals),
            "feature-swap" => Ok(Task::FeatureSwap),
            "idx" => Ok(Task::Idx),
            other => Err(Error::InvalidConfig {
                name: "task".into(),
                message: format!("unknown task {other:?}, expected spirals, feature-swap, or idx"),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Task::Spirals => "spirals",
            Task::FeatureSwap => "feature-swap",
            Task::Idx => "idx",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// All settings for a run. Field names double as config-file keys;
/// flags use the same names with `-` instead of `_`.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub task: Task,
    pub classes: usize,
    pub n_per_class: usize,
    pub noise_std: f64,
    pub swap_n: usize,
    pub swap_dim: usize,
    pub idx_images: Option<String>,
    pub idx_labels: Option<String>,
    pub val_fraction: f64,
    pub stages: Vec<(usize, usize)>,
    pub variant: BlockVariant,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub lr_decay: f64,
    pub seed: u64,
    pub out_dir: String,
    pub checkpoint: Option<String>,
    pub profile_samples: usize,
    pub shuffle_stage: usize,
    pub shuffle_perms: usize,
    pub compare_seeds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Spirals,
            classes: 3,
            n_per_class: 200,
            noise_std: 0.08,
            swap_n: 4096,
            swap_dim: 17,
            idx_images: None,
            idx_labels: None,
            val_fraction: 0.2,
            stages: vec![(16, 4), (16, 4)],
            variant: BlockVariant::Coupled,
            activation: Activation::Tanh,
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.1,
            momentum: 0.9,
            lr_decay: 0.97,
            seed: 0,
            out_dir: "out".into(),
            checkpoint: None,
            profile_samples: 512,
            shuffle_stage: 0,
            shuffle_perms: 50,
            compare_seeds: 5,
        }
    }
}

fn parse_num<T: std::str::FromStr>(name: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::InvalidConfig {
        name: name.into(),
        message: format!("cannot parse {value:?}"),
    })
}

/// Parses a stage list like `16x4,16x4` into (width, blocks) pairs.
pub fn parse_stages(value: &str) -> Result<Vec<(usize, usize)>> {
    let bad = |message: String| Error::InvalidConfig { name: "stages".into(), message };
    let mut stages = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        let (w, b) = part
            .split_once('x')
            .ok_or_else(|| bad(format!("expected WIDTHxBLOCKS, got {part:?}")))?;
        let width: usize = w
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad width in {part:?}")))?;
        let blocks: usize = b
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad block count in {part:?}")))?;
        stages.push((width, blocks));
    }
    if stages.is_empty() {
        return Err(bad("at least one stage is required".into()));
    }
    Ok(stages)
}

/// Formats a stage list in the same `16x4,16x4` syntax `parse_stages`
/// accepts.
pub fn format_stages(stages: &[(usize, usize)]) -> String {
    stages
        .iter()
        .map(|&(w, b)| format!("{w}x{b}"))
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Sets one field from its string form. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "task" => self.task = Task::parse(value)?,
            "classes" => self.classes = parse_num(key, value)?,
            "n_per_class" => self.n_per_class = parse_num(key, value)?,
            "noise_std" => self.noise_std = parse_num(key, value)?,
            "swap_n" => self.swap_n = parse_num(key, value)?,
            "swap_dim" => self.swap_dim = parse_num(key, value)?,
            "idx_images" => self.idx_images = Some(value.to_string()),
            "idx_labels" => self.idx_labels = Some(value.to_string()),
            "val_fraction" => self.val_fraction = parse_num(key, value)?,
            "stages" => self.stages = parse_stages(value)?,
            "variant" => self.variant = BlockVariant::parse(value)?,
            "activation" => self.activation = Activation::parse(value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "momentum" => self.momentum = parse_num(key, value)?,
            "lr_decay" => self.lr_decay = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "out_dir" => self.out_dir = value.to_string(),
            "checkpoint" => self.checkpoint = Some(value.to_string()),
            "profile_samples" => self.profile_samples = parse_num(key, value)?,
            "shuffle_stage" => self.shuffle_stage = parse_num(key, value)?,
            "shuffle_perms" => self.shuffle_perms = parse_num(key, value)?,
            // `seeds` is the short form used on the compare-variants
            // command line.
            "compare_seeds" | "seeds" => self.compare_seeds = parse_num(key, value)?,
            other => {
                return Err(Error::InvalidConfig {
                    name: other.into(),
                    message: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    /// Checks bounds on every field; error messages name the offending
    /// key.
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, message: String| {
            Err(Error::InvalidConfig { name: name.into(), message })
        };
        if self.classes < 2 {
            return bad("classes", format!("need at least 2, got {}", self.classes));
        }
        if self.n_per_class == 0 {
            return bad("n_per_class", "must be positive".into());
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return bad("noise_std", format!("must be finite and non-negative, got {}", self.noise_std));
        }
        if self.swap_n == 0 {
            return bad("swap_n", "must be positive".into());
        }
        if self.swap_dim < 4 {
            return bad("swap_dim", format!("need at least 4 features, got {}", self.swap_dim));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction", format!("must be in [0, 1), got {}", self.val_fraction));
        }
        for &(width, blocks) in &self.stages {
            if width == 0 || blocks == 0 {
                return bad("stages", format!("zero width or block count in {}", format_stages(&self.stages)));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive".into());
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad("learning_rate", format!("must be positive and finite, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", format!("must be in [0, 1), got {}", self.momentum));
        }
        if !self.lr_decay.is_finite() || self.lr_decay <= 0.0 || self.lr_decay > 1.0 {
            return bad("lr_decay", format!("must be in (0, 1], got {}", self.lr_decay));
        }
        if self.profile_samples == 0 {
            return bad("profile_samples", "must be positive".into());
        }
        if self.shuffle_perms == 0 {
            return bad("shuffle_perms", "must be positive".into());
        }
        if self.compare_seeds == 0 {
            return bad("compare_seeds", "must be positive".into());
        }
        if self.task == Task::Idx {
            if self.idx_images.is_none() {
                return bad("idx_images", "required when task = idx".into());
            }
            if self.idx_labels.is_none() {
                return bad("idx_labels", "required when task = idx".into());
            }
        }
        Ok(())
    }

    /// Checkpoint location: explicit setting, or `checkpoint.bin` inside
    /// the output directory.
    pub fn checkpoint_path(&self) -> PathBuf {
        match &self.checkpoint {
            Some(path) => PathBuf::from(path),
            None => Path::new(&self.out_dir).join("checkpoint.bin"),
        }
    }

    /// Applies `key = value` lines from a config file. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn load_file(&mut self, path: &str) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_string(),
            source,
        })?;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::ConfigParse {
                line,
                message: format!("expected key = value, got {trimmed:?}"),
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::ConfigParse { line, message: e.to_string() })?;
        }
        Ok(())
    }
}

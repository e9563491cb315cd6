//! Training runner: loads a dataset directory, preprocesses and encodes
//! every sample, splits train/eval, fits the network, and writes the
//! checkpoint plus an optional metrics file.

use std::path::Path;

use super::{log_resolved, parse_as, unknown_key, Resolve};
use crate::dataset::io::{list_ids, load_sample};
use crate::dataset::{encode_labels, split};
use crate::error::{FsgError, FsgResult};
use crate::net::checkpoint::save_checkpoint;
use crate::net::{build_network, default_layers, train_with, InputMode, NetworkConfig, TrainSample};
use crate::preprocess::{preprocess, PreprocessParams, INPUT_SIDE};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: InputMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Fraction held out for eval; 0 trains on everything and evaluates on
    /// the train fold.
    pub eval_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: InputMode::Fsg,
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 7,
            eval_fraction: 0.2,
        }
    }
}

const KEYS: &[&str] = &[
    "mode",
    "epochs",
    "batch_size",
    "learning_rate",
    "seed",
    "eval_fraction",
];

impl Resolve for TrainConfig {
    fn set(&mut self, key: &str, value: &str) -> FsgResult<()> {
        match key {
            "mode" => self.mode = InputMode::parse(value)?,
            "epochs" => self.epochs = parse_as(key, value)?,
            "batch_size" => self.batch_size = parse_as(key, value)?,
            "learning_rate" => self.learning_rate = parse_as(key, value)?,
            "seed" => self.seed = parse_as(key, value)?,
            "eval_fraction" => self.eval_fraction = parse_as(key, value)?,
            _ => return Err(unknown_key(key, KEYS)),
        }
        Ok(())
    }

    fn validate(&self) -> FsgResult<()> {
        if self.batch_size == 0 {
            return Err(FsgError::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.eval_fraction) {
            return Err(FsgError::Config(format!(
                "eval_fraction must be in [0, 1), got {}",
                self.eval_fraction
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(FsgError::Config(format!(
                "learning_rate must be finite and ≥ 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub n_train: usize,
    pub n_eval: usize,
    pub param_count: usize,
    pub best_epoch: usize,
    pub best_eval_loss: f64,
    pub final_train_loss: f64,
}

/// Trains on every sample under `data_dir` and writes the checkpoint to
/// `out_checkpoint`; per-epoch losses go to standard output and, together
/// with the resolved config, into `metrics_out` when given.
pub fn train(
    data_dir: &Path,
    out_checkpoint: &Path,
    metrics_out: Option<&Path>,
    cfg: &TrainConfig,
) -> FsgResult<TrainSummary> {
    cfg.validate()?;
    log_resolved(
        "train",
        &serde_json::json!({
            "data_dir": data_dir.display().to_string(),
            "out_checkpoint": out_checkpoint.display().to_string(),
            "metrics_out": metrics_out.map(|p| p.display().to_string()),
            "mode": cfg.mode.name(),
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "learning_rate": cfg.learning_rate,
            "seed": cfg.seed,
            "eval_fraction": cfg.eval_fraction,
        }),
    );

    let ids = list_ids(data_dir)?;
    if ids.is_empty() {
        return Err(FsgError::Data(format!(
            "no samples found in {}",
            data_dir.display()
        )));
    }
    let mut set = Vec::with_capacity(ids.len());
    for id in &ids {
        let sample = load_sample(data_dir, id)?;
        if sample.frame.height() != INPUT_SIDE || sample.frame.width() != INPUT_SIDE {
            return Err(FsgError::Data(format!(
                "sample {id}: training frames must be {INPUT_SIDE}×{INPUT_SIDE} so labels \
                 align with the network input, got {}×{}",
                sample.frame.height(),
                sample.frame.width()
            )));
        }
        let (input, _crop) = preprocess(&sample.frame, None, None, &PreprocessParams::default())?;
        let target = encode_labels(&sample)?.into_tensor();
        set.push(TrainSample { input, target });
    }

    // the shuffle split needs a real corpus; tiny sets train on everything
    let eval_idx = if cfg.eval_fraction > 0.0 && set.len() >= 10 {
        split(set.len(), cfg.eval_fraction, cfg.seed)?.1
    } else {
        Vec::new()
    };
    let mut is_eval = vec![false; set.len()];
    for &i in &eval_idx {
        is_eval[i] = true;
    }
    let mut train_set = Vec::with_capacity(set.len() - eval_idx.len());
    let mut eval_set = Vec::with_capacity(eval_idx.len());
    for (i, s) in set.into_iter().enumerate() {
        if is_eval[i] {
            eval_set.push(s);
        } else {
            train_set.push(s);
        }
    }

    let net_cfg = NetworkConfig {
        layers: default_layers(),
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        seed: cfg.seed,
    };
    let mut net = build_network(&net_cfg, cfg.mode)?;
    println!(
        "[train] {} parameters, {} train / {} eval samples",
        net.param_count(),
        train_set.len(),
        eval_set.len()
    );
    println!("epoch |  train loss |   eval loss");
    let report = train_with(&mut net, &train_set, &eval_set, &net_cfg, |s| {
        println!("{:5} | {:11.6} | {:11.6}", s.epoch, s.train_loss, s.eval_loss);
    })?;

    save_checkpoint(&net, out_checkpoint)?;
    println!("[train] checkpoint written to {}", out_checkpoint.display());

    if let Some(mpath) = metrics_out {
        let metrics = serde_json::json!({
            "mode": cfg.mode.name(),
            "epochs_requested": cfg.epochs,
            "batch_size": cfg.batch_size,
            "learning_rate": cfg.learning_rate,
            "seed": cfg.seed,
            "eval_fraction": cfg.eval_fraction,
            "param_count": net.param_count(),
            "n_train": train_set.len(),
            "n_eval": eval_set.len(),
            "best_epoch": report.best_epoch,
            "best_eval_loss": report.best_eval_loss,
            "epochs": report.epochs,
        });
        let text = serde_json::to_string_pretty(&metrics)?;
        std::fs::write(mpath, text + "\n").map_err(|e| FsgError::io(mpath.display(), e))?;
    }

    Ok(TrainSummary {
        n_train: train_set.len(),
        n_eval: eval_set.len(),
        param_count: net.param_count(),
        best_epoch: report.best_epoch,
        best_eval_loss: report.best_eval_loss,
        final_train_loss: report.epochs.last().map(|e| e.train_loss).unwrap_or(f64::NAN),
    })
}

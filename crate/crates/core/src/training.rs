//! Adam training loop with step decay, validation-based checkpoint selection,
//! and corpus evaluation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::coretypes::{CueKind, PredictionY, Scene};
use crate::error::{Error, Result};
use crate::masking::{apply_eval_patterns, apply_train_masking, restrict_cues, substream, EvalPattern, MaskPolicy};
use crate::metrics::{MetricReport, SceneMetrics};
use crate::model::Model;
use crate::nnkernel::{Adam, Gradients};

const DOMAIN_SHUFFLE: u64 = 0x5_4FF1E;
const DOMAIN_MASK: u64 = 0x3A5C;
const DOMAIN_EVAL: u64 = 0xE7A1;

/// How the cue menu is handled during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Every cue, with modality and meta masking.
    Generic,
    /// A fixed cue subset and no masking.
    Specific,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub decay_factor: f64,
    /// Fraction of epochs after which the learning rate is decayed.
    pub decay_at: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub mask: MaskPolicy,
    pub protocol: Protocol,
    /// Cue subset used by the specific protocol.
    pub cues: Vec<CueKind>,
    /// Stop after this many optimizer steps, if set.
    pub max_steps: Option<usize>,
    /// Validate every this many epochs; the last epoch always validates.
    pub validate_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            lr: 1e-4,
            decay_factor: 0.1,
            decay_at: 0.8,
            batch_size: 32,
            seed: 0,
            mask: MaskPolicy::default(),
            protocol: Protocol::Generic,
            cues: CueKind::ALL.to_vec(),
            max_steps: None,
            validate_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 || self.validate_every == 0 {
            return Err(Error::Config("batch_size and validate_every must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.protocol == Protocol::Specific && !self.cues.contains(&CueKind::Trajectory) {
            return Err(Error::Config("cue subset must include T".into()));
        }
        self.mask.check()
    }

    /// First epoch (0-based) trained at the decayed rate.
    pub fn decay_epoch(&self) -> usize {
        (self.decay_at * self.epochs as f64).floor() as usize
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch < self.decay_epoch() {
            self.lr
        } else {
            self.lr * self.decay_factor
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("train config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(format!("train config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub steps: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_ade: Option<f64>,
    pub val_fde: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub checkpoint: Option<PathBuf>,
}

impl RunLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,steps,lr,train_loss,val_ade,val_fde\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                e.epoch,
                e.steps,
                e.lr,
                e.train_loss,
                opt(e.val_ade),
                opt(e.val_fde)
            );
        }
        s
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }
}

/// Mean squared coordinate error over `(horizon, 2)`.
pub fn mse_loss(pred: &PredictionY, truth: &[[f64; 2]]) -> Result<f64> {
    if pred.positions.len() != truth.len() || truth.is_empty() {
        return Err(Error::Dimension {
            op: "mse",
            left: vec![pred.positions.len(), 2],
            right: vec![truth.len(), 2],
        });
    }
    let sum: f64 = pred
        .positions
        .iter()
        .zip(truth)
        .map(|(p, t)| (p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2))
        .sum();
    Ok(sum / (2 * truth.len()) as f64)
}

/// Scene as seen by the model during training under `cfg`.
pub fn training_view(scene: &Scene, cfg: &TrainConfig, epoch: usize, index: usize) -> Result<Scene> {
    match cfg.protocol {
        Protocol::Generic => {
            let mut rng = substream(cfg.seed ^ cfg.mask.seed, DOMAIN_MASK, ((epoch as u64) << 32) | index as u64);
            Ok(apply_train_masking(scene, &cfg.mask, &mut rng))
        }
        Protocol::Specific => restrict_cues(scene, &cfg.cues),
    }
}

/// Cue subset the model is validated with.
fn validation_cues(cfg: &TrainConfig) -> Vec<CueKind> {
    match cfg.protocol {
        Protocol::Generic => CueKind::ALL.to_vec(),
        Protocol::Specific => cfg.cues.clone(),
    }
}

/// Trains `model` in place; on return it holds the parameters with the best
/// validation ADE (or the final ones when `val` is empty).
pub fn train(model: &mut Model, train_set: &[Scene], val: &[Scene], cfg: &TrainConfig) -> Result<RunLog> {
    cfg.check()?;
    if train_set.is_empty() {
        return Err(Error::Config("training corpus is empty".into()));
    }
    let mut adam = Adam::new(&model.params);
    let mut log = RunLog::default();
    let mut best: Option<(f64, crate::nnkernel::ParamStore)> = None;
    let mut steps = 0usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    'epochs: for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.sort_unstable();
        order.shuffle(&mut substream(cfg.seed, DOMAIN_SHUFFLE, epoch as u64));
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        let mut stop = false;
        for (batch_id, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads = Gradients::zeros_like(&model.params);
            let mut batch_loss = 0.0;
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let view = training_view(&train_set[i], cfg, epoch, i)?;
                let (loss, g) = model.loss_and_grads(&view)?;
                batch_loss += loss * scale;
                grads.accumulate(&g, scale);
            }
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFiniteLoss {
                    loss: batch_loss,
                    epoch,
                    batch: batch_id,
                    lr,
                });
            }
            adam.step(&mut model.params, &grads, lr)?;
            loss_sum += batch_loss * batch.len() as f64;
            seen += batch.len();
            steps += 1;
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                stop = true;
                break;
            }
        }
        let last = stop || epoch + 1 == cfg.epochs;
        let validate = !val.is_empty() && (last || (epoch + 1) % cfg.validate_every == 0);
        let (val_ade, val_fde) = if validate {
            let r = evaluate(model, val, &validation_cues(cfg), &[], cfg.seed)?;
            if best.as_ref().map_or(true, |(b, _)| r.ade < *b) {
                best = Some((r.ade, model.params.clone()));
                log.best_epoch = Some(epoch);
            }
            (Some(r.ade), Some(r.fde))
        } else {
            (None, None)
        };
        log::info!(
            "epoch {epoch} lr {lr:e} loss {:.5}{}",
            loss_sum / seen as f64,
            val_ade.map(|a| format!(" val ade {a:.4}")).unwrap_or_default()
        );
        log.epochs.push(EpochLog {
            epoch,
            steps,
            lr,
            train_loss: loss_sum / seen as f64,
            val_ade,
            val_fde,
        });
        if stop {
            break 'epochs;
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(log)
}

/// Trains and writes the selected parameters plus `runlog.csv` into `dir`.
pub fn train_to_dir(model: &mut Model, train_set: &[Scene], val: &[Scene], cfg: &TrainConfig, dir: &Path) -> Result<RunLog> {
    let mut log = train(model, train_set, val, cfg)?;
    model.save(dir)?;
    let cfg_path = dir.join("train.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
    let csv = dir.join("runlog.csv");
    std::fs::write(&csv, log.to_csv()).map_err(|e| Error::io(&csv, e))?;
    log.checkpoint = Some(dir.join(crate::model::CHECKPOINT_FILE));
    Ok(log)
}

/// Metrics of `model` on `scenes` seen through `subset` and `patterns`.
///
/// Cues outside the subset are removed before the patterns are applied;
/// pattern randomness is drawn from a per-scene stream of `seed`.
pub fn evaluate(
    model: &Model,
    scenes: &[Scene],
    subset: &[CueKind],
    patterns: &[EvalPattern],
    seed: u64,
) -> Result<MetricReport> {
    if !subset.contains(&CueKind::Trajectory) {
        return Err(Error::Config("cue subset must include T".into()));
    }
    let per_scene = scenes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let view = restrict_cues(s, subset)?;
            let view = apply_eval_patterns(&view, patterns, &mut substream(seed, DOMAIN_EVAL, i as u64))?;
            let pred = model.predict(&view)?;
            SceneMetrics::compute(&s.id, &pred.positions, &s.future, s.fps)
        })
        .collect::<Result<Vec<_>>>()?;
    MetricReport::from_scenes(per_scene)
}

/// Checks that every requested cue exists somewhere in `scenes`.
pub fn check_subset(scenes: &[Scene], subset: &[CueKind]) -> Result<()> {
    for kind in subset {
        if !scenes.iter().any(|s| s.agents.iter().any(|a| a.cue(*kind).is_some())) {
            return Err(Error::Config(format!("cue {kind} is not present in the corpus")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;

//! Training loop, evaluation, checkpoints and hyperparameter sweeps.

mod adam;
mod checkpoint;
mod experiment;
mod metrics;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use experiment::{run_experiment, sweep, Experiment, ExperimentResult, SweepParam, SweepRow};
pub use metrics::{ClassMetrics, EvalReport};

use crate::corpus::IndexedSample;
use crate::error::{Error, Result};
use crate::fusion::predicted_label;
use crate::model::{mix, Dropout, Model};
use crate::params::Param;
use crate::question::SkeletonCache;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub dropout: Dropout,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs without a validation-accuracy improvement before stopping.
    /// `None` trains for `max_epochs`.
    pub patience: Option<usize>,
    /// Stop once training accuracy (dropout off) reaches this value.
    /// Implies per-epoch training accuracy tracking.
    pub target_train_accuracy: Option<f64>,
    /// Record training accuracy each epoch.
    pub track_train_accuracy: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            dropout: Dropout::new(0.2),
            max_epochs: 100,
            batch_size: 32,
            seed: 0,
            patience: Some(10),
            target_train_accuracy: None,
            track_train_accuracy: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let lr = self.adam.learning_rate;
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::Config(format!("learning rate {lr} must be finite and non-negative")));
        }
        let rate = self.dropout.rate;
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout {rate} outside [0, 1)")));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_acc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; `None` when there was no
    /// validation set and the last epoch's parameters stand.
    pub best_epoch: Option<usize>,
}

impl History {
    /// Line-delimited JSON, one record per epoch.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Predictions for every sample, in order.
pub fn predict_all(model: &Model, samples: &[IndexedSample]) -> Result<Vec<Vec<f64>>> {
    samples.par_iter().map(|s| model.probabilities(s)).collect()
}

pub fn evaluate(model: &Model, samples: &[IndexedSample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let probs = predict_all(model, samples)?;
    EvalReport::from_pairs(samples.iter().zip(&probs).map(|(s, p)| (s.label, predicted_label(p))))
}

/// Trains `model` in place. The skeleton cache is rebuilt from `train`.
/// With a validation set, the parameters of the best validation epoch are
/// restored at the end.
pub fn train(
    model: &mut Model,
    train: &[IndexedSample],
    validation: &[IndexedSample],
    config: &TrainConfig,
) -> Result<History> {
    train_with(model, train, validation, config, |_| {})
}

/// As [`train`], calling `on_epoch` after each epoch.
pub fn train_with(
    model: &mut Model,
    train: &[IndexedSample],
    validation: &[IndexedSample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<History> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    model.cache = SkeletonCache::build(train);
    let mut adam = Adam::new(config.adam, &model.store);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    let mut best: Option<(f64, Vec<Param>)> = None;
    let mut since_best = 0;
    let track_train = config.track_train_accuracy || config.target_train_accuracy.is_some();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<IndexedSample> = chunk.iter().map(|&i| train[i].clone()).collect();
            let batch_seed = mix(mix(config.seed, epoch as u64), b as u64);
            let result = model.loss_and_grad(&batch, Some(&config.dropout), batch_seed);
            let (loss, grads) = match result {
                Ok(ok) => ok,
                Err(e) if e.is_numeric() => {
                    return Err(Error::NonFiniteLoss { epoch, batch: b, norms: model.store.norms() })
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b, norms: model.store.norms() });
            }
            loss_sum += loss * batch.len() as f64;
            adam.step(&mut model.store, &grads);
        }
        let train_loss = loss_sum / train.len() as f64;
        let (val_loss, val_acc) = if validation.is_empty() {
            (None, None)
        } else {
            (Some(model.mean_loss(validation)?), Some(evaluate(model, validation)?.accuracy))
        };
        let train_acc = if track_train { Some(evaluate(model, train)?.accuracy) } else { None };
        let record = EpochRecord { epoch, train_loss, val_loss, val_acc, train_acc };
        on_epoch(&record);
        history.epochs.push(record);

        if let Some(acc) = val_acc {
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, model.store.as_slice().to_vec()));
                history.best_epoch = Some(epoch);
                since_best = 0;
            } else {
                since_best += 1;
            }
            if config.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
        if let (Some(target), Some(acc)) = (config.target_train_accuracy, train_acc) {
            if acc >= target {
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        model.store.load_values(&params)?;
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{toy, VariantSpec};

    fn model(seed: u64) -> Model {
        Model::new(toy::hyper(), VariantSpec::FULL, toy::vocab(), seed).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let samples = toy::samples(1, 12);
        let mut m = model(2);
        let before = m.store.clone();
        let cfg = TrainConfig {
            adam: AdamConfig { learning_rate: 0.0, ..AdamConfig::default() },
            max_epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        train(&mut m, &samples, &[], &cfg).unwrap();
        assert_eq!(m.store, before);
    }

    #[test]
    fn same_seed_same_history() {
        let samples = toy::samples(1, 20);
        let cfg = TrainConfig { max_epochs: 3, batch_size: 6, seed: 4, ..TrainConfig::default() };
        let (mut a, mut b) = (model(3), model(3));
        let ha = train(&mut a, &samples[..16], &samples[16..], &cfg).unwrap();
        let hb = train(&mut b, &samples[..16], &samples[16..], &cfg).unwrap();
        assert_eq!(ha.to_jsonl(), hb.to_jsonl());
        assert_eq!(a.store, b.store);
    }

    #[test]
    fn evaluation_is_repeatable() {
        let samples = toy::samples(5, 15);
        let mut m = model(1);
        m.cache = SkeletonCache::build(&samples);
        let r1 = evaluate(&m, &samples).unwrap();
        let r2 = evaluate(&m, &samples).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(predict_all(&m, &samples).unwrap(), predict_all(&m, &samples).unwrap());
        assert!(matches!(evaluate(&m, &[]), Err(Error::EmptySampleSet)));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad_dropout = TrainConfig { dropout: Dropout::new(1.0), ..TrainConfig::default() };
        assert!(bad_dropout.validate().is_err());
        let bad_lr = TrainConfig {
            adam: AdamConfig { learning_rate: -1.0, ..AdamConfig::default() },
            ..TrainConfig::default()
        };
        assert!(bad_lr.validate().is_err());
    }

    #[test]
    fn best_validation_epoch_is_restored() {
        let samples = toy::samples(8, 24);
        let mut m = model(6);
        let cfg = TrainConfig {
            adam: AdamConfig { learning_rate: 0.02, ..AdamConfig::default() },
            max_epochs: 8,
            batch_size: 4,
            patience: None,
            ..TrainConfig::default()
        };
        let h = train(&mut m, &samples[..18], &samples[18..], &cfg).unwrap();
        let best = h.best_epoch.unwrap();
        let best_acc = h.epochs[best - 1].val_acc.unwrap();
        assert!(h.epochs.iter().all(|r| r.val_acc.unwrap() <= best_acc));
        assert_eq!(evaluate(&m, &samples[18..]).unwrap().accuracy, best_acc);
    }
}

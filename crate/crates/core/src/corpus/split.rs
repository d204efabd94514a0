use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sample::Sample;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitGranularity {
    ByQuestion,
    BySample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Train parts of the train:test ratio.
    pub train_parts: u32,
    /// Test parts of the train:test ratio.
    pub test_parts: u32,
    /// Fraction of the training side held out for validation.
    pub validation_fraction: f64,
    pub granularity: SplitGranularity,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_parts: 4,
            test_parts: 1,
            validation_fraction: 0.10,
            granularity: SplitGranularity::ByQuestion,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn test_fraction(&self) -> f64 {
        self.test_parts as f64 / (self.train_parts + self.test_parts) as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Deterministic train/validation/test partition. Samples keep their
/// corpus order within each side.
pub fn split(samples: &[Sample], spec: &SplitSpec) -> Result<Splits> {
    if spec.train_parts == 0 || spec.test_parts == 0 {
        return Err(Error::Config("train and test parts must both be positive".into()));
    }
    if !(0.0..1.0).contains(&spec.validation_fraction) {
        return Err(Error::Config(format!(
            "validation fraction {} outside [0, 1)",
            spec.validation_fraction
        )));
    }

    // Group ids: one per question, or one per sample.
    let mut group_of = Vec::with_capacity(samples.len());
    let n_groups = match spec.granularity {
        SplitGranularity::ByQuestion => {
            let mut ids: HashMap<&str, usize> = HashMap::new();
            for s in samples {
                let next = ids.len();
                group_of.push(*ids.entry(s.question_id.as_str()).or_insert(next));
            }
            if ids.len() < 3 {
                return Err(Error::TooFewQuestions { need: 3, got: ids.len() });
            }
            ids.len()
        }
        SplitGranularity::BySample => {
            group_of.extend(0..samples.len());
            if samples.len() < 3 {
                return Err(Error::TooFewQuestions { need: 3, got: samples.len() });
            }
            samples.len()
        }
    };

    let mut order: Vec<usize> = (0..n_groups).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));

    let n_test = ((n_groups as f64 * spec.test_fraction()).round() as usize).clamp(1, n_groups - 2);
    let n_rest = n_groups - n_test;
    let n_val = if spec.validation_fraction > 0.0 {
        ((n_rest as f64 * spec.validation_fraction).round() as usize).clamp(1, n_rest - 1)
    } else {
        0
    };

    #[derive(Clone, Copy)]
    enum Side {
        Train,
        Val,
        Test,
    }
    let mut side = vec![Side::Train; n_groups];
    for (rank, &g) in order.iter().enumerate() {
        side[g] = if rank < n_test {
            Side::Test
        } else if rank < n_test + n_val {
            Side::Val
        } else {
            Side::Train
        };
    }

    let mut out = Splits::default();
    for (s, &g) in samples.iter().zip(&group_of) {
        match side[g] {
            Side::Train => out.train.push(s.clone()),
            Side::Val => out.validation.push(s.clone()),
            Side::Test => out.test.push(s.clone()),
        }
    }
    Ok(out)
}

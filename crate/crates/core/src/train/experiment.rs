//! End-to-end runs: split, index, train, evaluate; and one-parameter
//! sweeps over `N_e` or `T`.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{evaluate, train_with, EpochRecord, EvalReport, History, TrainConfig};
use crate::corpus::{index_all, split, Sample, SplitSpec, Vocab};
use crate::encoders::load_pretrained;
use crate::error::{Error, Result};
use crate::model::{Hyper, Model, VariantSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub hyper: Hyper,
    pub variant: VariantSpec,
    pub train: TrainConfig,
    pub split: SplitSpec,
    /// Whitespace-separated `token v1 … vD` lines.
    pub pretrained_embeddings: Option<PathBuf>,
}

pub struct ExperimentResult {
    pub model: Model,
    pub history: History,
    pub test: EvalReport,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    /// Vocabulary tokens filled from pretrained vectors.
    pub pretrained_hits: Option<usize>,
}

/// Splits `samples`, builds the vocabulary from the training split, trains
/// and evaluates on the test split.
pub fn run_experiment(
    exp: &Experiment,
    samples: &[Sample],
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<ExperimentResult> {
    let splits = split(samples, &exp.split)?;
    let vocab = Vocab::build(&splits.train);
    let max_len = exp.hyper.max_len;
    let train = index_all(&splits.train, &vocab, max_len);
    let validation = index_all(&splits.validation, &vocab, max_len);
    let test = index_all(&splits.test, &vocab, max_len);

    let mut model = Model::new(exp.hyper.clone(), exp.variant, vocab, exp.train.seed)?;
    let pretrained_hits = match &exp.pretrained_embeddings {
        Some(path) => {
            let reader = BufReader::new(File::open(path)?);
            let vocab = model.vocab.clone();
            Some(load_pretrained(reader, &vocab, model.embedding_table())?)
        }
        None => None,
    };
    let history = train_with(&mut model, &train, &validation, &exp.train, on_epoch)?;
    let test_report = evaluate(&model, &test)?;
    Ok(ExperimentResult {
        model,
        history,
        test: test_report,
        n_train: train.len(),
        n_validation: validation.len(),
        n_test: test.len(),
        pretrained_hits,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Ne,
    Hops,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Ne => "ne",
            SweepParam::Hops => "hops",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ne" => Ok(SweepParam::Ne),
            "hops" => Ok(SweepParam::Hops),
            other => Err(Error::Config(format!("cannot sweep {other:?}; use ne or hops"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: usize,
    pub epochs: usize,
    pub report: EvalReport,
}

/// One run per value with everything else, including the seed, shared.
pub fn sweep(
    param: SweepParam,
    values: &[usize],
    base: &Experiment,
    samples: &[Sample],
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    values
        .iter()
        .map(|&value| {
            let mut exp = base.clone();
            match param {
                SweepParam::Ne => exp.hyper.ne = value,
                SweepParam::Hops => exp.hyper.hops = value,
            }
            let result = run_experiment(&exp, samples, |_| {})?;
            Ok(SweepRow { param, value, epochs: result.history.epochs.len(), report: result.test })
        })
        .collect()
}

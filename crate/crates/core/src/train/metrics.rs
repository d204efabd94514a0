//! Accuracy, per-class precision/recall/F1, macro-F1 and the confusion
//! matrix.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are gold labels, columns predictions, both in label order.
    pub confusion: [[usize; 3]; 3],
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Result<Self> {
        let mut confusion = [[0usize; 3]; 3];
        for (gold, pred) in pairs {
            confusion[gold.index()][pred.index()] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn from_confusion(confusion: [[usize; 3]; 3]) -> Result<Self> {
        let n: usize = confusion.iter().flatten().sum();
        if n == 0 {
            return Err(Error::EmptySampleSet);
        }
        let correct: usize = (0..3).map(|i| confusion[i][i]).sum();
        let per_class: Vec<ClassMetrics> = Label::ALL
            .iter()
            .map(|&label| {
                let k = label.index();
                let tp = confusion[k][k];
                let support: usize = confusion[k].iter().sum();
                let predicted: usize = (0..3).map(|r| confusion[r][k]).sum();
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics { label, precision, recall, f1, support }
            })
            .collect();
        let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / 3.0;
        Ok(EvalReport { n, accuracy: ratio(correct, n), macro_f1, per_class, confusion })
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples   {}", self.n)?;
        writeln!(f, "accuracy  {:.4}", self.accuracy)?;
        writeln!(f, "macro-F1  {:.4}", self.macro_f1)?;
        writeln!(f, "{:<10} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support")?;
        for c in &self.per_class {
            writeln!(
                f,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                c.label.as_str(),
                c.precision,
                c.recall,
                c.f1,
                c.support
            )?;
        }
        writeln!(f, "confusion (rows gold, cols predicted: true false uncertain)")?;
        for (label, row) in Label::ALL.iter().zip(&self.confusion) {
            writeln!(f, "{:<10} {:>6} {:>6} {:>6}", label.as_str(), row[0], row[1], row[2])?;
        }
        Ok(())
    }
}

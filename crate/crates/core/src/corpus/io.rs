//! Line-delimited JSON corpus files and corpus statistics.
//!
//! One record per line:
//! `{"question_id": .., "question": [..], "answer_id": .., "answer": [..], "option": [..] | null, "label": "true" | "false" | "uncertain"}`

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sample::{Label, QuestionType, Sample};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct RawRecord {
    question_id: String,
    question: Vec<String>,
    answer_id: String,
    answer: Vec<String>,
    #[serde(default)]
    option: Option<Vec<String>>,
    label: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    #[serde(rename = "true")]
    pub true_: usize,
    #[serde(rename = "false")]
    pub false_: usize,
    pub uncertain: usize,
}

impl LabelCounts {
    pub fn add(&mut self, label: Label) {
        match label {
            Label::True => self.true_ += 1,
            Label::False => self.false_ += 1,
            Label::Uncertain => self.uncertain += 1,
        }
    }

    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::True => self.true_,
            Label::False => self.false_,
            Label::Uncertain => self.uncertain,
        }
    }

    pub fn total(&self) -> usize {
        self.true_ + self.false_ + self.uncertain
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_questions: usize,
    pub n_tf_questions: usize,
    pub n_mc_questions: usize,
    pub n_answers: usize,
    pub n_samples: usize,
    pub per_label: LabelCounts,
}

impl CorpusStats {
    pub fn compute(samples: &[Sample]) -> Self {
        let mut questions = BTreeSet::new();
        let mut mc = BTreeSet::new();
        let mut answers = BTreeSet::new();
        let mut per_label = LabelCounts::default();
        for s in samples {
            questions.insert(s.question_id.as_str());
            if s.question_type() == QuestionType::MC {
                mc.insert(s.question_id.as_str());
            }
            answers.insert((s.question_id.as_str(), s.answer_id.as_str()));
            per_label.add(s.label);
        }
        CorpusStats {
            n_questions: questions.len(),
            n_tf_questions: questions.len() - mc.len(),
            n_mc_questions: mc.len(),
            n_answers: answers.len(),
            n_samples: samples.len(),
            per_label,
        }
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14}{:>10}", "questions", self.n_questions)?;
        writeln!(f, "{:<14}{:>10}", "  t/f", self.n_tf_questions)?;
        writeln!(f, "{:<14}{:>10}", "  mc", self.n_mc_questions)?;
        writeln!(f, "{:<14}{:>10}", "answers", self.n_answers)?;
        writeln!(f, "{:<14}{:>10}", "samples", self.n_samples)?;
        writeln!(
            f,
            "{:<14}{:>10}",
            "t/f/u",
            format!(
                "{}/{}/{}",
                self.per_label.true_, self.per_label.false_, self.per_label.uncertain
            )
        )
    }
}

/// Parses and validates a corpus from any line source.
pub fn parse_corpus(reader: impl BufRead) -> Result<(Vec<Sample>, CorpusStats)> {
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let label = raw
            .label
            .parse::<Label>()
            .map_err(|label| Error::UnknownLabel { line: line_no, label })?;
        let sample = Sample {
            question_id: raw.question_id,
            question: raw.question,
            answer_id: raw.answer_id,
            answer: raw.answer,
            option: raw.option,
            label,
        };
        sample.validate()?;
        samples.push(sample);
    }
    let stats = CorpusStats::compute(&samples);
    Ok((samples, stats))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<(Vec<Sample>, CorpusStats)> {
    parse_corpus(BufReader::new(File::open(path)?))
}

pub fn write_corpus(samples: &[Sample], mut out: impl Write) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_corpus(samples: &[Sample], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_corpus(samples, &mut w)?;
    w.flush()?;
    Ok(())
}

/// SHA-256 of the canonical serialization of a sample list.
pub fn corpus_fingerprint(samples: &[Sample]) -> String {
    let mut buf = Vec::new();
    write_corpus(samples, &mut buf).expect("writing to a Vec cannot fail");
    hex::encode(Sha256::digest(&buf))
}

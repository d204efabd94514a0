//! Vocabulary, truncation, and conversion of samples to index form.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::sample::{Label, QuestionType, Sample};

pub const UNK: &str = "<unk>";
pub const UNK_INDEX: usize = 0;
pub const DEFAULT_MAX_LEN: usize = 33;

/// Token ↔ index map. Index 0 is reserved for out-of-vocabulary tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Vocab::from(vec![UNK.to_string()])
    }
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Builds from question, answer and option tokens in first-seen order.
    pub fn build(samples: &[Sample]) -> Self {
        let mut vocab = Vocab::default();
        for s in samples {
            let opt = s.option.iter().flatten();
            for tok in s.question.iter().chain(&s.answer).chain(opt) {
                vocab.insert(tok);
            }
        }
        vocab
    }

    fn insert(&mut self, tok: &str) {
        if !self.index.contains_key(tok) {
            self.index.insert(tok.to_string(), self.tokens.len());
            self.tokens.push(tok.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, tok: &str) -> usize {
        self.index.get(tok).copied().unwrap_or(UNK_INDEX)
    }

    pub fn contains(&self, tok: &str) -> bool {
        self.index.contains_key(tok)
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// A sample ready for the network: truncated, indexed, with its option
/// indicator.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexedSample {
    pub question_key: String,
    pub answer_id: String,
    pub question_tokens: Vec<String>,
    pub answer_tokens: Vec<String>,
    pub question: Vec<usize>,
    pub answer: Vec<usize>,
    /// One flag per question position: 1 on the option term's words.
    pub indicator: Vec<f64>,
    pub label: Label,
    pub question_type: QuestionType,
    /// Set when the option term did not survive question truncation.
    pub option_truncated: bool,
}

/// Marks the option term's positions in the question: the first contiguous
/// occurrence if there is one, otherwise the first unmarked occurrence of
/// each option token. `None` if some option token is missing.
pub fn option_indicator(question: &[String], option: &[String]) -> Option<Vec<f64>> {
    let mut flags = vec![0.0; question.len()];
    if option.is_empty() {
        return Some(flags);
    }
    if let Some(start) = question.windows(option.len()).position(|w| w == option) {
        flags[start..start + option.len()].iter_mut().for_each(|f| *f = 1.0);
        return Some(flags);
    }
    for tok in option {
        let pos = question.iter().zip(&flags).position(|(q, &f)| q == tok && f == 0.0)?;
        flags[pos] = 1.0;
    }
    Some(flags)
}

pub fn truncate_and_index(sample: &Sample, vocab: &Vocab, max_len: usize) -> IndexedSample {
    let question_tokens: Vec<String> = sample.question.iter().take(max_len).cloned().collect();
    let answer_tokens: Vec<String> = sample.answer.iter().take(max_len).cloned().collect();
    let (indicator, option_truncated) = match &sample.option {
        None => (vec![0.0; question_tokens.len()], false),
        Some(opt) => match option_indicator(&question_tokens, opt) {
            Some(flags) => (flags, false),
            None => (vec![0.0; question_tokens.len()], true),
        },
    };
    IndexedSample {
        question_key: sample.question_key(),
        answer_id: sample.answer_id.clone(),
        question: question_tokens.iter().map(|t| vocab.get(t)).collect(),
        answer: answer_tokens.iter().map(|t| vocab.get(t)).collect(),
        question_tokens,
        answer_tokens,
        indicator,
        label: sample.label,
        question_type: sample.question_type(),
        option_truncated,
    }
}

pub fn index_all(samples: &[Sample], vocab: &Vocab, max_len: usize) -> Vec<IndexedSample> {
    samples.iter().map(|s| truncate_and_index(s, vocab, max_len)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn sample(q: &str, a: &str, opt: Option<&str>) -> Sample {
        Sample {
            question_id: "q".into(),
            question: toks(q),
            answer_id: "a".into(),
            answer: toks(a),
            option: opt.map(toks),
            label: Label::True,
        }
    }

    #[test]
    fn truncation_keeps_the_prefix() {
        let long: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        let s = sample("q1 q2", &long.join(" "), None);
        let vocab = Vocab::build(std::slice::from_ref(&s));
        let ix = truncate_and_index(&s, &vocab, DEFAULT_MAX_LEN);
        assert_eq!(ix.answer.len(), 33);
        assert_eq!(ix.answer_tokens, long[..33].to_vec());
        assert!(ix.answer.iter().all(|&i| i != UNK_INDEX));
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let train = sample("do you like tea ?", "yes", None);
        let vocab = Vocab::build(&[train]);
        let ix = truncate_and_index(&sample("do you like juice ?", "yes", None), &vocab, 33);
        assert_eq!(ix.question[3], UNK_INDEX);
        assert_eq!(vocab.token(UNK_INDEX), UNK);
    }

    #[test]
    fn indicator_marks_option_words() {
        let s = sample("playing basketball or playing football ?", "football", Some("playing football"));
        let ix = truncate_and_index(&s, &Vocab::build(std::slice::from_ref(&s)), 33);
        assert_eq!(ix.indicator, vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        assert!(!ix.option_truncated);

        let tf = sample("do you like tea ?", "yes", None);
        let ix = truncate_and_index(&tf, &Vocab::build(std::slice::from_ref(&tf)), 33);
        assert!(ix.indicator.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn option_truncated_away_is_flagged() {
        let s = sample("a b c d tea", "tea", Some("tea"));
        let ix = truncate_and_index(&s, &Vocab::build(std::slice::from_ref(&s)), 4);
        assert!(ix.option_truncated);
        assert_eq!(ix.indicator, vec![0.0; 4]);
    }

    #[test]
    fn vocab_serializes_as_token_list() {
        let v = Vocab::build(&[sample("x y", "y z", None)]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["<unk>","x","y","z"]"#);
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }
}

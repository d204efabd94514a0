//! Templated reverse-QA corpus whose labels are recoverable by construction.
//!
//! T/F questions ask about one topic and are answered with affirmation,
//! negation or hedging templates. MC questions embed 2+ option topics; an
//! answer either picks one option (true for it, false for the rest),
//! accepts all, rejects all, or hedges. Optional irrelevant spans are
//! spliced into answers without changing their label.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sample::{Label, Sample};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Probability that an answer carries an irrelevant span.
    pub irrelevant_span_prob: f64,
    /// Probability that an answer hedges (label `uncertain`).
    pub uncertain_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_tf_questions: usize,
    pub n_mc_questions: usize,
    pub answers_per_question: usize,
    /// Inclusive range of option terms per MC question.
    pub n_options_range: (usize, usize),
    /// Number of distinct topic terms questions draw from.
    pub vocab_size: usize,
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_tf_questions: 20,
            n_mc_questions: 20,
            answers_per_question: 8,
            n_options_range: (2, 3),
            vocab_size: 16,
            noise: NoiseConfig { irrelevant_span_prob: 0.3, uncertain_prob: 0.15 },
            seed: 7,
        }
    }
}

const TOPICS: &[&str] = &[
    "swimming", "climbing", "football", "tea", "coffee", "skirts", "pants", "running",
    "reading", "shopping", "games", "cooking", "hiking", "cycling", "music", "movies",
    "chess", "tennis", "yoga", "painting", "dancing", "juice", "milk", "soda", "rice",
    "noodles", "cats", "dogs", "travel", "camping", "fishing", "baking",
];

const TF_QUESTIONS: &[&[&str]] = &[
    &["do", "you", "like", "{X}", "?"],
    &["would", "you", "enjoy", "{X}", "this", "weekend", "?"],
    &["are", "you", "interested", "in", "{X}", "?"],
    &["hey", ",", "do", "you", "often", "do", "{X}", "?"],
    &["honestly", ",", "is", "{X}", "your", "thing", "?"],
];

const MC_QUESTIONS: &[&[&str]] = &[
    &["do", "you", "prefer", "{OPTS}", "?"],
    &["which", "do", "you", "like", "{OPTS}", "?"],
    &["by", "the", "way", ",", "would", "you", "choose", "{OPTS}", "?"],
    &["at", "home", ",", "do", "you", "usually", "enjoy", "{OPTS}", "?"],
];

const AFFIRM: &[&[&str]] = &[
    &["yes"],
    &["sure", ",", "i", "like", "it"],
    &["of", "course"],
    &["yes", "i", "do"],
    &["i", "love", "{X}"],
    &["absolutely"],
];

const NEGATE: &[&[&str]] = &[
    &["no"],
    &["not", "really"],
    &["no", ",", "i", "do", "not"],
    &["i", "hate", "{X}"],
    &["never"],
    &["nope"],
];

const HEDGE: &[&[&str]] = &[
    &["maybe"],
    &["not", "sure"],
    &["it", "depends"],
    &["hard", "to", "say"],
    &["i", "do", "not", "know"],
    &["perhaps", "sometimes"],
];

const PICK_ONE: &[&[&str]] = &[
    &["i", "prefer", "{X}"],
    &["{X}", ",", "definitely"],
    &["i", "like", "{X}", "more"],
    &["{X}", "please"],
    &["only", "{X}"],
];

const ACCEPT_ALL: &[&[&str]] = &[
    &["i", "like", "all", "of", "them"],
    &["both", "are", "fine"],
    &["i", "am", "not", "picky"],
    &["any", "is", "ok"],
];

const REJECT_ALL: &[&[&str]] = &[
    &["none", "of", "them"],
    &["neither"],
    &["i", "like", "something", "else"],
    &["nothing", "here"],
];

const IRRELEVANT: &[&[&str]] = &[
    &["the", "weather", "is", "nice", "today"],
    &["my", "cat", "is", "sleeping"],
    &["lunch", "was", "good"],
    &["haha"],
    &["by", "the", "way", "i", "am", "busy"],
    &["what", "a", "day"],
];

fn topic(i: usize) -> String {
    TOPICS.get(i).map_or_else(|| format!("topic{i}"), |t| t.to_string())
}

fn fill(template: &[&str], x: &str) -> Vec<String> {
    template.iter().map(|t| if *t == "{X}" { x.to_string() } else { t.to_string() }).collect()
}

fn pick<'t>(rng: &mut impl Rng, from: &'t [&'t [&'t str]]) -> &'t [&'t str] {
    from[rng.gen_range(0..from.len())]
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.n_tf_questions + self.n_mc_questions == 0 {
            return Err(Error::Config("at least one question is required".into()));
        }
        if self.answers_per_question == 0 {
            return Err(Error::Config("answers_per_question must be at least 1".into()));
        }
        let (lo, hi) = self.n_options_range;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("invalid option range [{lo}, {hi}]")));
        }
        for (name, p) in [
            ("irrelevant_span_prob", self.noise.irrelevant_span_prob),
            ("uncertain_prob", self.noise.uncertain_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.vocab_size < 1 || (self.n_mc_questions > 0 && self.vocab_size < hi) {
            return Err(Error::VocabTooSmall {
                available: self.vocab_size,
                reason: format!("MC questions need {hi} distinct option terms"),
            });
        }
        Ok(())
    }
}

/// Generates a corpus; identical configs give identical output.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<Sample>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut samples = Vec::new();

    for q in 0..config.n_tf_questions {
        let x = topic(rng.gen_range(0..config.vocab_size));
        let question = fill(pick(&mut rng, TF_QUESTIONS), &x);
        for a in 0..config.answers_per_question {
            let (core, label) = if rng.gen_bool(config.noise.uncertain_prob) {
                (fill(pick(&mut rng, HEDGE), &x), Label::Uncertain)
            } else if rng.gen_bool(0.5) {
                (fill(pick(&mut rng, AFFIRM), &x), Label::True)
            } else {
                (fill(pick(&mut rng, NEGATE), &x), Label::False)
            };
            let answer = with_noise(&mut rng, core, config.noise.irrelevant_span_prob);
            samples.push(Sample {
                question_id: format!("tf-{q:03}"),
                question: question.clone(),
                answer_id: format!("a{a:02}"),
                answer,
                option: None,
                label,
            });
        }
    }

    let (lo, hi) = config.n_options_range;
    for q in 0..config.n_mc_questions {
        let k = rng.gen_range(lo..=hi);
        let mut pool: Vec<usize> = (0..config.vocab_size).collect();
        pool.shuffle(&mut rng);
        let options: Vec<String> = pool[..k].iter().map(|&i| topic(i)).collect();
        let question = mc_question(pick(&mut rng, MC_QUESTIONS), &options);
        for a in 0..config.answers_per_question {
            let (core, labels): (Vec<String>, Vec<Label>) =
                if rng.gen_bool(config.noise.uncertain_prob) {
                    (fill(pick(&mut rng, HEDGE), ""), vec![Label::Uncertain; k])
                } else {
                    let roll: f64 = rng.gen();
                    if roll < 0.6 {
                        let chosen = rng.gen_range(0..k);
                        let labels = (0..k)
                            .map(|i| if i == chosen { Label::True } else { Label::False })
                            .collect();
                        (fill(pick(&mut rng, PICK_ONE), &options[chosen]), labels)
                    } else if roll < 0.75 {
                        (fill(pick(&mut rng, ACCEPT_ALL), ""), vec![Label::True; k])
                    } else {
                        (fill(pick(&mut rng, REJECT_ALL), ""), vec![Label::False; k])
                    }
                };
            let answer = with_noise(&mut rng, core, config.noise.irrelevant_span_prob);
            for (opt, label) in options.iter().zip(labels) {
                samples.push(Sample {
                    question_id: format!("mc-{q:03}"),
                    question: question.clone(),
                    answer_id: format!("a{a:02}"),
                    answer: answer.clone(),
                    option: Some(vec![opt.clone()]),
                    label,
                });
            }
        }
    }
    Ok(samples)
}

fn mc_question(template: &[&str], options: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for t in template {
        if *t == "{OPTS}" {
            for (i, o) in options.iter().enumerate() {
                if i > 0 {
                    out.push(if i + 1 == options.len() { "or" } else { "," }.to_string());
                }
                out.push(o.clone());
            }
        } else {
            out.push(t.to_string());
        }
    }
    out
}

fn with_noise(rng: &mut impl Rng, core: Vec<String>, prob: f64) -> Vec<String> {
    if !rng.gen_bool(prob) {
        return core;
    }
    let span: Vec<String> = pick(rng, IRRELEVANT).iter().map(|s| s.to_string()).collect();
    if rng.gen_bool(0.5) {
        span.into_iter().chain(core).collect()
    } else {
        core.into_iter().chain(span).collect()
    }
}

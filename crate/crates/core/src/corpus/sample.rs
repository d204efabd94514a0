use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Answer label. Order matters: it is the class index and the argmax
/// tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    True,
    False,
    Uncertain,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::True, Label::False, Label::Uncertain];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::True => "true",
            Label::False => "false",
            Label::Uncertain => "uncertain",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "true" => Ok(Label::True),
            "false" => Ok(Label::False),
            "uncertain" => Ok(Label::Uncertain),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuestionType {
    /// True/false question; the option set is implicitly `{"Yes"}`.
    TF,
    /// Multiple choice with the option terms embedded in the question.
    MC,
}

/// One `{question, answer, option}` triple with its gold label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub question_id: String,
    pub question: Vec<String>,
    pub answer_id: String,
    pub answer: Vec<String>,
    pub option: Option<Vec<String>>,
    pub label: Label,
}

impl Sample {
    pub fn question_type(&self) -> QuestionType {
        if self.option.is_some() {
            QuestionType::MC
        } else {
            QuestionType::TF
        }
    }

    /// Key that identifies the question text; shared by every sample of a
    /// question and computable for unseen questions at inference time.
    pub fn question_key(&self) -> String {
        self.question.join(" ")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidSample {
                question_id: self.question_id.clone(),
                answer_id: self.answer_id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.question.is_empty() {
            return fail("empty question");
        }
        if self.answer.is_empty() {
            return fail("empty answer");
        }
        if let Some(option) = &self.option {
            if option.is_empty() {
                return fail("empty option term");
            }
            if let Some(tok) = option.iter().find(|t| !self.question.contains(t)) {
                return fail(&format!("option token {tok:?} does not occur in the question"));
            }
        }
        Ok(())
    }
}

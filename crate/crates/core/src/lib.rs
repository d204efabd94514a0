//! AntNet: an answer-understanding network for reverse question answering.
//!
//! The machine asks, the human answers in free text, and the network labels
//! each `{question, answer, option}` triple as true, false or uncertain.

pub mod answer;
pub mod autodiff;
pub mod corpus;
pub mod encoders;
pub mod error;
pub mod fusion;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod question;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

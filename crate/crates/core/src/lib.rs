//! Extractive question answering over biomedical snippets and abstracts.
//!
//! The pipeline runs in stages, each owned by one module:
//!
//! * [`ingest`] parses challenge JSON, resolves abstracts and builds
//!   question/passage pairs in SQuAD layout.
//! * [`tokenizer`] turns pairs into fixed-length WordPiece windows with
//!   character alignment.
//! * [`encoder`] and [`heads`] compute token representations, span
//!   distributions and yes/no probabilities, with hand-written gradients.
//! * [`trainer`] fits encoder and heads by mini-batch gradient descent.
//! * [`decoder`] enumerates n-best spans; [`postprocess`] merges, filters
//!   and selects final answers; [`metrics`] scores them.
//! * [`predict`] runs inference per question from a model or from replayed
//!   logits.

pub mod decoder;
pub mod encoder;
pub mod error;
pub mod heads;
pub mod ingest;
pub mod metrics;
pub mod postprocess;
pub mod predict;
pub mod text;
pub mod tokenizer;
pub mod trainer;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Question category. Summary questions are not modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Factoid,
    List,
    Yesno,
}

impl QuestionType {
    pub const ALL: [QuestionType; 3] = [QuestionType::Factoid, QuestionType::List, QuestionType::Yesno];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::Factoid => "factoid",
            QuestionType::List => "list",
            QuestionType::Yesno => "yesno",
        }
    }

    /// Factoid and list questions are answered by extracting spans.
    pub fn is_extractive(self) -> bool {
        !matches!(self, QuestionType::Yesno)
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "factoid" => Ok(QuestionType::Factoid),
            "list" => Ok(QuestionType::List),
            "yesno" | "yes/no" | "yes_no" => Ok(QuestionType::Yesno),
            other => Err(Error::UnknownQuestionType(other.to_string())),
        }
    }
}

/// Binary answer of a yes/no question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YesNo {
    Yes,
    No,
}

impl YesNo {
    pub fn as_str(self) -> &'static str {
        match self {
            YesNo::Yes => "yes",
            YesNo::No => "no",
        }
    }

    pub fn from_bool(yes: bool) -> Self {
        if yes {
            YesNo::Yes
        } else {
            YesNo::No
        }
    }

    pub fn is_yes(self) -> bool {
        self == YesNo::Yes
    }
}

impl fmt::Display for YesNo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for YesNo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Ok(YesNo::Yes),
            "no" => Ok(YesNo::No),
            other => Err(Error::InvalidInput(format!("not a yes/no label: {other:?}"))),
        }
    }
}

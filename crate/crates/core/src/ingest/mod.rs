//! Conversion of challenge questions into SQuAD-style question/passage pairs.

mod abstracts;
mod bioasq;
mod pairs;
mod squad;

pub use abstracts::{
    fetch_abstract, split_sentences, Abstract, AbstractSource, AbstractStore, CachedAbstracts,
    EfetchClient, MemoryStore, DEFAULT_EFETCH_URL,
};
pub use bioasq::{parse_bioasq, pmid_from_document, BioAsqQuestion, ParsedQuestions, Snippet};
pub use pairs::{
    build_pairs, full_abstract_answer_offsets, locate_answer_occurrences, undersample_yesno,
    AnswerSpan, BuildOutcome, PairMode, QaPair, Strategy, StrategyConfig,
};
pub use squad::{from_squad_json, to_squad_json};

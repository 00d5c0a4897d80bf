//! Question/passage pair construction under the three passage strategies.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::abstracts::{Abstract, AbstractStore};
use super::bioasq::BioAsqQuestion;
use crate::text::{byte_to_char, collapse_whitespace, collapse_whitespace_mapped, find_folded};
use crate::{Error, QuestionType, Result, YesNo};

/// How a passage is formed from a snippet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The snippet text itself.
    SnippetAsis,
    /// The whole abstract (title + body) the snippet was taken from.
    FullAbstract,
    /// The snippet extended by whole sentences of its abstract on both sides.
    AppendedSnippet,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::SnippetAsis => "snippet_asis",
            Strategy::FullAbstract => "full_abstract",
            Strategy::AppendedSnippet => "appended_snippet",
        }
    }

    pub fn needs_abstracts(self) -> bool {
        self != Strategy::SnippetAsis
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "snippet_asis" | "snippet_as_is" | "snippet" => Ok(Strategy::SnippetAsis),
            "full_abstract" | "abstract" => Ok(Strategy::FullAbstract),
            "appended_snippet" | "appended" => Ok(Strategy::AppendedSnippet),
            other => Err(Error::InvalidInput(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Sentences added on each side of the snippet; only read by
    /// [`Strategy::AppendedSnippet`].
    pub n_append: usize,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            strategy: Strategy::SnippetAsis,
            n_append: 1,
        }
    }
}

impl StrategyConfig {
    pub fn new(strategy: Strategy, n_append: usize) -> Result<Self> {
        if strategy == Strategy::AppendedSnippet && n_append == 0 {
            return Err(Error::InvalidInput("n_append must be at least 1".into()));
        }
        Ok(StrategyConfig { strategy, n_append })
    }
}

/// Answer text with its start as a character (not byte) offset into the
/// context, as in SQuAD.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub text: String,
    pub answer_start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaPair {
    /// `<question id>_<passage ordinal>_<match ordinal>`
    pub pair_id: String,
    pub question_id: String,
    pub question: String,
    pub context: String,
    pub answers: Vec<AnswerSpan>,
    pub yesno: Option<YesNo>,
    pub qtype: QuestionType,
}

impl QaPair {
    /// True when every answer's text is exactly the context substring at its
    /// offset.
    pub fn offsets_sound(&self) -> bool {
        self.answers.iter().all(|a| {
            crate::text::char_slice(&self.context, a.answer_start, a.text.chars().count())
                == Some(a.text.as_str())
        })
    }

    /// Byte range of the first answer in the context.
    pub fn answer_byte_range(&self) -> Option<(usize, usize)> {
        let a = self.answers.first()?;
        let start = crate::text::char_to_byte(&self.context, a.answer_start)?;
        Some((start, start + a.text.len()))
    }
}

/// Training pairs need gold supervision; inference pairs are emitted for
/// every passage without labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    Train,
    Infer,
}

/// Pairs for one question plus bookkeeping for the conversion report.
#[derive(Debug, Clone, Default)]
pub struct BuildOutcome {
    pub pairs: Vec<QaPair>,
    /// Passages that contain none of the gold answers (excluded).
    pub passages_without_answer: usize,
    /// Snippets that could not be located in their abstract.
    pub snippets_not_found: usize,
    /// Of those, how many were rescued by searching answers in the abstract.
    pub answer_fallbacks: usize,
    /// Snippets dropped because neither the snippet nor an answer was found.
    pub dropped: usize,
}

/// Character offsets of every case-insensitive occurrence of `answer` in
/// `context`, ascending.
pub fn locate_answer_occurrences(context: &str, answer: &str) -> Vec<usize> {
    find_folded(context, answer)
        .into_iter()
        .map(|(s, _)| byte_to_char(context, s))
        .collect()
}

/// Character offsets of `answer` in `full_text` computed as the snippet's
/// offset in the full text plus the answer's offsets within the snippet.
/// `None` when the snippet is not a verbatim substring of the full text.
pub fn full_abstract_answer_offsets(full_text: &str, snippet: &str, answer: &str) -> Option<Vec<usize>> {
    let snippet_at = full_text.find(snippet)?;
    let base = byte_to_char(full_text, snippet_at);
    Some(
        locate_answer_occurrences(snippet, answer)
            .into_iter()
            .map(|off| base + off)
            .collect(),
    )
}

/// Distinct byte ranges of all synonyms inside `text`, sorted.
fn synonym_ranges<'a>(text: &str, synonyms: impl Iterator<Item = &'a str>) -> Vec<(usize, usize)> {
    let mut ranges: Vec<(usize, usize)> = synonyms
        .filter(|s| !s.trim().is_empty())
        .flat_map(|s| find_folded(text, s))
        .collect();
    ranges.sort_unstable();
    ranges.dedup();
    ranges
}

/// Byte region of `snippet` inside `full_text`: verbatim first, then with
/// whitespace runs collapsed on both sides.
fn locate_snippet(full_text: &str, snippet: &str) -> Option<((usize, usize), bool)> {
    if let Some(p) = full_text.find(snippet) {
        return Some(((p, p + snippet.len()), true));
    }
    let needle = collapse_whitespace(snippet);
    if needle.is_empty() {
        return None;
    }
    let (norm, map) = collapse_whitespace_mapped(full_text);
    let p = norm.find(&needle)?;
    let last = p + needle.len() - 1;
    // `last` may point inside a multi-byte char; walk back to its start
    let last_char_start = (0..=last).rev().find(|&i| norm.is_char_boundary(i))?;
    let orig_last = map[last_char_start];
    let end = orig_last + full_text[orig_last..].chars().next().map_or(0, char::len_utf8);
    Some(((map[p], end), false))
}

/// Byte range of the passage made of the sentences covering `region` plus
/// `n` whole sentences on each side. When one side runs out of sentences
/// the other side is extended so the passage holds `min(2n + k, total)`
/// sentences.
pub(crate) fn appended_range(abs: &Abstract, region: (usize, usize), n: usize) -> (usize, usize) {
    let spans = &abs.sentence_spans;
    if spans.is_empty() {
        return (0, abs.full_text.len());
    }
    let total = spans.len();
    let first = spans.iter().position(|&(_, e)| e > region.0).unwrap_or(total - 1);
    let last = spans
        .iter()
        .rposition(|&(s, _)| s < region.1)
        .unwrap_or(first)
        .max(first);
    let want = (2 * n + (last - first + 1)).min(total);
    let mut lo = first.saturating_sub(n);
    let mut hi = (last + n).min(total - 1);
    // rebalance toward whichever side still has sentences
    while hi - lo + 1 < want {
        if lo > 0 {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    let start = spans[lo].0.min(region.0);
    let end = spans[hi].1.max(region.1);
    (start, end)
}

fn make_pair(q: &BioAsqQuestion, passage: usize, m: usize, context: &str, answer: Option<(usize, usize)>) -> QaPair {
    let answers = answer
        .map(|(s, e)| AnswerSpan {
            text: context[s..e].to_string(),
            answer_start: byte_to_char(context, s),
        })
        .into_iter()
        .collect();
    QaPair {
        pair_id: format!("{}_{:03}_{:02}", q.id, passage, m),
        question_id: q.id.clone(),
        question: q.body.clone(),
        context: context.to_string(),
        answers,
        yesno: q.yesno_answer,
        qtype: q.qtype,
    }
}

/// A passage built for one snippet, with answer ranges relative to it.
struct Passage {
    context: String,
    answers: Vec<(usize, usize)>,
}

/// Builds the passages for one snippet. Answer ranges are only computed for
/// extractive questions.
fn passages_for_snippet(
    q: &BioAsqQuestion,
    snippet_text: &str,
    abs: Option<&Abstract>,
    cfg: &StrategyConfig,
    outcome: &mut BuildOutcome,
) -> Vec<Passage> {
    let extractive = q.qtype.is_extractive();
    let answers_in = |text: &str| {
        if extractive {
            synonym_ranges(text, q.synonyms())
        } else {
            Vec::new()
        }
    };
    let Some(abs) = abs.filter(|_| cfg.strategy.needs_abstracts()) else {
        return vec![Passage {
            context: snippet_text.to_string(),
            answers: answers_in(snippet_text),
        }];
    };
    let full = &abs.full_text;
    match locate_snippet(full, snippet_text) {
        Some((region, verbatim)) => {
            // offsets inside the snippet shifted by the snippet's own offset
            let found: Vec<(usize, usize)> = if verbatim {
                answers_in(snippet_text)
                    .into_iter()
                    .map(|(s, e)| (region.0 + s, region.0 + e))
                    .collect()
            } else {
                answers_in(&full[region.0..region.1])
                    .into_iter()
                    .map(|(s, e)| (region.0 + s, region.0 + e))
                    .collect()
            };
            let (start, end) = match cfg.strategy {
                Strategy::AppendedSnippet => appended_range(abs, region, cfg.n_append),
                _ => (0, full.len()),
            };
            vec![Passage {
                context: full[start..end].to_string(),
                answers: found.into_iter().map(|(s, e)| (s - start, e - start)).collect(),
            }]
        }
        None => {
            outcome.snippets_not_found += 1;
            if !extractive {
                let context = match cfg.strategy {
                    Strategy::FullAbstract => full.clone(),
                    _ => snippet_text.to_string(),
                };
                return vec![Passage {
                    context,
                    answers: Vec::new(),
                }];
            }
            let direct = answers_in(full);
            if direct.is_empty() {
                outcome.dropped += 1;
                return Vec::new();
            }
            outcome.answer_fallbacks += 1;
            match cfg.strategy {
                Strategy::FullAbstract => vec![Passage {
                    context: full.clone(),
                    answers: direct,
                }],
                _ => direct
                    .into_iter()
                    .map(|(s, e)| {
                        let (ps, pe) = appended_range(abs, (s, e), cfg.n_append);
                        Passage {
                            context: full[ps..pe].to_string(),
                            answers: vec![(s - ps, e - ps)],
                        }
                    })
                    .collect(),
            }
        }
    }
}

/// Builds question/passage pairs for one question.
///
/// In training mode extractive questions yield one pair per distinct answer
/// occurrence and passages without an answer are excluded; yes/no questions
/// yield one labelled pair per snippet. In inference mode every passage
/// yields one unlabelled pair.
pub fn build_pairs(
    q: &BioAsqQuestion,
    cfg: &StrategyConfig,
    store: Option<&dyn AbstractStore>,
    mode: PairMode,
) -> Result<BuildOutcome> {
    let mut outcome = BuildOutcome::default();
    if mode == PairMode::Train && q.qtype == QuestionType::Yesno && q.yesno_answer.is_none() {
        return Err(Error::InvalidInput("yes/no question without a label".into()).in_question(&q.id));
    }
    for (i, snippet) in q.snippets.iter().enumerate() {
        let abs = if cfg.strategy.needs_abstracts() {
            let store = store.ok_or_else(|| {
                Error::InvalidInput(format!("strategy {} needs an abstract store", cfg.strategy))
            })?;
            Some(store.get(&snippet.pmid).map_err(|e| e.in_question(&q.id))?)
        } else {
            None
        };
        let passages = passages_for_snippet(q, &snippet.text, abs.as_ref(), cfg, &mut outcome);
        let mut m = 0;
        for p in passages {
            if mode == PairMode::Infer || !q.qtype.is_extractive() {
                let mut pair = make_pair(q, i, m, &p.context, None);
                if mode == PairMode::Infer {
                    pair.yesno = None;
                }
                outcome.pairs.push(pair);
                m += 1;
                continue;
            }
            if p.answers.is_empty() {
                outcome.passages_without_answer += 1;
                continue;
            }
            for range in p.answers {
                outcome.pairs.push(make_pair(q, i, m, &p.context, Some(range)));
                m += 1;
            }
        }
    }
    Ok(outcome)
}

/// Balances yes/no pairs by sampling the majority class down to the size of
/// the minority class. Surviving pairs keep their input order.
pub fn undersample_yesno(pairs: &[QaPair], seed: u64) -> Result<Vec<QaPair>> {
    let mut yes = Vec::new();
    let mut no = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        match (p.qtype, p.yesno) {
            (QuestionType::Yesno, Some(YesNo::Yes)) => yes.push(i),
            (QuestionType::Yesno, Some(YesNo::No)) => no.push(i),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "pair {} is not a labelled yes/no pair",
                    p.pair_id
                )))
            }
        }
    }
    if yes.is_empty() {
        return Err(Error::CannotBalance { missing: YesNo::Yes });
    }
    if no.is_empty() {
        return Err(Error::CannotBalance { missing: YesNo::No });
    }
    let (minority, majority) = if yes.len() <= no.len() { (yes, no) } else { (no, yes) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = sample(&mut rng, majority.len(), minority.len())
        .into_iter()
        .map(|k| majority[k])
        .chain(minority)
        .collect();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| pairs[i].clone()).collect())
}

//! WordPiece tokenization and question/passage window packing.
//!
//! Text is case-folded before vocabulary lookup, but every token keeps the
//! byte span of its source characters in the original string, so answers
//! can be cut back out with their original casing.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::ingest::QaPair;
use crate::text::fold_char;
use crate::{Error, Result, YesNo};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const CONTINUATION: &str = "##";

const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
    pub pad_id: usize,
    pub unk_id: usize,
    pub cls_id: usize,
    pub sep_id: usize,
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vocabulary token {t:?}")));
            }
        }
        let special = |name: &str| {
            ids.get(name)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("vocabulary lacks {name}")))
        };
        Ok(Vocab {
            pad_id: special(PAD)?,
            unk_id: special(UNK)?,
            cls_id: special(CLS)?,
            sep_id: special(SEP)?,
            tokens,
            ids,
        })
    }

    /// One token per line; the id is the line number.
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_tokens(text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Vocabulary for small corpora: the special tokens, every single
    /// character seen (bare and `##`-prefixed) and then whole words by
    /// descending frequency until `max_size` is reached.
    pub fn from_corpus<'a>(texts: impl IntoIterator<Item = &'a str>, max_size: usize) -> Result<Self> {
        let mut words: BTreeMap<String, usize> = BTreeMap::new();
        let mut chars: BTreeMap<char, ()> = BTreeMap::new();
        for text in texts {
            for (s, e) in pre_tokenize(text) {
                let w: String = text[s..e].chars().map(fold_char).collect();
                chars.extend(w.chars().map(|c| (c, ())));
                *words.entry(w).or_default() += 1;
            }
        }
        let mut tokens: Vec<String> = [PAD, UNK, CLS, SEP].iter().map(|s| s.to_string()).collect();
        for c in chars.keys() {
            tokens.push(c.to_string());
            tokens.push(format!("{CONTINUATION}{c}"));
        }
        let mut by_freq: Vec<(String, usize)> = words.into_iter().filter(|(w, _)| w.chars().count() > 1).collect();
        by_freq.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for (w, _) in by_freq {
            if tokens.len() >= max_size {
                break;
            }
            tokens.push(w);
        }
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }
}

fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace() && !c.is_control()
}

/// Byte spans of whitespace-separated words with punctuation characters
/// split off as words of their own.
fn pre_tokenize(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() || c.is_control() || is_punctuation(c) {
            if let Some(s) = start.take() {
                out.push((s, i));
            }
            if is_punctuation(c) {
                out.push((i, i + c.len_utf8()));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, text.len()));
    }
    out
}

/// A vocabulary piece with the byte span it covers in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub id: usize,
    pub start: usize,
    pub end: usize,
}

/// Greedy longest-match-first decomposition of one word. Returns `None`
/// when some suffix cannot be matched.
fn word_pieces(word: &str, offset: usize, vocab: &Vocab) -> Option<Vec<Piece>> {
    let folded: Vec<char> = word.chars().map(fold_char).collect();
    let bounds: Vec<usize> = word
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(word.len()))
        .collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < folded.len() {
        let mut end = folded.len();
        let mut found = None;
        while end > start {
            let mut candidate: String = folded[start..end].iter().collect();
            if start > 0 {
                candidate.insert_str(0, CONTINUATION);
            }
            if let Some(id) = vocab.id(&candidate) {
                found = Some(id);
                break;
            }
            end -= 1;
        }
        let id = found?;
        pieces.push(Piece {
            id,
            start: offset + bounds[start],
            end: offset + bounds[end],
        });
        start = end;
    }
    Some(pieces)
}

/// Tokenizes `text` into vocabulary pieces with byte spans.
pub fn tokenize(text: &str, vocab: &Vocab) -> Vec<Piece> {
    let mut out = Vec::new();
    for (s, e) in pre_tokenize(text) {
        let word = &text[s..e];
        let pieces = if word.chars().count() > MAX_WORD_CHARS {
            None
        } else {
            word_pieces(word, s, vocab)
        };
        match pieces {
            Some(p) => out.extend(p),
            None => out.push(Piece {
                id: vocab.unk_id,
                start: s,
                end: e,
            }),
        }
    }
    out
}

/// WordPiece token strings for `text`.
pub fn wordpiece(text: &str, vocab: &Vocab) -> Vec<String> {
    tokenize(text, vocab)
        .into_iter()
        .map(|p| vocab.token(p.id).unwrap_or(UNK).to_string())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeConfig {
    pub max_seq_len: usize,
    pub doc_stride: usize,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            max_seq_len: 384,
            doc_stride: 128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Supervision {
    /// Answer byte range in the context.
    Span { start: usize, end: usize },
    YesNo(YesNo),
}

/// One packed window: `[CLS] question [SEP] passage-window [SEP] [PAD]*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub pair_id: String,
    pub window_index: usize,
    pub input_ids: Vec<usize>,
    pub segment_ids: Vec<u8>,
    /// Byte span in the context for passage tokens; `None` elsewhere.
    pub token_spans: Vec<Option<(usize, usize)>>,
    /// Number of non-padding positions.
    pub seq_len: usize,
    pub start_position: Option<usize>,
    pub end_position: Option<usize>,
    pub yes_label: Option<u8>,
}

impl Feature {
    pub fn max_seq_len(&self) -> usize {
        self.input_ids.len()
    }

    /// Positions an answer may start or end at.
    pub fn passage_mask(&self) -> Vec<bool> {
        self.token_spans.iter().map(Option::is_some).collect()
    }

    pub fn has_span(&self) -> bool {
        self.start_position.is_some() && self.end_position.is_some()
    }
}

/// Packs a question and context into one or more windows.
///
/// Windows advance by `doc_stride` passage tokens. With a span supervision,
/// windows that hold the whole answer get start/end positions; in training
/// mode the others are dropped, and a pair with no such window is an
/// [`Error::Unanswerable`].
pub fn encode_pair(
    pair_id: &str,
    question: &str,
    context: &str,
    vocab: &Vocab,
    cfg: &EncodeConfig,
    supervision: Option<Supervision>,
    training: bool,
) -> Result<Vec<Feature>> {
    let q_ids: Vec<usize> = tokenize(question, vocab).into_iter().map(|p| p.id).collect();
    if cfg.max_seq_len <= q_ids.len() + 3 {
        return Err(Error::InvalidInput(format!(
            "max_seq_len {} too small for a {}-token question",
            cfg.max_seq_len,
            q_ids.len()
        )));
    }
    let budget = cfg.max_seq_len - q_ids.len() - 3;
    if cfg.doc_stride == 0 || cfg.doc_stride >= budget {
        return Err(Error::InvalidInput(format!(
            "doc_stride {} must be in 1..{budget} (window budget)",
            cfg.doc_stride
        )));
    }
    let passage = tokenize(context, vocab);

    // answer token range over the whole passage, on exact piece boundaries
    let span_tokens = match supervision {
        Some(Supervision::Span { start, end }) => {
            let s = passage.iter().position(|p| p.start == start);
            let e = passage.iter().rposition(|p| p.end == end);
            match (s, e) {
                (Some(s), Some(e)) if s <= e => Some((s, e)),
                _ => None,
            }
        }
        _ => None,
    };
    let wants_span = matches!(supervision, Some(Supervision::Span { .. }));
    let yes_label = match supervision {
        Some(Supervision::YesNo(y)) => Some(u8::from(y.is_yes())),
        _ => None,
    };

    let mut window_starts = vec![0];
    while window_starts.last().unwrap() + budget < passage.len() {
        window_starts.push(window_starts.last().unwrap() + cfg.doc_stride);
    }

    let offset = q_ids.len() + 2;
    let mut features = Vec::new();
    for (w, &ws) in window_starts.iter().enumerate() {
        let we = (ws + budget).min(passage.len());
        let mut input_ids = Vec::with_capacity(cfg.max_seq_len);
        input_ids.push(vocab.cls_id);
        input_ids.extend(&q_ids);
        input_ids.push(vocab.sep_id);
        let mut segment_ids = vec![0u8; input_ids.len()];
        let mut token_spans = vec![None; input_ids.len()];
        for p in &passage[ws..we] {
            input_ids.push(p.id);
            segment_ids.push(1);
            token_spans.push(Some((p.start, p.end)));
        }
        input_ids.push(vocab.sep_id);
        segment_ids.push(1);
        token_spans.push(None);
        let seq_len = input_ids.len();
        input_ids.resize(cfg.max_seq_len, vocab.pad_id);
        segment_ids.resize(cfg.max_seq_len, 0);
        token_spans.resize(cfg.max_seq_len, None);

        let (start_position, end_position) = match span_tokens {
            Some((s, e)) if s >= ws && e < we => (Some(s - ws + offset), Some(e - ws + offset)),
            _ => (None, None),
        };
        if training && wants_span && start_position.is_none() {
            continue;
        }
        features.push(Feature {
            pair_id: pair_id.to_string(),
            window_index: w,
            input_ids,
            segment_ids,
            token_spans,
            seq_len,
            start_position,
            end_position,
            yes_label,
        });
    }
    if training && wants_span && features.is_empty() {
        return Err(Error::Unanswerable {
            pair_id: pair_id.to_string(),
        });
    }
    Ok(features)
}

/// Encodes a [`QaPair`], taking supervision from its first answer or its
/// yes/no label.
pub fn encode_qa_pair(pair: &QaPair, vocab: &Vocab, cfg: &EncodeConfig, training: bool) -> Result<Vec<Feature>> {
    let supervision = if pair.qtype.is_extractive() {
        pair.answer_byte_range()
            .map(|(start, end)| Supervision::Span { start, end })
    } else {
        pair.yesno.map(Supervision::YesNo)
    };
    if training && supervision.is_none() {
        return Err(Error::InvalidInput(format!("training pair {} has no supervision", pair.pair_id)));
    }
    encode_pair(&pair.pair_id, &pair.question, &pair.context, vocab, cfg, supervision, training)
}

/// Context text covered by passage tokens `start..=end` of `feature`.
pub fn token_span_to_text(feature: &Feature, context: &str, start: usize, end: usize) -> Result<String> {
    if start > end {
        return Err(Error::InvalidSpan { start, end });
    }
    let span = |i: usize| {
        feature
            .token_spans
            .get(i)
            .copied()
            .flatten()
            .ok_or(Error::NotPassageToken { index: i })
    };
    let (s, _) = span(start)?;
    let (_, e) = span(end)?;
    context
        .get(s..e)
        .map(str::to_string)
        .ok_or_else(|| Error::InvalidInput(format!("feature spans do not fit the context ({s}..{e})")))
}

//! n-best span decoding.
//!
//! Spans are scored by `p_start[i] * p_end[j]`. Candidates are ranked by a
//! total order: higher probability first, then earlier start, then shorter
//! span. Within one feature only the best-ranked instance of each text is
//! kept.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::heads::{masked_softmax, sigmoid, SpanDistributions};
use crate::tokenizer::{token_span_to_text, Feature};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub text: String,
    pub probability: f64,
    pub start_token: usize,
    pub end_token: usize,
    pub pair_id: String,
    pub window_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NbestConfig {
    pub k: usize,
    pub max_answer_tokens: usize,
}

impl Default for NbestConfig {
    fn default() -> Self {
        NbestConfig {
            k: 20,
            max_answer_tokens: 30,
        }
    }
}

/// Ranking order of two spans: `Less` means `a` ranks first.
pub fn span_order(a: (f64, usize, usize), b: (f64, usize, usize)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.cmp(&b.1))
        .then((a.2 - a.1).cmp(&(b.2 - b.1)))
}

#[derive(PartialEq)]
struct Ranked {
    prob: f64,
    start: usize,
    end: usize,
}

impl Eq for Ranked {}

impl Ord for Ranked {
    // max-heap: the best-ranked span must compare greatest
    fn cmp(&self, other: &Self) -> Ordering {
        span_order((other.prob, other.start, other.end), (self.prob, self.start, self.end))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Top-`k` distinct-text spans with `start <= end < start + max_answer_tokens`
/// over passage positions of `feature`.
pub fn nbest(
    dists: &SpanDistributions,
    feature: &Feature,
    context: &str,
    k: usize,
    max_answer_tokens: usize,
) -> Result<Vec<SpanPrediction>> {
    if k == 0 || max_answer_tokens == 0 {
        return Err(Error::InvalidInput("k and max_answer_tokens must be at least 1".into()));
    }
    let mask = feature.passage_mask();
    let l = mask.len();
    if dists.p_start.len() != l || dists.p_end.len() != l {
        return Err(Error::Shape(format!("distributions of length {} for a {l}-token feature", dists.p_start.len())));
    }
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::new();
    for start in (0..l).filter(|&i| mask[i]) {
        // passage tokens are contiguous
        let run = mask[start..(start + max_answer_tokens).min(l)].iter().take_while(|&&m| m).count();
        for end in start..start + run {
            heap.push(Ranked {
                prob: dists.p_start[start] * dists.p_end[end],
                start,
                end,
            });
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(k);
    while let Some(r) = heap.pop() {
        let text = token_span_to_text(feature, context, r.start, r.end)?;
        if !seen.insert(text.clone()) {
            continue;
        }
        out.push(SpanPrediction {
            text,
            probability: r.prob,
            start_token: r.start,
            end_token: r.end,
            pair_id: feature.pair_id.clone(),
            window_index: feature.window_index,
        });
        if out.len() == k {
            break;
        }
    }
    Ok(out)
}

/// Combines the n-best lists of all windows of one pair: one entry per
/// text at its highest probability, best first.
pub fn multi_window_collapse(per_window: Vec<Vec<SpanPrediction>>) -> Vec<SpanPrediction> {
    let mut all: Vec<SpanPrediction> = per_window.into_iter().flatten().collect();
    all.sort_by(|a, b| {
        span_order((a.probability, a.start_token, a.end_token), (b.probability, b.start_token, b.end_token))
            .then(a.window_index.cmp(&b.window_index))
    });
    let mut seen = HashSet::new();
    all.retain(|p| seen.insert(p.text.clone()));
    all
}

/// One line of a logits replay file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitRecord {
    pub pair_id: String,
    pub window_index: usize,
    pub start_logits: Vec<f64>,
    pub end_logits: Vec<f64>,
    pub cls_logit: f64,
}

impl LogitRecord {
    /// Span distributions with the same passage masking as the model heads.
    pub fn span_distributions(&self, feature: &Feature) -> Result<SpanDistributions> {
        let mask = feature.passage_mask();
        Ok(SpanDistributions {
            p_start: masked_softmax(&self.start_logits, &mask)?,
            p_end: masked_softmax(&self.end_logits, &mask)?,
        })
    }

    pub fn yes_probability(&self) -> f64 {
        sigmoid(self.cls_logit)
    }
}

/// Parses a JSON-lines logits file; blank lines are ignored.
pub fn parse_logits_jsonl(text: &str) -> Result<Vec<LogitRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Json {
                line: i + 1,
                column: e.column(),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn logits_to_jsonl(records: &[LogitRecord]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

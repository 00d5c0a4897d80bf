//! Inference: scoring pairs with a model or replayed logits, then assembling
//! one answer per question.
//!
//! Both scoring paths go through [`LogitRecord`], so a model's dumped logits
//! replay to the same answers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::decoder::{multi_window_collapse, nbest, LogitRecord, NbestConfig, SpanPrediction};
use crate::heads::{span_logits, yes_logit};
use crate::ingest::QaPair;
use crate::postprocess::{
    decide_yesno, ensemble, ensemble_yesno, extract_answer_count, filter_candidates, merge, select_factoid,
    select_list, Candidate, ExactAnswer, FinalAnswer, MergedAnswers, DEFAULT_THRESHOLD,
};
use crate::tokenizer::{encode_qa_pair, EncodeConfig, Feature, Vocab};
use crate::trainer::Model;
use crate::{Error, QuestionType, Result};

/// Logits keyed by `(pair_id, window_index)`.
#[derive(Debug, Clone, Default)]
pub struct LogitTable {
    records: HashMap<(String, usize), LogitRecord>,
}

impl LogitTable {
    pub fn new(records: Vec<LogitRecord>) -> Result<Self> {
        let mut map = HashMap::with_capacity(records.len());
        for r in records {
            let key = (r.pair_id.clone(), r.window_index);
            if map.insert(key, r).is_some() {
                return Err(Error::InvalidInput("duplicate logits record".into()));
            }
        }
        Ok(LogitTable { records: map })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Clone, Copy)]
pub enum Scorer<'a> {
    Model(&'a Model),
    Logits(&'a LogitTable),
}

impl Scorer<'_> {
    pub fn logits(&self, feature: &Feature) -> Result<LogitRecord> {
        match self {
            Scorer::Model(model) => {
                let out = model.encode(feature)?;
                let (start_logits, end_logits) = span_logits(&out, &model.heads);
                Ok(LogitRecord {
                    pair_id: feature.pair_id.clone(),
                    window_index: feature.window_index,
                    start_logits,
                    end_logits,
                    cls_logit: yes_logit(out.cls_rep(), &model.heads),
                })
            }
            Scorer::Logits(table) => {
                let r = table
                    .records
                    .get(&(feature.pair_id.clone(), feature.window_index))
                    .ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "no logits for pair {} window {}",
                            feature.pair_id, feature.window_index
                        ))
                    })?;
                let l = feature.max_seq_len();
                if r.start_logits.len() != l || r.end_logits.len() != l {
                    return Err(Error::Shape(format!(
                        "logits for pair {} window {} have length {}, feature has {l}",
                        r.pair_id,
                        r.window_index,
                        r.start_logits.len()
                    )));
                }
                Ok(r.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictConfig {
    pub encode: EncodeConfig,
    pub nbest: NbestConfig,
    pub threshold: f64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            encode: EncodeConfig::default(),
            nbest: NbestConfig::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PairPrediction {
    pub pair_id: String,
    /// Span candidates across windows; empty for yes/no pairs.
    pub candidates: Vec<SpanPrediction>,
    /// Mean yes probability over the pair's windows.
    pub yes_probability: f64,
    pub logits: Vec<LogitRecord>,
}

pub fn predict_pair(pair: &QaPair, vocab: &Vocab, scorer: Scorer<'_>, cfg: &PredictConfig) -> Result<PairPrediction> {
    let features = encode_qa_pair(pair, vocab, &cfg.encode, false)?;
    let mut per_window = Vec::with_capacity(features.len());
    let mut logits = Vec::with_capacity(features.len());
    for f in &features {
        let r = scorer.logits(f)?;
        if pair.qtype.is_extractive() {
            let d = r.span_distributions(f)?;
            per_window.push(nbest(&d, f, &pair.context, cfg.nbest.k, cfg.nbest.max_answer_tokens)?);
        }
        logits.push(r);
    }
    let yes_probability = logits.iter().map(LogitRecord::yes_probability).sum::<f64>() / logits.len() as f64;
    Ok(PairPrediction {
        pair_id: pair.pair_id.clone(),
        candidates: multi_window_collapse(per_window),
        yes_probability,
        logits,
    })
}

/// Everything answer selection needs for one question, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionAudit {
    pub id: String,
    #[serde(rename = "type")]
    pub qtype: QuestionType,
    pub question: String,
    pub pairs: Vec<String>,
    /// Merged and filtered candidates, best first.
    pub candidates: Vec<Candidate>,
    /// Per-pair yes probabilities.
    pub yes_probabilities: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub answer_count: Option<usize>,
}

/// Groups pairs by question, in order of first appearance.
pub fn group_by_question(pairs: &[QaPair]) -> Vec<Vec<&QaPair>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<&QaPair>> = Vec::new();
    for p in pairs {
        let i = *index.entry(&p.question_id).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[i].push(p);
    }
    groups
}

/// Merges the predictions of one question's pairs, given in pair order.
pub fn audit_question(pairs: &[&QaPair], preds: &[PairPrediction]) -> Result<QuestionAudit> {
    let first = pairs.first().ok_or(Error::Empty("question pairs"))?;
    if pairs.len() != preds.len() {
        return Err(Error::InvalidInput("one prediction per pair expected".into()));
    }
    if let Some(p) = pairs.iter().find(|p| p.question_id != first.question_id || p.qtype != first.qtype) {
        return Err(Error::InvalidInput(format!("pair {} does not belong to question {}", p.pair_id, first.question_id)));
    }
    let (candidates, yes_probabilities) = if first.qtype.is_extractive() {
        let lists: Vec<Vec<Candidate>> = preds
            .iter()
            .map(|p| p.candidates.iter().map(Candidate::from).collect())
            .collect();
        let merged = merge(&first.question_id, &lists);
        (filter_candidates(&merged.candidates), vec![])
    } else {
        (vec![], preds.iter().map(|p| p.yes_probability).collect())
    };
    Ok(QuestionAudit {
        id: first.question_id.clone(),
        qtype: first.qtype,
        question: first.question.clone(),
        pairs: pairs.iter().map(|p| p.pair_id.clone()).collect(),
        candidates,
        yes_probabilities,
        answer_count: (first.qtype == QuestionType::List)
            .then(|| extract_answer_count(&first.question))
            .flatten(),
    })
}

/// Final answer from an audit record.
pub fn assemble(audit: &QuestionAudit, threshold: f64) -> Result<FinalAnswer> {
    let merged = MergedAnswers {
        question_id: audit.id.clone(),
        candidates: audit.candidates.clone(),
    };
    let mut list_fallback = false;
    let answer = match audit.qtype {
        QuestionType::Factoid => ExactAnswer::Factoid(select_factoid(&merged)),
        QuestionType::List => {
            let s = select_list(&merged, threshold, audit.answer_count)?;
            list_fallback = s.fallback;
            ExactAnswer::List(s.answers)
        }
        QuestionType::Yesno => {
            ExactAnswer::YesNo(decide_yesno(&audit.yes_probabilities).map_err(|e| e.in_question(&audit.id))?)
        }
    };
    Ok(FinalAnswer {
        question_id: audit.id.clone(),
        answer,
        provenance: audit.pairs.clone(),
        list_fallback,
    })
}

/// Combines one question's audits from several models.
pub fn ensemble_audits(models: &[QuestionAudit]) -> Result<QuestionAudit> {
    let first = models.first().ok_or(Error::Empty("ensemble models"))?;
    if let Some(m) = models.iter().find(|m| m.id != first.id || m.qtype != first.qtype) {
        return Err(Error::InvalidInput(format!("cannot ensemble question {} with {}", first.id, m.id)));
    }
    let mut pairs: Vec<String> = models.iter().flat_map(|m| m.pairs.clone()).collect();
    pairs.sort();
    pairs.dedup();
    let (candidates, yes_probabilities) = if first.qtype.is_extractive() {
        let merged: Vec<MergedAnswers> = models
            .iter()
            .map(|m| MergedAnswers {
                question_id: m.id.clone(),
                candidates: m.candidates.clone(),
            })
            .collect();
        (ensemble(&first.id, &merged)?.candidates, vec![])
    } else {
        let per_model: Vec<Vec<f64>> = models.iter().map(|m| m.yes_probabilities.clone()).collect();
        (vec![], vec![ensemble_yesno(&per_model).map_err(|e| e.in_question(&first.id))?])
    };
    Ok(QuestionAudit {
        id: first.id.clone(),
        qtype: first.qtype,
        question: first.question.clone(),
        pairs,
        candidates,
        yes_probabilities,
        answer_count: first.answer_count,
    })
}

#[derive(Serialize, Deserialize)]
struct NbestFile {
    questions: Vec<QuestionAudit>,
}

pub fn audits_to_json(audits: &[QuestionAudit]) -> Result<String> {
    Ok(serde_json::to_string_pretty(&NbestFile {
        questions: audits.to_vec(),
    })? + "\n")
}

pub fn audits_from_json(text: &str) -> Result<Vec<QuestionAudit>> {
    Ok(serde_json::from_str::<NbestFile>(text)?.questions)
}

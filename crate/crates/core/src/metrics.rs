//! Challenge evaluation: factoid strict/lenient accuracy and MRR, list
//! mean precision/recall/F1, yes/no macro F1 and accuracy.
//!
//! Texts are compared under [`match_key`]: case-folded, whitespace
//! collapsed, surrounding punctuation removed.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ingest::ParsedQuestions;
use crate::postprocess::{ExactAnswer, FACTOID_ANSWERS};
use crate::text::match_key;
use crate::{Error, QuestionType, Result, YesNo};

#[derive(Debug, Clone, PartialEq)]
pub enum Gold {
    /// Synonyms of the single answer.
    Factoid(Vec<String>),
    /// One synonym set per expected answer.
    List(Vec<Vec<String>>),
    YesNo(YesNo),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldQuestion {
    pub question_id: String,
    pub gold: Gold,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoldStandard {
    pub questions: Vec<GoldQuestion>,
}

impl GoldStandard {
    pub fn from_parsed(parsed: &ParsedQuestions) -> Result<Self> {
        let questions = parsed
            .questions
            .iter()
            .map(|q| {
                let sets: Vec<Vec<String>> = q
                    .exact_answers
                    .iter()
                    .filter(|s| !s.is_empty())
                    .cloned()
                    .collect();
                let gold = match q.qtype {
                    QuestionType::Yesno => Gold::YesNo(q.yesno_answer.ok_or_else(|| {
                        Error::InvalidInput("yes/no question without a gold label".into()).in_question(&q.id)
                    })?),
                    _ if sets.is_empty() => {
                        return Err(Error::InvalidInput("question without gold answers".into()).in_question(&q.id))
                    }
                    QuestionType::Factoid => Gold::Factoid(sets.concat()),
                    QuestionType::List => Gold::List(sets),
                };
                Ok(GoldQuestion {
                    question_id: q.id.clone(),
                    gold,
                })
            })
            .collect::<Result<Vec<_>>>();
        Ok(GoldStandard { questions: questions? })
    }
}

fn matches(pred: &str, synonyms: &[String]) -> bool {
    let key = match_key(pred);
    !key.is_empty() && synonyms.iter().any(|s| match_key(s) == key)
}

/// Strict hit, lenient hit and reciprocal rank for one question.
pub fn factoid_question(preds: &[String], synonyms: &[String]) -> (f64, f64, f64) {
    let top = &preds[..preds.len().min(FACTOID_ANSWERS)];
    match top.iter().position(|p| matches(p, synonyms)) {
        Some(r) => (if r == 0 { 1.0 } else { 0.0 }, 1.0, 1.0 / (r + 1) as f64),
        None => (0.0, 0.0, 0.0),
    }
}

/// Precision, recall and F1 for one question, each predicted text matching
/// at most one gold set and each set matched at most once.
pub fn list_question(preds: &[String], gold_sets: &[Vec<String>]) -> (f64, f64, f64) {
    if preds.is_empty() || gold_sets.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mut used = vec![false; gold_sets.len()];
    let mut hit = 0usize;
    for p in preds {
        if let Some(i) = (0..gold_sets.len()).find(|&i| !used[i] && matches(p, &gold_sets[i])) {
            used[i] = true;
            hit += 1;
        }
    }
    let p = hit as f64 / preds.len() as f64;
    let r = hit as f64 / gold_sets.len() as f64;
    (p, r, f1(p, r))
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len();
    if n == 0 {
        0.0
    } else {
        v.sum::<f64>() / n as f64
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidInput(format!("{a} predictions for {b} gold questions")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactoidScores {
    pub questions: usize,
    pub strict_accuracy: f64,
    pub lenient_accuracy: f64,
    pub mrr: f64,
}

/// Positional: `preds[i]` answers the question with synonyms `gold[i]`.
pub fn factoid_metrics(preds: &[Vec<String>], gold: &[Vec<String>]) -> Result<FactoidScores> {
    check_len(preds.len(), gold.len())?;
    let per: Vec<_> = preds.iter().zip(gold).map(|(p, g)| factoid_question(p, g)).collect();
    Ok(FactoidScores {
        questions: per.len(),
        strict_accuracy: mean(per.iter().map(|s| s.0)),
        lenient_accuracy: mean(per.iter().map(|s| s.1)),
        mrr: mean(per.iter().map(|s| s.2)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ListScores {
    pub questions: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
}

pub fn list_metrics(preds: &[Vec<String>], gold: &[Vec<Vec<String>>]) -> Result<ListScores> {
    check_len(preds.len(), gold.len())?;
    let per: Vec<_> = preds.iter().zip(gold).map(|(p, g)| list_question(p, g)).collect();
    Ok(ListScores {
        questions: per.len(),
        mean_precision: mean(per.iter().map(|s| s.0)),
        mean_recall: mean(per.iter().map(|s| s.1)),
        mean_f1: mean(per.iter().map(|s| s.2)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YesNoScores {
    pub questions: usize,
    pub macro_f1: f64,
    pub f1_yes: f64,
    pub f1_no: f64,
    pub accuracy: f64,
}

/// A missing prediction is wrong but predicts neither class.
pub fn yesno_metrics(preds: &[Option<YesNo>], gold: &[YesNo]) -> Result<YesNoScores> {
    check_len(preds.len(), gold.len())?;
    let class_f1 = |c: YesNo| {
        let tp = preds.iter().zip(gold).filter(|(p, g)| **p == Some(c) && **g == c).count();
        let fp = preds.iter().zip(gold).filter(|(p, g)| **p == Some(c) && **g != c).count();
        let fn_ = preds.iter().zip(gold).filter(|(p, g)| **p != Some(c) && **g == c).count();
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let (f1_yes, f1_no) = (class_f1(YesNo::Yes), class_f1(YesNo::No));
    let correct = preds.iter().zip(gold).filter(|(p, g)| **p == Some(**g)).count();
    Ok(YesNoScores {
        questions: gold.len(),
        macro_f1: (f1_yes + f1_no) / 2.0,
        f1_yes,
        f1_no,
        accuracy: if gold.is_empty() { 0.0 } else { correct as f64 / gold.len() as f64 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub id: String,
    #[serde(rename = "type")]
    pub qtype: QuestionType,
    pub missing: bool,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub factoid: Option<FactoidScores>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub list: Option<ListScores>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub yesno: Option<YesNoScores>,
    pub per_question: Vec<QuestionResult>,
}

/// Scores `answers` against every gold question. Gold questions without an
/// answer of the right type count as wrong; answers for unknown questions
/// are ignored.
pub fn evaluate(answers: &[(String, ExactAnswer)], gold: &GoldStandard) -> Result<EvalReport> {
    let by_id: HashMap<&str, &ExactAnswer> = answers.iter().map(|(id, a)| (id.as_str(), a)).collect();
    let known: std::collections::HashSet<&str> = gold.questions.iter().map(|q| q.question_id.as_str()).collect();
    for (id, _) in answers {
        if !known.contains(id.as_str()) {
            log::warn!("answer for unknown question {id} ignored");
        }
    }
    let (mut fp, mut fg, mut lp, mut lg, mut yp, mut yg) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    let mut per_question = Vec::new();
    for q in &gold.questions {
        let id = q.question_id.as_str();
        let answer = by_id.get(id).copied();
        let mut scores = BTreeMap::new();
        let missing;
        let qtype = match &q.gold {
            Gold::Factoid(syn) => {
                let pred = match answer {
                    Some(ExactAnswer::Factoid(p)) => Some(p.clone()),
                    _ => None,
                };
                missing = pred.is_none();
                let pred = pred.unwrap_or_default();
                let (s, l, rr) = factoid_question(&pred, syn);
                scores.insert("strict".into(), s);
                scores.insert("lenient".into(), l);
                scores.insert("reciprocal_rank".into(), rr);
                fp.push(pred);
                fg.push(syn.clone());
                QuestionType::Factoid
            }
            Gold::List(sets) => {
                let pred = match answer {
                    Some(ExactAnswer::List(p)) => Some(p.clone()),
                    _ => None,
                };
                missing = pred.is_none();
                let pred = pred.unwrap_or_default();
                let (p, r, f) = list_question(&pred, sets);
                scores.insert("precision".into(), p);
                scores.insert("recall".into(), r);
                scores.insert("f1".into(), f);
                lp.push(pred);
                lg.push(sets.clone());
                QuestionType::List
            }
            Gold::YesNo(label) => {
                let pred = match answer {
                    Some(ExactAnswer::YesNo(y)) => Some(*y),
                    _ => None,
                };
                missing = pred.is_none();
                scores.insert("correct".into(), if pred == Some(*label) { 1.0 } else { 0.0 });
                yp.push(pred);
                yg.push(*label);
                QuestionType::Yesno
            }
        };
        if missing {
            log::warn!("no {} answer for question {id}; scored as wrong", qtype.as_str());
        }
        per_question.push(QuestionResult {
            id: id.to_string(),
            qtype,
            missing,
            scores,
        });
    }
    Ok(EvalReport {
        factoid: (!fg.is_empty()).then(|| factoid_metrics(&fp, &fg)).transpose()?,
        list: (!lg.is_empty()).then(|| list_metrics(&lp, &lg)).transpose()?,
        yesno: (!yg.is_empty()).then(|| yesno_metrics(&yp, &yg)).transpose()?,
        per_question,
    })
}

fn weighted<T: Copy>(items: &[T], n: impl Fn(T) -> usize, f: impl Fn(T) -> f64) -> f64 {
    let total: usize = items.iter().map(|&t| n(t)).sum();
    if total == 0 {
        return 0.0;
    }
    items.iter().map(|&t| f(t) * n(t) as f64).sum::<f64>() / total as f64
}

impl EvalReport {
    /// Combines reports from separate runs, each metric weighted by the
    /// number of questions it was computed over.
    pub fn micro_average(reports: &[EvalReport]) -> EvalReport {
        let fs: Vec<FactoidScores> = reports.iter().filter_map(|r| r.factoid).collect();
        let ls: Vec<ListScores> = reports.iter().filter_map(|r| r.list).collect();
        let ys: Vec<YesNoScores> = reports.iter().filter_map(|r| r.yesno).collect();
        EvalReport {
            factoid: (!fs.is_empty()).then(|| FactoidScores {
                questions: fs.iter().map(|s| s.questions).sum(),
                strict_accuracy: weighted(&fs, |s| s.questions, |s| s.strict_accuracy),
                lenient_accuracy: weighted(&fs, |s| s.questions, |s| s.lenient_accuracy),
                mrr: weighted(&fs, |s| s.questions, |s| s.mrr),
            }),
            list: (!ls.is_empty()).then(|| ListScores {
                questions: ls.iter().map(|s| s.questions).sum(),
                mean_precision: weighted(&ls, |s| s.questions, |s| s.mean_precision),
                mean_recall: weighted(&ls, |s| s.questions, |s| s.mean_recall),
                mean_f1: weighted(&ls, |s| s.questions, |s| s.mean_f1),
            }),
            yesno: (!ys.is_empty()).then(|| YesNoScores {
                questions: ys.iter().map(|s| s.questions).sum(),
                macro_f1: weighted(&ys, |s| s.questions, |s| s.macro_f1),
                f1_yes: weighted(&ys, |s| s.questions, |s| s.f1_yes),
                f1_no: weighted(&ys, |s| s.questions, |s| s.f1_no),
                accuracy: weighted(&ys, |s| s.questions, |s| s.accuracy),
            }),
            per_question: reports.iter().flat_map(|r| r.per_question.clone()).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Summary table, one row per metric.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<(&str, &str, usize, f64)> = Vec::new();
        if let Some(s) = self.factoid {
            rows.push(("factoid", "strict accuracy", s.questions, s.strict_accuracy));
            rows.push(("factoid", "lenient accuracy", s.questions, s.lenient_accuracy));
            rows.push(("factoid", "MRR", s.questions, s.mrr));
        }
        if let Some(s) = self.list {
            rows.push(("list", "mean precision", s.questions, s.mean_precision));
            rows.push(("list", "mean recall", s.questions, s.mean_recall));
            rows.push(("list", "mean F1", s.questions, s.mean_f1));
        }
        if let Some(s) = self.yesno {
            rows.push(("yesno", "macro F1", s.questions, s.macro_f1));
            rows.push(("yesno", "F1 yes", s.questions, s.f1_yes));
            rows.push(("yesno", "F1 no", s.questions, s.f1_no));
            rows.push(("yesno", "accuracy", s.questions, s.accuracy));
        }
        let mut out = format!("{:<8} {:<17} {:>9} {:>8}\n", "type", "metric", "questions", "score");
        for (t, m, n, v) in rows {
            let _ = writeln!(out, "{t:<8} {m:<17} {n:>9} {v:>8.4}");
        }
        let missing = self.per_question.iter().filter(|q| q.missing).count();
        if missing > 0 {
            let _ = writeln!(out, "{missing} question(s) had no answer");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_bioasq;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn factoid_examples() {
        let gold = vec![s(&["BRCA1", "breast cancer 1"])];
        let f = factoid_metrics(&[s(&["x", "y", "brca1."])], &gold).unwrap();
        assert_eq!((f.strict_accuracy, f.lenient_accuracy, f.mrr), (0.0, 1.0, 1.0 / 3.0));
        let f = factoid_metrics(&[s(&["Breast  Cancer 1"])], &gold).unwrap();
        assert_eq!((f.strict_accuracy, f.lenient_accuracy, f.mrr), (1.0, 1.0, 1.0));
        let f = factoid_metrics(&[s(&["a", "b", "c", "d", "e", "BRCA1"])], &gold).unwrap();
        assert_eq!((f.strict_accuracy, f.lenient_accuracy, f.mrr), (0.0, 0.0, 0.0));
        assert!(factoid_metrics(&[], &gold).is_err());
    }

    #[test]
    fn list_examples() {
        let gold = vec![vec![s(&["a"]), s(&["c"])]];
        let l = list_metrics(&[s(&["a", "b"])], &gold).unwrap();
        assert_eq!((l.mean_precision, l.mean_recall, l.mean_f1), (0.5, 0.5, 0.5));
        let l = list_metrics(&[s(&["x", "X "])], &[vec![s(&["y", "x"])]]).unwrap();
        assert_eq!((l.mean_precision, l.mean_recall), (0.5, 1.0));
        assert!((l.mean_f1 - 2.0 / 3.0).abs() < 1e-15);
        let l = list_metrics(&[s(&["c", "a"])], &gold).unwrap();
        assert_eq!(l.mean_f1, 1.0);
        let l = list_metrics(&[vec![]], &gold).unwrap();
        assert_eq!(l.mean_f1, 0.0);
    }

    #[test]
    fn yesno_examples() {
        use YesNo::{No as N, Yes as Y};
        let y = yesno_metrics(&[Some(Y), Some(Y), Some(Y), Some(Y)], &[Y, Y, N, N]).unwrap();
        assert!((y.f1_yes - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(y.f1_no, 0.0);
        assert!((y.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(y.accuracy, 0.5);
        assert_eq!(yesno_metrics(&[Some(N), Some(Y)], &[Y, N]).unwrap().macro_f1, 0.0);
        assert_eq!(yesno_metrics(&[Some(Y), Some(N)], &[Y, N]).unwrap().macro_f1, 1.0);
        // only one class anywhere: the other contributes 0
        assert_eq!(yesno_metrics(&[Some(Y)], &[Y]).unwrap().macro_f1, 0.5);
        let y = yesno_metrics(&[None, Some(N)], &[Y, N]).unwrap();
        assert_eq!((y.f1_yes, y.f1_no, y.accuracy), (0.0, 1.0, 0.5));
    }

    #[test]
    fn evaluate_against_parsed_gold() {
        let doc = r#"{"questions": [
            {"id": "f1", "type": "factoid", "body": "?", "exact_answer": [["JBP1", "JAK binding protein 1"]], "snippets": []},
            {"id": "l1", "type": "list", "body": "?", "exact_answer": [["a"], ["b"]], "snippets": []},
            {"id": "y1", "type": "yesno", "body": "?", "exact_answer": "yes", "snippets": []},
            {"id": "y2", "type": "yesno", "body": "?", "exact_answer": "no", "snippets": []}
        ]}"#;
        let gold = GoldStandard::from_parsed(&parse_bioasq(doc).unwrap()).unwrap();
        let answers = vec![
            ("f1".to_string(), ExactAnswer::Factoid(s(&["x", "jak binding protein 1"]))),
            ("l1".to_string(), ExactAnswer::List(s(&["b"]))),
            ("y1".to_string(), ExactAnswer::YesNo(YesNo::Yes)),
            ("zz".to_string(), ExactAnswer::YesNo(YesNo::Yes)),
        ];
        let r = evaluate(&answers, &gold).unwrap();
        assert_eq!(r.factoid.unwrap().mrr, 0.5);
        assert_eq!(r.list.unwrap().mean_recall, 0.5);
        let y = r.yesno.unwrap();
        assert_eq!((y.questions, y.accuracy), (2, 0.5));
        assert!(r.per_question[3].missing);
        let text = r.to_text();
        assert!(text.contains("MRR") && text.contains("1 question(s) had no answer"));
        let back: EvalReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn micro_average_weights_by_questions() {
        let mk = |n, mrr| EvalReport {
            factoid: Some(FactoidScores {
                questions: n,
                strict_accuracy: mrr,
                lenient_accuracy: mrr,
                mrr,
            }),
            ..Default::default()
        };
        let avg = EvalReport::micro_average(&[mk(1, 1.0), mk(3, 0.0)]);
        assert_eq!(avg.factoid.unwrap().mrr, 0.25);
        assert_eq!(avg.factoid.unwrap().questions, 4);
        assert!(avg.list.is_none());
    }
}

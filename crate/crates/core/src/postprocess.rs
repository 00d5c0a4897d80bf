//! Answer assembly: merging per-passage candidates, filtering malformed
//! texts, picking factoid/list/yes-no answers and combining model ensembles.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::decoder::SpanPrediction;
use crate::text::dedup_key;
use crate::{Error, QuestionType, Result, YesNo};

pub const DEFAULT_THRESHOLD: f64 = 0.42;
pub const FACTOID_ANSWERS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub probability: f64,
}

impl Candidate {
    pub fn new(text: impl Into<String>, probability: f64) -> Self {
        Candidate {
            text: text.into(),
            probability,
        }
    }
}

impl From<&SpanPrediction> for Candidate {
    fn from(p: &SpanPrediction) -> Self {
        Candidate::new(p.text.clone(), p.probability)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedAnswers {
    pub question_id: String,
    pub candidates: Vec<Candidate>,
}

/// Collapses candidates sharing a dedup key to the highest-probability
/// variant (earliest on ties), then sorts.
fn collapse<I>(cands: I) -> Vec<Candidate>
where
    I: IntoIterator<Item = Candidate>,
{
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<Candidate> = Vec::new();
    for c in cands {
        match index.get(&dedup_key(&c.text)) {
            Some(&i) => {
                if c.probability > out[i].probability {
                    out[i] = c;
                }
            }
            None => {
                index.insert(dedup_key(&c.text), out.len());
                out.push(c);
            }
        }
    }
    sort_desc(&mut out);
    out
}

// stable, so equal probabilities keep first-seen order
fn sort_desc(c: &mut [Candidate]) {
    c.sort_by(|a, b| b.probability.total_cmp(&a.probability));
}

/// Union of the per-pair lists with duplicates combined by maximum. Pass the
/// lists in pair order; ties then resolve by pair order, then by the
/// decoder's ranking inside a pair.
pub fn merge(question_id: &str, per_pair: &[Vec<Candidate>]) -> MergedAnswers {
    MergedAnswers {
        question_id: question_id.to_string(),
        candidates: collapse(per_pair.iter().flatten().cloned()),
    }
}

static COUNT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b([0-9]+|one|two|three|four|five|six|seven|eight|nine|ten)\b").unwrap()
});

fn attached(c: Option<char>) -> bool {
    c.is_some_and(|c| c.is_alphanumeric() || c == '-' || c == '_')
}

/// Number of answers the question asks for: the first standalone numeral
/// (digits or one..ten) not glued to letters, hyphens or a decimal point.
pub fn extract_answer_count(question: &str) -> Option<usize> {
    for m in COUNT.find_iter(question) {
        let before = question[..m.start()].chars().next_back();
        let mut after = question[m.end()..].chars();
        let next = after.next();
        if attached(before) || attached(next) {
            continue;
        }
        let decimal = |c: Option<char>, d: Option<char>| c == Some('.') && d.is_some_and(|d| d.is_ascii_digit());
        if decimal(next, after.next()) || decimal(before, question[..m.start()].chars().nth_back(1)) {
            continue;
        }
        let n = match m.as_str().to_ascii_lowercase().as_str() {
            "one" => 1,
            "two" => 2,
            "three" => 3,
            "four" => 4,
            "five" => 5,
            "six" => 6,
            "seven" => 7,
            "eight" => 8,
            "nine" => 9,
            "ten" => 10,
            digits => match digits.parse::<usize>() {
                Ok(n) => n,
                Err(_) => continue,
            },
        };
        if n > 0 {
            return Some(n);
        }
    }
    None
}

/// True when every `)` closes an earlier `(` and none stay open.
pub fn parens_balanced(s: &str) -> bool {
    let mut depth = 0i64;
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}

/// Whether the `(` at the start of a balanced `s` is closed by its last char.
fn wrapped(s: &str) -> bool {
    if !(s.starts_with('(') && s.ends_with(')')) {
        return false;
    }
    let mut depth = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth == 0 {
            return i == s.len() - 1;
        }
    }
    false
}

/// Strips surrounding whitespace, commas and wrapping bracket pairs until
/// nothing changes. Returns `None` for unbalanced or emptied texts.
pub fn clean_answer(text: &str) -> Option<String> {
    if !parens_balanced(text) {
        return None;
    }
    let mut s = text;
    loop {
        let before = s.len();
        s = s.trim_matches(|c: char| c == ',' || c.is_whitespace());
        if wrapped(s) {
            s = &s[1..s.len() - 1];
        }
        if s.len() == before {
            break;
        }
    }
    (!s.is_empty()).then(|| s.to_string())
}

/// Applies [`clean_answer`] to every candidate and re-merges by maximum.
pub fn filter_candidates(cands: &[Candidate]) -> Vec<Candidate> {
    collapse(
        cands
            .iter()
            .filter_map(|c| clean_answer(&c.text).map(|t| Candidate::new(t, c.probability))),
    )
}

/// Up to five answers, best first.
pub fn select_factoid(m: &MergedAnswers) -> Vec<String> {
    if m.candidates.is_empty() {
        log::warn!("question {}: no factoid candidates", m.question_id);
    }
    m.candidates
        .iter()
        .take(FACTOID_ANSWERS)
        .map(|c| c.text.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListSelection {
    pub answers: Vec<String>,
    /// Nothing cleared the threshold and the top candidate was used instead.
    pub fallback: bool,
}

/// With a requested count, the top `count` candidates; otherwise every
/// candidate strictly above `threshold`, or the top one if none is.
pub fn select_list(m: &MergedAnswers, threshold: f64, count: Option<usize>) -> Result<ListSelection> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!("threshold {threshold} outside (0, 1)")));
    }
    let texts = |n: usize| m.candidates.iter().take(n).map(|c| c.text.clone()).collect::<Vec<_>>();
    if let Some(n) = count {
        return Ok(ListSelection {
            answers: texts(n),
            fallback: false,
        });
    }
    let above = m.candidates.iter().take_while(|c| c.probability > threshold).count();
    Ok(if above == 0 {
        ListSelection {
            answers: texts(1),
            fallback: !m.candidates.is_empty(),
        }
    } else {
        ListSelection {
            answers: texts(above),
            fallback: false,
        }
    })
}

/// Mean summed in sorted order, so the result does not depend on input order.
fn order_free_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean of the per-pair yes probabilities, cut at 0.5.
pub fn decide_yesno(probabilities: &[f64]) -> Result<YesNo> {
    if probabilities.is_empty() {
        return Err(Error::Empty("yes/no probabilities"));
    }
    Ok(YesNo::from_bool(order_free_mean(probabilities) >= 0.5))
}

/// Per-text mean over models, a model lacking the text contributing 0.
pub fn ensemble(question_id: &str, models: &[MergedAnswers]) -> Result<MergedAnswers> {
    if models.is_empty() {
        return Err(Error::Empty("ensemble models"));
    }
    let mut index: HashMap<String, usize> = HashMap::new();
    // (best surface, its probability, per-model probabilities)
    let mut rows: Vec<(String, f64, Vec<f64>)> = Vec::new();
    for (mi, m) in models.iter().enumerate() {
        for c in &m.candidates {
            let key = dedup_key(&c.text);
            let i = *index.entry(key).or_insert_with(|| {
                rows.push((c.text.clone(), c.probability, vec![0.0; models.len()]));
                rows.len() - 1
            });
            let row = &mut rows[i];
            if c.probability > row.1 {
                row.0 = c.text.clone();
                row.1 = c.probability;
            }
            row.2[mi] = row.2[mi].max(c.probability);
        }
    }
    let mut candidates: Vec<Candidate> = rows
        .into_iter()
        .map(|(text, _, ps)| Candidate::new(text, order_free_mean(&ps)))
        .collect();
    sort_desc(&mut candidates);
    Ok(MergedAnswers {
        question_id: question_id.to_string(),
        candidates,
    })
}

/// Mean over models of each model's mean yes probability.
pub fn ensemble_yesno(per_model: &[Vec<f64>]) -> Result<f64> {
    if per_model.is_empty() {
        return Err(Error::Empty("ensemble models"));
    }
    let means = per_model
        .iter()
        .map(|ps| {
            if ps.is_empty() {
                Err(Error::Empty("yes/no probabilities"))
            } else {
                Ok(order_free_mean(ps))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(order_free_mean(&means))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExactAnswer {
    Factoid(Vec<String>),
    List(Vec<String>),
    YesNo(YesNo),
}

impl ExactAnswer {
    pub fn qtype(&self) -> QuestionType {
        match self {
            ExactAnswer::Factoid(_) => QuestionType::Factoid,
            ExactAnswer::List(_) => QuestionType::List,
            ExactAnswer::YesNo(_) => QuestionType::Yesno,
        }
    }

    fn to_value(&self) -> Value {
        match self {
            ExactAnswer::Factoid(a) => Value::from(a.clone()),
            ExactAnswer::List(a) => Value::Array(a.iter().map(|t| Value::from(vec![t.clone()])).collect()),
            ExactAnswer::YesNo(y) => Value::from(y.as_str()),
        }
    }

    fn from_value(qtype: QuestionType, v: &Value) -> Option<Self> {
        // entries may be bare strings or synonym lists; the first synonym counts
        let texts = |v: &Value| -> Option<Vec<String>> {
            v.as_array()?
                .iter()
                .map(|e| match e {
                    Value::String(s) => Some(s.clone()),
                    Value::Array(a) => a.first()?.as_str().map(str::to_string),
                    _ => None,
                })
                .collect()
        };
        Some(match qtype {
            QuestionType::Factoid => ExactAnswer::Factoid(texts(v)?),
            QuestionType::List => ExactAnswer::List(texts(v)?),
            QuestionType::Yesno => ExactAnswer::YesNo(v.as_str()?.trim().parse().ok()?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalAnswer {
    pub question_id: String,
    pub answer: ExactAnswer,
    /// Pairs whose predictions fed this answer.
    pub provenance: Vec<String>,
    pub list_fallback: bool,
}

#[derive(Serialize, Deserialize)]
struct RawAnswer {
    id: String,
    #[serde(rename = "type")]
    qtype: String,
    exact_answer: Value,
}

#[derive(Serialize, Deserialize)]
struct RawAnswers {
    questions: Vec<RawAnswer>,
}

/// Renders answers in challenge submission layout.
pub fn answers_to_json(answers: &[FinalAnswer]) -> Result<String> {
    let raw = RawAnswers {
        questions: answers
            .iter()
            .map(|a| RawAnswer {
                id: a.question_id.clone(),
                qtype: a.answer.qtype().as_str().to_string(),
                exact_answer: a.answer.to_value(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&raw)? + "\n")
}

/// Parses a submission file into `(question id, answer)` pairs.
pub fn parse_answers_json(text: &str) -> Result<Vec<(String, ExactAnswer)>> {
    let raw: RawAnswers = serde_json::from_str(text)?;
    raw.questions
        .into_iter()
        .map(|q| {
            let qtype: QuestionType = q.qtype.parse()?;
            let answer = ExactAnswer::from_value(qtype, &q.exact_answer).ok_or_else(|| {
                Error::InvalidInput(format!("question {}: malformed {} exact_answer", q.id, qtype.as_str()))
            })?;
            Ok((q.id, answer))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn merged(ps: &[(&str, f64)]) -> MergedAnswers {
        MergedAnswers {
            question_id: "q".into(),
            candidates: ps.iter().map(|&(t, p)| Candidate::new(t, p)).collect(),
        }
    }

    #[test]
    fn merge_takes_maximum() {
        let m = merge("q", &[vec![Candidate::new("JBP1", 0.6)], vec![Candidate::new("JBP1", 0.4)]]);
        assert_eq!(m.candidates, vec![Candidate::new("JBP1", 0.6)]);
        let m = merge("q", &[vec![Candidate::new("a", 0.2)], vec![Candidate::new("b", 0.7)]]);
        assert_eq!(m, merged(&[("b", 0.7), ("a", 0.2)]));
        // case and spacing variants merge; the best surface form wins
        let m = merge("q", &[vec![Candidate::new("p53  protein", 0.3), Candidate::new("P53 protein", 0.5)]]);
        assert_eq!(m.candidates, vec![Candidate::new("P53 protein", 0.5)]);
        let m = merge("q", &[vec![Candidate::new("DBA", 0.5), Candidate::new("Diamond-Blackfan anemia (DBA)", 0.4)]]);
        assert_eq!(m.candidates.len(), 2);
        assert!(merge("q", &[]).candidates.is_empty());
    }

    #[test]
    fn count_extraction() {
        assert_eq!(extract_answer_count("Please list 6 symptoms of Scarlet fever"), Some(6));
        assert_eq!(extract_answer_count("What causes puffy hand syndrome?"), None);
        assert_eq!(extract_answer_count("Which 3 genes regulate X in IL-6 signaling?"), Some(3));
        assert_eq!(extract_answer_count("List three drugs"), Some(3));
        assert_eq!(extract_answer_count("Which IL-6 targets exist?"), None);
        assert_eq!(extract_answer_count("Which genes bind CD4 and 1.5 kb fragments?"), None);
        assert_eq!(extract_answer_count("Which someone tone"), None);
    }

    #[test]
    fn cleaning() {
        assert_eq!(clean_answer("(BRCA1"), None);
        assert_eq!(clean_answer("(p53)").as_deref(), Some("p53"));
        assert_eq!(clean_answer(",BRCA1,").as_deref(), Some("BRCA1"));
        assert_eq!(
            clean_answer("fibrinogen A alpha chain (FGA)").as_deref(),
            Some("fibrinogen A alpha chain (FGA)")
        );
        assert_eq!(clean_answer("((a), b)").as_deref(), Some("(a), b"));
        assert_eq!(clean_answer("(a) (b)").as_deref(), Some("(a) (b)"));
        assert_eq!(clean_answer(", ((x)) ,").as_deref(), Some("x"));
        assert_eq!(clean_answer("a)("), None);
        assert_eq!(clean_answer("(,)"), None);
        let out = filter_candidates(&[Candidate::new("(p53)", 0.3), Candidate::new("p53", 0.2), Candidate::new("(x", 0.9)]);
        assert_eq!(out, vec![Candidate::new("p53", 0.3)]);
    }

    #[test]
    fn selection() {
        let m = merged(&[("a", 0.9), ("b", 0.5), ("c", 0.3)]);
        assert_eq!(select_list(&m, 0.42, None).unwrap().answers, ["a", "b"]);
        assert_eq!(select_list(&m, 0.42, Some(6)).unwrap().answers.len(), 3);
        let low = merged(&[("a", 0.3), ("b", 0.1)]);
        assert_eq!(
            select_list(&low, 0.42, None).unwrap(),
            ListSelection {
                answers: vec!["a".into()],
                fallback: true
            }
        );
        assert!(select_list(&m, 1.0, None).is_err());
        assert!(select_list(&m, 0.0, None).is_err());
        let seven: Vec<(&str, f64)> = ["a", "b", "c", "d", "e", "f", "g"].iter().map(|&t| (t, 0.1)).collect();
        assert_eq!(select_factoid(&merged(&seven)), ["a", "b", "c", "d", "e"]);
        assert_eq!(select_factoid(&merged(&[("a", 0.9), ("b", 0.5)])), ["a", "b"]);
    }

    #[test]
    fn yesno_and_ensemble() {
        assert_eq!(decide_yesno(&[0.9, 0.8]).unwrap(), YesNo::Yes);
        assert_eq!(decide_yesno(&[0.2]).unwrap(), YesNo::No);
        assert_eq!(decide_yesno(&[0.4, 0.7]).unwrap(), YesNo::Yes);
        assert!(decide_yesno(&[]).is_err());
        let single = merged(&[("a", 0.7), ("b", 0.2)]);
        assert_eq!(ensemble("q", std::slice::from_ref(&single)).unwrap(), single);
        let e = ensemble("q", &[merged(&[("a", 0.8)]), merged(&[("a", 0.4)])]).unwrap();
        assert!((e.candidates[0].probability - 0.6).abs() < 1e-12);
        let e = ensemble("q", &[merged(&[("a", 0.9)]), merged(&[("b", 0.2)])]).unwrap();
        assert_eq!(e.candidates[0], Candidate::new("a", 0.45));
        assert!(ensemble("q", &[]).is_err());
        assert!((ensemble_yesno(&[vec![0.2, 0.4], vec![0.9]]).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn answers_file_round_trip() {
        let answers = vec![
            FinalAnswer {
                question_id: "f".into(),
                answer: ExactAnswer::Factoid(vec!["a".into(), "b".into()]),
                provenance: vec![],
                list_fallback: false,
            },
            FinalAnswer {
                question_id: "l".into(),
                answer: ExactAnswer::List(vec!["x".into()]),
                provenance: vec![],
                list_fallback: false,
            },
            FinalAnswer {
                question_id: "y".into(),
                answer: ExactAnswer::YesNo(YesNo::No),
                provenance: vec![],
                list_fallback: false,
            },
        ];
        let json = answers_to_json(&answers).unwrap();
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["questions"][1]["exact_answer"], serde_json::json!([["x"]]));
        assert_eq!(v["questions"][2]["exact_answer"], "no");
        let back = parse_answers_json(&json).unwrap();
        assert_eq!(back.iter().map(|(_, a)| a.clone()).collect::<Vec<_>>(), answers.into_iter().map(|a| a.answer).collect::<Vec<_>>());
        assert!(parse_answers_json(r#"{"questions":[{"id":"x","type":"yesno","exact_answer":3}]}"#).is_err());
    }

    fn cands() -> impl Strategy<Value = Vec<Candidate>> {
        proptest::collection::vec(
            ("[ (),ab]{0,6}", 0.0f64..1.0).prop_map(|(t, p)| Candidate::new(t, p)),
            0..12,
        )
    }

    proptest! {
        #[test]
        fn merge_idempotent(lists in proptest::collection::vec(cands(), 0..4)) {
            let once = merge("q", &lists);
            prop_assert_eq!(merge("q", std::slice::from_ref(&once.candidates)), once);
        }

        #[test]
        fn filtered_texts_are_clean(c in cands()) {
            for f in filter_candidates(&c) {
                prop_assert!(parens_balanced(&f.text));
                prop_assert!(!f.text.is_empty());
                let edge = |ch: Option<char>| ch.is_some_and(|ch| ch == ',' || ch.is_whitespace());
                prop_assert!(!edge(f.text.chars().next()) && !edge(f.text.chars().next_back()));
            }
        }

        #[test]
        fn list_selection_contract(c in cands(), threshold in 0.01f64..0.99, count in proptest::option::of(1usize..8)) {
            let m = merge("q", &[c]);
            let s = select_list(&m, threshold, count).unwrap();
            match count {
                Some(n) => prop_assert_eq!(s.answers.len(), n.min(m.candidates.len())),
                None => {
                    let above = m.candidates.iter().filter(|c| c.probability > threshold).count();
                    prop_assert!(s.fallback || above == s.answers.len());
                    prop_assert!(!s.fallback || s.answers.len() == 1);
                }
            }
        }

        #[test]
        fn yesno_permutation_invariant(mut ps in proptest::collection::vec(0.0f64..1.0, 1..10), seed in any::<u64>()) {
            let a = decide_yesno(&ps).unwrap();
            use rand::{seq::SliceRandom, SeedableRng};
            ps.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(decide_yesno(&ps).unwrap(), a);
        }
    }
}

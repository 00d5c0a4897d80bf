//! SQuAD-layout JSON for question/passage pairs.
//!
//! Factoid and list pairs are written in the v1.1 layout. Yes/no pairs use
//! the v2.0 layout with the label carried twice: `is_impossible` (`false`
//! for yes, `true` for no) and the literal string in `yesno_answer`. Every
//! question entry also records `question_id` and `qtype` so pairs can be
//! regrouped after prediction.

use serde::{Deserialize, Serialize};

use super::pairs::{AnswerSpan, QaPair};
use crate::{Error, QuestionType, Result, YesNo};

#[derive(Serialize, Deserialize)]
struct SquadFile {
    version: String,
    data: Vec<SquadArticle>,
}

#[derive(Serialize, Deserialize)]
struct SquadArticle {
    title: String,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Serialize, Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Serialize, Deserialize)]
struct SquadQa {
    id: String,
    question: String,
    #[serde(default)]
    question_id: Option<String>,
    #[serde(default)]
    qtype: Option<QuestionType>,
    #[serde(default)]
    answers: Vec<AnswerSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    is_impossible: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    yesno_answer: Option<YesNo>,
}

/// Serialises pairs as SQuAD JSON. With `training` set, extractive pairs
/// must carry an answer.
pub fn to_squad_json(pairs: &[QaPair], training: bool) -> Result<String> {
    let qtype = pairs.first().map(|p| p.qtype);
    if let Some(bad) = pairs.iter().find(|p| Some(p.qtype) != qtype) {
        return Err(Error::InvalidInput(format!(
            "mixed question types: {} is {}, expected {}",
            bad.pair_id,
            bad.qtype,
            qtype.unwrap()
        )));
    }
    let mut data: Vec<SquadArticle> = Vec::new();
    for p in pairs {
        if training && p.qtype.is_extractive() && p.answers.is_empty() {
            return Err(Error::InvalidInput(format!("training pair {} has no answer", p.pair_id)));
        }
        let qa = SquadQa {
            id: p.pair_id.clone(),
            question: p.question.clone(),
            question_id: Some(p.question_id.clone()),
            qtype: Some(p.qtype),
            answers: if p.qtype.is_extractive() { p.answers.clone() } else { Vec::new() },
            is_impossible: p.yesno.filter(|_| !p.qtype.is_extractive()).map(|y| !y.is_yes()),
            yesno_answer: p.yesno.filter(|_| !p.qtype.is_extractive()),
        };
        let paragraph = SquadParagraph {
            context: p.context.clone(),
            qas: vec![qa],
        };
        match data.last_mut() {
            Some(article) if article.title == p.question_id => article.paragraphs.push(paragraph),
            _ => data.push(SquadArticle {
                title: p.question_id.clone(),
                paragraphs: vec![paragraph],
            }),
        }
    }
    let version = if qtype == Some(QuestionType::Yesno) { "2.0" } else { "1.1" };
    let file = SquadFile {
        version: version.to_string(),
        data,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses SQuAD JSON written by [`to_squad_json`]. Files without the
/// sidecar fields are accepted: the question id falls back to the article
/// title and the type to yes/no for v2.0 files, factoid otherwise.
pub fn from_squad_json(text: &str) -> Result<Vec<QaPair>> {
    let file: SquadFile = serde_json::from_str(text)?;
    let default_type = if file.version.starts_with('2') {
        QuestionType::Yesno
    } else {
        QuestionType::Factoid
    };
    let mut pairs = Vec::new();
    for article in file.data {
        for para in article.paragraphs {
            for qa in para.qas {
                let qtype = qa.qtype.unwrap_or(default_type);
                let yesno = qa
                    .yesno_answer
                    .or_else(|| qa.is_impossible.map(|imp| YesNo::from_bool(!imp)))
                    .filter(|_| qtype == QuestionType::Yesno);
                pairs.push(QaPair {
                    pair_id: qa.id,
                    question_id: qa.question_id.unwrap_or_else(|| article.title.clone()),
                    question: qa.question,
                    context: para.context.clone(),
                    answers: qa.answers,
                    yesno,
                    qtype,
                });
            }
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn factoid(context: &str, answer: &str, start: usize) -> QaPair {
        QaPair {
            pair_id: "q1_000_00".into(),
            question_id: "q1".into(),
            question: "What?".into(),
            context: context.into(),
            answers: vec![AnswerSpan {
                text: answer.into(),
                answer_start: start,
            }],
            yesno: None,
            qtype: QuestionType::Factoid,
        }
    }

    #[test]
    fn empty_is_valid_json() {
        let s = to_squad_json(&[], true).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["data"], serde_json::json!([]));
        assert!(from_squad_json(&s).unwrap().is_empty());
    }

    #[test]
    fn factoid_reparse_keeps_offsets() {
        let p = factoid("ABC causes XYZ.", "XYZ", 11);
        let s = to_squad_json(std::slice::from_ref(&p), true).unwrap();
        let back = from_squad_json(&s).unwrap();
        assert_eq!(back, vec![p]);
        assert!(back[0].offsets_sound());
    }

    #[test]
    fn yesno_mapping() {
        let mut p = factoid("Ctx.", "", 0);
        p.qtype = QuestionType::Yesno;
        p.answers.clear();
        p.yesno = Some(YesNo::Yes);
        let s = to_squad_json(std::slice::from_ref(&p), true).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["version"], "2.0");
        let qa = &v["data"][0]["paragraphs"][0]["qas"][0];
        assert_eq!(qa["is_impossible"], false);
        assert_eq!(qa["yesno_answer"], "yes");
        assert_eq!(from_squad_json(&s).unwrap(), vec![p]);
    }

    #[test]
    fn rejects_unanswered_training_pair_and_mixed_types() {
        let mut p = factoid("c", "c", 0);
        p.answers.clear();
        assert!(to_squad_json(std::slice::from_ref(&p), true).is_err());
        assert!(to_squad_json(std::slice::from_ref(&p), false).is_ok());
        let mut y = p.clone();
        y.qtype = QuestionType::List;
        assert!(to_squad_json(&[p, y], false).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(words in proptest::collection::vec("[A-Za-zé]{1,6}", 1..12), pick in 0usize..12, qid in "[a-z0-9]{1,8}") {
            let context = words.join(" ");
            let k = pick % words.len();
            let start: usize = words[..k].iter().map(|w| w.chars().count() + 1).sum();
            let mut p = factoid(&context, &words[k], start);
            p.question_id = qid.clone();
            p.pair_id = format!("{qid}_000_00");
            prop_assert!(p.offsets_sound());
            let s = to_squad_json(std::slice::from_ref(&p), true).unwrap();
            prop_assert_eq!(from_squad_json(&s).unwrap(), vec![p]);
        }
    }
}

use serde::Deserialize;
use serde_json::Value;

use crate::{QuestionType, Result, YesNo};

/// One challenge question.
#[derive(Debug, Clone, PartialEq)]
pub struct BioAsqQuestion {
    pub id: String,
    pub body: String,
    pub qtype: QuestionType,
    /// Gold answers as synonym sets. Factoid questions carry a single set.
    pub exact_answers: Vec<Vec<String>>,
    pub yesno_answer: Option<YesNo>,
    pub snippets: Vec<Snippet>,
    pub document_pmids: Vec<String>,
}

impl BioAsqQuestion {
    /// Every synonym of every gold set, in file order.
    pub fn synonyms(&self) -> impl Iterator<Item = &str> {
        self.exact_answers.iter().flatten().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snippet {
    pub text: String,
    pub pmid: String,
    pub begin_section: String,
    pub offset_in_begin_section: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedQuestions {
    pub questions: Vec<BioAsqQuestion>,
    pub skipped_summary: usize,
    /// `(question id, type string)` of entries with an unrecognised type.
    pub skipped_unknown: Vec<(String, String)>,
}

#[derive(Deserialize)]
struct RawFile {
    questions: Vec<RawQuestion>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawQuestion {
    #[serde(default)]
    id: String,
    #[serde(default)]
    body: String,
    #[serde(rename = "type", default)]
    qtype: String,
    #[serde(rename = "exact_answer", default)]
    exact_answer: Option<Value>,
    #[serde(default)]
    snippets: Vec<RawSnippet>,
    #[serde(default)]
    documents: Vec<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawSnippet {
    #[serde(default)]
    text: String,
    #[serde(default)]
    document: String,
    #[serde(default)]
    begin_section: String,
    #[serde(default)]
    offset_in_begin_section: Option<i64>,
}

/// Extracts the PubMed id from a document reference, which is either a bare
/// id or a URL ending in one.
pub fn pmid_from_document(doc: &str) -> String {
    doc.trim()
        .trim_end_matches('/')
        .rsplit('/')
        .next()
        .unwrap_or_default()
        .to_string()
}

fn strings_of(v: &Value) -> Vec<String> {
    match v {
        Value::String(s) => vec![s.trim().to_string()],
        Value::Array(items) => items.iter().flat_map(strings_of).collect(),
        _ => Vec::new(),
    }
}

/// Normalises the several `exact_answer` layouts found across challenge
/// years into synonym sets.
fn synonym_sets(qtype: QuestionType, v: &Value) -> Vec<Vec<String>> {
    let sets: Vec<Vec<String>> = match (qtype, v) {
        (QuestionType::Factoid, _) => vec![strings_of(v)],
        (QuestionType::List, Value::Array(items)) => items
            .iter()
            .map(|item| match item {
                Value::Array(_) => strings_of(item),
                other => strings_of(other),
            })
            .collect(),
        (QuestionType::List, other) => vec![strings_of(other)],
        (QuestionType::Yesno, _) => Vec::new(),
    };
    sets.into_iter()
        .map(|set| set.into_iter().filter(|s| !s.is_empty()).collect::<Vec<_>>())
        .filter(|set| !set.is_empty())
        .collect()
}

/// Parses a challenge JSON document. Summary questions are skipped and
/// counted; unknown types are skipped with a warning.
pub fn parse_bioasq(document: &str) -> Result<ParsedQuestions> {
    let raw: RawFile = serde_json::from_str(document)?;
    let mut out = ParsedQuestions::default();
    for rq in raw.questions {
        if rq.qtype.eq_ignore_ascii_case("summary") {
            out.skipped_summary += 1;
            continue;
        }
        let qtype = match rq.qtype.parse::<QuestionType>() {
            Ok(t) => t,
            Err(_) => {
                log::warn!("question {}: unknown type {:?}, skipped", rq.id, rq.qtype);
                out.skipped_unknown.push((rq.id, rq.qtype));
                continue;
            }
        };
        let (exact_answers, yesno_answer) = match (&rq.exact_answer, qtype) {
            (None, _) => (Vec::new(), None),
            (Some(v), QuestionType::Yesno) => {
                let label = strings_of(v).first().and_then(|s| s.parse::<YesNo>().ok());
                if label.is_none() {
                    log::warn!("question {}: unreadable yes/no answer {v}", rq.id);
                }
                (Vec::new(), label)
            }
            (Some(v), t) => (synonym_sets(t, v), None),
        };
        let snippets = rq
            .snippets
            .into_iter()
            .filter(|s| !s.text.trim().is_empty())
            .map(|s| Snippet {
                pmid: pmid_from_document(&s.document),
                text: s.text,
                begin_section: s.begin_section,
                offset_in_begin_section: s.offset_in_begin_section.unwrap_or(0).max(0) as usize,
            })
            .collect();
        out.questions.push(BioAsqQuestion {
            id: rq.id,
            body: rq.body,
            qtype,
            exact_answers,
            yesno_answer,
            snippets,
            document_pmids: rq.documents.iter().map(|d| pmid_from_document(d)).collect(),
        });
    }
    Ok(out)
}

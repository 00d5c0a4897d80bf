//! Abstract retrieval with a per-PMID JSON file cache.
//!
//! Cache layout: one `<pmid>.json` file holding `{pmid, title, body}` per
//! abstract. Writers hold an exclusive lock on `<cache_dir>/.lock` and
//! publish through a rename; readers hold a shared lock on the same file.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_EFETCH_URL: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/efetch.fcgi";

/// A PubMed abstract. `full_text` is the title and body joined by one space;
/// `sentence_spans` are byte intervals into `full_text`.
#[derive(Debug, Clone, PartialEq)]
pub struct Abstract {
    pub pmid: String,
    pub title: String,
    pub body: String,
    pub full_text: String,
    pub sentence_spans: Vec<(usize, usize)>,
}

impl Abstract {
    pub fn new(pmid: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Result<Self> {
        let (pmid, title, body) = (pmid.into(), title.into(), body.into());
        if body.trim().is_empty() {
            return Err(Error::EmptyAbstract { pmid });
        }
        let full_text = if title.is_empty() {
            body.clone()
        } else {
            format!("{title} {body}")
        };
        let sentence_spans = split_sentences(&full_text);
        Ok(Abstract {
            pmid,
            title,
            body,
            full_text,
            sentence_spans,
        })
    }

    pub fn sentence(&self, i: usize) -> &str {
        let (s, e) = self.sentence_spans[i];
        &self.full_text[s..e]
    }
}

/// Marks bytes that lie strictly inside a matched pair of round brackets.
fn inside_parens(text: &str) -> Vec<bool> {
    let mut inside = vec![false; text.len()];
    let mut stack = Vec::new();
    for (i, c) in text.char_indices() {
        match c {
            '(' => stack.push(i),
            ')' => {
                if let Some(open) = stack.pop() {
                    inside[open + 1..i].iter_mut().for_each(|b| *b = true);
                }
            }
            _ => {}
        }
    }
    inside
}

/// Splits text into sentences. A sentence ends at `.`, `!` or `?` when the
/// mark is followed by whitespace and then an uppercase letter or a digit,
/// and the mark is not inside matched parentheses. Spans exclude the
/// whitespace between sentences.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let inside = inside_parens(text);
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if start.is_none() {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start = Some(pos);
        }
        if matches!(c, '.' | '!' | '?') && !inside[pos] {
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            let had_space = j > i + 1;
            if had_space && j < chars.len() {
                let next = chars[j].1;
                if next.is_uppercase() || next.is_ascii_digit() {
                    spans.push((start.take().unwrap(), pos + c.len_utf8()));
                    i = j;
                    continue;
                }
            }
        }
        i += 1;
    }
    if let Some(s) = start {
        let end = text.trim_end().len();
        if end > s {
            spans.push((s, end));
        }
    }
    spans
}

/// Read access to abstracts by PMID.
pub trait AbstractStore: Sync {
    fn get(&self, pmid: &str) -> Result<Abstract>;
}

/// A remote source of `(title, body)` for a PMID.
pub trait AbstractSource: Send + Sync {
    fn fetch(&self, pmid: &str) -> Result<(String, String)>;
}

/// In-memory store, mainly for tests and fixtures.
#[derive(Debug, Default, Clone)]
pub struct MemoryStore {
    abstracts: HashMap<String, Abstract>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: Abstract) {
        self.abstracts.insert(a.pmid.clone(), a);
    }
}

impl AbstractStore for MemoryStore {
    fn get(&self, pmid: &str) -> Result<Abstract> {
        self.abstracts
            .get(pmid)
            .cloned()
            .ok_or_else(|| Error::AbstractUnavailable {
                pmid: pmid.to_string(),
                reason: "not in store".into(),
            })
    }
}

/// NCBI E-utilities efetch client (XML mode).
#[derive(Debug, Clone)]
pub struct EfetchClient {
    pub base_url: String,
    pub api_key: Option<String>,
}

impl Default for EfetchClient {
    fn default() -> Self {
        EfetchClient {
            base_url: DEFAULT_EFETCH_URL.to_string(),
            api_key: None,
        }
    }
}

impl EfetchClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        EfetchClient {
            base_url: base_url.into(),
            api_key: None,
        }
    }
}

impl AbstractSource for EfetchClient {
    fn fetch(&self, pmid: &str) -> Result<(String, String)> {
        let unavailable = |reason: String| Error::AbstractUnavailable {
            pmid: pmid.to_string(),
            reason,
        };
        let mut req = ureq::get(&self.base_url)
            .query("db", "pubmed")
            .query("id", pmid)
            .query("rettype", "abstract")
            .query("retmode", "xml");
        if let Some(key) = &self.api_key {
            req = req.query("api_key", key);
        }
        let mut resp = req.call().map_err(|e| unavailable(e.to_string()))?;
        let xml = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| unavailable(e.to_string()))?;
        parse_efetch_xml(&xml).map_err(|e| unavailable(format!("bad efetch XML: {e}")))
    }
}

/// Pulls `ArticleTitle` and the concatenated `AbstractText` sections out of
/// an efetch PubmedArticle document.
fn parse_efetch_xml(xml: &str) -> std::result::Result<(String, String), quick_xml::Error> {
    let mut reader = Reader::from_str(xml);
    let mut title = String::new();
    let mut sections: Vec<String> = Vec::new();
    // which element we are collecting text for, and its nesting depth
    let mut target: Option<(bool, usize)> = None;
    loop {
        match reader.read_event()? {
            Event::Start(e) => {
                let name = e.name();
                match (&target, name.as_ref()) {
                    (None, b"ArticleTitle") => target = Some((true, 0)),
                    (None, b"AbstractText") => {
                        sections.push(String::new());
                        target = Some((false, 0));
                    }
                    (Some((t, d)), _) => target = Some((*t, d + 1)),
                    _ => {}
                }
            }
            Event::End(_) => {
                if let Some((t, d)) = target {
                    target = if d == 0 { None } else { Some((t, d - 1)) };
                }
            }
            Event::Text(t) => {
                if let Some((is_title, _)) = target {
                    let s = t.decode()?;
                    let s = quick_xml::escape::unescape(&s).map_err(quick_xml::Error::from)?;
                    if is_title {
                        title.push_str(&s);
                    } else if let Some(last) = sections.last_mut() {
                        last.push_str(&s);
                    }
                }
            }
            Event::GeneralRef(r) => {
                if let Some((is_title, _)) = target {
                    let resolved = r
                        .resolve_char_ref()?
                        .map(String::from)
                        .or_else(|| {
                            let name = r.decode().ok()?;
                            quick_xml::escape::resolve_xml_entity(&name).map(str::to_string)
                        })
                        .unwrap_or_default();
                    if is_title {
                        title.push_str(&resolved);
                    } else if let Some(last) = sections.last_mut() {
                        last.push_str(&resolved);
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    let body = sections
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    Ok((title.trim().to_string(), body))
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    pmid: String,
    title: String,
    body: String,
}

fn cache_path(cache_dir: &Path, pmid: &str) -> PathBuf {
    cache_dir.join(format!("{pmid}.json"))
}

fn lock_file(cache_dir: &Path) -> Result<File> {
    fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    let path = cache_dir.join(".lock");
    File::options()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&path)
        .map_err(|e| Error::io(path, e))
}

fn read_cached(cache_dir: &Path, pmid: &str) -> Result<Option<Abstract>> {
    let path = cache_path(cache_dir, pmid);
    if !path.exists() {
        return Ok(None);
    }
    let lock = lock_file(cache_dir)?;
    lock.lock_shared().map_err(|e| Error::io(cache_dir, e))?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    drop(lock);
    let entry: CacheEntry = serde_json::from_str(&text)?;
    Abstract::new(entry.pmid, entry.title, entry.body).map(Some)
}

fn write_cached(cache_dir: &Path, entry: &CacheEntry) -> Result<()> {
    let lock = lock_file(cache_dir)?;
    lock.lock().map_err(|e| Error::io(cache_dir, e))?;
    let path = cache_path(cache_dir, &entry.pmid);
    let tmp = cache_dir.join(format!(".{}.json.tmp", entry.pmid));
    let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(serde_json::to_string(entry)?.as_bytes())
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
}

/// Returns the cached abstract for `pmid`, or fetches it from `source`,
/// caches it and returns it. Without a source a cache miss is an error.
pub fn fetch_abstract(pmid: &str, cache_dir: &Path, source: Option<&dyn AbstractSource>) -> Result<Abstract> {
    if pmid.trim().is_empty() {
        return Err(Error::InvalidInput("empty pmid".into()));
    }
    if let Some(a) = read_cached(cache_dir, pmid)? {
        return Ok(a);
    }
    let source = source.ok_or_else(|| Error::AbstractUnavailable {
        pmid: pmid.to_string(),
        reason: "not cached and no network source configured".into(),
    })?;
    let (title, body) = source.fetch(pmid)?;
    let abs = Abstract::new(pmid, title, body)?;
    write_cached(
        cache_dir,
        &CacheEntry {
            pmid: abs.pmid.clone(),
            title: abs.title.clone(),
            body: abs.body.clone(),
        },
    )?;
    Ok(abs)
}

/// Cache-backed store with an optional network source for misses.
pub struct CachedAbstracts {
    cache_dir: PathBuf,
    source: Option<Box<dyn AbstractSource>>,
}

impl CachedAbstracts {
    pub fn new(cache_dir: impl Into<PathBuf>, source: Option<Box<dyn AbstractSource>>) -> Self {
        CachedAbstracts {
            cache_dir: cache_dir.into(),
            source,
        }
    }

    pub fn offline(cache_dir: impl Into<PathBuf>) -> Self {
        Self::new(cache_dir, None)
    }
}

impl AbstractStore for CachedAbstracts {
    fn get(&self, pmid: &str) -> Result<Abstract> {
        fetch_abstract(pmid, &self.cache_dir, self.source.as_deref())
    }
}

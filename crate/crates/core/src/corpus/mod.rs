//! Lyric documents: ingestion, cleaning, tokenization and corpus statistics.

mod clean;
mod rules;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clean::{clean_document, clean_text, compress_newlines, decode_entities, strip_tags};
pub use rules::{CleaningRuleSet, LinePattern};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub clean_text: Option<String>,
    /// Provenance tag such as `human` or `generated-p0.95`.
    pub source: String,
    pub meta: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            raw_text: raw_text.into(),
            clean_text: None,
            source: String::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    /// Cleaned text when available, raw text otherwise.
    pub fn text(&self) -> &str {
        self.clean_text.as_deref().unwrap_or(&self.raw_text)
    }
}

/// One line of the corpus JSONL format.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    source: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    PlainDir,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Self::Jsonl),
            "plain-dir" => Ok(Self::PlainDir),
            other => Err(Error::invalid(format!("unknown corpus format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub name: String,
    documents: Vec<Document>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids. Positions in the duplicate
    /// error are 1-based document indices.
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (idx, doc) in documents.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(Error::invalid(format!(
                    "document {} has an empty id",
                    idx + 1
                )));
            }
            if let Some(first) = seen.insert(doc.id.as_str(), idx + 1) {
                return Err(Error::DuplicateId {
                    id: doc.id.clone(),
                    first,
                    second: idx + 1,
                });
            }
        }
        Ok(Self {
            name: name.into(),
            documents,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn load(path: &Path, format: CorpusFormat) -> Result<Self> {
        match format {
            CorpusFormat::Jsonl => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Self::from_jsonl(name, &text)
            }
            CorpusFormat::PlainDir => Self::from_dir(path),
        }
    }

    /// Parses the corpus JSONL format. Blank lines are skipped; errors carry
    /// 1-based line numbers.
    pub fn from_jsonl(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut documents = Vec::new();
        let mut lines_of: HashMap<String, usize> = HashMap::new();
        for (idx, line) in text.split('\n').enumerate() {
            let line_no = idx + 1;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if record.id.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "empty id".into(),
                });
            }
            if let Some(&first) = lines_of.get(&record.id) {
                return Err(Error::DuplicateId {
                    id: record.id,
                    first,
                    second: line_no,
                });
            }
            lines_of.insert(record.id.clone(), line_no);
            documents.push(Document {
                id: record.id,
                raw_text: record.text,
                clean_text: None,
                source: record.source,
                meta: record.meta,
            });
        }
        Ok(Self {
            name: name.into(),
            documents,
        })
    }

    /// One document per regular file, id = file stem, ordered by file name.
    fn from_dir(dir: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            if path.is_file() {
                entries.push(path);
            }
        }
        entries.sort();
        let mut documents = Vec::with_capacity(entries.len());
        for path in entries {
            let raw = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            documents.push(Document::new(id, raw));
        }
        let name = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(name, documents)
    }

    /// Serializes the raw texts as corpus JSONL (LF endings, one record per line).
    pub fn to_jsonl(&self) -> String {
        self.write_records(|d| &d.raw_text)
    }

    /// Serializes with each document's cleaned text (raw text if not cleaned) as `text`.
    pub fn to_clean_jsonl(&self) -> String {
        self.write_records(|d| d.text())
    }

    fn write_records<'a>(&'a self, text: impl Fn(&'a Document) -> &'a str) -> String {
        let mut out = String::new();
        for doc in &self.documents {
            let record = Record {
                id: doc.id.clone(),
                text: text(doc).to_string(),
                source: doc.source.clone(),
                meta: doc.meta.clone(),
            };
            out.push_str(
                &serde_json::to_string(&record).expect("record serialization is infallible"),
            );
            out.push('\n');
        }
        out
    }

    /// Cleans every document in parallel; output order follows input order.
    pub fn cleaned(&self, rules: &CleaningRuleSet) -> Corpus {
        let documents = self
            .documents
            .par_iter()
            .map(|d| clean_document(d, rules))
            .collect();
        Corpus {
            name: self.name.clone(),
            documents,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenScheme {
    /// One token per Unicode scalar value.
    #[default]
    UnicodeScalar,
    /// Tokens separated by Unicode whitespace.
    Whitespace,
}

impl FromStr for TokenScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unicode-scalar" => Ok(Self::UnicodeScalar),
            "whitespace" => Ok(Self::Whitespace),
            other => Err(Error::invalid(format!("unknown token scheme {other:?}"))),
        }
    }
}

impl fmt::Display for TokenScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::UnicodeScalar => "unicode-scalar",
            Self::Whitespace => "whitespace",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub scheme: TokenScheme,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Joins tokens back into text: plain concatenation for unicode-scalar,
    /// single spaces for whitespace.
    pub fn join(&self) -> String {
        match self.scheme {
            TokenScheme::UnicodeScalar => self.tokens.concat(),
            TokenScheme::Whitespace => self.tokens.join(" "),
        }
    }
}

/// Tokenizes after normalizing CR/CRLF line endings to LF.
pub fn tokenize(text: &str, scheme: TokenScheme) -> TokenSequence {
    let text = clean::normalize_line_endings(text);
    let tokens = match scheme {
        TokenScheme::UnicodeScalar => text.chars().map(String::from).collect(),
        TokenScheme::Whitespace => text.split_whitespace().map(String::from).collect(),
    };
    TokenSequence { tokens, scheme }
}

pub fn token_count(text: &str, scheme: TokenScheme) -> usize {
    match scheme {
        // a CRLF pair normalizes to a single LF
        TokenScheme::UnicodeScalar => text.chars().count() - text.matches("\r\n").count(),
        TokenScheme::Whitespace => text.split_whitespace().count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextSource {
    Clean,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub song_count: usize,
    pub token_count: usize,
    pub byte_size: usize,
    /// Distinct `artist` meta values, when any document carries one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub artist_count: Option<usize>,
    pub scheme: TokenScheme,
}

pub fn corpus_stats(
    corpus: &Corpus,
    scheme: TokenScheme,
    source: TextSource,
) -> Result<CorpusStats> {
    let mut token_total = 0usize;
    let mut bytes = 0usize;
    let mut artists = BTreeSet::new();
    for doc in corpus.documents() {
        let text = match source {
            TextSource::Raw => doc.raw_text.as_str(),
            TextSource::Clean => doc.clean_text.as_deref().ok_or_else(|| {
                Error::invalid(format!("document {:?} has not been cleaned", doc.id))
            })?,
        };
        token_total += token_count(text, scheme);
        bytes += text.len();
        if let Some(artist) = doc.meta.get("artist") {
            artists.insert(artist.as_str());
        }
    }
    Ok(CorpusStats {
        song_count: corpus.len(),
        token_count: token_total,
        byte_size: bytes,
        artist_count: (!artists.is_empty()).then_some(artists.len()),
        scheme,
    })
}

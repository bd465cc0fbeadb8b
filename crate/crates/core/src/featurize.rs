//! Fixed-dimension feature vectors for texts.
//!
//! The built-in featurizer hashes character n-gram term frequencies into
//! `dim` buckets and L2-normalizes the result. The bucket of an n-gram is
//! `stable_hash(seed, ngram) % dim`, where `stable_hash` is 64-bit FNV-1a
//! over the seed's 8 little-endian bytes followed by the n-gram's UTF-8
//! bytes. Test vectors live in this module's tests.
//!
//! Precomputed embeddings (for example Inception pool-3 activations) are read
//! from CSV (`id,f0,...,f{d-1}`) or JSONL (`{"id": ..., "vector": [...]}`).

use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a64_continue(FNV_OFFSET, bytes)
}

fn fnv1a64_continue(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

pub fn stable_hash(seed: u64, data: &[u8]) -> u64 {
    fnv1a64_continue(fnv1a64(&seed.to_le_bytes()), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureOrigin {
    HashedNgram,
    External,
}

/// Row-major matrix of feature vectors aligned with document ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    ids: Vec<String>,
    data: Vec<f64>,
    dim: usize,
    pub origin: FeatureOrigin,
}

impl FeatureSet {
    pub fn new(ids: Vec<String>, rows: Vec<Vec<f64>>, origin: FeatureOrigin) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::InvalidFeatures(format!(
                "{} ids for {} rows",
                ids.len(),
                rows.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidFeatures(format!(
                    "row {r} has {} values, expected {dim}",
                    row.len()
                )));
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidFeatures(format!(
                    "non-finite value at ({r},{c})"
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            ids,
            data,
            dim,
            origin,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    /// Keeps the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> FeatureSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureSet {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            data,
            dim: self.dim,
            origin: self.origin,
        }
    }

    /// CSV with header `id,f0,...`; floats use the shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for j in 0..self.dim {
            write!(out, ",f{j}").unwrap();
        }
        out.push('\n');
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        for (i, id) in self.ids.iter().enumerate() {
            let mut record = vec![id.clone()];
            record.extend(self.row(i).iter().map(|v| format!("{v:?}")));
            writer.write_record(&record).expect("in-memory write");
        }
        out.push_str(
            &String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8"),
        );
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses either supported file format, sniffing JSONL by a leading `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::parse_jsonl(text)
        } else {
            Self::parse_csv(text)
        }
    }

    fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::InvalidFeatures(format!("bad header: {e}")))?
            .clone();
        if headers.get(0) != Some("id") {
            return Err(Error::InvalidFeatures(
                "first header column must be `id`".into(),
            ));
        }
        let dim = headers.len() - 1;
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::InvalidFeatures(format!("row {r}: {e}")))?;
            if record.len() - 1 != dim {
                return Err(Error::InvalidFeatures(format!(
                    "row {r} has {} values, expected {dim}",
                    record.len() - 1
                )));
            }
            ids.push(record[0].to_string());
            for (c, field) in record.iter().skip(1).enumerate() {
                let value: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidFeatures(format!("unparsable value {field:?} at ({r},{c})"))
                })?;
                if !value.is_finite() {
                    return Err(Error::InvalidFeatures(format!(
                        "non-finite value at ({r},{c})"
                    )));
                }
                data.push(value);
            }
        }
        Ok(Self {
            ids,
            data,
            dim,
            origin: FeatureOrigin::External,
        })
    }

    fn parse_jsonl(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            id: String,
            vector: Vec<Option<f64>>,
        }
        let mut ids = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (r, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let row: Row = serde_json::from_str(line)
                .map_err(|e| Error::InvalidFeatures(format!("row {r}: {e}")))?;
            let expected = *dim.get_or_insert(row.vector.len());
            if row.vector.len() != expected {
                return Err(Error::InvalidFeatures(format!(
                    "row {r} has {} values, expected {expected}",
                    row.vector.len()
                )));
            }
            for (c, v) in row.vector.iter().enumerate() {
                match v {
                    Some(v) if v.is_finite() => data.push(*v),
                    _ => {
                        return Err(Error::InvalidFeatures(format!(
                            "non-finite value at ({r},{c})"
                        )))
                    }
                }
            }
            ids.push(row.id);
        }
        Ok(Self {
            ids,
            data,
            dim: dim.unwrap_or(0),
            origin: FeatureOrigin::External,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedNgramConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub dim: usize,
    pub max_length: usize,
    pub seed: u64,
}

impl Default for HashedNgramConfig {
    fn default() -> Self {
        Self {
            n_min: 1,
            n_max: 3,
            dim: 1024,
            max_length: 128,
            seed: 0,
        }
    }
}

impl HashedNgramConfig {
    pub fn n_range(&self) -> RangeInclusive<usize> {
        self.n_min..=self.n_max
    }

    fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::invalid("feature dimension must be at least 2"));
        }
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::invalid("n range must satisfy 1 <= n_min <= n_max"));
        }
        Ok(())
    }
}

/// Bucket index of one n-gram.
pub fn bucket(ngram: &str, dim: usize, seed: u64) -> usize {
    (stable_hash(seed, ngram.as_bytes()) % dim as u64) as usize
}

/// Hashed, L2-normalized character n-gram term frequencies of one text,
/// truncated to its first `max_length` Unicode scalar values.
pub fn hashed_ngram_vector(text: &str, cfg: &HashedNgramConfig) -> Vec<f64> {
    let mut vector = vec![0.0; cfg.dim];
    let boundaries: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .take(cfg.max_length + 1)
        .collect();
    let chars = boundaries.len() - 1;
    for n in cfg.n_range() {
        if n > chars {
            break;
        }
        for start in 0..=chars - n {
            let gram = &text[boundaries[start]..boundaries[start + n]];
            vector[bucket(gram, cfg.dim, cfg.seed)] += 1.0;
        }
    }
    let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        vector.iter_mut().for_each(|v| *v /= norm);
    }
    vector
}

/// Featurizes every document (cleaned text when present) in corpus order.
pub fn hashed_ngram_features(corpus: &Corpus, cfg: &HashedNgramConfig) -> Result<FeatureSet> {
    cfg.validate()?;
    let rows: Vec<Vec<f64>> = corpus
        .documents()
        .par_iter()
        .map(|d| hashed_ngram_vector(d.text(), cfg))
        .collect();
    let mut data = Vec::with_capacity(rows.len() * cfg.dim);
    rows.iter().for_each(|r| data.extend_from_slice(r));
    Ok(FeatureSet {
        ids: corpus.documents().iter().map(|d| d.id.clone()).collect(),
        data,
        dim: cfg.dim,
        origin: FeatureOrigin::HashedNgram,
    })
}

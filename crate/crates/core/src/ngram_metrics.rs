//! Degeneration metrics over token sequences: rep-n, distinct-n and diversity.
//!
//! n-grams are overlapping windows. Under the unicode-scalar scheme newlines
//! are ordinary tokens, so repeated lines (choruses) count as repetition.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TokenScheme};
use crate::error::{Error, Result};

/// The n values whose repetition rates make up the diversity product.
pub const DIVERSITY_NS: [usize; 3] = [2, 3, 4];

fn count_ngrams<T: Hash + Eq>(tokens: &[T], n: usize) -> (usize, usize) {
    if tokens.len() < n {
        return (0, 0);
    }
    let total = tokens.len() - n + 1;
    let unique: HashSet<&[T]> = tokens.windows(n).collect();
    (unique.len(), total)
}

/// `1 - unique/total` over the overlapping n-grams; 0 when the sequence is
/// shorter than `n`.
pub fn rep_n<T: Hash + Eq>(tokens: &[T], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let (unique, total) = count_ngrams(tokens, n);
    if total == 0 {
        return Ok(0.0);
    }
    Ok(1.0 - unique as f64 / total as f64)
}

/// Unique overlapping n-grams divided by the number of tokens.
pub fn distinct_n<T: Hash + Eq>(tokens: &[T], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if tokens.is_empty() {
        return Err(Error::UndefinedMetric(
            "distinct-n of an empty sequence".into(),
        ));
    }
    let (unique, _) = count_ngrams(tokens, n);
    Ok(unique as f64 / tokens.len() as f64)
}

pub fn diversity<T: Hash + Eq>(tokens: &[T]) -> f64 {
    DIVERSITY_NS
        .iter()
        .map(|&n| 1.0 - rep_n(tokens, n).expect("n >= 2"))
        .product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub rep: BTreeMap<usize, f64>,
    pub distinct: BTreeMap<usize, f64>,
    pub diversity: f64,
}

impl SequenceMetrics {
    pub fn rep(&self, n: usize) -> Option<f64> {
        self.rep.get(&n).copied()
    }

    pub fn distinct(&self, n: usize) -> Option<f64> {
        self.distinct.get(&n).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentMetrics {
    pub id: String,
    pub token_count: usize,
    #[serde(flatten)]
    pub metrics: SequenceMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Metrics per document, then the arithmetic mean.
    #[default]
    MeanOfDocuments,
    /// n-gram counts pooled over all documents (n-grams never span documents).
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerationReport {
    pub n_values: Vec<usize>,
    pub scheme: TokenScheme,
    pub aggregation: Aggregation,
    pub corpus_mean: SequenceMetrics,
    pub per_document: Vec<DocumentMetrics>,
    /// Ids of documents skipped because they had no tokens.
    pub warnings: Vec<String>,
}

pub fn sequence_metrics<T: Hash + Eq>(tokens: &[T], ns: &[usize]) -> Result<SequenceMetrics> {
    let mut rep = BTreeMap::new();
    let mut distinct = BTreeMap::new();
    for &n in ns {
        rep.insert(n, rep_n(tokens, n)?);
        distinct.insert(n, distinct_n(tokens, n)?);
    }
    Ok(SequenceMetrics {
        rep,
        distinct,
        diversity: diversity(tokens),
    })
}

/// Interns tokens of `text` to integer ids under `scheme`.
fn token_ids(text: &str, scheme: TokenScheme) -> Vec<u32> {
    match scheme {
        TokenScheme::UnicodeScalar => crate::corpus::tokenize(text, scheme)
            .tokens
            .iter()
            .map(|t| t.chars().next().map_or(0, u32::from))
            .collect(),
        TokenScheme::Whitespace => {
            let mut vocab: HashMap<&str, u32> = HashMap::new();
            text.split_whitespace()
                .map(|w| {
                    let next = vocab.len() as u32;
                    *vocab.entry(w).or_insert(next)
                })
                .collect()
        }
    }
}

fn validate_ns(ns: &[usize]) -> Result<Vec<usize>> {
    if ns.is_empty() {
        return Err(Error::invalid("at least one n is required"));
    }
    if ns.contains(&0) {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    Ok(ns)
}

/// Degeneration metrics for every document of `corpus` (cleaned text when
/// present) plus the corpus-level aggregate.
pub fn corpus_degeneration(
    corpus: &Corpus,
    scheme: TokenScheme,
    ns: &[usize],
    aggregation: Aggregation,
) -> Result<DegenerationReport> {
    let ns = validate_ns(ns)?;
    let tokenized: Vec<(&str, Vec<u32>)> = corpus
        .documents()
        .par_iter()
        .map(|d| (d.id.as_str(), token_ids(d.text(), scheme)))
        .collect();

    let mut warnings = Vec::new();
    let mut kept = Vec::new();
    for (id, ids) in tokenized {
        if ids.is_empty() {
            warnings.push(id.to_string());
        } else {
            kept.push((id, ids));
        }
    }
    if kept.is_empty() {
        return Err(Error::invalid("corpus has no non-empty documents"));
    }

    let per_document: Vec<DocumentMetrics> = kept
        .par_iter()
        .map(|(id, ids)| {
            Ok(DocumentMetrics {
                id: id.to_string(),
                token_count: ids.len(),
                metrics: sequence_metrics(ids, &ns)?,
            })
        })
        .collect::<Result<_>>()?;

    let corpus_mean = match aggregation {
        Aggregation::MeanOfDocuments => mean_metrics(&per_document, &ns),
        Aggregation::Pooled => pooled_metrics(kept.iter().map(|(_, ids)| ids.as_slice()), &ns),
    };

    Ok(DegenerationReport {
        n_values: ns,
        scheme,
        aggregation,
        corpus_mean,
        per_document,
        warnings,
    })
}

fn mean_metrics(docs: &[DocumentMetrics], ns: &[usize]) -> SequenceMetrics {
    let count = docs.len() as f64;
    // sequential sums in document order keep the result deterministic
    let mean = |f: &dyn Fn(&SequenceMetrics) -> f64| {
        docs.iter().map(|d| f(&d.metrics)).sum::<f64>() / count
    };
    let mut rep = BTreeMap::new();
    let mut distinct = BTreeMap::new();
    for &n in ns {
        rep.insert(n, mean(&|m| m.rep[&n]));
        distinct.insert(n, mean(&|m| m.distinct[&n]));
    }
    SequenceMetrics {
        rep,
        distinct,
        diversity: mean(&|m| m.diversity),
    }
}

fn pooled_metrics<'a>(
    docs: impl Iterator<Item = &'a [u32]> + Clone,
    ns: &[usize],
) -> SequenceMetrics {
    let token_total: usize = docs.clone().map(<[u32]>::len).sum();
    let pooled_rep = |n: usize| {
        let mut unique: HashSet<&[u32]> = HashSet::new();
        let mut total = 0usize;
        for doc in docs.clone() {
            if doc.len() >= n {
                total += doc.len() - n + 1;
                unique.extend(doc.windows(n));
            }
        }
        (unique.len(), total)
    };
    let mut rep = BTreeMap::new();
    let mut distinct = BTreeMap::new();
    for &n in ns {
        let (unique, total) = pooled_rep(n);
        rep.insert(
            n,
            if total == 0 {
                0.0
            } else {
                1.0 - unique as f64 / total as f64
            },
        );
        distinct.insert(n, unique as f64 / token_total as f64);
    }
    let diversity = DIVERSITY_NS
        .iter()
        .map(|&n| {
            let (unique, total) = pooled_rep(n);
            if total == 0 {
                1.0
            } else {
                unique as f64 / total as f64
            }
        })
        .product();
    SequenceMetrics {
        rep,
        distinct,
        diversity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn toks(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn rep_examples() {
        assert_eq!(rep_n(&toks("abcde"), 2).unwrap(), 0.0);
        assert!((rep_n(&toks("ababab"), 2).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(rep_n(&toks("a"), 2).unwrap(), 0.0);
        assert!(rep_n(&toks("ab"), 0).is_err());
    }

    #[test]
    fn distinct_examples() {
        assert_eq!(distinct_n(&toks("abac"), 2).unwrap(), 0.75);
        assert_eq!(distinct_n(&toks("aaaaa"), 2).unwrap(), 1.0 / 5.0);
        assert_eq!(distinct_n(&toks("a"), 1).unwrap(), 1.0);
        assert!(matches!(
            distinct_n::<char>(&[], 2),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn diversity_examples() {
        assert_eq!(diversity(&toks("abcdefg")), 1.0);
        let expected = (1.0 - 0.6) * (1.0 - 0.5) * (1.0 - 1.0 / 3.0);
        assert!((diversity(&toks("ababab")) - expected).abs() < 1e-15);
    }

    #[test]
    fn single_document_mean_is_the_document() {
        let corpus = Corpus::new("c", vec![Document::new("a", "ababab")]).unwrap();
        let report = corpus_degeneration(
            &corpus,
            TokenScheme::UnicodeScalar,
            &[2, 3, 4],
            Aggregation::MeanOfDocuments,
        )
        .unwrap();
        assert_eq!(report.corpus_mean, report.per_document[0].metrics);
    }

    #[test]
    fn mean_of_two_documents() {
        let corpus = Corpus::new(
            "c",
            vec![Document::new("a", "ababab"), Document::new("b", "abcdef")],
        )
        .unwrap();
        let report = corpus_degeneration(
            &corpus,
            TokenScheme::UnicodeScalar,
            &[2, 3, 4],
            Aggregation::MeanOfDocuments,
        )
        .unwrap();
        assert!((report.corpus_mean.rep(2).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn empty_documents_skipped_with_warning() {
        let corpus =
            Corpus::new("c", vec![Document::new("a", "ab"), Document::new("b", "")]).unwrap();
        let report = corpus_degeneration(
            &corpus,
            TokenScheme::UnicodeScalar,
            &[2],
            Aggregation::MeanOfDocuments,
        )
        .unwrap();
        assert_eq!(report.per_document.len(), 1);
        assert_eq!(report.warnings, ["b"]);

        let empty = Corpus::new("c", vec![Document::new("b", "")]).unwrap();
        assert!(corpus_degeneration(
            &empty,
            TokenScheme::UnicodeScalar,
            &[2],
            Aggregation::MeanOfDocuments
        )
        .is_err());
        assert!(corpus_degeneration(
            &Corpus::default(),
            TokenScheme::UnicodeScalar,
            &[2],
            Aggregation::Pooled
        )
        .is_err());
    }

    #[test]
    fn pooled_counts_across_documents() {
        let corpus = Corpus::new(
            "c",
            vec![Document::new("a", "abc"), Document::new("b", "abc")],
        )
        .unwrap();
        let report = corpus_degeneration(
            &corpus,
            TokenScheme::UnicodeScalar,
            &[2],
            Aggregation::Pooled,
        )
        .unwrap();
        // bigrams ab, bc twice each: 2 unique of 4
        assert_eq!(report.corpus_mean.rep(2), Some(0.5));
        assert_eq!(report.corpus_mean.distinct(2), Some(2.0 / 6.0));
    }

    #[test]
    fn whitespace_scheme_uses_words() {
        let corpus = Corpus::new("c", vec![Document::new("a", "la la la la")]).unwrap();
        let report = corpus_degeneration(
            &corpus,
            TokenScheme::Whitespace,
            &[1],
            Aggregation::MeanOfDocuments,
        )
        .unwrap();
        assert_eq!(report.per_document[0].token_count, 4);
        assert_eq!(report.corpus_mean.rep(1), Some(0.75));
    }
}

//! Nucleus (top-p) sampling and a character n-gram language model to drive it.
//!
//! The model uses additive smoothing at the longest context suffix it has
//! seen (stupid backoff) and falls back to a uniform distribution when no
//! suffix of the context is known.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub type TokenId = u32;

/// Stand-in id for context characters that are not in the vocabulary.
const UNKNOWN: TokenId = TokenId::MAX;

pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 6;
pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_ALPHA: f64 = 0.1;

/// Probability vector indexed by token id (vocabulary order).
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("empty distribution"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid(
                "probabilities must be finite and non-negative",
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        self.probs.get(id as usize).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> Vec<TokenId> {
        (0..self.probs.len() as TokenId)
            .filter(|&i| self.probs[i as usize] > 0.0)
            .collect()
    }
}

fn validate_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("top-p must be in (0, 1], got {p}")))
    }
}

/// Keeps the smallest probability-sorted prefix whose cumulative mass reaches
/// `p` (the token crossing the threshold is kept) and renormalizes it.
/// Ties sort by token id.
pub fn top_p_filter(dist: &Distribution, p: f64) -> Result<Distribution> {
    validate_p(p)?;
    let mut order: Vec<usize> = (0..dist.probs.len()).collect();
    order.sort_by(|&a, &b| dist.probs[b].total_cmp(&dist.probs[a]).then(a.cmp(&b)));
    let mut kept = 0;
    let mut mass = 0.0;
    for &i in &order {
        if dist.probs[i] <= 0.0 {
            break;
        }
        mass += dist.probs[i];
        kept += 1;
        if mass >= p {
            break;
        }
    }
    let mut probs = vec![0.0; dist.probs.len()];
    for &i in &order[..kept] {
        probs[i] = dist.probs[i] / mass;
    }
    Ok(Distribution { probs })
}

#[derive(Debug, Clone, PartialEq)]
struct ContextCounts {
    total: u64,
    /// Sorted by count descending, then token id.
    next: Vec<(TokenId, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramLM {
    order: usize,
    alpha: f64,
    /// Characters in code point order; the end-of-text marker takes the id
    /// right after the last character.
    chars: Vec<char>,
    index: HashMap<char, TokenId>,
    counts: HashMap<Vec<TokenId>, ContextCounts>,
}

impl NgramLM {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab_size(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn eot(&self) -> TokenId {
        self.chars.len() as TokenId
    }

    pub fn token_of(&self, ch: char) -> Option<TokenId> {
        self.index.get(&ch).copied()
    }

    /// Maps text to ids; characters outside the vocabulary become an id that
    /// matches no context.
    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        text.chars()
            .map(|c| self.token_of(c).unwrap_or(UNKNOWN))
            .collect()
    }

    /// Inverse of [`encode`](Self::encode); the end-of-text marker and unknown ids are dropped.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .filter_map(|&i| self.chars.get(i as usize))
            .collect()
    }

    /// Training count of `next` (`None` = end of text) after `context`.
    pub fn count(&self, context: &str, next: Option<char>) -> u64 {
        let ctx = self.encode(context);
        let Some(target) = (match next {
            Some(c) => self.token_of(c),
            None => Some(self.eot()),
        }) else {
            return 0;
        };
        self.counts
            .get(&ctx)
            .and_then(|cc| cc.next.iter().find(|(t, _)| *t == target))
            .map_or(0, |(_, c)| *c)
    }

    pub fn context_count(&self) -> usize {
        self.counts.len()
    }

    fn lookup(&self, context: &[TokenId]) -> Option<&ContextCounts> {
        let longest = context.len().min(self.order - 1);
        (1..=longest)
            .rev()
            .find_map(|len| self.counts.get(&context[context.len() - len..]))
    }

    fn row(&self, context: &[TokenId]) -> Row<'_> {
        let v = self.vocab_size();
        match self.lookup(context) {
            Some(cc) => Row::Smoothed {
                counts: cc,
                denom: cc.total as f64 + self.alpha * v as f64,
                alpha: self.alpha,
                vocab: v,
            },
            None => Row::Uniform { vocab: v },
        }
    }
}

/// Fits counts for every context length from 1 to `order - 1` over the
/// Unicode scalar values of each document (cleaned text when present),
/// with an end-of-text marker after each document.
pub fn fit_char_lm(corpus: &Corpus, order: usize, alpha: f64) -> Result<NgramLM> {
    if corpus.is_empty() {
        return Err(Error::invalid(
            "cannot fit a language model on an empty corpus",
        ));
    }
    if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
        return Err(Error::invalid(format!(
            "order must be in {MIN_ORDER}..={MAX_ORDER}, got {order}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("smoothing constant must be positive"));
    }
    let mut chars: Vec<char> = corpus
        .documents()
        .iter()
        .flat_map(|d| d.text().chars())
        .collect();
    chars.sort_unstable();
    chars.dedup();
    let index: HashMap<char, TokenId> = chars
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i as TokenId))
        .collect();
    let eot = chars.len() as TokenId;

    let mut raw: HashMap<Vec<TokenId>, HashMap<TokenId, u64>> = HashMap::new();
    for doc in corpus.documents() {
        let mut ids: Vec<TokenId> = doc.text().chars().map(|c| index[&c]).collect();
        ids.push(eot);
        for j in 1..ids.len() {
            for len in 1..=(order - 1).min(j) {
                *raw.entry(ids[j - len..j].to_vec())
                    .or_default()
                    .entry(ids[j])
                    .or_default() += 1;
            }
        }
    }
    let counts = raw
        .into_iter()
        .map(|(ctx, next)| {
            let mut next: Vec<(TokenId, u64)> = next.into_iter().collect();
            next.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let total = next.iter().map(|(_, c)| c).sum();
            (ctx, ContextCounts { total, next })
        })
        .collect();
    Ok(NgramLM {
        order,
        alpha,
        chars,
        index,
        counts,
    })
}

enum Row<'a> {
    Smoothed {
        counts: &'a ContextCounts,
        denom: f64,
        alpha: f64,
        vocab: usize,
    },
    Uniform {
        vocab: usize,
    },
}

impl Row<'_> {
    fn dense(&self) -> Vec<f64> {
        match *self {
            Row::Smoothed {
                counts,
                denom,
                alpha,
                vocab,
            } => {
                let mut probs = vec![(0.0 + alpha) / denom; vocab];
                for &(t, c) in &counts.next {
                    probs[t as usize] = (c as f64 + alpha) / denom;
                }
                probs
            }
            Row::Uniform { vocab } => vec![1.0 / vocab as f64; vocab],
        }
    }

    /// The top-p nucleus in the same order and with the same floating-point
    /// sums as [`top_p_filter`] over [`Row::dense`], without materializing
    /// the whole vocabulary. Returns (token, unnormalized prob) and the kept mass.
    fn nucleus(&self, p: f64, out: &mut Vec<(TokenId, f64)>) -> f64 {
        out.clear();
        let mut mass = 0.0;
        match *self {
            Row::Smoothed {
                counts,
                denom,
                alpha,
                vocab,
            } => {
                for &(t, c) in &counts.next {
                    let prob = (c as f64 + alpha) / denom;
                    mass += prob;
                    out.push((t, prob));
                    if mass >= p {
                        return mass;
                    }
                }
                let floor = (0.0 + alpha) / denom;
                let mut seen: Vec<TokenId> = counts.next.iter().map(|(t, _)| *t).collect();
                seen.sort_unstable();
                let mut seen_iter = seen.iter().peekable();
                for t in 0..vocab as TokenId {
                    if seen_iter.peek() == Some(&&t) {
                        seen_iter.next();
                        continue;
                    }
                    mass += floor;
                    out.push((t, floor));
                    if mass >= p {
                        break;
                    }
                }
            }
            Row::Uniform { vocab } => {
                let prob = 1.0 / vocab as f64;
                for t in 0..vocab as TokenId {
                    mass += prob;
                    out.push((t, prob));
                    if mass >= p {
                        break;
                    }
                }
            }
        }
        mass
    }
}

/// Smoothed next-token distribution given the ids of the preceding tokens.
pub fn next_distribution(lm: &NgramLM, context: &[TokenId]) -> Distribution {
    Distribution {
        probs: lm.row(context).dense(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub p: f64,
    pub max_tokens: usize,
    pub seed: u64,
    pub prompt: String,
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        validate_p(self.p)?;
        if self.max_tokens == 0 {
            return Err(Error::invalid("max_tokens must be at least 1"));
        }
        Ok(())
    }
}

/// Draws a continuation of `cfg.prompt` using random stream `stream` of
/// `cfg.seed`. Stops at end-of-text or after `max_tokens`; the returned ids
/// exclude the prompt and the end-of-text marker.
pub fn generate_ids(lm: &NgramLM, cfg: &SamplingConfig, stream: u64) -> Result<Vec<TokenId>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut context = lm.encode(&cfg.prompt);
    let prompt_len = context.len();
    let mut nucleus = Vec::new();
    for _ in 0..cfg.max_tokens {
        let window = context.len().saturating_sub(lm.order - 1);
        let mass = lm.row(&context[window..]).nucleus(cfg.p, &mut nucleus);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = nucleus.last().expect("nucleus is never empty").0;
        for &(t, prob) in &nucleus {
            acc += prob / mass;
            if acc > u {
                pick = t;
                break;
            }
        }
        if pick == lm.eot() {
            break;
        }
        context.push(pick);
    }
    Ok(context.split_off(prompt_len))
}

pub fn generate(lm: &NgramLM, cfg: &SamplingConfig) -> Result<String> {
    generate_ids(lm, cfg, 0).map(|ids| lm.decode(&ids))
}

/// `n` generations; sequence `i` uses random stream `i`. Runs in parallel,
/// output in sequence order.
pub fn generate_batch(lm: &NgramLM, cfg: &SamplingConfig, n: usize) -> Result<Vec<String>> {
    cfg.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| generate_ids(lm, cfg, i).map(|ids| lm.decode(&ids)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn lm(texts: &[&str], order: usize, alpha: f64) -> NgramLM {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(i.to_string(), *t))
            .collect();
        fit_char_lm(&Corpus::new("c", docs).unwrap(), order, alpha).unwrap()
    }

    #[test]
    fn abab_counts() {
        let m = lm(&["abab"], 2, 0.1);
        assert_eq!(m.count("a", Some('b')), 2);
        assert_eq!(m.count("b", Some('a')), 1);
        assert_eq!(m.count("b", None), 1);
        assert_eq!(m.vocab_size(), 3);
    }

    #[test]
    fn single_char_corpus() {
        let m = lm(&["a"], 2, 0.1);
        assert_eq!(m.count("a", None), 1);
    }

    #[test]
    fn refit_is_identical() {
        assert_eq!(
            lm(&["春眠不覺曉", "處處聞啼鳥"], 4, 0.1),
            lm(&["春眠不覺曉", "處處聞啼鳥"], 4, 0.1)
        );
    }

    #[test]
    fn fit_preconditions() {
        assert!(fit_char_lm(&Corpus::default(), 2, 0.1).is_err());
        let c = Corpus::new("c", vec![Document::new("a", "ab")]).unwrap();
        assert!(fit_char_lm(&c, 1, 0.1).is_err());
        assert!(fit_char_lm(&c, 7, 0.1).is_err());
    }

    #[test]
    fn smoothed_probability_by_hand() {
        let m = lm(&["abab"], 2, 0.1);
        let d = next_distribution(&m, &m.encode("a"));
        let b = m.token_of('b').unwrap();
        assert!((d.prob(b) - 2.1 / 2.3).abs() < 1e-15);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_alpha_concentrates_mass() {
        let m = lm(&["abab"], 2, 1e-12);
        let d = next_distribution(&m, &m.encode("a"));
        assert!(d.prob(m.token_of('b').unwrap()) > 1.0 - 1e-9);
    }

    #[test]
    fn unseen_context_is_uniform() {
        let m = lm(&["abab"], 3, 0.1);
        for ctx in ["", "z", "az"] {
            let d = next_distribution(&m, &m.encode(ctx));
            assert!(d.probs().iter().all(|&p| p == 1.0 / 3.0), "{ctx:?}");
        }
    }

    #[test]
    fn backoff_uses_longest_known_suffix() {
        let m = lm(&["abc", "xbd"], 3, 0.1);
        // "ab" is known: only c follows it
        let d = next_distribution(&m, &m.encode("ab"));
        assert!(d.prob(m.token_of('c').unwrap()) > d.prob(m.token_of('d').unwrap()));
        // "zb" is unknown, "b" is: c and d equally likely
        let d = next_distribution(&m, &m.encode("zb"));
        assert_eq!(
            d.prob(m.token_of('c').unwrap()),
            d.prob(m.token_of('d').unwrap())
        );
    }

    #[test]
    fn top_p_examples() {
        let d = Distribution::new(vec![0.5, 0.3, 0.2]).unwrap();
        assert_eq!(top_p_filter(&d, 1.0).unwrap(), d);
        let f = top_p_filter(&d, 0.8).unwrap();
        assert!((f.prob(0) - 0.625).abs() < 1e-15);
        assert!((f.prob(1) - 0.375).abs() < 1e-15);
        assert_eq!(f.prob(2), 0.0);
        let f = top_p_filter(&d, 0.4).unwrap();
        assert_eq!(f.probs(), [1.0, 0.0, 0.0]);
        assert!(top_p_filter(&d, 0.0).is_err());
        assert!(top_p_filter(&d, 1.5).is_err());
    }

    #[test]
    fn ties_break_by_vocab_order() {
        let d = Distribution::new(vec![0.25; 4]).unwrap();
        assert_eq!(top_p_filter(&d, 0.5).unwrap().support(), [0, 1]);
    }

    #[test]
    fn generation_is_seeded() {
        let m = lm(&["春眠不覺曉處處聞啼鳥", "夜來風雨聲花落知多少"], 3, 0.1);
        let cfg = SamplingConfig {
            p: 0.9,
            max_tokens: 40,
            seed: 0,
            prompt: "春".into(),
        };
        assert_eq!(generate(&m, &cfg).unwrap(), generate(&m, &cfg).unwrap());
        let batch = generate_batch(&m, &cfg, 4).unwrap();
        assert_eq!(batch[0], generate(&m, &cfg).unwrap());
    }

    #[test]
    fn deterministic_chain_is_reproduced() {
        let m = lm(&["abcdef"], 2, 1e-9);
        let cfg = SamplingConfig {
            p: 0.95,
            max_tokens: 10,
            seed: 11,
            prompt: "a".into(),
        };
        assert_eq!(generate(&m, &cfg).unwrap(), "bcdef");
    }

    #[test]
    fn max_tokens_respected() {
        let m = lm(&["aaaa"], 2, 0.1);
        let cfg = SamplingConfig {
            p: 0.5,
            max_tokens: 7,
            seed: 0,
            prompt: "a".into(),
        };
        assert_eq!(generate(&m, &cfg).unwrap(), "aaaaaaa");
    }

    #[test]
    fn sparse_nucleus_matches_dense_filter() {
        let m = lm(&["abracadabra", "cabbage", "abcabcabc", "dad"], 3, 0.3);
        let mut buf = Vec::new();
        for ctx in ["", "a", "ab", "ra", "zz", "ca", "bb", "d"] {
            let ids = m.encode(ctx);
            let row = m.row(&ids);
            for p in [0.05, 0.3, 0.5, 0.8, 0.9, 0.95, 0.99, 1.0] {
                let dense = top_p_filter(&next_distribution(&m, &ids), p).unwrap();
                let mass = row.nucleus(p, &mut buf);
                let mut sparse = vec![0.0; m.vocab_size()];
                for &(t, prob) in &buf {
                    sparse[t as usize] = prob / mass;
                }
                assert_eq!(sparse, dense.probs(), "ctx {ctx:?} p {p}");
            }
        }
    }
}

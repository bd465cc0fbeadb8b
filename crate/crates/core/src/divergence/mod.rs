//! MAUVE-style divergence scoring between two feature sets.
//!
//! Both sets are quantized jointly with k-means, turned into smoothed
//! histograms `P` and `Q`, and compared through the mixtures
//! `R = w_p·P + w_q·Q`. Each mixture yields a frontier point
//! `(exp(-c·KL(Q‖R)), exp(-c·KL(P‖R)))`; the score is the area under the
//! resulting curve.

pub mod kmeans;

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::FeatureSet;

pub use kmeans::{KMeans, KMeansConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MauveConfig {
    /// Cluster count; `None` means `min(500, (|P| + |Q|) / 10)`, at least 2.
    pub k: Option<usize>,
    pub c: f64,
    pub epsilon: f64,
    /// Interior points of the mixture-weight grid.
    pub grid_size: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Per-side cap; larger inputs are uniformly subsampled.
    pub max_samples: Option<usize>,
}

impl Default for MauveConfig {
    fn default() -> Self {
        Self {
            k: None,
            c: 5.0,
            epsilon: 1e-6,
            grid_size: 100,
            seed: 0,
            max_iter: 100,
            max_samples: Some(3000),
        }
    }
}

impl MauveConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.k {
            if k < 2 {
                return Err(Error::invalid("k must be at least 2"));
            }
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid("scaling constant c must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("smoothing epsilon must be positive"));
        }
        if self.grid_size < 3 {
            return Err(Error::invalid("grid size must be at least 3"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if self.max_samples == Some(0) {
            return Err(Error::invalid("max_samples must be at least 1"));
        }
        Ok(())
    }

    pub fn default_k(total_rows: usize) -> usize {
        (total_rows / 10).clamp(2, 500)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedPair {
    pub hist_p: Vec<f64>,
    pub hist_q: Vec<f64>,
    pub k: usize,
    pub assignment_seed: u64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    /// Weight of `P` in the mixture.
    pub lambda: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCurve {
    /// Sorted by ascending `x`.
    pub points: Vec<FrontierPoint>,
    pub c: f64,
    pub grid_size: usize,
}

/// `Σ p_i ln(p_i / q_i)` in nats, with `0·ln(0/q) = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi < 0.0 || qi < 0.0 || !pi.is_finite() || !qi.is_finite() {
            return Err(Error::invalid(format!("invalid probability at index {i}")));
        }
        if pi > 0.0 {
            if qi == 0.0 {
                return Err(Error::invalid(format!(
                    "q is zero where p is positive (index {i})"
                )));
            }
            total += pi * (pi / qi).ln();
        }
    }
    // rounding can leave a tiny negative residue
    Ok(total.max(0.0))
}

fn canonical_order(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn subsample(set: &FeatureSet, cap: Option<usize>, seed: u64) -> FeatureSet {
    match cap {
        Some(cap) if set.len() > cap => {
            // fresh stream per side so the draw depends only on the side's size
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, set.len(), cap).into_vec();
            idx.sort_unstable();
            set.select(&idx)
        }
        _ => set.clone(),
    }
}

fn histogram(set: &FeatureSet, km: &KMeans, epsilon: f64) -> Vec<f64> {
    let mut counts = vec![0.0; km.k];
    for row in set.rows() {
        counts[km.nearest(row)] += 1.0;
    }
    counts.iter_mut().for_each(|c| *c += epsilon);
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

/// Joint quantization of both sets into smoothed `k`-bin histograms.
///
/// k-means runs on the union of rows in a canonical (lexicographic) order,
/// so swapping the arguments swaps the histograms exactly.
pub fn quantize(
    features_p: &FeatureSet,
    features_q: &FeatureSet,
    cfg: &MauveConfig,
) -> Result<QuantizedPair> {
    cfg.validate()?;
    if features_p.is_empty() || features_q.is_empty() {
        return Err(Error::invalid("both feature sets must be non-empty"));
    }
    if features_p.dim() != features_q.dim() {
        return Err(Error::DimensionMismatch {
            expected: features_p.dim(),
            actual: features_q.dim(),
        });
    }
    let p = subsample(features_p, cfg.max_samples, cfg.seed);
    let q = subsample(features_q, cfg.max_samples, cfg.seed);
    let dim = p.dim();

    let mut union: Vec<&[f64]> = p.rows().chain(q.rows()).collect();
    union.sort_by(|a, b| canonical_order(a, b));
    let total = union.len();

    let mut warnings = Vec::new();
    let requested = cfg.k.unwrap_or_else(|| MauveConfig::default_k(total));
    let k = if requested > total {
        warnings.push(format!(
            "k = {requested} exceeds {total} rows; clamped to {total}"
        ));
        total
    } else {
        requested
    };

    let flat: Vec<f64> = union.iter().flat_map(|r| r.iter().copied()).collect();
    let km = kmeans::kmeans(
        &flat,
        dim.max(1),
        KMeansConfig {
            k,
            max_iter: cfg.max_iter,
            seed: cfg.seed,
        },
    );
    if !km.converged {
        warnings.push(format!(
            "k-means stopped after {} iterations without converging",
            km.iterations
        ));
    }

    Ok(QuantizedPair {
        hist_p: histogram(&p, &km, cfg.epsilon),
        hist_q: histogram(&q, &km, cfg.epsilon),
        k,
        assignment_seed: cfg.seed,
        warnings,
    })
}

fn validate_hist(h: &[f64], name: &str) -> Result<()> {
    let sum: f64 = h.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || h.iter().any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::invalid(format!(
            "{name} is not a strictly positive probability vector"
        )));
    }
    Ok(())
}

/// Frontier over the mixture weights `i/(G+1)` for `i = 0..=G+1`.
///
/// The end weights 0 and 1 are the limits of the open grid; they are finite
/// because smoothed histograms are strictly positive, and they put the curve's
/// extremes at `x = 1` and `y = 1`.
pub fn divergence_frontier(pair: &QuantizedPair, cfg: &MauveConfig) -> Result<DivergenceCurve> {
    cfg.validate()?;
    if pair.hist_p.len() != pair.hist_q.len() {
        return Err(Error::DimensionMismatch {
            expected: pair.hist_p.len(),
            actual: pair.hist_q.len(),
        });
    }
    validate_hist(&pair.hist_p, "hist_p")?;
    validate_hist(&pair.hist_q, "hist_q")?;

    let steps = cfg.grid_size + 1;
    let mut points = Vec::with_capacity(steps + 1);
    let mut mixture = vec![0.0; pair.hist_p.len()];
    for i in 0..=steps {
        // both weights from integers so (p, q) and (q, p) see mirrored grids
        let w_p = i as f64 / steps as f64;
        let w_q = (steps - i) as f64 / steps as f64;
        for ((r, p), q) in mixture.iter_mut().zip(&pair.hist_p).zip(&pair.hist_q) {
            *r = w_p * p + w_q * q;
        }
        let x = (-cfg.c * kl_divergence(&pair.hist_q, &mixture)?).exp();
        let y = (-cfg.c * kl_divergence(&pair.hist_p, &mixture)?).exp();
        points.push(FrontierPoint { lambda: w_p, x, y });
    }
    points.sort_by(|a, b| a.x.total_cmp(&b.x).then(b.y.total_cmp(&a.y)));
    Ok(DivergenceCurve {
        points,
        c: cfg.c,
        grid_size: cfg.grid_size,
    })
}

/// Trapezoidal area under the curve, closed to the y-axis at the height of
/// the leftmost point and to the x-axis at the rightmost.
pub fn area_under_curve(curve: &DivergenceCurve) -> f64 {
    let Some(first) = curve.points.first() else {
        return 0.0;
    };
    let mut area = first.x * first.y;
    for pair in curve.points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        area += (b.x - a.x) * (a.y + b.y) / 2.0;
    }
    area
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramDiagnostics {
    pub entropy_p: f64,
    pub entropy_q: f64,
    pub kl_p_q: f64,
    pub kl_q_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MauveResult {
    pub score: f64,
    pub k: usize,
    pub config: MauveConfig,
    pub diagnostics: HistogramDiagnostics,
    pub frontier: DivergenceCurve,
    pub hist_p: Vec<f64>,
    pub hist_q: Vec<f64>,
    pub warnings: Vec<String>,
}

fn entropy(h: &[f64]) -> f64 {
    -h.iter()
        .filter(|&&v| v > 0.0)
        .map(|v| v * v.ln())
        .sum::<f64>()
}

pub fn mauve(
    features_p: &FeatureSet,
    features_q: &FeatureSet,
    cfg: &MauveConfig,
) -> Result<MauveResult> {
    let pair = quantize(features_p, features_q, cfg)?;
    let frontier = divergence_frontier(&pair, cfg)?;
    let score = area_under_curve(&frontier);
    let diagnostics = HistogramDiagnostics {
        entropy_p: entropy(&pair.hist_p),
        entropy_q: entropy(&pair.hist_q),
        kl_p_q: kl_divergence(&pair.hist_p, &pair.hist_q)?,
        kl_q_p: kl_divergence(&pair.hist_q, &pair.hist_p)?,
    };
    Ok(MauveResult {
        score,
        k: pair.k,
        config: cfg.clone(),
        diagnostics,
        frontier,
        hist_p: pair.hist_p,
        hist_q: pair.hist_q,
        warnings: pair.warnings,
    })
}

pub fn mauve_score(
    features_p: &FeatureSet,
    features_q: &FeatureSet,
    cfg: &MauveConfig,
) -> Result<f64> {
    mauve(features_p, features_q, cfg).map(|r| r.score)
}

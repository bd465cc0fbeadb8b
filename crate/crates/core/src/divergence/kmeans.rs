//! Seeded k-means with k-means++ initialization over row-major points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<f64>,
    pub dim: usize,
    pub k: usize,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KMeans {
    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn nearest(&self, point: &[f64]) -> usize {
        nearest(&self.centroids, self.dim, self.k, point).0
    }
}

fn nearest(centroids: &[f64], dim: usize, k: usize, point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..k {
        let d = sq_dist(point, &centroids[j * dim..(j + 1) * dim]);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Clusters `n = points.len() / dim` rows into `cfg.k` groups (`1 <= k <= n`).
///
/// Lloyd iterations stop once assignments repeat or after `max_iter` rounds.
/// A cluster that empties out is re-seeded with the member of the largest
/// cluster farthest from that cluster's centroid.
pub fn kmeans(points: &[f64], dim: usize, cfg: KMeansConfig) -> KMeans {
    let n = points.len() / dim.max(1);
    assert!(cfg.k >= 1 && cfg.k <= n, "k must be in 1..=n");
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // k-means++ seeding
    let mut centroids = Vec::with_capacity(cfg.k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(row(first));
    let mut min_d: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    for _ in 1..cfg.k {
        let total: f64 = min_d.iter().sum();
        let chosen = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in min_d.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centroids.extend_from_slice(row(chosen));
        let c = row(chosen);
        for (i, d) in min_d.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), c));
        }
    }

    let mut assignments = vec![usize::MAX; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let next: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| nearest(&centroids, dim, cfg.k, row(i)).0)
            .collect();
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        update_centroids(points, dim, cfg.k, &mut assignments, &mut centroids);
    }
    KMeans {
        centroids,
        dim,
        k: cfg.k,
        assignments,
        iterations,
        converged,
    }
}

fn update_centroids(
    points: &[f64],
    dim: usize,
    k: usize,
    assignments: &mut [usize],
    centroids: &mut [f64],
) {
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(row(i)) {
            *s += v;
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            for d in 0..dim {
                centroids[j * dim + d] = sums[j * dim + d] / counts[j] as f64;
            }
        }
    }

    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let largest = (0..k)
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
            .expect("k >= 1");
        let centre = centroids[largest * dim..(largest + 1) * dim].to_vec();
        let mut far = None;
        let mut far_d = 0.0;
        for (i, &a) in assignments.iter().enumerate() {
            if a == largest {
                let d = sq_dist(row(i), &centre);
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
        }
        // identical members cannot be split
        let Some(moved) = far else { continue };
        assignments[moved] = empty;
        counts[largest] -= 1;
        counts[empty] = 1;
        centroids[empty * dim..(empty + 1) * dim].copy_from_slice(row(moved));
        let mut fresh = vec![0.0; dim];
        for (i, &a) in assignments.iter().enumerate() {
            if a == largest {
                for (s, v) in fresh.iter_mut().zip(row(i)) {
                    *s += v;
                }
            }
        }
        for d in 0..dim {
            centroids[largest * dim + d] = fresh[d] / counts[largest] as f64;
        }
    }
}

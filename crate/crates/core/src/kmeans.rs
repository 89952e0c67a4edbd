//! Seeded Lloyd k-means with k-means++ initialization, used as the back end
//! of the spectral stage.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansParams {
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { restarts: 10, max_iters: 300 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares.
    pub wcss: f64,
}

/// Clusters the rows of `points` (`n × m`) into at most `k` groups.
///
/// Runs `restarts` seeded trials and keeps the lowest WCSS; ties keep the
/// earliest trial. `k` is clamped to `1..=n`.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, params: KMeansParams) -> KMeansResult {
    let n = points.nrows();
    if n == 0 {
        return KMeansResult { assignments: Vec::new(), wcss: 0.0 };
    }
    let k = k.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..params.restarts.max(1) {
        let centers = plus_plus_seeds(points, k, &mut rng);
        let run = lloyd(points, centers, params.max_iters);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

fn sq_dist_row(points: &Matrix, row: usize, center: &[f64]) -> f64 {
    center
        .iter()
        .enumerate()
        .map(|(c, v)| {
            let d = points[(row, c)] - v;
            d * d
        })
        .sum()
}

fn plus_plus_seeds(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let (n, dim) = points.shape();
    let row = |i: usize| (0..dim).map(|c| points[(i, c)]).collect::<Vec<f64>>();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers = vec![row(first)];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist_row(points, i, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, d) in dist.iter().enumerate() {
                if *d <= 0.0 {
                    continue;
                }
                if target < *d {
                    pick = Some(i);
                    break;
                }
                target -= d;
            }
            // Rounding can leave `target` just past the last positive weight.
            pick.or_else(|| dist.iter().rposition(|d| *d > 0.0)).unwrap()
        } else {
            // Every remaining point coincides with a center.
            let free: Vec<usize> = (0..n).filter(|i| !chosen[*i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = row(pick);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist_row(points, i, &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(points: &Matrix, mut centers: Vec<Vec<f64>>, max_iters: usize) -> KMeansResult {
    let (n, dim) = points.shape();
    let k = centers.len();
    let mut assignments = vec![usize::MAX; n];
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        for (i, slot) in assignments.iter_mut().enumerate() {
            let best = nearest(points, i, &centers).0;
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for c in 0..dim {
                sums[a][c] += points[(i, c)];
            }
        }
        for (cl, center) in centers.iter_mut().enumerate() {
            // Empty cells keep their previous center.
            if counts[cl] > 0 {
                for c in 0..dim {
                    center[c] = sums[cl][c] / counts[cl] as f64;
                }
            }
        }
    }
    let wcss = (0..n).map(|i| sq_dist_row(points, i, &centers[assignments[i]])).sum();
    KMeansResult { assignments, wcss }
}

fn nearest(points: &Matrix, row: usize, centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (idx, c) in centers.iter().enumerate() {
        let d = sq_dist_row(points, row, c);
        if d < best.1 {
            best = (idx, d);
        }
    }
    best
}

/// Within-cluster sum of squares of an arbitrary labelling of the rows.
pub fn wcss(points: &Matrix, assignments: &[usize]) -> f64 {
    let dim = points.ncols();
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for c in 0..dim {
            sums[a][c] += points[(i, c)];
        }
    }
    let centers: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &cnt)| s.into_iter().map(|v| v / cnt.max(1) as f64).collect())
        .collect();
    assignments.iter().enumerate().map(|(i, &a)| sq_dist_row(points, i, &centers[a])).sum()
}

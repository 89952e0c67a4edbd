//! Microcluster merging and macrocluster fine-tuning.
//!
//! Both stages reuse the window's global code `Z`: the residual of object
//! `x_l` against cluster `j` keeps only the coefficients of column `l` that
//! sit on `j`'s members, `e_l = x_l − X_j z_{l|j}`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{CoreError, Result};
use crate::model::{ClusterLevel, ClusterSet};
use crate::Matrix;

/// Default gap the merge test demands, in mean relative residual. Distinct
/// classes sit near 1.0 against each other and differ only by noise, so a
/// bare `≤` would merge them on chance.
pub const MERGE_TOLERANCE: f64 = 0.02;

/// `x_l − Σ_{m ∈ members, m ≠ l} x_m · Z[m, l]`.
pub fn residual_against(l: usize, members: &[usize], z: &Matrix, x: &Matrix) -> DVector<f64> {
    let mut r = x.column(l).into_owned();
    for &m in members {
        if m != l {
            r.axpy(-z[(m, l)], &x.column(m), 1.0);
        }
    }
    r
}

/// Residual of object `l` reconstructed from cluster `j`'s members only.
pub fn restricted_residual(
    l: usize,
    j: usize,
    z: &Matrix,
    x: &Matrix,
    clusters: &ClusterSet,
) -> Result<DVector<f64>> {
    let members = clusters.clusters().get(j).ok_or(CoreError::EmptyCluster(j))?;
    if members.is_empty() {
        return Err(CoreError::EmptyCluster(j));
    }
    Ok(residual_against(l, members, z, x))
}

/// Sum over the members of cluster `i` of their residual norms against `j`.
/// Not symmetric in general.
pub fn ssd(i: usize, j: usize, z: &Matrix, x: &Matrix, clusters: &ClusterSet) -> Result<f64> {
    if i == j {
        return Err(CoreError::SameCluster(i));
    }
    if clusters.clusters().get(i).is_none_or(|m| m.is_empty()) {
        return Err(CoreError::EmptyCluster(i));
    }
    clusters
        .members(i)
        .iter()
        .map(|&l| restricted_residual(l, j, z, x, clusters).map(|e| e.norm()))
        .sum()
}

/// Merge marks of one evaluation pass; `S[i][j]` set means the pair passed
/// the merge test.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeMatrix {
    size: usize,
    marks: Vec<bool>,
    /// Pair score: the larger of the two cross residual means.
    scores: Vec<f64>,
}

impl MergeMatrix {
    fn new(size: usize) -> Self {
        Self { size, marks: vec![false; size * size], scores: vec![f64::INFINITY; size * size] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.marks[i * self.size + j]
    }

    fn set(&mut self, i: usize, j: usize, score: f64) {
        self.marks[i * self.size + j] = true;
        self.scores[i * self.size + j] = score;
    }

    pub fn count(&self) -> usize {
        self.marks.iter().filter(|m| **m).count()
    }

    /// Marked pairs `(i, j)` with `i < j`, lowest score first.
    pub fn candidate_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = (0..self.size)
            .flat_map(|i| (i + 1..self.size).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j))
            .collect();
        pairs.sort_by(|a, b| {
            let sa = self.scores[a.0 * self.size + a.1];
            let sb = self.scores[b.0 * self.size + b.1];
            sa.total_cmp(&sb).then(a.cmp(b))
        });
        pairs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeOptions {
    /// Outcome of the test when only two clusters exist, so no third cluster
    /// can serve as a reference.
    pub merge_lone_pair: bool,
    pub tolerance: f64,
}

impl MergeOptions {
    /// Defaults for a given input: a lone pair merges only when the input
    /// itself had exactly two microclusters.
    pub fn for_input(clusters: &ClusterSet) -> Self {
        Self { merge_lone_pair: clusters.len() == 2, tolerance: MERGE_TOLERANCE }
    }
}

/// `R[l, p] = ‖e_l(p)‖ / ‖x_l‖`, the relative residual of every object
/// against every cluster. Zero objects count as perfectly represented.
pub fn relative_residuals(z: &Matrix, x: &Matrix, clusters: &ClusterSet) -> Matrix {
    let n = x.ncols();
    let mut r = Matrix::zeros(n, clusters.len());
    for l in 0..n {
        let norm = x.column(l).norm();
        if norm == 0.0 {
            continue;
        }
        for (p, members) in clusters.clusters().iter().enumerate() {
            r[(l, p)] = residual_against(l, members, z, x).norm() / norm;
        }
    }
    r
}

fn mean_over(r: &Matrix, sets: &[&[usize]], p: usize) -> f64 {
    let (sum, count) = sets
        .iter()
        .flat_map(|s| s.iter())
        .fold((0.0, 0usize), |(s, c), &l| (s + r[(l, p)], c + 1));
    sum / count as f64
}

/// One evaluation pass of the merge test over every pair of clusters.
///
/// With `S̄(A, p)` the mean relative residual of the members of `A` against
/// cluster `p`, the pair `(i, j)` is marked when, for every other cluster
/// `p`, both `S̄(i, j)` and `S̄(j, i)` are at most `S̄(i ∪ j, p)` minus the
/// tie tolerance.
pub fn merge_marks(z: &Matrix, x: &Matrix, clusters: &ClusterSet, opts: MergeOptions) -> MergeMatrix {
    let r = relative_residuals(z, x, clusters);
    merge_marks_from(&r, clusters, opts)
}

fn merge_marks_from(r: &Matrix, clusters: &ClusterSet, opts: MergeOptions) -> MergeMatrix {
    let s = clusters.len();
    let mut marks = MergeMatrix::new(s);
    for i in 0..s {
        for j in i + 1..s {
            let (mi, mj) = (clusters.members(i), clusters.members(j));
            let a = mean_over(r, &[mi], j);
            let b = mean_over(r, &[mj], i);
            let ok = if s == 2 {
                opts.merge_lone_pair
            } else {
                (0..s).filter(|&p| p != i && p != j).all(|p| {
                    let union = mean_over(r, &[mi, mj], p);
                    a + opts.tolerance <= union && b + opts.tolerance <= union
                })
            };
            if ok {
                let score = a.max(b);
                marks.set(i, j, score);
                marks.set(j, i, score);
            }
        }
    }
    marks
}

/// Repeats evaluation passes until no pair is marked. Within a pass marked
/// pairs merge lowest score first and each cluster merges at most once.
pub fn merge_microclusters(clusters: &ClusterSet, z: &Matrix, x: &Matrix) -> Result<ClusterSet> {
    merge_microclusters_with(clusters, z, x, MergeOptions::for_input(clusters))
}

pub fn merge_microclusters_with(
    clusters: &ClusterSet,
    z: &Matrix,
    x: &Matrix,
    opts: MergeOptions,
) -> Result<ClusterSet> {
    check_shapes(clusters, z, x)?;
    let n = clusters.n_objects();
    let mut current = clusters.clone().with_level(ClusterLevel::Macro);
    loop {
        if current.len() < 2 {
            break;
        }
        let marks = merge_marks(z, x, &current, opts);
        let pairs = marks.candidate_pairs();
        if pairs.is_empty() {
            break;
        }
        let mut merged_into: Vec<Option<usize>> = vec![None; current.len()];
        for (i, j) in pairs {
            if merged_into[i].is_none() && merged_into[j].is_none() {
                merged_into[i] = Some(i);
                merged_into[j] = Some(i);
            }
        }
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); current.len()];
        for (c, members) in current.clusters().iter().enumerate() {
            let target = merged_into[c].unwrap_or(c);
            groups[target].extend_from_slice(members);
        }
        current = ClusterSet::from_members(groups, n, ClusterLevel::Macro)?;
    }
    Ok(current)
}

fn check_shapes(clusters: &ClusterSet, z: &Matrix, x: &Matrix) -> Result<()> {
    let n = clusters.n_objects();
    if x.ncols() != n || z.shape() != (n, n) {
        return Err(CoreError::InvalidInput(alloc::format!(
            "partition of {n} objects does not match X {:?} and Z {:?}",
            x.shape(),
            z.shape()
        )));
    }
    Ok(())
}

/// Result of one fine-tuning pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneOutcome {
    pub clusters: ClusterSet,
    /// `(object, from, to)` for every move, in the order applied.
    pub moves: Vec<(usize, usize, usize)>,
}

/// `errors[(l, j)] = ‖x_l − X_j z_{l|j}‖²` against the given partition.
pub fn reconstruction_errors(z: &Matrix, x: &Matrix, clusters: &ClusterSet) -> Matrix {
    let n = x.ncols();
    let mut err = Matrix::zeros(n, clusters.len());
    for l in 0..n {
        for (j, members) in clusters.clusters().iter().enumerate() {
            err[(l, j)] = residual_against(l, members, z, x).norm_squared();
        }
    }
    err
}

/// Single reassignment pass: every object moves to the cluster with the
/// smallest reconstruction error, measured against the partition as it was
/// at the start of the pass. Ties stay put, and a move that would empty its
/// source cluster is skipped. With `enabled == false` the partition is
/// returned unchanged.
pub fn fine_tune(clusters: &ClusterSet, z: &Matrix, x: &Matrix, enabled: bool) -> Result<FineTuneOutcome> {
    check_shapes(clusters, z, x)?;
    if !enabled {
        return Ok(FineTuneOutcome {
            clusters: clusters.clone().with_level(ClusterLevel::Final),
            moves: Vec::new(),
        });
    }
    let err = reconstruction_errors(z, x, clusters);
    let s = clusters.len();
    let mut assign = clusters.assignments().to_vec();
    let mut live: Vec<usize> = clusters.clusters().iter().map(Vec::len).collect();
    let mut moves = Vec::new();
    for (i, members) in clusters.clusters().iter().enumerate() {
        for &l in members {
            let mut best = i;
            for j in 0..s {
                if err[(l, j)] < err[(l, best)] {
                    best = j;
                }
            }
            if best != i && live[i] > 1 {
                live[i] -= 1;
                live[best] += 1;
                assign[l] = best;
                moves.push((l, i, best));
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); s];
    for (l, &c) in assign.iter().enumerate() {
        groups[c].push(l);
    }
    let clusters = ClusterSet::from_members(groups, assign.len(), ClusterLevel::Final)?;
    Ok(FineTuneOutcome { clusters, moves })
}

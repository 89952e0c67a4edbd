//! Affinity construction and normalized-cut microclustering.

use alloc::vec::Vec;

use nalgebra::SymmetricEigen;

use crate::error::{CoreError, Result};
use crate::kmeans::{kmeans, KMeansParams};
use crate::math;
use crate::model::{ClusterLevel, ClusterSet};
use crate::Matrix;

/// Symmetric, non-negative similarity graph `W = |Z| + |Zᵀ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinity {
    w: Matrix,
}

impl Affinity {
    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.w.nrows() == 0
    }

    pub fn is_zero(&self) -> bool {
        self.w.iter().all(|v| *v == 0.0)
    }
}

pub fn build_affinity(z: &Matrix) -> Result<Affinity> {
    if !z.is_square() {
        return Err(CoreError::InvalidInput(alloc::format!(
            "code matrix must be square, got {:?}",
            z.shape()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::InvalidInput("code matrix contains NaN or Inf".into()));
    }
    let n = z.nrows();
    // Both triangles are filled from the same sum, so W = Wᵀ bit for bit.
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = math::abs(z[(i, j)]) + math::abs(z[(j, i)]);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(Affinity { w })
}

/// `L = I − D^{-1/2} W D^{-1/2}`; isolated vertices get a zero scaling.
pub fn normalized_laplacian(w: &Affinity) -> Matrix {
    let n = w.len();
    let scale: Vec<f64> = w
        .w
        .row_iter()
        .map(|r| {
            let deg: f64 = r.iter().sum();
            if deg > 0.0 {
                1.0 / math::sqrt(deg)
            } else {
                0.0
            }
        })
        .collect();
    Matrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - scale[i] * w.w[(i, j)] * scale[j]
    })
}

/// Eigenpairs of a symmetric matrix sorted by ascending eigenvalue.
pub fn sorted_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]).then(a.cmp(b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Row-normalized spectral embedding from the `m` smallest eigenvectors.
pub fn spectral_embedding(w: &Affinity, m: usize) -> Matrix {
    let lap = normalized_laplacian(w);
    let (_, vecs) = sorted_eigen(&lap);
    let mut emb = vecs.columns(0, m).into_owned();
    for mut row in emb.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    emb
}

/// Normalized-cut partition of the affinity graph into at most `m` clusters.
///
/// Empty k-means cells are dropped, so fewer than `m` clusters may come back.
pub fn ncuts(w: &Affinity, m: usize, seed: u64) -> Result<ClusterSet> {
    let n = w.len();
    if m == 0 || m > n {
        return Err(CoreError::InvalidInput(alloc::format!(
            "cannot form {m} microclusters from {n} objects"
        )));
    }
    if m == 1 {
        return ClusterSet::single(n, ClusterLevel::Micro);
    }
    if w.is_zero() {
        return Err(CoreError::DegenerateAffinity);
    }
    let emb = spectral_embedding(w, m);
    let km = kmeans(&emb, m, seed, KMeansParams::default());
    ClusterSet::from_assignments(&km.assignments, ClusterLevel::Micro)
}

/// Fallback partition for a degenerate affinity: object `i` goes to `i mod m`.
pub fn round_robin(n: usize, m: usize) -> Result<ClusterSet> {
    let m = m.max(1);
    let labels: Vec<usize> = (0..n).map(|i| i % m).collect();
    ClusterSet::from_assignments(&labels, ClusterLevel::Micro)
}

/// Normalized cut value `Σ_c cut(c, V∖c) / vol(c)` of a labelling.
pub fn ncut_value(w: &Affinity, assignments: &[usize]) -> f64 {
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut cut = alloc::vec![0.0; k];
    let mut vol = alloc::vec![0.0; k];
    for i in 0..w.len() {
        for j in 0..w.len() {
            let v = w.w[(i, j)];
            vol[assignments[i]] += v;
            if assignments[i] != assignments[j] {
                cut[assignments[i]] += v;
            }
        }
    }
    cut.iter().zip(&vol).filter(|(_, v)| **v > 0.0).map(|(c, v)| c / v).sum()
}

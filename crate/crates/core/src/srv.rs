//! Sparsity residual values, outlier flags and representative selection.
//!
//! For a residual `e` with `k` entries above [`NUMERIC_ZERO`],
//! `SRV(e) = Σ|e_j| / (k·‖e‖₂)`, which lies in `[1/k, 1/√k]` and does not
//! depend on the scale of `e`. Low values mark objects that the code
//! represents well; high values mark outlier candidates.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::math;
use crate::model::{ClusterSet, ObjectDiagnostics};
use crate::Matrix;

/// Entries at or below this magnitude do not count toward the support.
pub const NUMERIC_ZERO: f64 = 1e-12;

pub fn srv(e: &[f64]) -> Result<f64> {
    let support = e.iter().filter(|v| math::abs(**v) > NUMERIC_ZERO).count();
    if support == 0 {
        return Err(CoreError::ZeroResidual);
    }
    // Rescale by the largest magnitude first so tiny or huge residuals do not
    // under- or overflow in the squared sum.
    let peak = e.iter().fold(0.0_f64, |acc, v| acc.max(math::abs(*v)));
    let (l1, l2sq) = e.iter().filter(|v| math::abs(**v) > NUMERIC_ZERO).fold((0.0, 0.0), |(a, b), v| {
        let s = math::abs(*v) / peak;
        (a + s, b + s * s)
    });
    Ok(l1 / (support as f64 * math::sqrt(l2sq)))
}

/// Diagnostics for every column of the noise matrix. Exactly represented
/// objects get SRV 0 and are never outliers.
pub fn diagnostics(e: &Matrix, sigma: f64) -> Vec<ObjectDiagnostics> {
    e.column_iter()
        .map(|col| {
            let values: Vec<f64> = col.iter().copied().collect();
            let srv = srv(&values).unwrap_or(0.0);
            ObjectDiagnostics { srv, is_outlier: srv >= sigma, residual_norm: col.norm() }
        })
        .collect()
}

/// Outlier rule: flagged when `srv ≥ sigma`.
pub fn detect_outliers(srvs: &[f64], sigma: f64) -> Vec<bool> {
    srvs.iter().map(|s| *s >= sigma).collect()
}

/// Picks up to `budget` non-outlier objects, lowest SRV first within each
/// cluster. Quotas are proportional to cluster size (largest remainder);
/// capacity a cluster cannot use is handed to the others in later rounds.
/// Returns sorted object indices.
pub fn select_representatives(
    clusters: &ClusterSet,
    diagnostics: &[ObjectDiagnostics],
    budget: usize,
) -> Vec<usize> {
    // Eligible members of each cluster, best SRV first.
    let ranked: Vec<Vec<usize>> = clusters
        .clusters()
        .iter()
        .map(|members| {
            let mut m: Vec<usize> =
                members.iter().copied().filter(|&i| !diagnostics[i].is_outlier).collect();
            m.sort_by(|a, b| diagnostics[*a].srv.total_cmp(&diagnostics[*b].srv).then(a.cmp(b)));
            m
        })
        .collect();
    let eligible: usize = ranked.iter().map(Vec::len).sum();
    let sizes: Vec<usize> = clusters.clusters().iter().map(Vec::len).collect();

    let mut taken = vec![0usize; ranked.len()];
    let mut remaining = budget.min(eligible);
    while remaining > 0 {
        let open: Vec<usize> = (0..ranked.len()).filter(|&c| taken[c] < ranked[c].len()).collect();
        let quotas = apportion(remaining, &open.iter().map(|&c| sizes[c]).collect::<Vec<_>>());
        let mut granted = 0;
        for (slot, &c) in open.iter().enumerate() {
            let add = quotas[slot].min(ranked[c].len() - taken[c]);
            taken[c] += add;
            granted += add;
        }
        if granted == 0 {
            // Quotas all landed on full clusters; hand out one seat in order.
            let c = open[0];
            taken[c] += 1;
            granted = 1;
        }
        remaining -= granted;
    }

    let mut out: Vec<usize> =
        ranked.iter().zip(&taken).flat_map(|(r, &t)| r[..t].iter().copied()).collect();
    out.sort_unstable();
    out
}

/// Largest-remainder apportionment of `seats` by `weights`; ties in the
/// fractional part go to the lower index.
pub fn apportion(seats: usize, weights: &[usize]) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    if total == 0 || weights.is_empty() {
        return vec![0; weights.len()];
    }
    let mut quotas: Vec<usize> = weights.iter().map(|w| seats * w / total).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // remainder of seats*w/total, compared exactly as integers
    order.sort_by(|a, b| {
        let ra = seats * weights[*a] % total;
        let rb = seats * weights[*b] % total;
        rb.cmp(&ra).then(a.cmp(b))
    });
    for &i in order.iter().take(seats - assigned) {
        quotas[i] += 1;
    }
    quotas
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClusterLevel;

    fn diag(srvs: &[f64], outliers: &[bool]) -> Vec<ObjectDiagnostics> {
        srvs.iter()
            .zip(outliers)
            .map(|(s, o)| ObjectDiagnostics { srv: *s, is_outlier: *o, residual_norm: 1.0 })
            .collect()
    }

    #[test]
    fn srv_examples() {
        assert!((srv(&[1.0, 1.0, 1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((srv(&[5.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((srv(&[3.0, 4.0, 0.0]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(srv(&[0.0, 1e-13]), Err(CoreError::ZeroResidual));
    }

    #[test]
    fn zero_residual_maps_to_inlier() {
        let e = Matrix::from_column_slice(2, 2, &[0.0, 0.0, 3.0, 4.0]);
        let d = diagnostics(&e, 0.5);
        assert_eq!(d[0].srv, 0.0);
        assert!(!d[0].is_outlier);
        assert!((d[1].srv - 0.7).abs() < 1e-15);
        assert!(d[1].is_outlier);
        assert_eq!(d[1].residual_norm, 5.0);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(detect_outliers(&[0.3, 0.9], 0.5), vec![false, true]);
        assert_eq!(detect_outliers(&[0.3, 0.9, 0.99], 0.999_999), vec![false, false, false]);
        assert_eq!(detect_outliers(&[0.5], 0.5), vec![true]);
    }

    #[test]
    fn representative_examples() {
        let cs = ClusterSet::single(3, ClusterLevel::Final).unwrap();
        let d = diag(&[0.2, 0.5, 0.9], &[false; 3]);
        assert_eq!(select_representatives(&cs, &d, 1), vec![0]);
        assert_eq!(select_representatives(&cs, &d, 10), vec![0, 1, 2]);

        let cs = ClusterSet::from_assignments(&[0, 0, 0, 0, 0, 0, 1, 1, 1], ClusterLevel::Final)
            .unwrap();
        let d = diag(&[0.1; 9], &[false; 9]);
        let picked = select_representatives(&cs, &d, 3);
        assert_eq!(picked.iter().filter(|&&i| i < 6).count(), 2);
        assert_eq!(picked.iter().filter(|&&i| i >= 6).count(), 1);
    }

    #[test]
    fn outliers_are_never_representatives() {
        let cs = ClusterSet::from_assignments(&[0, 0, 1, 1], ClusterLevel::Final).unwrap();
        let d = diag(&[0.0, 0.1, 0.9, 0.2], &[false, false, true, false]);
        let picked = select_representatives(&cs, &d, 4);
        assert_eq!(picked, vec![0, 1, 3]);
    }

    #[test]
    fn spare_capacity_moves_to_other_clusters() {
        // Cluster 1 is mostly outliers; its unused quota goes to cluster 0.
        let cs = ClusterSet::from_assignments(&[0, 0, 0, 0, 1, 1, 1, 1], ClusterLevel::Final)
            .unwrap();
        let d = diag(&[0.1; 8], &[false, false, false, false, true, true, true, false]);
        let picked = select_representatives(&cs, &d, 6);
        assert_eq!(picked, vec![0, 1, 2, 3, 7]);
    }

    #[test]
    fn apportion_largest_remainder() {
        assert_eq!(apportion(3, &[6, 3]), vec![2, 1]);
        assert_eq!(apportion(2, &[1, 1, 1]), vec![1, 1, 0]);
        assert_eq!(apportion(10, &[5, 3, 2]), vec![5, 3, 2]);
        assert_eq!(apportion(4, &[7, 2, 1]), vec![3, 1, 0]);
    }
}

//! Clustering metrics, data corruption, and the nearest-neighbour outlier
//! baseline used to evaluate the stream engine.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{run_stream, NoClock};
use crate::error::{CoreError, Result};
use crate::math;
use crate::model::{DataWindow, StreamConfig};
use crate::Matrix;

/// Contingency counts between predicted clusters and true classes.
struct Contingency {
    cells: BTreeMap<(usize, usize), usize>,
    cluster_sizes: Vec<usize>,
    class_sizes: Vec<usize>,
}

fn contingency<T: Ord>(pred: &[usize], truth: &[T]) -> Result<Contingency> {
    if pred.len() != truth.len() {
        return Err(CoreError::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    let mut class_ids: BTreeMap<&T, usize> = BTreeMap::new();
    let mut cluster_ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cells = BTreeMap::new();
    let mut cluster_sizes = Vec::new();
    let mut class_sizes = Vec::new();
    for (p, t) in pred.iter().zip(truth) {
        let next = cluster_ids.len();
        let ci = *cluster_ids.entry(*p).or_insert(next);
        if ci == cluster_sizes.len() {
            cluster_sizes.push(0);
        }
        let next = class_ids.len();
        let ti = *class_ids.entry(t).or_insert(next);
        if ti == class_sizes.len() {
            class_sizes.push(0);
        }
        cluster_sizes[ci] += 1;
        class_sizes[ti] += 1;
        *cells.entry((ci, ti)).or_insert(0) += 1;
    }
    Ok(Contingency { cells, cluster_sizes, class_sizes })
}

/// Fraction of objects that belong to the majority class of their cluster.
pub fn purity<T: Ord>(pred: &[usize], truth: &[T]) -> Result<f64> {
    if pred.is_empty() {
        return Err(CoreError::InsufficientData("purity of an empty clustering".into()));
    }
    let table = contingency(pred, truth)?;
    let mut best = vec![0usize; table.cluster_sizes.len()];
    for (&(c, _), &count) in &table.cells {
        best[c] = best[c].max(count);
    }
    Ok(best.iter().sum::<usize>() as f64 / pred.len() as f64)
}

fn pairs(n: usize) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Pair-counting F1: precision and recall over object pairs placed together.
pub fn f_measure<T: Ord>(pred: &[usize], truth: &[T]) -> Result<f64> {
    if pred.len() < 2 {
        return Err(CoreError::InsufficientData("pairwise F-measure needs two objects".into()));
    }
    let table = contingency(pred, truth)?;
    let tp: f64 = table.cells.values().map(|&c| pairs(c)).sum();
    if tp == 0.0 {
        return Ok(0.0);
    }
    let pred_pairs: f64 = table.cluster_sizes.iter().map(|&c| pairs(c)).sum();
    let true_pairs: f64 = table.class_sizes.iter().map(|&c| pairs(c)).sum();
    // 2PR/(P+R) with the pair counts folded in, so one rounding step.
    Ok(2.0 * tp / (pred_pairs + true_pairs))
}

/// Class-matched F-measure: each class takes its best-matching cluster's F1,
/// weighted by class size.
pub fn f_measure_matched<T: Ord>(pred: &[usize], truth: &[T]) -> Result<f64> {
    if pred.is_empty() {
        return Err(CoreError::InsufficientData("F-measure of an empty clustering".into()));
    }
    let table = contingency(pred, truth)?;
    let mut best = vec![0.0_f64; table.class_sizes.len()];
    for (&(c, t), &count) in &table.cells {
        let p = count as f64 / table.cluster_sizes[c] as f64;
        let r = count as f64 / table.class_sizes[t] as f64;
        best[t] = best[t].max(2.0 * p * r / (p + r));
    }
    let n = pred.len() as f64;
    Ok(best.iter().zip(&table.class_sizes).map(|(f, &s)| f * s as f64 / n).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FMeasureKind {
    #[default]
    Pairwise,
    ClassMatched,
}

pub fn f_measure_of<T: Ord>(kind: FMeasureKind, pred: &[usize], truth: &[T]) -> Result<f64> {
    match kind {
        FMeasureKind::Pairwise => f_measure(pred, truth),
        FMeasureKind::ClassMatched => f_measure_matched(pred, truth),
    }
}

/// Per-feature (row) min-max scaling into `[0, 1]`; constant rows become 0.
pub fn min_max_normalize(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        let lo = row.min();
        let hi = row.max();
        let span = hi - lo;
        for v in row.iter_mut() {
            *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
        }
    }
    out
}

/// Replaces `floor(ratio·d·n)` distinct cells with `Uniform[0, 1)` draws.
///
/// Returns the corrupted matrix and the (row, column) positions touched.
pub fn inject_noise(x: &Matrix, ratio: f64, seed: u64) -> Result<(Matrix, Vec<(usize, usize)>)> {
    if !(ratio >= 0.0 && ratio < 1.0) {
        return Err(CoreError::InvalidInput(format!("noise ratio {ratio} outside [0, 1)")));
    }
    let (d, n) = x.shape();
    for c in 0..n {
        for r in 0..d {
            let v = x[(r, c)];
            if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                return Err(CoreError::NotNormalized { row: r, col: c, value: v });
            }
        }
    }
    let cells = d * n;
    let count = math::floor(ratio * cells as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, cells, count).into_vec();
    picked.sort_unstable();
    let mut out = x.clone();
    let mut touched = Vec::with_capacity(count);
    for flat in picked {
        // column-major flat index
        let (r, c) = (flat % d, flat / d);
        out[(r, c)] = rng.random::<f64>();
        touched.push((r, c));
    }
    Ok((out, touched))
}

/// Distance from each test column to its nearest training column.
pub fn nearest_distances(train: &Matrix, test: &Matrix) -> Result<Vec<f64>> {
    if train.ncols() == 0 {
        return Err(CoreError::EmptyTrain);
    }
    if train.nrows() != test.nrows() {
        return Err(CoreError::LengthMismatch { left: train.nrows(), right: test.nrows() });
    }
    Ok(test
        .column_iter()
        .map(|t| {
            train
                .column_iter()
                .map(|c| (c - t).norm_squared())
                .fold(f64::INFINITY, f64::min)
        })
        .map(math::sqrt)
        .collect())
}

/// Leave-one-out nearest-neighbour distances within one matrix.
pub fn loo_nearest_distances(x: &Matrix) -> Result<Vec<f64>> {
    let n = x.ncols();
    if n < 2 {
        return Err(CoreError::EmptyTrain);
    }
    Ok((0..n)
        .map(|i| {
            let xi = x.column(i);
            let best = (0..n)
                .filter(|&j| j != i)
                .map(|j| (x.column(j) - xi).norm_squared())
                .fold(f64::INFINITY, f64::min);
            math::sqrt(best)
        })
        .collect())
}

/// 1-NN outlier rule: flagged when the nearest training column is at least
/// `theta` away.
pub fn one_nn_outlier(train: &Matrix, test: &Matrix, theta: f64) -> Result<Vec<bool>> {
    Ok(nearest_distances(train, test)?.into_iter().map(|d| d >= theta).collect())
}

/// Fraction of objects whose flag disagrees with the truth (false alarms plus
/// misses).
pub fn outlier_error_rate(flags: &[bool], truth: &[bool]) -> Result<f64> {
    if flags.len() != truth.len() {
        return Err(CoreError::LengthMismatch { left: flags.len(), right: truth.len() });
    }
    if flags.is_empty() {
        return Ok(0.0);
    }
    let wrong = flags.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / flags.len() as f64)
}

/// Threshold minimizing the error of `distance ≥ θ` against `truth`.
/// Candidates are every observed distance plus one value above the maximum
/// (flag nothing); ties keep the smaller threshold.
pub fn tune_threshold(distances: &[f64], truth: &[bool]) -> Result<f64> {
    if distances.len() != truth.len() {
        return Err(CoreError::LengthMismatch { left: distances.len(), right: truth.len() });
    }
    let mut candidates: Vec<f64> = distances.to_vec();
    let above = distances.iter().copied().fold(0.0, f64::max) + 1.0;
    candidates.push(above);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (f64::INFINITY, above);
    for theta in candidates {
        let flags: Vec<bool> = distances.iter().map(|d| *d >= theta).collect();
        let err = outlier_error_rate(&flags, truth)?;
        if err < best.0 {
            best = (err, theta);
        }
    }
    Ok(best.1)
}

/// Average error rates of the two detectors over a half/half protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierExperiment {
    pub srv_error: f64,
    pub one_nn_error: f64,
    /// `(srv, one_nn)` error of every trial.
    pub trials: Vec<(f64, f64)>,
}

/// Trial `t` clusters window `2t` and tests window `2t + 1`.
///
/// The SRV detector is the engine's flag on the test window, coded against
/// the bank built from the training window. The 1-NN baseline measures the
/// distance from each test object to the training window, with `θ` tuned by
/// leave-one-out on the training window's own labels. Objects whose label
/// equals `outlier_label` are the planted outliers.
pub fn outlier_experiment(
    windows: &[DataWindow],
    trials: usize,
    cfg: &StreamConfig,
    outlier_label: &str,
) -> Result<OutlierExperiment> {
    if trials == 0 || windows.len() < 2 * trials {
        return Err(CoreError::InsufficientData(format!(
            "{trials} trials need {} windows, got {}",
            2 * trials,
            windows.len()
        )));
    }
    let truth_of = |w: &DataWindow| -> Result<Vec<bool>> {
        let labels = w.labels().ok_or_else(|| {
            CoreError::InsufficientData(format!("window {} has no labels", w.window_index()))
        })?;
        Ok(labels.iter().map(|l| l == outlier_label).collect())
    };
    let mut per_trial = Vec::with_capacity(trials);
    for t in 0..trials {
        let (train, test) = (&windows[2 * t], &windows[2 * t + 1]);
        let train_truth = truth_of(train)?;
        let test_truth = truth_of(test)?;

        let summary = run_stream([train.clone(), test.clone()], cfg, &NoClock)?;
        let srv_flags = summary.outputs[1].outlier_flags();
        if srv_flags.len() != test.len() {
            return Err(CoreError::InsufficientData(format!(
                "test window {} was too short to process",
                test.window_index()
            )));
        }
        let srv_err = outlier_error_rate(&srv_flags, &test_truth)?;

        let theta = tune_threshold(&loo_nearest_distances(train.matrix())?, &train_truth)?;
        let nn_flags = one_nn_outlier(train.matrix(), test.matrix(), theta)?;
        let nn_err = outlier_error_rate(&nn_flags, &test_truth)?;
        per_trial.push((srv_err, nn_err));
    }
    let mean = |f: fn(&(f64, f64)) -> f64| per_trial.iter().map(f).sum::<f64>() / trials as f64;
    Ok(OutlierExperiment { srv_error: mean(|p| p.0), one_nn_error: mean(|p| p.1), trials: per_trial })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn purity_examples() {
        assert_eq!(purity(&[0, 0, 1, 1], &[7, 7, 3, 3]).unwrap(), 1.0);
        // {A,A,B} and {B,B}
        assert_eq!(purity(&[0, 0, 0, 1, 1], &["A", "A", "B", "B", "B"]).unwrap(), 0.8);
        let truth: Vec<u8> = [vec![0; 7], vec![1; 3]].concat();
        assert_eq!(purity(&[0; 10], &truth).unwrap(), 0.7);
        assert!(matches!(purity(&[0, 1], &[0]), Err(CoreError::LengthMismatch { .. })));
    }

    #[test]
    fn f_measure_examples() {
        assert_eq!(f_measure(&[0, 0, 1, 1, 1], &[5, 5, 2, 2, 2]).unwrap(), 1.0);
        assert_eq!(f_measure(&[0, 1, 2, 3], &[0, 0, 1, 1]).unwrap(), 0.0);
        // pred {1,2},{3,4}; truth {1,2,3},{4}
        let f = f_measure(&[0, 0, 1, 1], &["a", "a", "a", "b"]).unwrap();
        assert!((f - 0.4).abs() < 1e-15);
        assert_eq!(f, 0.4);
    }

    #[test]
    fn f_measure_swap_symmetry() {
        let pred = [0, 0, 1, 1, 2, 2, 2];
        let truth = [1, 0, 0, 1, 1, 1, 0];
        let a = f_measure(&pred, &truth).unwrap();
        let b = f_measure(&truth, &pred).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn matched_f_measure_perfect_and_mixed() {
        assert_eq!(f_measure_matched(&[1, 1, 0], &["x", "x", "y"]).unwrap(), 1.0);
        let f = f_measure_matched(&[0, 0, 0, 0], &["x", "x", "y", "y"]).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_examples() {
        let x = Matrix::from_row_slice(3, 3, &[2.0, 4.0, 6.0, 5.0, 5.0, 5.0, 0.0, 0.3, 1.0]);
        let y = min_max_normalize(&x);
        assert_eq!(y.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        assert_eq!(y.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0; 3]);
        assert_eq!(y.row(2), x.row(2));
    }

    #[test]
    fn noise_examples() {
        let x = Matrix::from_element(3, 3, 0.5);
        let (y, cells) = inject_noise(&x, 0.1, 1).unwrap();
        assert!(cells.is_empty());
        assert_eq!(x, y);
        let x = Matrix::from_element(2, 2, 0.25);
        let (y, cells) = inject_noise(&x, 0.5, 4).unwrap();
        assert_eq!(cells.len(), 2);
        assert_ne!(cells[0], cells[1]);
        let (y2, _) = inject_noise(&x, 0.5, 4).unwrap();
        assert_eq!(y, y2);
        let bad = Matrix::from_element(1, 1, 1.5);
        assert!(matches!(inject_noise(&bad, 0.5, 0), Err(CoreError::NotNormalized { .. })));
    }

    #[test]
    fn one_nn_examples() {
        let train = Matrix::from_column_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let same = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(one_nn_outlier(&train, &same, 0.1).unwrap(), vec![false]);
        assert_eq!(one_nn_outlier(&train, &same, 0.0).unwrap(), vec![true]);
        let far = Matrix::from_column_slice(2, 1, &[3.0, 0.0]);
        assert_eq!(nearest_distances(&train, &far).unwrap(), vec![2.0]);
        assert_eq!(one_nn_outlier(&train, &far, 1.5).unwrap(), vec![true]);
        assert_eq!(one_nn_outlier(&Matrix::zeros(2, 0), &far, 1.0), Err(CoreError::EmptyTrain));
    }

    #[test]
    fn error_rate_and_tuning() {
        assert_eq!(outlier_error_rate(&[false; 4], &[false; 4]).unwrap(), 0.0);
        assert_eq!(outlier_error_rate(&[true, false], &[true, false]).unwrap(), 0.0);
        assert_eq!(outlier_error_rate(&[true, true], &[true, false]).unwrap(), 0.5);
        let theta = tune_threshold(&[0.1, 0.2, 0.9, 0.15], &[false, false, true, false]).unwrap();
        assert_eq!(theta, 0.9);
    }
}

use nalgebra::DMatrix;
use proptest::prelude::*;
use sparsestream_core::eval::{f_measure, inject_noise, purity};
use sparsestream_core::solver::{prox_l21_columns, soft_threshold};
use sparsestream_core::srv::{apportion, srv, NUMERIC_ZERO};
use sparsestream_core::{ClusterLevel, ClusterSet};

fn residual() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), -10.0..10.0f64], 1..40)
        .prop_filter("needs support", |v| v.iter().any(|x| x.abs() > 1e-6))
}

fn l21(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.norm()).sum()
}

proptest! {
    #[test]
    fn srv_is_scale_free_and_bounded(e in residual(), c in prop_oneof![Just(1e-6), Just(1.0), Just(1e6)]) {
        let base = srv(&e).unwrap();
        let scaled: Vec<f64> = e.iter().map(|v| v * c).collect();
        let k = e.iter().filter(|v| v.abs() > NUMERIC_ZERO).count() as f64;
        prop_assert!((srv(&scaled).unwrap() - base).abs() < 1e-12);
        prop_assert!(base >= 1.0 / k - 1e-12 && base <= 1.0 / k.sqrt() + 1e-12);
    }

    #[test]
    fn srv_ignores_order(mut e in residual()) {
        let a = srv(&e).unwrap();
        e.reverse();
        prop_assert!((srv(&e).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn soft_threshold_is_the_l1_prox(vals in prop::collection::vec(-3.0..3.0f64, 9), tau in 0.01..2.0f64,
                                     bump in prop::collection::vec(-1e-3..1e-3f64, 9)) {
        let m = DMatrix::from_vec(3, 3, vals);
        let j = soft_threshold(&m, tau);
        let f = |x: &DMatrix<f64>| tau * x.lp_norm(1) + 0.5 * (x - &m).norm_squared();
        // optimality: j − m + τ·∂|j| ∋ 0 entrywise
        for (jv, mv) in j.iter().zip(m.iter()) {
            if *jv != 0.0 {
                prop_assert!((jv - mv + tau * jv.signum()).abs() < 1e-12);
            } else {
                prop_assert!(mv.abs() <= tau + 1e-12);
            }
        }
        let moved = &j + DMatrix::from_vec(3, 3, bump);
        prop_assert!(f(&moved) >= f(&j) - 1e-12);
    }

    #[test]
    fn l21_prox_is_the_column_norm_prox(vals in prop::collection::vec(-3.0..3.0f64, 9), tau in 0.01..2.0f64,
                                        bump in prop::collection::vec(-1e-3..1e-3f64, 9)) {
        let q = DMatrix::from_vec(3, 3, vals);
        let p = prox_l21_columns(&q, tau);
        let f = |x: &DMatrix<f64>| tau * l21(x) + 0.5 * (x - &q).norm_squared();
        for (pc, qc) in p.column_iter().zip(q.column_iter()) {
            let n = pc.norm();
            if n > 0.0 {
                let g = &pc - &qc + pc * (tau / n);
                prop_assert!(g.norm() < 1e-12);
            } else {
                prop_assert!(qc.norm() <= tau + 1e-12);
            }
        }
        let moved = &p + DMatrix::from_vec(3, 3, bump);
        prop_assert!(f(&moved) >= f(&p) - 1e-12);
    }

    #[test]
    fn metrics_ignore_relabelling(pred in prop::collection::vec(0usize..4, 2..30), shift in 1usize..7) {
        let truth: Vec<usize> = pred.iter().enumerate().map(|(i, p)| (i * 7 + p) % 3).collect();
        let renamed: Vec<usize> = pred.iter().map(|p| (p + shift) * 11).collect();
        let renamed_truth: Vec<String> = truth.iter().map(|t| format!("class-{}", 9 - t)).collect();
        prop_assert_eq!(purity(&pred, &truth).unwrap(), purity(&renamed, &renamed_truth).unwrap());
        prop_assert_eq!(f_measure(&pred, &truth).unwrap(), f_measure(&renamed, &renamed_truth).unwrap());
        let swapped = f_measure(&truth, &pred).unwrap();
        prop_assert!((swapped - f_measure(&pred, &truth).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn purity_beats_largest_class_fraction(truth in prop::collection::vec(0usize..4, 1..40)) {
        let largest = (0..4).map(|c| truth.iter().filter(|t| **t == c).count()).max().unwrap();
        let one = vec![0usize; truth.len()];
        prop_assert!(purity(&one, &truth).unwrap() >= largest as f64 / truth.len() as f64 - 1e-15);
    }

    #[test]
    fn noise_touches_exactly_the_requested_cells(d in 1usize..8, n in 1usize..12, ratio in 0.01..0.99f64, seed: u64) {
        let x = DMatrix::from_fn(d, n, |i, j| ((i * 5 + j * 3) % 7) as f64 / 7.0);
        let (y, cells) = inject_noise(&x, ratio, seed).unwrap();
        let expected = (ratio * (d * n) as f64).floor() as usize;
        prop_assert_eq!(cells.len(), expected);
        let mut unique = cells.clone();
        unique.sort();
        unique.dedup();
        prop_assert_eq!(unique.len(), expected);
        for i in 0..d {
            for j in 0..n {
                if !cells.contains(&(i, j)) {
                    prop_assert_eq!(x[(i, j)], y[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn apportion_hands_out_every_seat(seats in 0usize..50, weights in prop::collection::vec(1usize..30, 1..8)) {
        let q = apportion(seats, &weights);
        prop_assert_eq!(q.iter().sum::<usize>(), seats);
        let total: usize = weights.iter().sum();
        for (qi, w) in q.iter().zip(&weights) {
            let exact = seats as f64 * *w as f64 / total as f64;
            prop_assert!((*qi as f64 - exact).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn cluster_sets_stay_consistent(labels in prop::collection::vec(0usize..6, 1..40)) {
        let cs = ClusterSet::from_assignments(&labels, ClusterLevel::Micro).unwrap();
        prop_assert!(cs.is_consistent());
        prop_assert_eq!(cs.n_objects(), labels.len());
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                prop_assert_eq!(labels[i] == labels[j], cs.assignments()[i] == cs.assignments()[j]);
            }
        }
    }
}

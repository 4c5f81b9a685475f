mod common;

use common::{column, dcor2_oracle, dcov2_oracle, normal_matrix, rng};
use irp_sdr::dcor::ResponseDistances;
use irp_sdr::{dcor2_sample, dcov2_sample};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn four_point_example() {
    let a = column(&[0.0, 1.0, 2.0, 3.0]);
    let b = column(&[0.0, 1.0, 4.0, 9.0]);
    assert!((dcov2_sample(&a, &b).unwrap() - dcov2_oracle(&a, &b)).abs() < 1e-12);
}

#[test]
fn binary_self_covariance() {
    let a = column(&[0.0, 1.0, 1.0, 0.0, 1.0]);
    // mean(A∘A) + mean(A)² − 2·mean(rowmeans²) by direct loops
    let n = 5;
    let d = |i: usize, j: usize| (a[(i, 0)] - a[(j, 0)]).abs();
    let mut aa = 0.0;
    let mut mean = 0.0;
    let mut rows = 0.0;
    for i in 0..n {
        let mut r = 0.0;
        for j in 0..n {
            aa += d(i, j) * d(i, j);
            mean += d(i, j);
            r += d(i, j);
        }
        rows += (r / n as f64).powi(2);
    }
    let nn = (n * n) as f64;
    let expected = aa / nn + (mean / nn).powi(2) - 2.0 * rows / n as f64;
    assert!((dcov2_sample(&a, &a).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn block_against_response() {
    let mut r = rng(11);
    let x = normal_matrix(&mut r, 20, 3);
    let y = DMatrix::from_fn(20, 1, |i, _| x[(i, 0)] - 0.5 * x[(i, 2)].powi(2) + 0.1 * r.gen::<f64>());
    let v = dcor2_sample(&y, &x).unwrap();
    assert!((v.dcor2 - dcor2_oracle(&y, &x)).abs() < 1e-10);
}

#[test]
fn twenty_random_instances() {
    let mut r = rng(2024);
    for _ in 0..20 {
        let n = r.gen_range(2..=50);
        let (m1, m2) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let a = normal_matrix(&mut r, n, m1);
        let b = normal_matrix(&mut r, n, m2).map(|v| v.powi(3));
        assert!((dcov2_sample(&a, &b).unwrap() - dcov2_oracle(&a, &b)).abs() < 1e-10);
        assert!((dcor2_sample(&a, &b).unwrap().dcor2 - dcor2_oracle(&a, &b)).abs() < 1e-10);
    }
}

#[test]
fn cached_block_scores_match_oracle() {
    let mut r = rng(5);
    let x = normal_matrix(&mut r, 30, 6);
    let y: Vec<f64> = (0..30).map(|i| x[(i, 1)].sin() + x[(i, 4)]).collect();
    let resp = ResponseDistances::new(&y);
    let mut scratch = resp.scratch();
    for cols in [vec![0], vec![1, 4], vec![2, 3, 5], vec![0, 1, 2, 3, 4, 5]] {
        let got = resp.score_block(&x, &cols, &mut scratch).dcor2;
        let want = dcor2_oracle(&column(&y), &x.select_columns(&cols));
        assert!((got - want).abs() < 1e-10, "{cols:?}: {got} vs {want}");
    }
}

#[test]
fn constant_side_is_degenerate() {
    let a = column(&[1.0, 2.0, 3.0]);
    let b = column(&[4.0, 4.0, 4.0]);
    let v = dcor2_sample(&a, &b).unwrap();
    assert_eq!(v.dcor2, 0.0);
    assert!(v.degenerate);
}

#[test]
fn independent_samples_shrink_toward_zero() {
    let mut r = rng(77);
    let mut vals: Vec<f64> = (0..50)
        .map(|_| {
            let a = normal_matrix(&mut r, 500, 1);
            let b = normal_matrix(&mut r, 500, 1);
            dcor2_sample(&a, &b).unwrap().dcor2
        })
        .collect();
    vals.sort_by(f64::total_cmp);
    let median = 0.5 * (vals[24] + vals[25]);
    assert!(median < 0.02, "median dcor² {median}");
}

fn sample() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (3usize..15, 1usize..4, 1usize..4).prop_flat_map(|(n, m1, m2)| {
        (
            proptest::collection::vec(-10.0f64..10.0, n * m1),
            proptest::collection::vec(-10.0f64..10.0, n * m2),
        )
            .prop_map(move |(a, b)| (DMatrix::from_vec(n, m1, a), DMatrix::from_vec(n, m2, b)))
    })
}

proptest! {
    #[test]
    fn symmetric_in_arguments((a, b) in sample()) {
        let ab = dcov2_sample(&a, &b).unwrap();
        let ba = dcov2_sample(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-10 * (1.0 + ab.abs()));
    }

    #[test]
    fn correlation_invariant_to_scale_and_shift((a, b) in sample(), s in 0.1f64..20.0, t in -5.0f64..5.0) {
        let v = dcor2_sample(&a, &b).unwrap();
        let moved = a.map(|x| s * x + t);
        let w = dcor2_sample(&moved, &b).unwrap();
        prop_assert_eq!(v.degenerate, w.degenerate);
        prop_assert!((v.dcor2 - w.dcor2).abs() < 1e-9);
    }

    #[test]
    fn correlation_in_unit_interval((a, b) in sample()) {
        let v = dcor2_sample(&a, &b).unwrap();
        prop_assert!(v.dcov2 >= 0.0);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v.dcor2));
    }
}

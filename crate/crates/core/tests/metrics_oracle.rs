mod common;

use common::{normal_matrix, projector, rng, trace_corr_oracle};
use irp_sdr::{projection_distance, trace_correlation};
use nalgebra::DMatrix;

#[test]
fn trace_correlation_matches_oracle() {
    let b1 = DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 0.5, 1.0, 0.0, 2.0, -1.0, 0.0, 0.3, 0.3, 0.0, -0.7]);
    let b2 = DMatrix::from_row_slice(6, 2, &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.2, 0.0]);
    let id = DMatrix::identity(6, 6);
    assert!((trace_correlation(&b1, &b2, &id).unwrap() - trace_corr_oracle(&b1, &b2, &id)).abs() < 1e-12);
}

#[test]
fn trace_correlation_under_correlated_sigma() {
    let mut r = rng(4);
    for _ in 0..10 {
        let a = normal_matrix(&mut r, 9, 9);
        let sigma = &a * a.transpose() + DMatrix::identity(9, 9);
        let b1 = normal_matrix(&mut r, 9, 3);
        let b2 = normal_matrix(&mut r, 9, 2);
        let got = trace_correlation(&b1, &b2, &sigma).unwrap();
        assert!((got - trace_corr_oracle(&b1, &b2, &sigma)).abs() < 1e-10);
        assert!((0.0..=1.0 + 1e-12).contains(&got));
    }
}

#[test]
fn invariant_to_basis_choice() {
    let mut r = rng(9);
    let b = normal_matrix(&mut r, 7, 2);
    let mix = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -1.0, 0.5]);
    let sigma = DMatrix::from_fn(7, 7, |i, j| 0.5f64.powi(i.abs_diff(j) as i32));
    assert!((trace_correlation(&(&b * mix), &b, &sigma).unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn projection_distance_matches_projectors() {
    let mut r = rng(17);
    for _ in 0..10 {
        let b1 = normal_matrix(&mut r, 8, 2);
        let b2 = normal_matrix(&mut r, 8, 2);
        let want = (projector(&b1) - projector(&b2)).norm();
        assert!((projection_distance(&b1, &b2).unwrap() - want).abs() < 1e-10);
    }
}

#[test]
fn mismatched_rows_rejected() {
    let a = DMatrix::<f64>::identity(3, 1);
    let b = DMatrix::<f64>::identity(4, 1);
    assert!(projection_distance(&a, &b).is_err());
}

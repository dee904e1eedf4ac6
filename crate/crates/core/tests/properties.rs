//! Invariants of the pointwise kernels and the discrete Legendre transform.

use approx::assert_relative_eq;
use gaussflow::geometry::square_root_inverse_metric;
use gaussflow::grid::Grid;
use gaussflow::operators::{g_derivatives, g_dual, g_value, legendre_transform};
use gaussflow::oracles::fd_error;
use gaussflow::{PointJet, Signature, Transcription};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn signature() -> impl Strategy<Value = Signature> {
    prop_oneof![Just(Signature::Minkowski), Just(Signature::Euclidean)]
}

/// Gradient inside the ball of radius 0.9 (spacelike in either signature).
fn gradient(n: usize) -> impl Strategy<Value = DVector<f64>> {
    (prop::collection::vec(-1.0f64..1.0, n), 0.0f64..0.9).prop_filter_map("zero direction", |(d, r)| {
        let d = DVector::from_vec(d);
        let norm = d.norm();
        (norm > 1e-3).then(|| d * (r / norm))
    })
}

fn symmetric(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |a| {
        let a = DMatrix::from_vec(n, n, a);
        (&a + a.transpose()) * 0.5
    })
}

fn positive_definite(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |a| {
        let a = DMatrix::from_vec(n, n, a);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.2
    })
}

fn point(n: usize) -> impl Strategy<Value = (DVector<f64>, DMatrix<f64>)> {
    (gradient(n), symmetric(n))
}

proptest! {
    #[test]
    fn derivatives_match_central_differences((p, r) in (1usize..4).prop_flat_map(point), sig in signature()) {
        prop_assert!(fd_error(&p, &r, sig, 1e-6, Transcription::Corrected) < 1e-6);
    }

    #[test]
    fn square_root_squares_to_inverse_metric(p in (1usize..4).prop_flat_map(gradient), sig in signature()) {
        let b = square_root_inverse_metric(&p, sig, Transcription::Corrected);
        prop_assert!((&b * &b - sig.inverse_metric(&p)).amax() < 1e-12);
        prop_assert!((&b - b.transpose()).amax() < 1e-14);
    }

    #[test]
    fn metric_and_inverse_metric_are_inverse(p in (1usize..4).prop_flat_map(gradient), sig in signature()) {
        let n = p.len();
        prop_assert!((sig.metric(&p) * sig.inverse_metric(&p) - DMatrix::identity(n, n)).amax() < 1e-12);
    }

    #[test]
    fn g_r_is_the_inverse_metric((p, r) in (1usize..4).prop_flat_map(point), sig in signature()) {
        let jet = PointJet::derivatives(p.clone(), r).unwrap();
        let d = g_derivatives(&jet, sig).unwrap();
        prop_assert!((d.g_r - sig.inverse_metric(&p)).amax() < 1e-13);
    }

    #[test]
    fn operator_is_linear_in_the_hessian((p, r) in (1usize..4).prop_flat_map(point), sig in signature(), k in -3.0f64..3.0) {
        let base = g_value(&PointJet::derivatives(p.clone(), r.clone()).unwrap(), sig).unwrap();
        let scaled = g_value(&PointJet::derivatives(p, r * k).unwrap(), sig).unwrap();
        prop_assert!((scaled - k * base).abs() < 1e-12 * (1.0 + base.abs()));
    }

    #[test]
    fn dual_operator_cancels_primal(
        (p, r) in (1usize..4).prop_flat_map(|n| (gradient(n), positive_definite(n))),
        sig in signature(),
    ) {
        let g = g_value(&PointJet::derivatives(p.clone(), r.clone()).unwrap(), sig).unwrap();
        let inv = r.try_inverse().unwrap();
        let gd = g_dual(&p, &inv, sig).unwrap();
        prop_assert!((g + gd).abs() < 1e-10 * (1.0 + g.abs()), "G = {g}, G~ = {gd}");
    }

    #[test]
    fn legendre_transform_is_an_involution(a in 0.2f64..3.0, b in -1.0f64..1.0, c in 0.0f64..1.0) {
        let grid = Grid::line(-1.0, 1.0, 200).unwrap();
        let u = grid.sample(|x| a * x[0] * x[0] + b * x[0] + c * x[0].powi(4));
        let dual = legendre_transform(&grid, &u).unwrap();
        let back = dual.inverse_transform().unwrap();
        let h = grid.spacing();
        for i in 0..grid.len() {
            prop_assert!((back[i] - u[i]).abs() < 50.0 * h * h, "node {i}");
        }
        // the dual gradient map sends y back to x
        for (i, g) in dual.dual_gradients().unwrap().iter().enumerate().filter(|(i, _)| grid.is_regular(*i, 2)) {
            prop_assert!((g[0] - grid.coord(i)[0]).abs() < 50.0 * h * h);
        }
    }
}

#[test]
fn printed_signs_break_the_square_root() {
    let p = DVector::from_vec(vec![0.5, 0.3]);
    let b = square_root_inverse_metric(&p, Signature::Minkowski, Transcription::AsPrinted);
    assert!((&b * &b - Signature::Minkowski.inverse_metric(&p)).amax() > 1e-2);
    assert_relative_eq!(
        square_root_inverse_metric(&p, Signature::Euclidean, Transcription::AsPrinted),
        square_root_inverse_metric(&p, Signature::Euclidean, Transcription::Corrected)
    );
}

mod common;

use common::*;
use gradlab_core::problems::{Quadratic, Target};
use gradlab_core::{DenseMatrix, Problem, Rng};

const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-6;

fn check_problem(p: &dyn Problem, seed: u64) {
    let mut rng = Rng::new(seed);
    for _ in 0..5 {
        let theta = random_vector(p.dim(), 0.7, &mut rng);
        let fd = fd_gradient(problem_loss(p), &theta, FD_STEP);
        let err = rel_error(&p.grad(&theta), &fd);
        assert!(err < FD_TOL, "{:?}: {err:e}", p.kind());
    }
}

#[test]
fn quadratic_gradient() {
    let a = DenseMatrix::from_rows(&[vec![3.0, 1.0, 0.0], vec![1.0, 2.0, 0.5], vec![0.0, 0.5, 1.0]]).unwrap();
    let q = Quadratic::new(a, [1.0, -2.0, 0.5].into()).unwrap();
    check_problem(&q, 1);
}

#[test]
fn linear_gaussian_gradient() {
    check_problem(&linear_gaussian(2), 2);
}

#[test]
fn softmax_gradient() {
    check_problem(&softmax(3), 3);
}

#[test]
fn mlp_gradient() {
    check_problem(&tiny_mlp(4), 4);
}

#[test]
fn minibatch_gradients_match_finite_differences() {
    let p = tiny_mlp(5);
    let mut rng = Rng::new(5);
    let theta = p.initial_point(&mut rng);
    let batch = [1, 4, 7];
    let fd = fd_gradient(|x| p.minibatch_loss_grad(x, &batch).0, &theta, FD_STEP);
    assert!(rel_error(&p.minibatch_grad(&theta, &batch), &fd) < FD_TOL);
}

#[test]
fn score_functions_match_finite_differences() {
    let lg = linear_gaussian(6);
    let sm = softmax(6);
    let mut rng = Rng::new(6);
    for i in [0, 5, 11] {
        let w = random_vector(lg.dim(), 1.0, &mut rng);
        let t = Target::Real(rng.normal());
        let fd = fd_gradient(|x| lg.loglik(x, i, t), &w, FD_STEP);
        assert!(rel_error(&lg.loglik_grad(&w, i, t), &fd) < FD_TOL);

        let theta = random_vector(sm.dim(), 1.0, &mut rng);
        for k in 0..sm.classes() {
            let t = Target::Class(k);
            let fd = fd_gradient(|x| sm.loglik(x, i, t), &theta, FD_STEP);
            assert!(rel_error(&sm.loglik_grad(&theta, i, t), &fd) < FD_TOL);
        }
    }
}

#[test]
fn hessians_match_finite_differences_of_gradients() {
    let lg = linear_gaussian(7);
    let sm = softmax(7);
    let mut rng = Rng::new(7);
    for p in [&lg as &dyn Problem, &sm] {
        let theta = random_vector(p.dim(), 0.5, &mut rng);
        let h = p.hessian(&theta).unwrap();
        for j in 0..p.dim() {
            let column = fd_gradient(|x| p.grad(x)[j], &theta, 1e-5);
            for i in 0..p.dim() {
                assert!((h[(i, j)] - column[i]).abs() < 1e-6, "{:?} ({i},{j})", p.kind());
            }
        }
    }
}

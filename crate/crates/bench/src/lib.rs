//! Fixtures shared by the benchmarks.

use gradlab_core::problems::{Dataset, MlpProblem, Precision, SoftmaxRegression, MNIST_LAYERS};
use gradlab_core::{ParamVector, Problem, Rng};

/// A deterministic dense gradient of length `dim`.
pub fn gradient(dim: usize, seed: u64) -> ParamVector {
    let mut rng = Rng::new(seed);
    (0..dim).map(|_| rng.normal()).collect()
}

pub fn softmax_problem(n: usize, p: usize, classes: usize) -> SoftmaxRegression {
    let mut rng = Rng::new(7);
    SoftmaxRegression::synthetic(n, p, classes, &mut rng).expect("valid fixture")
}

/// The MNIST-shaped network on `n` random images, with He-initialized parameters.
pub fn mnist_shaped(n: usize, precision: Precision) -> (MlpProblem, ParamVector) {
    let mut rng = Rng::new(3);
    let features = MNIST_LAYERS[0];
    let pixels = (0..n * features).map(|_| rng.uniform() as f32).collect();
    let labels = (0..n).map(|_| rng.below(10) as u8).collect();
    let data = Dataset::new(pixels, labels, features).expect("consistent sizes");
    let problem = MlpProblem::mnist(data, None, precision).expect("valid network");
    let theta = problem.initial_point(&mut rng);
    (problem, theta)
}

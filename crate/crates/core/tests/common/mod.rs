#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use gradlab_core::problems::{Dataset, LinearGaussian, MlpProblem, Precision, SoftmaxRegression};
use gradlab_core::{ParamVector, Problem, Rng};

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn fd_gradient(f: impl Fn(&ParamVector) -> f64, x: &ParamVector, h: f64) -> ParamVector {
    (0..x.len())
        .map(|i| {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[i] += h;
            minus[i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(1, ‖b‖)`.
pub fn rel_error(a: &ParamVector, b: &ParamVector) -> f64 {
    a.sub(b).unwrap().norm() / b.norm().max(1.0)
}

pub fn random_vector(d: usize, scale: f64, rng: &mut Rng) -> ParamVector {
    (0..d).map(|_| scale * rng.normal()).collect()
}

pub fn linear_gaussian(seed: u64) -> LinearGaussian {
    LinearGaussian::synthetic(30, 4, 2.0, 0.5, &mut Rng::new(seed)).unwrap()
}

pub fn softmax(seed: u64) -> SoftmaxRegression {
    SoftmaxRegression::synthetic(30, 3, 4, &mut Rng::new(seed)).unwrap()
}

/// A 6-5-3 network on random inputs, in double precision.
pub fn tiny_mlp(seed: u64) -> MlpProblem {
    let mut rng = Rng::new(seed);
    let n = 12;
    let pixels = (0..n * 6).map(|_| rng.uniform() as f32).collect();
    let labels = (0..n).map(|_| rng.below(3) as u8).collect();
    let data = Dataset::new(pixels, labels, 6).unwrap();
    MlpProblem::with_layers(&[6, 5, 3], data, None, Precision::F64).unwrap()
}

pub fn write_idx(path: &Path, magic: u32, dims: &[u32], payload: &[u8]) {
    let mut f = std::fs::File::create(path).unwrap();
    f.write_all(&magic.to_be_bytes()).unwrap();
    for d in dims {
        f.write_all(&d.to_be_bytes()).unwrap();
    }
    f.write_all(payload).unwrap();
}

/// Writes a tiny MNIST-shaped dataset (28×28 images) with `n` train and `n` test samples.
pub fn write_fake_mnist(dir: &Path, n: u32, seed: u64) {
    let mut rng = Rng::new(seed);
    for prefix in ["train", "t10k"] {
        let pixels: Vec<u8> = (0..n * 784).map(|_| rng.below(256) as u8).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.below(10) as u8).collect();
        write_idx(
            &dir.join(format!("{prefix}-images-idx3-ubyte")),
            0x803,
            &[n, 28, 28],
            &pixels,
        );
        write_idx(&dir.join(format!("{prefix}-labels-idx1-ubyte")), 0x801, &[n], &labels);
    }
}

pub fn problem_loss(p: &dyn Problem) -> impl Fn(&ParamVector) -> f64 + '_ {
    move |x| p.loss(x)
}

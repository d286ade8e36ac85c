//! Fully connected ReLU network with a softmax output and hand-written
//! backpropagation.
//!
//! The flat parameter layout is `[W₁, b₁, W₂, b₂, …]` with each `Wₗ` stored
//! row-major as `(out × in)`.

use serde::{Deserialize, Serialize};

use super::{Dataset, Eval, Problem, ProblemKind};
use crate::linalg::{DenseMatrix, ParamVector, Rng};
use crate::{Error, Result};

/// 784-300-100-10, the MNIST network.
pub const MNIST_LAYERS: [usize; 4] = [784, 300, 100, 10];

const LOG_PROB_FLOOR: f64 = -27.631_021_115_928_547; // ln 1e-12
const EVAL_CHUNK: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpModel {
    layers: Vec<usize>,
}

/// Structured view of the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpModel {
    pub fn new(layers: &[usize]) -> Result<Self> {
        if layers.len() < 2 || layers.contains(&0) {
            return Err(Error::Construction(format!("invalid layer sizes {layers:?}")));
        }
        Ok(MlpModel {
            layers: layers.to_vec(),
        })
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn unflatten(&self, theta: &ParamVector) -> Result<MlpParams> {
        if theta.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: theta.len(),
            });
        }
        let mut off = 0;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in self.layers.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let n = fan_in * fan_out;
            weights.push(DenseMatrix::from_row_major(
                fan_out,
                fan_in,
                theta.as_slice()[off..off + n].to_vec(),
            )?);
            off += n;
            biases.push(theta.as_slice()[off..off + fan_out].to_vec());
            off += fan_out;
        }
        Ok(MlpParams { weights, biases })
    }

    pub fn flatten(&self, params: &MlpParams) -> Result<ParamVector> {
        let mut out = Vec::with_capacity(self.param_count());
        for (l, w) in self.layers.windows(2).enumerate() {
            let (weights, bias) = (&params.weights[l], &params.biases[l]);
            if weights.rows() != w[1] || weights.cols() != w[0] || bias.len() != w[1] {
                return Err(Error::Dimension {
                    expected: w[0] * w[1],
                    got: weights.rows() * weights.cols(),
                });
            }
            out.extend_from_slice(weights.as_slice());
            out.extend_from_slice(bias);
        }
        Ok(out.into())
    }

    /// He-normal weights (std `sqrt(2/fan_in)`) and zero biases.
    pub fn init_params(&self, rng: &mut Rng) -> ParamVector {
        let mut out = Vec::with_capacity(self.param_count());
        for w in self.layers.windows(2) {
            let std = (2.0 / w[0] as f64).sqrt();
            out.extend((0..w[0] * w[1]).map(|_| std * rng.normal()));
            out.extend(std::iter::repeat_n(0.0, w[1]));
        }
        out.into()
    }
}

trait Real:
    Copy
    + Send
    + Sync
    + PartialOrd
    + std::ops::AddAssign
    + std::ops::Mul<Output = Self>
    + std::ops::Sub<Output = Self>
    + 'static
{
    const ZERO: Self;
    fn from_f64(v: f64) -> Self;
    fn from_f32(v: f32) -> Self;
    fn to_f64(self) -> f64;

    /// `C ← alpha·A·B + beta·C` with explicit row/column strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_row_stride: isize,
    );
}

fn check_extent(len: usize, rows: usize, cols: usize, (rs, cs): (isize, isize)) {
    if rows > 0 && cols > 0 {
        let last = (rows - 1) as isize * rs + (cols - 1) as isize * cs;
        assert!(last >= 0 && (last as usize) < len, "gemm operand out of bounds");
    }
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            const ZERO: Self = 0.0;
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            fn from_f32(v: f32) -> Self {
                v as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (isize, isize),
                b: &[Self],
                b_strides: (isize, isize),
                beta: Self,
                c: &mut [Self],
                c_row_stride: isize,
            ) {
                check_extent(a.len(), m, k, a_strides);
                check_extent(b.len(), k, n, b_strides);
                check_extent(c.len(), m, n, (c_row_stride, 1));
                // SAFETY: every operand extent was bounds-checked above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0,
                        a_strides.1,
                        b.as_ptr(),
                        b_strides.0,
                        b_strides.1,
                        beta,
                        c.as_mut_ptr(),
                        c_row_stride,
                        1,
                    )
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

struct Layer<T> {
    fan_in: usize,
    fan_out: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

fn unpack<T: Real>(model: &MlpModel, theta: &ParamVector) -> Vec<Layer<T>> {
    let mut off = 0;
    let flat = theta.as_slice();
    model
        .layers
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = flat[off..off + fan_in * fan_out].iter().map(|&v| T::from_f64(v)).collect();
            off += fan_in * fan_out;
            let bias = flat[off..off + fan_out].iter().map(|&v| T::from_f64(v)).collect();
            off += fan_out;
            Layer {
                fan_in,
                fan_out,
                weights,
                bias,
            }
        })
        .collect()
}

fn gather<T: Real>(data: &Dataset, batch: &[usize]) -> Vec<T> {
    let mut x = Vec::with_capacity(batch.len() * data.features());
    for &i in batch {
        x.extend(data.row(i).iter().map(|&v| T::from_f32(v)));
    }
    x
}

/// Activations per layer; `acts[0]` is the input batch, the last entry holds logits.
fn forward<T: Real>(layers: &[Layer<T>], x: Vec<T>, rows: usize) -> Vec<Vec<T>> {
    let mut acts = vec![x];
    for (l, layer) in layers.iter().enumerate() {
        let mut z = Vec::with_capacity(rows * layer.fan_out);
        for _ in 0..rows {
            z.extend_from_slice(&layer.bias);
        }
        let input = acts.last().expect("input present");
        T::gemm(
            rows,
            layer.fan_in,
            layer.fan_out,
            T::from_f64(1.0),
            input,
            (layer.fan_in as isize, 1),
            &layer.weights,
            (1, layer.fan_in as isize),
            T::from_f64(1.0),
            &mut z,
            layer.fan_out as isize,
        );
        if l + 1 < layers.len() {
            for v in &mut z {
                if *v < T::ZERO {
                    *v = T::ZERO;
                }
            }
        }
        acts.push(z);
    }
    acts
}

/// Per-row log-softmax in f64.
fn log_softmax<T: Real>(logits: &[T], classes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(classes) {
        let max = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v.to_f64() - max).exp()).sum::<f64>().ln();
        out.extend(row.iter().map(|v| v.to_f64() - lse));
    }
    out
}

/// Summed (not averaged) clamped cross-entropy and number of argmax errors.
fn loss_and_errors(log_probs: &[f64], classes: usize, labels: impl Iterator<Item = usize>) -> (f64, usize) {
    let mut loss = 0.0;
    let mut wrong = 0;
    for (row, y) in log_probs.chunks(classes).zip(labels) {
        loss -= row[y].max(LOG_PROB_FLOOR);
        let pred = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0;
        if pred != y {
            wrong += 1;
        }
    }
    (loss, wrong)
}

/// Mean loss and mean gradient over `batch`, gradient in flat layout.
fn backprop<T: Real>(model: &MlpModel, theta: &ParamVector, data: &Dataset, batch: &[usize]) -> (f64, Vec<f64>) {
    let layers = unpack::<T>(model, theta);
    let rows = batch.len();
    let classes = *model.layers.last().expect("output layer");
    let acts = forward(&layers, gather::<T>(data, batch), rows);
    let log_probs = log_softmax(acts.last().expect("logits"), classes);
    let (loss, _) = loss_and_errors(&log_probs, classes, batch.iter().map(|&i| data.label(i)));

    // dL/dz for the output layer: (softmax − onehot) / B.
    let inv = 1.0 / rows as f64;
    let mut delta: Vec<T> = log_probs.iter().map(|lp| T::from_f64(lp.exp() * inv)).collect();
    for (r, &i) in batch.iter().enumerate() {
        let y = data.label(i);
        delta[r * classes + y] = delta[r * classes + y] - T::from_f64(inv);
    }

    let mut grads: Vec<(Vec<T>, Vec<T>)> = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let input = &acts[l];
        let mut dw = vec![T::ZERO; layer.fan_out * layer.fan_in];
        T::gemm(
            layer.fan_out,
            rows,
            layer.fan_in,
            T::from_f64(1.0),
            &delta,
            (1, layer.fan_out as isize),
            input,
            (layer.fan_in as isize, 1),
            T::ZERO,
            &mut dw,
            layer.fan_in as isize,
        );
        let mut db = vec![T::ZERO; layer.fan_out];
        for row in delta.chunks(layer.fan_out) {
            for (b, &d) in db.iter_mut().zip(row) {
                *b += d;
            }
        }
        if l > 0 {
            let mut prev = vec![T::ZERO; rows * layer.fan_in];
            T::gemm(
                rows,
                layer.fan_out,
                layer.fan_in,
                T::from_f64(1.0),
                &delta,
                (layer.fan_out as isize, 1),
                &layer.weights,
                (layer.fan_in as isize, 1),
                T::ZERO,
                &mut prev,
                layer.fan_in as isize,
            );
            for (p, &a) in prev.iter_mut().zip(input) {
                if !(a > T::ZERO) {
                    *p = T::ZERO;
                }
            }
            delta = prev;
        }
        grads.push((dw, db));
    }

    let mut flat = Vec::with_capacity(model.param_count());
    for (dw, db) in grads.iter().rev() {
        flat.extend(dw.iter().map(|v| v.to_f64()));
        flat.extend(db.iter().map(|v| v.to_f64()));
    }
    (loss * inv, flat)
}

fn evaluate_on<T: Real>(model: &MlpModel, theta: &ParamVector, data: &Dataset) -> Eval {
    let layers = unpack::<T>(model, theta);
    let classes = *model.layers.last().expect("output layer");
    let mut loss = 0.0;
    let mut wrong = 0;
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let acts = forward(&layers, gather::<T>(data, chunk), chunk.len());
        let lp = log_softmax(acts.last().expect("logits"), classes);
        let (l, w) = loss_and_errors(&lp, classes, chunk.iter().map(|&i| data.label(i)));
        loss += l;
        wrong += w;
    }
    let n = data.len().max(1) as f64;
    Eval {
        loss: loss / n,
        error_rate: Some(wrong as f64 / n),
    }
}

/// Cross-entropy training of an [`MlpModel`] on an image dataset.
#[derive(Debug, Clone)]
pub struct MlpProblem {
    model: MlpModel,
    train: Dataset,
    test: Option<Dataset>,
    precision: Precision,
}

impl MlpProblem {
    /// The 784-300-100-10 MNIST network.
    pub fn mnist(train: Dataset, test: Option<Dataset>, precision: Precision) -> Result<Self> {
        Self::with_layers(&MNIST_LAYERS, train, test, precision)
    }

    pub fn with_layers(
        layers: &[usize],
        train: Dataset,
        test: Option<Dataset>,
        precision: Precision,
    ) -> Result<Self> {
        let model = MlpModel::new(layers)?;
        let classes = *layers.last().expect("validated");
        for ds in std::iter::once(&train).chain(test.as_ref()) {
            if ds.features() != layers[0] {
                return Err(Error::Data(format!(
                    "dataset has {} features, network expects {}",
                    ds.features(),
                    layers[0]
                )));
            }
            if let Some(&bad) = ds.labels().iter().find(|&&l| l as usize >= classes) {
                return Err(Error::Data(format!("label {bad} outside [0, {classes})")));
            }
        }
        if train.is_empty() {
            return Err(Error::Data("empty training set".into()));
        }
        Ok(MlpProblem {
            model,
            train,
            test,
            precision,
        })
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn train_set(&self) -> &Dataset {
        &self.train
    }

    pub fn test_set(&self) -> Option<&Dataset> {
        self.test.as_ref()
    }

    pub fn evaluate_train(&self, theta: &ParamVector) -> Eval {
        match self.precision {
            Precision::F32 => evaluate_on::<f32>(&self.model, theta, &self.train),
            Precision::F64 => evaluate_on::<f64>(&self.model, theta, &self.train),
        }
    }
}

impl Problem for MlpProblem {
    fn kind(&self) -> ProblemKind {
        ProblemKind::MlpMnist
    }

    fn dim(&self) -> usize {
        self.model.param_count()
    }

    fn num_samples(&self) -> usize {
        self.train.len()
    }

    fn loss(&self, theta: &ParamVector) -> f64 {
        self.evaluate_train(theta).loss
    }

    fn grad(&self, theta: &ParamVector) -> ParamVector {
        let n = self.train.len();
        let mut total = vec![0.0; self.dim()];
        let indices: Vec<usize> = (0..n).collect();
        for chunk in indices.chunks(EVAL_CHUNK) {
            let (_, g) = self.minibatch_loss_grad(theta, chunk);
            let w = chunk.len() as f64 / n as f64;
            for (t, gi) in total.iter_mut().zip(g.iter()) {
                *t += w * gi;
            }
        }
        total.into()
    }

    fn minibatch_loss_grad(&self, theta: &ParamVector, batch: &[usize]) -> (f64, ParamVector) {
        let (loss, g) = match self.precision {
            Precision::F32 => backprop::<f32>(&self.model, theta, &self.train, batch),
            Precision::F64 => backprop::<f64>(&self.model, theta, &self.train, batch),
        };
        (loss, g.into())
    }

    fn loglik_grad_sample(&self, theta: &ParamVector, sample: usize) -> Option<ParamVector> {
        Some(self.minibatch_grad(theta, &[sample]).scale(-1.0))
    }

    /// Test-set loss and error when a test split is attached, else training-set.
    fn evaluate(&self, theta: &ParamVector) -> Eval {
        match (&self.test, self.precision) {
            (Some(t), Precision::F32) => evaluate_on::<f32>(&self.model, theta, t),
            (Some(t), Precision::F64) => evaluate_on::<f64>(&self.model, theta, t),
            (None, _) => self.evaluate_train(theta),
        }
    }

    fn initial_point(&self, rng: &mut Rng) -> ParamVector {
        self.model.init_params(rng)
    }

    fn precision(&self) -> &'static str {
        self.precision.name()
    }
}

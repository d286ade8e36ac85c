use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense parameter vector. Length is fixed at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn filled(len: usize, value: f64) -> Self {
        ParamVector(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, a: f64) -> ParamVector {
        self.map(|v| a * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ParamVector {
        ParamVector(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        axpy(-1.0, other, self)
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        axpy(1.0, other, self)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Smallest and largest entry; `None` when empty.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        let first = *self.0.first()?;
        Some(
            self.0
                .iter()
                .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        )
    }

    pub(crate) fn debug_check_finite(&self) {
        debug_assert!(self.is_finite(), "library operation produced NaN/Inf");
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

impl From<&[f64]> for ParamVector {
    fn from(v: &[f64]) -> Self {
        ParamVector(v.to_vec())
    }
}

impl<const N: usize> From<[f64; N]> for ParamVector {
    fn from(v: [f64; N]) -> Self {
        ParamVector(v.to_vec())
    }
}

impl FromIterator<f64> for ParamVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        ParamVector(iter.into_iter().collect())
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

/// `a * x + y`.
pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    check_len(x.len(), y.len())?;
    let out: ParamVector = x.0.iter().zip(&y.0).map(|(xi, yi)| a * xi + yi).collect();
    out.debug_check_finite();
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub enum ElementwiseOp<'a> {
    Square,
    Sqrt,
    AddScalar(f64),
    /// Divide by the given vector; every denominator entry must be positive.
    Divide(&'a ParamVector),
}

pub fn elementwise(op: ElementwiseOp<'_>, x: &ParamVector) -> Result<ParamVector> {
    let out = match op {
        ElementwiseOp::Square => x.map(|v| v * v),
        ElementwiseOp::Sqrt => {
            if let Some(i) = x.0.iter().position(|&v| v < 0.0) {
                return Err(Error::Domain(format!("sqrt of negative entry {} at {i}", x[i])));
            }
            x.map(f64::sqrt)
        }
        ElementwiseOp::AddScalar(c) => x.map(|v| v + c),
        ElementwiseOp::Divide(den) => {
            check_len(x.len(), den.len())?;
            if let Some(i) = den.0.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::Domain(format!(
                    "nonpositive denominator {} at {i}",
                    den[i]
                )));
            }
            x.0.iter().zip(&den.0).map(|(a, b)| a / b).collect()
        }
    };
    out.debug_check_finite();
    Ok(out)
}

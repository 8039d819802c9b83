//! Dense vector arithmetic used by every other module.
//!
//! Finiteness is validated at operation boundaries (the checked free
//! functions and [`ParamVector::new`]); the inherent methods are the
//! unchecked hot-loop versions.

use std::ops::Index;

use crate::error::{Error, Result};

/// A point or gradient in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    /// Builds a vector, rejecting empty input and non-finite entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidVector("dimension must be positive".into()));
        }
        let v = ParamVector(entries);
        v.check_finite()?;
        Ok(v)
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    /// `radius` along the first coordinate axis.
    pub fn on_axis(dim: usize, radius: f64) -> Self {
        let mut v = vec![0.0; dim];
        v[0] = radius;
        ParamVector(v)
    }

    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        ParamVector(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.0.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidVector(format!(
                "entry {i} is not finite ({})",
                self.0[i]
            ))),
        }
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// `self += a * x`
    pub fn add_scaled(&mut self, a: f64, x: &ParamVector) {
        for (s, xi) in self.0.iter_mut().zip(&x.0) {
            *s += a * xi;
        }
    }

    pub fn scaled(&self, a: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|x| a * x).collect())
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &ParamVector) -> ParamVector {
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParamVector::new(v)
    }
}

/// Diagonal weighting `diag(c_1, ..., c_d)` with every `c_i` in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaDiag {
    diag: Vec<f64>,
    c_min: f64,
    c_max: f64,
}

impl LambdaDiag {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Empty("lambda diagonal"));
        }
        if let Some(c) = diag.iter().find(|&&c| !(c > 0.0 && c <= 1.0)) {
            return Err(Error::param(
                "lambda",
                format!("diagonal entry {c} outside (0, 1]"),
            ));
        }
        let c_min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        let c_max = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(LambdaDiag { diag, c_min, c_max })
    }

    pub fn identity(dim: usize) -> Self {
        LambdaDiag {
            diag: vec![1.0; dim],
            c_min: 1.0,
            c_max: 1.0,
        }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }
}

fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// `sqrt(sum v_i^2)`, rejecting non-finite input.
pub fn euclidean_norm(v: &ParamVector) -> Result<f64> {
    v.check_finite()?;
    Ok(v.norm())
}

/// `sqrt(sum c_i v_i^2)`.
pub fn lambda_norm(v: &ParamVector, lambda: &LambdaDiag) -> Result<f64> {
    check_dims(lambda.dim(), v.dim())?;
    v.check_finite()?;
    Ok(v.0
        .iter()
        .zip(&lambda.diag)
        .map(|(x, c)| c * x * x)
        .sum::<f64>()
        .sqrt())
}

/// `a * x + y`
pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    check_dims(x.dim(), y.dim())?;
    let mut out = y.clone();
    out.add_scaled(a, x);
    out.check_finite()?;
    Ok(out)
}

pub fn scale(a: f64, x: &ParamVector) -> Result<ParamVector> {
    let out = x.scaled(a);
    out.check_finite()?;
    Ok(out)
}

/// Coordinate-wise arithmetic mean.
pub fn average(vs: &[ParamVector]) -> Result<ParamVector> {
    let first = vs.first().ok_or(Error::Empty("average of no vectors"))?;
    for v in &vs[1..] {
        check_dims(first.dim(), v.dim())?;
    }
    let out = mean_unchecked(vs.iter());
    out.check_finite()?;
    Ok(out)
}

/// Mean of a nonempty, dimension-consistent sequence; no validation.
///
/// Computed as `x_0 + mean_i(x_i - x_0)`, so the mean of identical vectors
/// (and of a single vector) is bit-identical to the input.
pub(crate) fn mean_unchecked<'a>(mut vs: impl Iterator<Item = &'a ParamVector>) -> ParamVector {
    let first = vs.next().expect("nonempty");
    let mut shift = vec![0.0; first.dim()];
    let mut n = 1usize;
    for v in vs {
        for ((s, x), x0) in shift.iter_mut().zip(&v.0).zip(&first.0) {
            *s += x - x0;
        }
        n += 1;
    }
    if n == 1 {
        return first.clone();
    }
    let inv = n as f64;
    ParamVector(
        first
            .0
            .iter()
            .zip(shift)
            .map(|(x0, s)| x0 + s / inv)
            .collect(),
    )
}

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Real,
    Complex,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Data {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Dense row-major array of real or complex doubles.
///
/// Operations treat the last dimension as columns and everything before it
/// as rows, so a `[B, L]` tensor is a batch of `B` length-`L` signals.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Data,
}

impl Tensor {
    pub fn real(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_len(shape, data.len())?;
        Ok(Self {
            shape: shape.to_vec(),
            data: Data::Real(data),
        })
    }

    pub fn complex(shape: &[usize], data: Vec<Complex64>) -> Result<Self> {
        check_len(shape, data.len())?;
        Ok(Self {
            shape: shape.to_vec(),
            data: Data::Complex(data),
        })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data: Data::Real(data),
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: Data::Real(vec![value]),
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::real(&[rows, cols], data)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: Data::Real(vec![0.0; shape.iter().product()]),
        }
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        let len = other.len();
        let data = match other.kind() {
            Kind::Real => Data::Real(vec![0.0; len]),
            Kind::Complex => Data::Complex(vec![Complex64::new(0.0, 0.0); len]),
        };
        Self {
            shape: other.shape.clone(),
            data,
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        Self {
            shape: vec![size, size],
            data: Data::Real(data),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        match &self.data {
            Data::Real(v) => v.len(),
            Data::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> Kind {
        match self.data {
            Data::Real(_) => Kind::Real,
            Data::Complex(_) => Kind::Complex,
        }
    }

    pub fn data(&self) -> &Data {
        &self.data
    }

    /// Length of the last dimension.
    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    /// Product of all leading dimensions (1 for vectors).
    pub fn rows(&self) -> usize {
        let cols = self.cols();
        if cols == 0 {
            0
        } else {
            self.len() / cols
        }
    }

    /// Real payload. Panics on a complex tensor; callers check [`Tensor::kind`] first.
    pub fn re(&self) -> &[f64] {
        match &self.data {
            Data::Real(v) => v,
            Data::Complex(_) => panic!("expected a real tensor"),
        }
    }

    pub fn re_mut(&mut self) -> &mut [f64] {
        match &mut self.data {
            Data::Real(v) => v,
            Data::Complex(_) => panic!("expected a real tensor"),
        }
    }

    /// Complex payload. Panics on a real tensor.
    pub fn cx(&self) -> &[Complex64] {
        match &self.data {
            Data::Complex(v) => v,
            Data::Real(_) => panic!("expected a complex tensor"),
        }
    }

    pub fn cx_mut(&mut self) -> &mut [Complex64] {
        match &mut self.data {
            Data::Complex(v) => v,
            Data::Real(_) => panic!("expected a complex tensor"),
        }
    }

    pub fn into_real(self) -> Vec<f64> {
        match self.data {
            Data::Real(v) => v,
            Data::Complex(_) => panic!("expected a real tensor"),
        }
    }

    pub fn into_complex(self) -> Vec<Complex64> {
        match self.data {
            Data::Complex(v) => v,
            Data::Real(_) => panic!("expected a complex tensor"),
        }
    }

    /// Scalar value of a single-element real tensor.
    pub fn item(&self) -> f64 {
        self.re()[0]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.re()[r * c..(r + 1) * c]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        check_len(shape, self.len())?;
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub(crate) fn expect_kind(&self, kind: Kind, op: &str) -> Result<()> {
        if self.kind() == kind {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{op} expects a {kind:?} tensor, got {:?}",
                self.kind()
            )))
        }
    }

    /// In-place `self += other` for tensors of identical shape and kind.
    pub(crate) fn accumulate(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        match (&mut self.data, &other.data) {
            (Data::Real(a), Data::Real(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            (Data::Complex(a), Data::Complex(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            _ => panic!("gradient kind mismatch"),
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        match (&self.data, &other.data) {
            (Data::Real(a), Data::Real(b)) => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
            (Data::Complex(a), Data::Complex(b)) => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max),
            _ => f64::INFINITY,
        }
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        match &self.data {
            Data::Real(v) => v.iter().map(|x| x * x).sum(),
            Data::Complex(v) => v.iter().map(|x| x.norm_sqr()).sum(),
        }
    }
}

fn check_len(shape: &[usize], len: usize) -> Result<()> {
    let expected: usize = shape.iter().product();
    if shape.is_empty() || expected != len {
        return Err(Error::Shape(format!(
            "shape {shape:?} needs {expected} elements, got {len}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_length() {
        assert!(Tensor::real(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(
            Tensor::real(&[2, 3], vec![0.0; 5]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn rows_and_cols() {
        let t = Tensor::zeros(&[4, 3, 5]);
        assert_eq!(t.cols(), 5);
        assert_eq!(t.rows(), 12);
        assert_eq!(Tensor::vector(vec![1.0, 2.0]).rows(), 1);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Flat parameter vector: model parameters, model updates and gradients all
/// live in this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(p: usize) -> Self {
        Self(vec![0.0; p])
    }

    /// Wraps `values`, rejecting non-finite entries.
    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("parameter entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
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

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn distance_sq(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn check_dim(&self, p: usize) -> Result<()> {
        if self.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: self.len(),
            });
        }
        Ok(())
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &ParamVector) -> Result<()> {
        x.check_dim(self.len())?;
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            *s += a * v;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        self.0.iter_mut().for_each(|v| *v *= a);
    }

    /// `self - other`
    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        other.check_dim(self.len())?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    /// Coordinate-wise mean of equally sized vectors.
    pub fn mean(vectors: &[ParamVector]) -> Result<ParamVector> {
        let first = vectors
            .first()
            .ok_or_else(|| invalid("mean of an empty set of vectors"))?;
        let mut acc = ParamVector::zeros(first.len());
        for v in vectors {
            acc.axpy(1.0, v)?;
        }
        acc.scale(1.0 / vectors.len() as f64);
        Ok(acc)
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(v: ParamVector) -> Self {
        v.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(ParamVector::from_vec(vec![1.0, f64::NAN]).is_err());
        assert!(ParamVector::from_vec(vec![f64::INFINITY]).is_err());
        assert!(ParamVector::from_vec(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn arithmetic() {
        let mut a = ParamVector::from_vec(vec![3.0, 4.0]).unwrap();
        assert_eq!(a.norm(), 5.0);
        let b = ParamVector::from_vec(vec![1.0, 1.0]).unwrap();
        a.axpy(-1.0, &b).unwrap();
        assert_eq!(a.as_slice(), &[2.0, 3.0]);
        assert_eq!(a.sub(&b).unwrap().as_slice(), &[1.0, 2.0]);
        assert!(a.axpy(1.0, &ParamVector::zeros(3)).is_err());
        let m = ParamVector::mean(&[a, b]).unwrap();
        assert_eq!(m.as_slice(), &[1.5, 2.0]);
    }
}

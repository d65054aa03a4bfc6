use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    /// Rotation of every consecutive coordinate pair by `k·90°`.
    Covariate,
    /// Cyclic label permutation `(y + k) mod C`.
    Concept,
}

/// Rotates each pair `(x[2j], x[2j+1])` by `k·90°`.
pub fn apply_covariate_shift(x: &[f64], k: usize) -> Result<Vec<f64>> {
    if x.len() % 2 != 0 {
        return Err(invalid(format!("rotation needs an even dimension, got {}", x.len())));
    }
    let mut out = Vec::with_capacity(x.len());
    for pair in x.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        let (u, v) = match k % 4 {
            0 => (a, b),
            1 => (-b, a),
            2 => (-a, -b),
            _ => (b, -a),
        };
        out.push(u);
        out.push(v);
    }
    Ok(out)
}

pub fn apply_concept_shift(y: usize, k: usize, classes: usize) -> Result<usize> {
    if classes == 0 || y >= classes {
        return Err(invalid(format!("label {y} outside 0..{classes}")));
    }
    Ok((y + k % classes) % classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotations() {
        let x = [1.0, 2.0, -3.0, 0.5];
        assert_eq!(apply_covariate_shift(&x, 0).unwrap(), x);
        assert_eq!(apply_covariate_shift(&x, 1).unwrap(), [-2.0, 1.0, -0.5, -3.0]);
        assert_eq!(apply_covariate_shift(&x, 2).unwrap(), [-1.0, -2.0, 3.0, -0.5]);
        assert_eq!(apply_covariate_shift(&x, 4).unwrap(), x);
        let twice = apply_covariate_shift(&apply_covariate_shift(&x, 1).unwrap(), 3).unwrap();
        assert_eq!(twice, x);
        assert!(apply_covariate_shift(&[1.0, 2.0, 3.0], 1).is_err());
    }

    #[test]
    fn label_flips() {
        assert_eq!(apply_concept_shift(4, 0, 10).unwrap(), 4);
        assert_eq!(apply_concept_shift(9, 1, 10).unwrap(), 0);
        for y in 0..10 {
            for k in 0..10 {
                let there = apply_concept_shift(y, k, 10).unwrap();
                assert_eq!(apply_concept_shift(there, 10 - k, 10).unwrap(), y);
            }
        }
        assert!(apply_concept_shift(10, 1, 10).is_err());
    }
}

use super::vector::ScVector;
use crate::error::{Error, Result};

/// `[0,∞)^n ⊕ W` inside `R^dim`: the coordinates listed in `indices` are
/// constrained to be nonnegative, all others are free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialQuadrant {
    dim: usize,
    indices: Vec<usize>,
}

impl PartialQuadrant {
    pub fn new(dim: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&i) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::InvalidScale(format!(
                "quadrant index {i} outside ambient dimension {dim}"
            )));
        }
        Ok(PartialQuadrant { dim, indices })
    }

    /// The whole space (no constrained coordinate).
    pub fn full(dim: usize) -> Self {
        PartialQuadrant {
            dim,
            indices: Vec::new(),
        }
    }

    /// `[0,∞)^n ⊕ R^(dim-n)` with the first `n` coordinates constrained.
    pub fn leading(n: usize, dim: usize) -> Result<Self> {
        Self::new(dim, (0..n).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn quadrant_count(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim && self.indices.iter().all(|&i| x[i] >= -tol)
    }

    /// Number of quadrant coordinates of `x` with value at most `tol`.
    pub fn degeneracy_index(&self, x: &[f64], tol: f64) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut count = 0;
        for &i in &self.indices {
            if x[i] < -tol {
                return Err(Error::NotInQuadrant { index: i, value: x[i] });
            }
            if x[i] <= tol {
                count += 1;
            }
        }
        Ok(count)
    }

    /// Closest point of the quadrant.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for &i in &self.indices {
            y[i] = y[i].max(0.0);
        }
        y
    }
}

/// Degeneracy index of a scale vector with an explicit tolerance.
pub fn degeneracy_index(c: &PartialQuadrant, x: &ScVector, tol: f64) -> Result<usize> {
    c.degeneracy_index(x.coeffs(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_vanishing_coordinates() {
        let c = PartialQuadrant::leading(2, 2).unwrap();
        assert_eq!(c.degeneracy_index(&[1.0, 2.0], 1e-12).unwrap(), 0);
        assert_eq!(c.degeneracy_index(&[0.0, 0.0], 1e-12).unwrap(), 2);
        let c3 = PartialQuadrant::leading(3, 3).unwrap();
        assert_eq!(c3.degeneracy_index(&[0.0, 3.2, 0.0], 1e-12).unwrap(), 2);
        assert!(matches!(
            c3.degeneracy_index(&[0.0, -1.0, 0.0], 1e-12),
            Err(Error::NotInQuadrant { index: 1, .. })
        ));
    }
}

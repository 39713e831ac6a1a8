use std::sync::Arc;

use super::scale::ScScale;
use crate::error::{Error, Result};

/// A point of `E_level` in a truncated scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ScVector {
    scale: Arc<ScScale>,
    coeffs: Vec<f64>,
    level: usize,
}

impl ScVector {
    pub fn new(scale: &Arc<ScScale>, coeffs: Vec<f64>, level: usize) -> Result<Self> {
        if level > scale.max_level() {
            return Err(Error::LevelOutOfRange {
                requested: level,
                declared: scale.max_level(),
            });
        }
        if coeffs.len() != scale.dim() {
            return Err(Error::DimensionMismatch {
                expected: scale.dim(),
                found: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidScale("non-finite coefficient".into()));
        }
        Ok(ScVector {
            scale: Arc::clone(scale),
            coeffs,
            level,
        })
    }

    /// A point declared at the top level.
    pub fn smooth(scale: &Arc<ScScale>, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(scale, coeffs, scale.max_level())
    }

    pub fn zeros(scale: &Arc<ScScale>, level: usize) -> Result<Self> {
        Self::new(scale, vec![0.0; scale.dim()], level)
    }

    /// Samples `f` on the grid of a weighted or periodic scale.
    pub fn from_fn(scale: &Arc<ScScale>, level: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let xs = if let Some(g) = scale.grid() {
            g.coordinates()
        } else if let Some(p) = scale.periodic_grid() {
            p.coordinates()
        } else {
            return Err(Error::BackendUnsupported(
                "sampling a function needs a grid backend".into(),
            ));
        };
        Self::new(scale, xs.into_iter().map(f).collect(), level)
    }

    pub fn scale(&self) -> &Arc<ScScale> {
        &self.scale
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn is_smooth(&self) -> bool {
        self.level == self.scale.max_level()
    }

    /// Level-`m` norm; `m` may not exceed the declared level.
    pub fn level_norm(&self, m: usize) -> Result<f64> {
        if m > self.level {
            return Err(Error::LevelOutOfRange {
                requested: m,
                declared: self.level,
            });
        }
        self.scale.norm_of(&self.coeffs, m)
    }

    /// Same coefficients declared at a lower level.
    pub fn at_level(&self, level: usize) -> Result<Self> {
        if level > self.level {
            return Err(Error::LevelOutOfRange {
                requested: level,
                declared: self.level,
            });
        }
        Ok(ScVector {
            level,
            ..self.clone()
        })
    }

    /// Same coefficients reinterpreted in another scale of equal dimension.
    pub fn in_scale(&self, scale: &Arc<ScScale>, level: usize) -> Result<Self> {
        Self::new(scale, self.coeffs.clone(), level)
    }

    fn check_same(&self, other: &ScVector) -> Result<()> {
        if *self.scale != *other.scale {
            return Err(Error::DimensionMismatch {
                expected: self.scale.dim(),
                found: other.scale.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &ScVector) -> Result<Self> {
        self.check_same(other)?;
        Ok(ScVector {
            scale: Arc::clone(&self.scale),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            level: self.level.min(other.level),
        })
    }

    pub fn sub(&self, other: &ScVector) -> Result<Self> {
        self.check_same(other)?;
        Ok(ScVector {
            scale: Arc::clone(&self.scale),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
            level: self.level.min(other.level),
        })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        ScVector {
            scale: Arc::clone(&self.scale),
            coeffs: self.coeffs.iter().map(|a| alpha * a).collect(),
            level: self.level,
        }
    }

    /// `self + alpha * d`.
    pub fn plus_scaled(&self, alpha: f64, d: &ScVector) -> Result<Self> {
        self.add(&d.scaled(alpha))
    }

    /// Splits a vector of `E ⊕ F` into its components.
    pub fn split(&self) -> Result<(ScVector, ScVector)> {
        let (a, b) = self
            .scale
            .summands()
            .ok_or_else(|| Error::TypeMismatch("vector is not in a direct sum".into()))?;
        let (x, y) = self.coeffs.split_at(a.dim());
        Ok((
            ScVector::new(&Arc::new(a.clone()), x.to_vec(), self.level)?,
            ScVector::new(&Arc::new(b.clone()), y.to_vec(), self.level)?,
        ))
    }

    /// Concatenates components into a vector of `scale = E ⊕ F`.
    pub fn join(scale: &Arc<ScScale>, a: &ScVector, b: &ScVector) -> Result<Self> {
        let mut coeffs = a.coeffs.clone();
        coeffs.extend_from_slice(&b.coeffs);
        Self::new(scale, coeffs, a.level.min(b.level))
    }
}

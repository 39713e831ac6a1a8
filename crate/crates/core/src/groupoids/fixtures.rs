use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use super::action::{AffineMap, FiniteGroup, GroupAction};
use super::groupoid::EpGroupoid;
use crate::error::{Error, Result};

/// Largest group the text description may generate.
pub const MAX_GROUP_ORDER: usize = 1024;

fn reflection() -> AffineMap {
    AffineMap::linear(DMatrix::from_element(1, 1, -1.0))
}

/// `n` equally spaced points of `[0, half_width]`, as 1-d samples.
pub fn line_samples(n: usize, half_width: f64) -> Vec<Vec<f64>> {
    let n = n.max(2);
    (0..n)
        .map(|i| vec![half_width * i as f64 / (n - 1) as f64])
        .collect()
}

/// The origin plus points at the given radii and angles in `[0, 2π/order)`.
pub fn sector_samples(order: usize, radii: &[f64], per_ring: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0, 0.0]];
    for &r in radii {
        for j in 0..per_ring {
            let t = 2.0 * PI * j as f64 / (order.max(1) * per_ring.max(1)) as f64;
            out.push(vec![r * t.cos(), r * t.sin()]);
        }
    }
    out
}

/// Trivial group on `ℝ`: identities only.
pub fn identity_groupoid(samples: &[Vec<f64>]) -> Result<Arc<EpGroupoid>> {
    let a = GroupAction::new(FiniteGroup::trivial(), vec![AffineMap::identity(1)])?;
    Ok(Arc::new(EpGroupoid::translation("trivial", Arc::new(a), samples)?))
}

/// `ℤ₂` acting on `ℝ` by `x -> -x`.
pub fn reflection_groupoid(samples: &[Vec<f64>]) -> Result<Arc<EpGroupoid>> {
    let a = GroupAction::new(FiniteGroup::cyclic(2), vec![AffineMap::identity(1), reflection()])?;
    Ok(Arc::new(EpGroupoid::translation("z2-reflection", Arc::new(a), samples)?))
}

/// `ℤ₂` acting trivially on `ℝ`, so every isotropy group is non-effective.
pub fn trivial_action_groupoid(samples: &[Vec<f64>]) -> Result<Arc<EpGroupoid>> {
    let a = GroupAction::new(FiniteGroup::cyclic(2), vec![AffineMap::identity(1); 2])?;
    Ok(Arc::new(EpGroupoid::translation("z2-trivial", Arc::new(a), samples)?))
}

/// `ℤ_n` acting on `ℝ²` by rotations through multiples of `2π/n`.
pub fn rotation_groupoid(order: usize, samples: &[Vec<f64>]) -> Result<Arc<EpGroupoid>> {
    let maps = (0..order)
        .map(|k| AffineMap::rotation(2.0 * PI * k as f64 / order as f64))
        .collect();
    let a = GroupAction::new(FiniteGroup::cyclic(order), maps)?;
    Ok(Arc::new(EpGroupoid::translation(format!("z{order}-rotation"), Arc::new(a), samples)?))
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineConfig {
    /// Rows of the linear part.
    pub linear: Vec<Vec<f64>>,
    #[serde(default)]
    pub translation: Option<Vec<f64>>,
}

impl AffineConfig {
    fn build(&self, dim: usize) -> Result<AffineMap> {
        if self.linear.len() != dim || self.linear.iter().any(|r| r.len() != dim) {
            return Err(Error::Config(format!("linear part must be {dim}×{dim}")));
        }
        let flat: Vec<f64> = self.linear.iter().flatten().copied().collect();
        let b = self.translation.clone().unwrap_or_else(|| vec![0.0; dim]);
        AffineMap::new(DMatrix::from_row_slice(dim, dim, &flat), DVector::from_vec(b))
    }
}

/// Text description of a translation groupoid, either by generators
/// (the generated group acts effectively) or by a Cayley table with one
/// coordinate map per element.
///
/// ```toml
/// name = "z2"
/// dim = 1
/// samples = [[0.0], [0.5], [1.0]]
/// generators = [{ linear = [[-1.0]] }]
/// ```
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupoidConfig {
    pub name: String,
    pub dim: usize,
    pub samples: Vec<Vec<f64>>,
    #[serde(default)]
    pub generators: Option<Vec<AffineConfig>>,
    #[serde(default)]
    pub table: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub action: Option<Vec<AffineConfig>>,
}

impl GroupoidConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<Arc<EpGroupoid>> {
        let action = match (&self.generators, &self.table, &self.action) {
            (Some(gens), None, None) => {
                let maps = gens.iter().map(|g| g.build(self.dim)).collect::<Result<Vec<_>>>()?;
                GroupAction::generated(self.dim, &maps, MAX_GROUP_ORDER)?
            }
            (None, Some(table), Some(action)) => {
                let maps = action.iter().map(|g| g.build(self.dim)).collect::<Result<Vec<_>>>()?;
                GroupAction::new(FiniteGroup::from_table(table.clone())?, maps)?
            }
            _ => {
                return Err(Error::Config(
                    "give either `generators` or both `table` and `action`".into(),
                ))
            }
        };
        Ok(Arc::new(EpGroupoid::translation(self.name.clone(), Arc::new(action), &self.samples)?))
    }
}

use serde::Deserialize;

use super::scale::ScScale;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "R")]
    pub radius: f64,
    pub h: f64,
}

/// Text description of a scale.
///
/// ```toml
/// backend = "weighted_grid"
/// max_level = 2
/// grid = { R = 8.0, h = 0.0625 }
/// deltas = [0.0, 0.1, 0.2]
/// ```
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub backend: String,
    pub max_level: usize,
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    #[serde(default)]
    pub orders: Option<Vec<usize>>,
}

impl ScaleConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<ScScale> {
        match self.backend.as_str() {
            "finite_dim" => {
                let dims = self
                    .dims
                    .as_ref()
                    .ok_or_else(|| Error::Config("finite_dim needs `dims`".into()))?;
                let dim = *dims
                    .first()
                    .ok_or_else(|| Error::Config("`dims` is empty".into()))?;
                if dims.iter().any(|&d| d != dim) {
                    return Err(Error::InvalidScale(
                        "finite_dim scales have the same dimension at every level".into(),
                    ));
                }
                if dims.len() != 1 && dims.len() != self.max_level + 1 {
                    return Err(Error::Config(format!(
                        "`dims` has {} entries for max_level {}",
                        dims.len(),
                        self.max_level
                    )));
                }
                Ok(ScScale::finite_dim(dim, self.max_level))
            }
            "weighted_grid" => {
                let grid = self
                    .grid
                    .as_ref()
                    .ok_or_else(|| Error::Config("weighted_grid needs `grid`".into()))?;
                let deltas = self
                    .deltas
                    .clone()
                    .ok_or_else(|| Error::Config("weighted_grid needs `deltas`".into()))?;
                if deltas.len() != self.max_level + 1 {
                    return Err(Error::Config(format!(
                        "`deltas` has {} entries for max_level {}",
                        deltas.len(),
                        self.max_level
                    )));
                }
                let orders = self
                    .orders
                    .clone()
                    .unwrap_or_else(|| (0..=self.max_level).collect());
                ScScale::weighted_grid_with_orders(grid.radius, grid.h, deltas, orders)
            }
            other => Err(Error::Config(format!("unknown backend `{other}`"))),
        }
    }
}

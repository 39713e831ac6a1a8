use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use crate::error::{Error, Result};

pub type CellEval = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type CellJacobian = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A map from the reference cube `[0, 1]^n` into a chart.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CellMap {
    /// Polynomial components in the cube coordinates.
    Polynomial { components: Vec<Polynomial> },
    /// `(t₀, t₁) -> c + r(cos θ, sin θ)` with `r` and `θ` affine in `t`,
    /// optionally lifted to the graph `z = lift(x, y)`.
    Polar {
        center: [f64; 2],
        radius: [f64; 2],
        angle: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lift: Option<Polynomial>,
    },
    #[serde(skip)]
    Callback {
        dim: usize,
        ambient: usize,
        eval: CellEval,
        jacobian: CellJacobian,
    },
}

impl fmt::Debug for CellMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellMap::Polynomial { components } => f.debug_struct("Polynomial").field("components", components).finish(),
            CellMap::Polar {
                center,
                radius,
                angle,
                lift,
            } => f
                .debug_struct("Polar")
                .field("center", center)
                .field("radius", radius)
                .field("angle", angle)
                .field("lift", lift)
                .finish(),
            CellMap::Callback { dim, ambient, .. } => f.debug_struct("Callback").field("dim", dim).field("ambient", ambient).finish(),
        }
    }
}

impl CellMap {
    /// The affine box `t -> lower + t (upper - lower)`.
    pub fn affine_box(lower: &[f64], upper: &[f64]) -> Self {
        let n = lower.len();
        let components = (0..n)
            .map(|i| {
                Polynomial::constant(n, lower[i])
                    .add(&Polynomial::var(n, i).scale(upper[i] - lower[i]))
                    .expect("same variable count")
            })
            .collect();
        CellMap::Polynomial { components }
    }

    pub fn dim(&self) -> usize {
        match self {
            CellMap::Polynomial { components } => components.first().map_or(0, |c| c.nvars()),
            CellMap::Polar { .. } => 2,
            CellMap::Callback { dim, .. } => *dim,
        }
    }

    pub fn ambient(&self) -> usize {
        match self {
            CellMap::Polynomial { components } => components.len(),
            CellMap::Polar { lift, .. } => 2 + usize::from(lift.is_some()),
            CellMap::Callback { ambient, .. } => *ambient,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CellMap::Polynomial { components } => {
                let n = self.dim();
                if let Some(c) = components.iter().find(|c| c.nvars() != n) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: c.nvars(),
                    });
                }
            }
            CellMap::Polar { radius, lift, .. } => {
                if radius[0] < 0.0 || radius[1] < 0.0 {
                    return Err(Error::InvalidChart(format!("negative polar radius {radius:?}")));
                }
                if let Some(l) = lift {
                    if l.nvars() != 2 {
                        return Err(Error::DimensionMismatch { expected: 2, found: l.nvars() });
                    }
                }
            }
            CellMap::Callback { .. } => {}
        }
        Ok(())
    }

    fn polar(center: &[f64; 2], radius: &[f64; 2], angle: &[f64; 2], t: &[f64]) -> (f64, f64, f64, f64) {
        let r = radius[0] + t[0] * (radius[1] - radius[0]);
        let th = angle[0] + t[1] * (angle[1] - angle[0]);
        let (s, c) = th.sin_cos();
        (center[0] + r * c, center[1] + r * s, r, th)
    }

    pub fn eval(&self, t: &[f64]) -> Vec<f64> {
        match self {
            CellMap::Polynomial { components } => components.iter().map(|c| c.eval(t)).collect(),
            CellMap::Polar {
                center,
                radius,
                angle,
                lift,
            } => {
                let (x, y, _, _) = Self::polar(center, radius, angle, t);
                let mut p = vec![x, y];
                if let Some(l) = lift {
                    p.push(l.eval(&[x, y]));
                }
                p
            }
            CellMap::Callback { eval, .. } => eval(t),
        }
    }

    /// `∂Φ/∂t`, one column per cube coordinate.
    pub fn jacobian(&self, t: &[f64]) -> DMatrix<f64> {
        match self {
            CellMap::Polynomial { components } => {
                let n = self.dim();
                DMatrix::from_fn(components.len(), n, |i, j| components[i].derivative(j).eval(t))
            }
            CellMap::Polar {
                center,
                radius,
                angle,
                lift,
            } => {
                let (x, y, r, th) = Self::polar(center, radius, angle, t);
                let (s, c) = th.sin_cos();
                let (dr, dth) = (radius[1] - radius[0], angle[1] - angle[0]);
                let mut j = DMatrix::zeros(self.ambient(), 2);
                j[(0, 0)] = dr * c;
                j[(1, 0)] = dr * s;
                j[(0, 1)] = -r * s * dth;
                j[(1, 1)] = r * c * dth;
                if let Some(l) = lift {
                    let g = l.gradient(&[x, y]);
                    for k in 0..2 {
                        j[(2, k)] = g[0] * j[(0, k)] + g[1] * j[(1, k)];
                    }
                }
                j
            }
            CellMap::Callback { jacobian, .. } => jacobian(t),
        }
    }
}

/// A parametrized cell of a branch; `label` names the region it belongs to.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    #[serde(default)]
    pub label: String,
    pub map: CellMap,
}

impl Cell {
    pub fn new(label: impl Into<String>, map: CellMap) -> Self {
        Cell { label: label.into(), map }
    }
}

/// The face `t_axis = side` of cell `cell`; its label defaults to the cell's.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Face {
    pub cell: usize,
    pub axis: usize,
    pub side: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Face {
    pub fn new(cell: usize, axis: usize, side: u8) -> Self {
        Face {
            cell,
            axis,
            side,
            label: None,
        }
    }

    /// Sign of the boundary orientation (outward normal first) relative to
    /// the remaining cube coordinates in increasing order.
    pub fn orientation(&self) -> f64 {
        let s = if self.axis.is_multiple_of(2) { 1.0 } else { -1.0 };
        if self.side == 1 {
            s
        } else {
            -s
        }
    }

    /// Cube point of the face point `u ∈ [0, 1]^{n-1}`.
    pub fn embed(&self, u: &[f64]) -> Vec<f64> {
        let mut t = u.to_vec();
        t.insert(self.axis, f64::from(self.side));
        t
    }
}

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sc_calculus::{Domain, ScMap};
use crate::sc_core::ScScale;

/// Tolerance on `A(0)` and `DA(0)`.
pub const BASE_TOL: f64 = 1e-10;

pub type GraphMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// `Γ(q) = origin + N q + A(q)` with `A(q) ∈ N⊥`, on the ball `|q| < radius`.
///
/// `complement` is an explicit basis of `N⊥`, or `None` for the Euclidean
/// orthogonal complement of `N`. `A` returns ambient coefficient vectors.
#[derive(Clone)]
pub struct SubmanifoldChart {
    pub origin: Vec<f64>,
    pub n_basis: DMatrix<f64>,
    pub complement: Option<DMatrix<f64>>,
    pub radius: f64,
    a: GraphMap,
    /// Maps `p - origin` to `q`.
    coordinates: DMatrix<f64>,
}

impl fmt::Debug for SubmanifoldChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubmanifoldChart")
            .field("ambient", &self.origin.len())
            .field("dim", &self.n_basis.ncols())
            .field("radius", &self.radius)
            .finish()
    }
}

impl SubmanifoldChart {
    pub fn dim(&self) -> usize {
        self.n_basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.origin.len()
    }

    pub fn graph(&self, q: &[f64]) -> Vec<f64> {
        (self.a)(q)
    }

    pub fn gamma(&self, q: &[f64]) -> Result<Vec<f64>> {
        let qn = linalg::euclidean_norm(q);
        if qn >= self.radius {
            return Err(Error::DomainExit(format!("|q| = {qn} outside the chart radius {}", self.radius)));
        }
        let nq = &self.n_basis * DVector::from_column_slice(q);
        let a = (self.a)(q);
        Ok(self
            .origin
            .iter()
            .zip(nq.iter())
            .zip(&a)
            .map(|((o, n), a)| o + n + a)
            .collect())
    }

    /// The `N`-coordinate of `p` along `N⊥`.
    pub fn coordinate(&self, p: &[f64]) -> Vec<f64> {
        let d = DVector::from_column_slice(&linalg::sub(p, &self.origin));
        (&self.coordinates * d).as_slice().to_vec()
    }

    /// `Γ⁻¹(p)`; errors if `p` is off the image.
    pub fn inverse(&self, p: &[f64]) -> Result<Vec<f64>> {
        let q = self.coordinate(p);
        let back = self.gamma(&q)?;
        let off = linalg::euclidean_norm(&linalg::sub(&back, p));
        if off > 1e-9 * (1.0 + linalg::euclidean_norm(p)) {
            return Err(Error::DomainExit(format!("point is {off:e} off the chart image")));
        }
        Ok(q)
    }

    /// `Γ⁻¹ ∘ Γ = id` on the samples.
    pub fn injective_on(&self, samples: &[Vec<f64>]) -> Result<bool> {
        for q in samples {
            let back = self.coordinate(&self.gamma(q)?);
            if linalg::euclidean_norm(&linalg::sub(&back, q)) > 1e-10 * (1.0 + linalg::euclidean_norm(q)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `q ↦ other⁻¹(self(q))` on raw coordinates.
    pub fn transition(&self, other: &SubmanifoldChart, q: &[f64]) -> Result<Vec<f64>> {
        other.inverse(&self.gamma(q)?)
    }

    /// The transition as a map between finite-dimensional scales with
    /// finite-difference derivative.
    pub fn transition_map(&self, other: &SubmanifoldChart, max_level: usize) -> Result<ScMap> {
        if other.ambient_dim() != self.ambient_dim() || other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let src = Arc::new(ScScale::finite_dim(self.dim(), max_level));
        let tgt = Arc::new(ScScale::finite_dim(other.dim(), max_level));
        let (a, b) = (self.clone(), other.clone());
        ScMap::new(
            "chart transition",
            &src,
            &tgt,
            Domain::whole(self.dim()),
            Arc::new(move |q: &[f64]| a.transition(&b, q)),
            None,
        )
    }
}

/// Builds the chart `Γ(q) = origin + N q + A(q)`, checking `A(0) = 0`,
/// `DA(0) = 0` (centered differences) and `A(q) ∈ N⊥` at `q = 0` directions.
pub fn graph_chart_build(
    origin: Vec<f64>,
    n_basis: DMatrix<f64>,
    complement: Option<DMatrix<f64>>,
    a: GraphMap,
    radius: f64,
) -> Result<SubmanifoldChart> {
    let ambient = origin.len();
    let k = n_basis.ncols();
    if n_basis.nrows() != ambient {
        return Err(Error::DimensionMismatch {
            expected: ambient,
            found: n_basis.nrows(),
        });
    }
    if linalg::orthonormal_range(&n_basis, false)?.ncols() != k {
        return Err(Error::InvalidChart("N basis is rank deficient".into()));
    }
    let a0 = a(&vec![0.0; k]);
    if a0.len() != ambient {
        return Err(Error::DimensionMismatch {
            expected: ambient,
            found: a0.len(),
        });
    }
    let a0n = linalg::euclidean_norm(&a0);
    if a0n > BASE_TOL {
        return Err(Error::InvalidChart(format!("|A(0)| = {a0n:e}")));
    }
    let step = 1e-5;
    let da = linalg::fd_jacobian(|q| a(q), &vec![0.0; k], ambient, step);
    let dan = da.norm();
    if dan > BASE_TOL {
        return Err(Error::InvalidChart(format!("|DA(0)| = {dan:e}")));
    }

    // coordinate functional: first k components of [N N⊥]⁻¹, or the normal
    // equations when N⊥ is orthogonal to N
    let ntn = n_basis.transpose() * &n_basis;
    let ntn_inv = ntn
        .try_inverse()
        .ok_or_else(|| Error::InvalidChart("N basis is singular".into()))?;
    let coordinates = match &complement {
        Some(c) if (n_basis.transpose() * c).amax() > 1e-12 => {
            if k + c.ncols() != ambient {
                return Err(Error::InvalidChart(
                    "an oblique complement must complete N to the ambient space".into(),
                ));
            }
            let mut joint = DMatrix::zeros(ambient, ambient);
            joint.columns_mut(0, k).copy_from(&n_basis);
            joint.columns_mut(k, c.ncols()).copy_from(c);
            let inv = joint
                .try_inverse()
                .ok_or_else(|| Error::InvalidChart("N ⊕ N⊥ is not the ambient space".into()))?;
            inv.rows(0, k).into_owned()
        }
        _ => ntn_inv * n_basis.transpose(),
    };
    let chart = SubmanifoldChart {
        origin,
        n_basis,
        complement,
        radius,
        a,
        coordinates,
    };
    // A takes values in N⊥ on a probe ring
    for j in 0..k {
        let mut q = vec![0.0; k];
        q[j] = 0.5 * radius.min(1.0);
        let aq = chart.graph(&q);
        let leak = linalg::euclidean_norm((&chart.coordinates * DVector::from_column_slice(&aq)).as_slice());
        if leak > 1e-9 * (1.0 + linalg::euclidean_norm(&aq)) {
            return Err(Error::InvalidChart(format!("A(q) has an N-component of size {leak:e}")));
        }
    }
    Ok(chart)
}

/// Two charts of the parabola `y = x²` in `R²`: the graph over the x-axis and
/// the graph over the tangent line at `(x0, x0²)`, rotated by `atan(2 x0)`.
pub struct ChartGraph {
    pub base: SubmanifoldChart,
    pub rotated: SubmanifoldChart,
    pub x0: f64,
    pub theta: f64,
}

impl ChartGraph {
    /// Closed form of the transition `q ↦ τ(q)` from the base chart.
    pub fn transition_oracle(&self, q: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        (q - self.x0) * c + (q * q - self.x0 * self.x0) * s
    }
}

pub fn parabola_charts(x0: f64) -> Result<ChartGraph> {
    if !(x0 > 0.0) {
        return Err(Error::InvalidChart("rotated parabola chart needs x0 > 0".into()));
    }
    let base = graph_chart_build(
        vec![0.0, 0.0],
        DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        Some(DMatrix::from_column_slice(2, 1, &[0.0, 1.0])),
        Arc::new(|q: &[f64]| vec![0.0, q[0] * q[0]]),
        f64::INFINITY,
    )?;
    let theta = (2.0 * x0).atan();
    let (s, c) = theta.sin_cos();
    // the parabola point with tangent coordinate τ: s q² + c q - (x0 c + x0² s + τ) = 0
    let a = move |tau: &[f64]| {
        let rhs = x0 * c + x0 * x0 * s + tau[0];
        let q = (-c + (c * c + 4.0 * s * rhs).sqrt()) / (2.0 * s);
        let w = -(q - x0) * s + (q * q - x0 * x0) * c;
        vec![-w * s, w * c]
    };
    let tau_max = (c * c / (4.0 * s) + x0 * c + x0 * x0 * s).max(0.0);
    let rotated = graph_chart_build(
        vec![x0, x0 * x0],
        DMatrix::from_column_slice(2, 1, &[c, s]),
        Some(DMatrix::from_column_slice(2, 1, &[-s, c])),
        Arc::new(a),
        tau_max,
    )?;
    Ok(ChartGraph {
        base,
        rotated,
        x0,
        theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_chart_is_inclusion() {
        let ch = graph_chart_build(
            vec![0.0; 3],
            DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
            None,
            Arc::new(|_: &[f64]| vec![0.0; 3]),
            1.0,
        )
        .unwrap();
        assert_eq!(ch.gamma(&[0.3]).unwrap(), vec![0.3, 0.0, 0.0]);
        assert!(ch.injective_on(&[vec![0.1], vec![-0.4]]).unwrap());
    }

    #[test]
    fn tilted_graph_rejected() {
        let res = graph_chart_build(
            vec![0.0; 2],
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            None,
            Arc::new(|q: &[f64]| vec![0.0, 0.5 * q[0]]),
            1.0,
        );
        assert!(matches!(res, Err(Error::InvalidChart(_))));
    }
}

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::scale::ScScale;
use super::vector::ScVector;
use crate::error::{Error, Result};
use crate::linalg::{self, RANK_CUTOFF};

pub type LinearEvaluator = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum OperatorRepr {
    /// The same matrix acts on every level.
    Matrix(DMatrix<f64>),
    /// `I + U Vᵀ` on a scale mapping to itself.
    IdentityPlusLowRank { u: DMatrix<f64>, v: DMatrix<f64> },
    /// Matrix-free action, level independent.
    Evaluator(LinearEvaluator),
}

impl fmt::Debug for OperatorRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorRepr::Matrix(m) => write!(f, "Matrix({}x{})", m.nrows(), m.ncols()),
            OperatorRepr::IdentityPlusLowRank { u, .. } => {
                write!(f, "IdentityPlusLowRank(n={}, r={})", u.nrows(), u.ncols())
            }
            OperatorRepr::Evaluator(_) => write!(f, "Evaluator"),
        }
    }
}

/// A linear map `E -> F` sending each `E_m` into `F_m`.
#[derive(Clone, Debug)]
pub struct LinearScOperator {
    source: Arc<ScScale>,
    target: Arc<ScScale>,
    repr: OperatorRepr,
}

/// Subspace given either by an orthonormal basis or as the orthogonal
/// complement of one (useful when the complement is huge).
#[derive(Clone, Debug)]
pub enum Subspace {
    Basis(DMatrix<f64>),
    OrthComplementOf(DMatrix<f64>),
}

impl Subspace {
    pub fn dim(&self, ambient: usize) -> usize {
        match self {
            Subspace::Basis(b) => b.ncols(),
            Subspace::OrthComplementOf(b) => ambient - b.ncols(),
        }
    }

    /// Orthogonal projection onto the subspace.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Subspace::Basis(b) => b * (b.transpose() * x),
            Subspace::OrthComplementOf(b) => x - b * (b.transpose() * x),
        }
    }

    /// Orthonormal basis as columns (assembles the complement if needed).
    pub fn basis(&self, ambient: usize) -> DMatrix<f64> {
        match self {
            Subspace::Basis(b) => b.clone(),
            Subspace::OrthComplementOf(b) => linalg::orthogonal_complement(b, ambient),
        }
    }
}

/// Kernel, complement, image and cokernel of a Fredholm operator.
#[derive(Clone, Debug)]
pub struct ScFredholmData {
    pub kernel: DMatrix<f64>,
    pub complement: Subspace,
    pub image: Subspace,
    pub cokernel: DMatrix<f64>,
    pub index: i64,
    pub rank: usize,
    /// Relative singular-value cutoff used for the rank decision.
    pub cutoff: f64,
    /// Relative residual of `T = T|_X ∘ P_X` on seeded samples.
    pub reconstruction_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FredholmSummary {
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    pub index: i64,
    pub rank: usize,
    pub cutoff: f64,
    pub reconstruction_residual: f64,
}

impl ScFredholmData {
    pub fn summary(&self) -> FredholmSummary {
        FredholmSummary {
            kernel_dim: self.kernel.ncols(),
            cokernel_dim: self.cokernel.ncols(),
            index: self.index,
            rank: self.rank,
            cutoff: self.cutoff,
            reconstruction_residual: self.reconstruction_residual,
        }
    }
}

impl LinearScOperator {
    pub fn matrix(source: &Arc<ScScale>, target: &Arc<ScScale>, m: DMatrix<f64>) -> Result<Self> {
        if m.ncols() != source.dim() {
            return Err(Error::DimensionMismatch {
                expected: source.dim(),
                found: m.ncols(),
            });
        }
        if m.nrows() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                found: m.nrows(),
            });
        }
        Self::check_levels(source, target)?;
        Ok(LinearScOperator {
            source: Arc::clone(source),
            target: Arc::clone(target),
            repr: OperatorRepr::Matrix(m),
        })
    }

    pub fn identity(scale: &Arc<ScScale>) -> Self {
        let n = scale.dim();
        LinearScOperator {
            source: Arc::clone(scale),
            target: Arc::clone(scale),
            repr: OperatorRepr::Matrix(DMatrix::identity(n, n)),
        }
    }

    pub fn identity_plus_low_rank(scale: &Arc<ScScale>, u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        let n = scale.dim();
        if u.nrows() != n || v.nrows() != n || u.ncols() != v.ncols() {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: u.nrows().max(v.nrows()),
            });
        }
        Ok(LinearScOperator {
            source: Arc::clone(scale),
            target: Arc::clone(scale),
            repr: OperatorRepr::IdentityPlusLowRank { u, v },
        })
    }

    pub fn evaluator(source: &Arc<ScScale>, target: &Arc<ScScale>, f: LinearEvaluator) -> Result<Self> {
        Self::check_levels(source, target)?;
        Ok(LinearScOperator {
            source: Arc::clone(source),
            target: Arc::clone(target),
            repr: OperatorRepr::Evaluator(f),
        })
    }

    fn check_levels(source: &ScScale, target: &ScScale) -> Result<()> {
        if source.max_level() != target.max_level() {
            return Err(Error::MismatchedMaxLevel(source.max_level(), target.max_level()));
        }
        Ok(())
    }

    pub fn source(&self) -> &Arc<ScScale> {
        &self.source
    }

    pub fn target(&self) -> &Arc<ScScale> {
        &self.target
    }

    pub fn repr(&self) -> &OperatorRepr {
        &self.repr
    }

    pub fn apply_raw(&self, x: &[f64]) -> Vec<f64> {
        match &self.repr {
            OperatorRepr::Matrix(m) => (m * DVector::from_column_slice(x)).iter().cloned().collect(),
            OperatorRepr::IdentityPlusLowRank { u, v } => {
                let xv = DVector::from_column_slice(x);
                (&xv + u * (v.transpose() * &xv)).iter().cloned().collect()
            }
            OperatorRepr::Evaluator(f) => f(x),
        }
    }

    /// Applies the operator, keeping the level of the input.
    pub fn apply(&self, x: &ScVector) -> Result<ScVector> {
        if **x.scale() != *self.source {
            return Err(Error::DimensionMismatch {
                expected: self.source.dim(),
                found: x.scale().dim(),
            });
        }
        ScVector::new(&self.target, self.apply_raw(x.coeffs()), x.level())
    }

    /// Sampled lower estimate of the level-`m` operator norm.
    pub fn estimate_norm(&self, m: usize, samples: usize, seed: u64) -> Result<f64> {
        let g = linalg::gaussian_matrix(self.source.dim(), samples, seed);
        let mut best: f64 = 0.0;
        for j in 0..samples {
            let x: Vec<f64> = g.column(j).iter().cloned().collect();
            let nx = self.source.norm_of(&x, m)?;
            if nx > 0.0 {
                best = best.max(self.target.norm_of(&self.apply_raw(&x), m)? / nx);
            }
        }
        Ok(best)
    }

    fn dense(&self) -> Option<DMatrix<f64>> {
        match &self.repr {
            OperatorRepr::Matrix(m) => Some(m.clone()),
            OperatorRepr::Evaluator(f) if self.source.is_finite_dim() && self.target.is_finite_dim() => {
                let n = self.source.dim();
                let mut m = DMatrix::zeros(self.target.dim(), n);
                let mut e = vec![0.0; n];
                for j in 0..n {
                    e[j] = 1.0;
                    let col = f(&e);
                    e[j] = 0.0;
                    for (i, v) in col.iter().enumerate() {
                        m[(i, j)] = *v;
                    }
                }
                Some(m)
            }
            _ => None,
        }
    }

    /// Kernel/image splitting with a singular-value cutoff of `1e-10 σ_max`.
    pub fn fredholm_split(&self) -> Result<ScFredholmData> {
        let n = self.source.dim();
        let p = self.target.dim();
        let (kernel, complement, image, cokernel, rank) = if let Some(m) = self.dense() {
            let svd = linalg::sorted_svd(&m);
            let rank = linalg::numerical_rank(&svd.singular_values);
            let row = svd.v.columns(0, rank).into_owned();
            let col = svd.u.columns(0, rank).into_owned();
            let kernel = linalg::orthogonal_complement(&row, n);
            let cokernel = linalg::orthogonal_complement(&col, p);
            (kernel, Subspace::Basis(row), Subspace::Basis(col), cokernel, rank)
        } else if let OperatorRepr::IdentityPlusLowRank { u, v } = &self.repr {
            let r = u.ncols();
            let small = DMatrix::identity(r, r) + v.transpose() * u;
            let reference = 1.0 + u.norm() * v.norm();
            let kernel = linalg::orthonormal_range(
                &(u * linalg::null_space_relative_to(&small, reference)),
                false,
            )?;
            let small_t = DMatrix::identity(r, r) + u.transpose() * v;
            let cokernel = linalg::orthonormal_range(
                &(v * linalg::null_space_relative_to(&small_t, reference)),
                false,
            )?;
            let rank = n - kernel.ncols();
            (
                kernel.clone(),
                Subspace::OrthComplementOf(kernel),
                Subspace::OrthComplementOf(cokernel.clone()),
                cokernel,
                rank,
            )
        } else {
            return Err(Error::BackendUnsupported(
                "Fredholm splitting of a general grid operator".into(),
            ));
        };
        let index = kernel.ncols() as i64 - cokernel.ncols() as i64;
        let reconstruction_residual = self.reconstruction_residual(&complement);
        Ok(ScFredholmData {
            kernel,
            complement,
            image,
            cokernel,
            index,
            rank,
            cutoff: RANK_CUTOFF,
            reconstruction_residual,
        })
    }

    fn reconstruction_residual(&self, complement: &Subspace) -> f64 {
        let n = self.source.dim();
        if n == 0 {
            return 0.0;
        }
        let g = linalg::gaussian_matrix(n, 4, 0x5eed);
        let mut worst: f64 = 0.0;
        for j in 0..4 {
            let x: DVector<f64> = g.column(j).into_owned();
            let px = complement.project(&x);
            let tx = self.apply_raw(x.as_slice());
            let tpx = self.apply_raw(px.as_slice());
            let scale = linalg::euclidean_norm(&tx).max(x.norm());
            worst = worst.max(linalg::euclidean_norm(&linalg::sub(&tx, &tpx)) / scale);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_index_zero() {
        let e = Arc::new(ScScale::finite_dim(5, 2));
        let d = LinearScOperator::identity(&e).fredholm_split().unwrap();
        assert_eq!((d.kernel.ncols(), d.cokernel.ncols(), d.index), (0, 0, 0));
    }

    #[test]
    fn zero_map_index() {
        let e = Arc::new(ScScale::finite_dim(3, 1));
        let f = Arc::new(ScScale::finite_dim(2, 1));
        let t = LinearScOperator::matrix(&e, &f, DMatrix::zeros(2, 3)).unwrap();
        let d = t.fredholm_split().unwrap();
        assert_eq!(d.index, 1);
        assert_eq!(d.kernel.ncols(), 3);
    }

    #[test]
    fn low_rank_perturbation_on_grid() {
        let e = Arc::new(ScScale::weighted_grid(2.0, 0.25, vec![0.0, 0.5]).unwrap());
        let n = e.dim();
        // I - w wᵀ with |w| = 1 kills w
        let mut w = DVector::from_fn(n, |i, _| (i as f64 * 0.3).sin());
        w /= w.norm();
        let u = DMatrix::from_columns(&[-w.clone()]);
        let v = DMatrix::from_columns(&[w.clone()]);
        let t = LinearScOperator::identity_plus_low_rank(&e, u, v).unwrap();
        let d = t.fredholm_split().unwrap();
        assert_eq!(d.kernel.ncols(), 1);
        assert_eq!(d.cokernel.ncols(), 1);
        assert_eq!(d.index, 0);
        assert!(d.reconstruction_residual < 1e-12);
    }

    #[test]
    fn general_grid_evaluator_unsupported() {
        let e = Arc::new(ScScale::weighted_grid(2.0, 0.25, vec![0.0, 0.5]).unwrap());
        let t = LinearScOperator::evaluator(&e, &e, Arc::new(|x: &[f64]| x.to_vec())).unwrap();
        assert!(matches!(t.fredholm_split(), Err(Error::BackendUnsupported(_))));
    }
}

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::germ::{BasicGerm, GermSpec};
use crate::error::{Error, Result};
use crate::linalg;
use crate::sc_core::ScScale;

/// `B(a, w) = Q w + g(a)` with `Q = 0.4 × orthogonal` on a finite-dimensional
/// fiber and `g(a) = G a + 0.2 |a|² v`.
#[derive(Clone, Debug)]
pub struct AffineGermFixture {
    pub germ: BasicGerm,
    pub q: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub v: DVector<f64>,
}

/// Spectral norm of `Q` in [`affine_fixture`].
pub const AFFINE_NORM: f64 = 0.4;

impl AffineGermFixture {
    pub fn g_of(&self, a: &[f64]) -> DVector<f64> {
        let a = DVector::from_column_slice(a);
        &self.g * &a + &self.v * (0.2 * a.norm_squared())
    }

    /// `(I - Q)⁻¹ g(a)` by a direct linear solve.
    pub fn oracle(&self, a: &[f64]) -> Vec<f64> {
        let n = self.q.nrows();
        let m = DMatrix::identity(n, n) - &self.q;
        m.lu().solve(&self.g_of(a)).expect("I - Q is invertible").as_slice().to_vec()
    }
}

pub fn affine_fixture(fiber_dim: usize, param_dim: usize, max_level: usize, seed: u64) -> Result<AffineGermFixture> {
    let qr = linalg::gaussian_matrix(fiber_dim, fiber_dim, seed).qr();
    let q = qr.q() * AFFINE_NORM;
    let g = linalg::gaussian_matrix(fiber_dim, param_dim, seed + 1) * 0.5;
    let v = DVector::from_column_slice(linalg::gaussian_matrix(fiber_dim, 1, seed + 2).as_slice());
    let fiber = Arc::new(ScScale::finite_dim(fiber_dim, max_level));
    let (qc, gc, vc) = (q.clone(), g.clone(), v.clone());
    let germ = BasicGerm::new(GermSpec {
        param_dim,
        quadrant_count: 0,
        residue_dim: 0,
        fiber,
        contraction: Arc::new(move |a, w| {
            let a = DVector::from_column_slice(a);
            let out = &qc * DVector::from_column_slice(w) + &gc * &a + &vc * (0.2 * a.norm_squared());
            Ok(out.as_slice().to_vec())
        }),
        residue: None,
        epsilons: vec![AFFINE_NORM; max_level + 1],
        radii: Some(vec![1.0; max_level + 1]),
    })?;
    Ok(AffineGermFixture { germ, q, g, v })
}

/// `B(a, w)(s) = 0.4 w(-s) + a φ(s)` on a symmetric weighted grid with
/// `φ(s) = exp(-s²)`. Reflection is an isometry on every level, so `B` is a
/// 0.4-contraction on all levels, and `δ(a) = a (φ + 0.4 φ(-·)) / 0.84`.
#[derive(Clone, Debug)]
pub struct ReflectionGermFixture {
    pub germ: BasicGerm,
    pub phi: Vec<f64>,
}

impl ReflectionGermFixture {
    pub fn oracle(&self, a: f64) -> Vec<f64> {
        let n = self.phi.len();
        (0..n)
            .map(|i| a * (self.phi[i] + 0.4 * self.phi[n - 1 - i]) / 0.84)
            .collect()
    }
}

pub fn reflection_fixture(scale: &Arc<ScScale>) -> Result<ReflectionGermFixture> {
    let grid = scale
        .grid()
        .ok_or_else(|| Error::BackendUnsupported("reflection fixture needs a weighted grid".into()))?;
    let phi: Vec<f64> = grid.coordinates().iter().map(|s| (-s * s).exp()).collect();
    let p = phi.clone();
    let levels = scale.max_level() + 1;
    let germ = BasicGerm::new(GermSpec {
        param_dim: 1,
        quadrant_count: 0,
        residue_dim: 0,
        fiber: Arc::clone(scale),
        contraction: Arc::new(move |a, w| {
            let n = w.len();
            Ok((0..n).map(|i| 0.4 * w[n - 1 - i] + a[0] * p[i]).collect())
        }),
        residue: None,
        epsilons: vec![0.4; levels],
        radii: Some(vec![1.0; levels]),
    })?;
    Ok(ReflectionGermFixture { germ, phi })
}

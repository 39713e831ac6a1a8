use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::retracts::{bump_splicing, splicing_to_retraction, BumpFamily, BumpProfile, Retraction, MEMBERSHIP_TOL};
use crate::sc_calculus::ScMap;
use crate::sc_core::{ScScale, ScVector};

pub type PointMap = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;
/// `(y, h) -> φ(y) h`.
pub type FiberProjection = Arc<dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// Condition numbers at or above this count as a failed isomorphism.
pub const MAX_FILLING_CONDITION: f64 = 1e8;
const AGREEMENT_TOL: f64 = 1e-9;
const FD_STEP: f64 = 1e-6;

/// A section `f` on `O = r(U)` of the bundle retracted by `R(y, h) = (r(y),
/// φ(y) h)`, together with an extension `f̄` to `U`.
#[derive(Clone)]
pub struct FillingData {
    pub retraction: Retraction,
    pub fiber_dim: usize,
    phi: FiberProjection,
    section: PointMap,
    filled: PointMap,
}

impl fmt::Debug for FillingData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FillingData")
            .field("base_dim", &self.retraction.scale().dim())
            .field("fiber_dim", &self.fiber_dim)
            .finish()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FillingReport {
    /// Max `|f̄(p) - f(p)|` over the retracted samples `p = r(y)`.
    pub agreement_residual: f64,
    pub agreement_pass: bool,
    /// Samples solving `f̄(y) = φ(r(y)) f̄(y)`.
    pub solutions_found: usize,
    /// Of those, the ones off the retract.
    pub solutions_outside: usize,
    pub membership_pass: bool,
    pub kernel_dim: usize,
    pub fiber_kernel_dim: usize,
    pub condition_number: f64,
    pub isomorphism_pass: bool,
    pub pass: bool,
}

impl FillingData {
    pub fn new(
        retraction: Retraction,
        fiber_dim: usize,
        phi: FiberProjection,
        section: PointMap,
        filled: PointMap,
    ) -> Self {
        FillingData {
            retraction,
            fiber_dim,
            phi,
            section,
            filled,
        }
    }

    /// `(Id - φ(r(y))) f̄(y)`.
    pub fn defect(&self, y: &[f64]) -> Result<Vec<f64>> {
        let fy = (self.filled)(y)?;
        let ry = self.retraction.map().eval_raw(y)?;
        Ok(linalg::sub(&fy, &(self.phi)(&ry, &fy)?))
    }
}

fn matrix_of(n_in: usize, n_out: usize, mut col: impl FnMut(&[f64]) -> Result<Vec<f64>>) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(n_out, n_in);
    let mut e = vec![0.0; n_in];
    for j in 0..n_in {
        e[j] = 1.0;
        let c = col(&e)?;
        e[j] = 0.0;
        for i in 0..n_out {
            m[(i, j)] = c[i];
        }
    }
    Ok(m)
}

/// Checks agreement on `O`, that solutions of the filled problem lie in `O`,
/// and that the linearized defect maps `ker Dr(x)` isomorphically onto
/// `ker φ(x)`.
pub fn filling_verify(fd: &FillingData, x: &ScVector, samples: &[ScVector]) -> Result<FillingReport> {
    let r = &fd.retraction;
    let scale = r.scale();
    let mut agreement_residual: f64 = 0.0;
    let mut solutions_found = 0;
    let mut solutions_outside = 0;
    for (i, y) in samples.iter().enumerate() {
        let p = r.map().eval_raw(y.coeffs()).map_err(|e| Error::at_node(i, e))?;
        let diff = linalg::sub(&(fd.filled)(&p)?, &(fd.section)(&p)?);
        agreement_residual = agreement_residual.max(linalg::euclidean_norm(&diff));
        if linalg::euclidean_norm(&fd.defect(y.coeffs())?) <= AGREEMENT_TOL {
            solutions_found += 1;
            let off = scale.norm_of(&linalg::sub(&p, y.coeffs()), 0)?;
            if off > MEMBERSHIP_TOL {
                solutions_outside += 1;
            }
        }
    }

    let n = scale.dim();
    let xs = x.coeffs();
    let failure = std::sync::Mutex::new(None);
    let jac = linalg::fd_jacobian(
        |y| match fd.defect(y) {
            Ok(v) => v,
            Err(e) => {
                *failure.lock().expect("unpoisoned") = Some(e);
                vec![0.0; fd.fiber_dim]
            }
        },
        xs,
        fd.fiber_dim,
        FD_STEP,
    );
    if let Some(e) = failure.into_inner().expect("unpoisoned") {
        return Err(e);
    }
    let dr = matrix_of(n, n, |h| r.map().derivative_raw(xs, h, true))?;
    let rx = r.map().eval_raw(xs)?;
    let phi = matrix_of(fd.fiber_dim, fd.fiber_dim, |h| (fd.phi)(&rx, h))?;
    let k_base = linalg::null_space(&dr);
    let k_fiber = linalg::null_space(&phi);
    let (kernel_dim, fiber_kernel_dim) = (k_base.ncols(), k_fiber.ncols());
    let condition_number = if kernel_dim != fiber_kernel_dim {
        f64::INFINITY
    } else if kernel_dim == 0 {
        1.0
    } else {
        let restricted = k_fiber.transpose() * &jac * &k_base;
        linalg::condition_number(&restricted)
    };
    let agreement_pass = agreement_residual <= AGREEMENT_TOL;
    let membership_pass = solutions_outside == 0;
    let isomorphism_pass = condition_number < MAX_FILLING_CONDITION;
    Ok(FillingReport {
        agreement_residual,
        agreement_pass,
        solutions_found,
        solutions_outside,
        membership_pass,
        kernel_dim,
        fiber_kernel_dim,
        condition_number,
        isomorphism_pass,
        pass: agreement_pass && membership_pass && isomorphism_pass,
    })
}

/// `O = U`, `φ = Id` and `f̄ = f = ` the given map.
pub fn trivial_filling(scale: &Arc<ScScale>, f: PointMap) -> Result<FillingData> {
    let r = Retraction::new(ScMap::identity(scale))?;
    Ok(FillingData::new(
        r,
        scale.dim(),
        Arc::new(|_, h| Ok(h.to_vec())),
        Arc::clone(&f),
        f,
    ))
}

/// The bump splicing model `R ⊕ E` with `φ(s, e) = π_s`, the section
/// `f(s, e) = π_s(e) - 0.3 f̂_s` (zero for `s <= 0`) and the filler
/// `f̄(y) = f(r(y)) + c (e - π_s e)` with `c = 1`, or `c = 0` for the
/// deliberately degenerate variant.
pub fn bump_filling_fixture(fiber: &Arc<ScScale>, degenerate: bool) -> Result<FillingData> {
    let beta = BumpProfile::polynomial();
    let r = splicing_to_retraction(&bump_splicing(beta.clone(), fiber, &[-1.0, 1.0])?)?;
    let fam = Arc::new(BumpFamily::new(beta, fiber)?);
    let f1 = Arc::clone(&fam);
    let phi: FiberProjection = Arc::new(move |y, h| f1.project(y[0], h));
    let f2 = Arc::clone(&fam);
    let section: PointMap = Arc::new(move |y| {
        let (s, e) = (y[0], &y[1..]);
        let mut out = f2.project(s, e)?;
        if let Some(fr) = f2.frame(s)? {
            out = linalg::axpy(-0.3, &fr.f, &out);
        }
        Ok(out)
    });
    let c = if degenerate { 0.0 } else { 1.0 };
    let (f3, sec, rmap) = (Arc::clone(&fam), Arc::clone(&section), r.map().clone());
    let filled: PointMap = Arc::new(move |y| {
        let ry = rmap.eval_raw(y)?;
        let base = sec(&ry)?;
        let e = &y[1..];
        let off = linalg::sub(e, &f3.project(y[0], e)?);
        Ok(linalg::axpy(c, &off, &base))
    });
    Ok(FillingData::new(r, fiber.dim(), phi, section, filled))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_filling_passes() {
        let e = Arc::new(ScScale::finite_dim(3, 1));
        let fd = trivial_filling(&e, Arc::new(|y: &[f64]| Ok(linalg::scale(2.0, y)))).unwrap();
        let x = ScVector::smooth(&e, vec![0.1, 0.2, 0.3]).unwrap();
        let rep = filling_verify(&fd, &x, std::slice::from_ref(&x)).unwrap();
        assert!(rep.pass);
        assert_eq!((rep.kernel_dim, rep.fiber_kernel_dim), (0, 0));
    }
}

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::sc_calculus::{tangent_scale, Domain, ScMap};
use crate::sc_core::{PartialQuadrant, ScScale, ScVector};

/// Fixed-point residual tolerance for retract membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Idempotence tolerance per level.
pub const IDEMPOTENCE_TOL: f64 = 1e-9;

/// An idempotent level-preserving self-map `r: U -> U` of a relatively open
/// subset of a partial quadrant.
#[derive(Clone, Debug)]
pub struct Retraction {
    map: ScMap,
}

#[derive(Clone, Debug, Serialize)]
pub struct RetractionReport {
    /// Worst `|r(r(x)) - r(x)|_m` per tested level.
    pub residual_per_level: Vec<f64>,
    pub samples: usize,
    pub pass: bool,
}

impl Retraction {
    pub fn new(map: ScMap) -> Result<Self> {
        if map.source() != map.target() {
            return Err(Error::TypeMismatch(
                "a retraction maps a scale to itself".into(),
            ));
        }
        Ok(Retraction { map })
    }

    pub fn map(&self) -> &ScMap {
        &self.map
    }

    pub fn scale(&self) -> &Arc<ScScale> {
        self.map.source()
    }

    pub fn quadrant(&self) -> &PartialQuadrant {
        &self.map.domain().quadrant
    }

    pub fn apply(&self, x: &ScVector) -> Result<ScVector> {
        self.map.eval(x)
    }

    /// `x ∈ O` iff `|r(x) - x|_0 <= 1e-9`.
    pub fn contains(&self, x: &ScVector) -> Result<bool> {
        let rx = self.apply(x)?;
        Ok(rx.sub(x)?.at_level(0)?.level_norm(0)? <= MEMBERSHIP_TOL)
    }

    /// Idempotence residuals on the samples for levels `0..=max_level`.
    pub fn retraction_check(&self, samples: &[ScVector], max_level: usize) -> Result<RetractionReport> {
        let mut residual_per_level = vec![0.0_f64; max_level + 1];
        for (i, x) in samples.iter().enumerate() {
            let rx = self.apply(x).map_err(|e| Error::at_node(i, e))?;
            let rrx = self.apply(&rx).map_err(|e| Error::at_node(i, e))?;
            let d = rrx.sub(&rx)?;
            for (m, r) in residual_per_level.iter_mut().enumerate() {
                if m <= d.level() {
                    *r = r.max(d.level_norm(m)?);
                }
            }
        }
        Ok(RetractionReport {
            pass: residual_per_level.iter().all(|r| *r <= IDEMPOTENCE_TOL),
            residual_per_level,
            samples: samples.len(),
        })
    }

    /// `Tr(x, h) = (r(x), Dr(x) h)` on the tangent scale; a retraction again.
    pub fn tangent_retraction(&self) -> Result<Retraction> {
        let e = self.scale();
        let te = Arc::new(tangent_scale(e)?);
        let n = e.dim();
        let quadrant = PartialQuadrant::new(2 * n, self.quadrant().indices().to_vec())?;
        let r = self.map.clone();
        let eval = Arc::new(move |xh: &[f64]| -> Result<Vec<f64>> {
            let (x, h) = xh.split_at(n);
            let mut out = r.eval_raw(x)?;
            out.extend(r.derivative_raw(x, h, true)?);
            Ok(out)
        });
        Retraction::new(ScMap::new(
            format!("T{}", self.map.name),
            &te,
            &te,
            Domain::quadrant(quadrant),
            eval,
            None,
        )?)
    }

    /// Restriction to `U' = r⁻¹(O')` where `O'` is the part of `O` inside the
    /// level-0 ball of the given radius.
    pub fn restrict_to_image_ball(&self, center: Vec<f64>, radius: f64) -> Result<Retraction> {
        let r = self.map.clone();
        let scale = Arc::clone(self.scale());
        let s2 = Arc::clone(&scale);
        let c2 = center.clone();
        let eval = Arc::new(move |x: &[f64]| -> Result<Vec<f64>> {
            let y = r.eval_raw(x)?;
            let d = s2.norm_of(&linalg::sub(&y, &c2), 0)?;
            if d >= radius {
                return Err(Error::DomainExit(format!(
                    "r(x) is at distance {d} from the center of the restricted image"
                )));
            }
            Ok(y)
        });
        let r3 = self.map.clone();
        let derivative = Arc::new(move |x: &[f64], h: &[f64]| r3.derivative_raw(x, h, true));
        Retraction::new(ScMap::new(
            format!("{}|restricted", self.map.name),
            &scale,
            &scale,
            self.map.domain().clone(),
            eval,
            Some(derivative),
        )?)
    }
}

/// A local sc-model `(O, C, E)` with `O` witnessed by a retraction.
#[derive(Clone, Debug)]
pub struct LocalScModel {
    pub retraction: Retraction,
}

impl LocalScModel {
    pub fn new(retraction: Retraction) -> Self {
        LocalScModel { retraction }
    }

    pub fn contains(&self, x: &ScVector) -> Result<bool> {
        self.retraction.contains(x)
    }

    pub fn quadrant(&self) -> &PartialQuadrant {
        self.retraction.quadrant()
    }

    pub fn scale(&self) -> &Arc<ScScale> {
        self.retraction.scale()
    }
}

/// Orthonormal basis (coefficient columns) of `T_x O = range Dr(x)`.
pub fn retract_tangent_basis(r: &Retraction, x: &ScVector) -> Result<DMatrix<f64>> {
    if x.level() < 1 {
        return Err(Error::LevelOutOfRange {
            requested: 1,
            declared: x.level(),
        });
    }
    if !r.contains(x)? {
        return Err(Error::DomainExit("point is not on the retract".into()));
    }
    let n = r.scale().dim();
    let map = r.map();
    let xs = x.coeffs().to_vec();
    let failure = std::sync::Mutex::new(None);
    let basis = linalg::operator_range(
        |h| match map.derivative_raw(&xs, h, true) {
            Ok(v) => v,
            Err(e) => {
                *failure.lock().expect("unpoisoned") = Some(e);
                vec![0.0; n]
            }
        },
        n,
        n,
        0x7a9e,
    )?;
    if let Some(e) = failure.into_inner().expect("unpoisoned") {
        return Err(e);
    }
    Ok(basis)
}

/// Largest principal-angle gap between `range Dr(x)` and `range Ds(x)` over
/// samples lying on the common image.
pub fn tangent_independence_check(r: &Retraction, s: &Retraction, samples: &[ScVector]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in samples {
        let rx = r.apply(x)?.sub(x)?.at_level(0)?.level_norm(0)?;
        let sx = s.apply(x)?.sub(x)?.at_level(0)?.level_norm(0)?;
        if rx > MEMBERSHIP_TOL || sx > MEMBERSHIP_TOL {
            return Err(Error::ImageMismatch(rx.max(sx)));
        }
        let a = retract_tangent_basis(r, x)?;
        let b = retract_tangent_basis(s, x)?;
        worst = worst.max(linalg::subspace_gap(&a, &b));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn projection(e: &Arc<ScScale>, p: DMatrix<f64>) -> Retraction {
        Retraction::new(ScMap::linear("p", e, e, p).unwrap()).unwrap()
    }

    #[test]
    fn identity_is_a_retraction_with_full_tangent() {
        let e = Arc::new(ScScale::finite_dim(3, 2));
        let r = Retraction::new(ScMap::identity(&e)).unwrap();
        let x = ScVector::smooth(&e, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(r.retraction_check(std::slice::from_ref(&x), 2).unwrap().pass);
        assert_eq!(retract_tangent_basis(&r, &x).unwrap().ncols(), 3);
    }

    #[test]
    fn equal_range_projections_have_zero_gap() {
        let e = Arc::new(ScScale::finite_dim(3, 2));
        let p1 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        // oblique projection onto the same plane along (1, 1, 1)
        let p2 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, -1.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0]);
        let (r, s) = (projection(&e, p1), projection(&e, p2));
        let x = ScVector::smooth(&e, vec![0.5, -1.0, 0.0]).unwrap();
        assert!(tangent_independence_check(&r, &s, &[x]).unwrap() <= 1e-12);
        let off = ScVector::smooth(&e, vec![0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            tangent_independence_check(&r, &s, &[off]),
            Err(Error::ImageMismatch(_))
        ));
    }

    #[test]
    fn tangent_of_projection_is_retraction() {
        let e = Arc::new(ScScale::finite_dim(2, 2));
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let tr = projection(&e, p).tangent_retraction().unwrap();
        let x = ScVector::smooth(tr.scale(), vec![0.3, 0.7, -1.0, 2.0]).unwrap();
        assert!(tr.retraction_check(&[x], 1).unwrap().pass);
    }
}

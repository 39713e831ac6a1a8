use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::sc_calculus::{Domain, ScMap};
use crate::sc_core::{PartialQuadrant, ScScale, ScVector};

/// Inverse-consistency tolerance on samples.
pub const INVERSE_TOL: f64 = 1e-9;

/// Max over samples of `|d_C(x) - d_{C'}(f(x))|`, with `C` and `C'` the
/// quadrants of the domains of `f` and `f_inv`.
pub fn corner_invariance_check(f: &ScMap, f_inv: &ScMap, samples: &[ScVector]) -> Result<usize> {
    if f.source() != f_inv.target() || f.target() != f_inv.source() {
        return Err(Error::TypeMismatch("f_inv does not reverse f".into()));
    }
    let c_src = &f.domain().quadrant;
    let c_tgt = &f_inv.domain().quadrant;
    let mut worst = 0;
    for (i, x) in samples.iter().enumerate() {
        let y = f.eval(x).map_err(|e| Error::at_node(i, e))?;
        let back = f_inv.eval(&y).map_err(|e| Error::at_node(i, e))?;
        let err = linalg::euclidean_norm(&linalg::sub(back.coeffs(), x.coeffs()));
        if err > INVERSE_TOL * (1.0 + linalg::euclidean_norm(x.coeffs())) {
            return Err(Error::NonInvertible(format!("sample {i}: |f⁻¹(f(x)) - x| = {err:e}")));
        }
        let dx = c_src.degeneracy_index(x.coeffs(), f.source().default_tol())?;
        let dy = c_tgt.degeneracy_index(y.coeffs(), f.target().default_tol())?;
        worst = worst.max(dx.abs_diff(dy));
    }
    Ok(worst)
}

/// A quadrant-preserving diffeomorphism of `[0,∞)²` with its inverse.
#[derive(Clone, Debug)]
pub struct CornerFixture {
    pub name: String,
    pub forward: ScMap,
    pub inverse: ScMap,
}

/// Quadratic polynomial `c0 + c1 x + c2 y + c3 x² + c4 xy + c5 y²`.
#[derive(Clone, Copy, Debug)]
struct Quadratic([f64; 6]);

impl Quadratic {
    fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let c = self.0;
        let v = c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y;
        let dx = c[1] + 2.0 * c[3] * x + c[4] * y;
        let dy = c[2] + c[4] * x + 2.0 * c[5] * y;
        (v, dx, dy)
    }
}

/// `(x e^{p(x,y)}, y e^{q(x,y)})`, optionally followed by the swap, with
/// coefficients of `p`, `q` in `[-0.03, 0.03]`, which keeps the Jacobian
/// diagonally dominant on `[0, 2]²`. Each face `{x = 0}`, `{y = 0}`
/// maps to a face, so degeneracy indices are preserved.
pub fn quadrant_diffeo_fixture(seed: u64) -> Result<CornerFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = || {
        let mut c = [0.0; 6];
        for v in c.iter_mut() {
            *v = rng.random_range(-0.03..0.03);
        }
        Quadratic(c)
    };
    let (p, q) = (coeffs(), coeffs());
    let swap = rng.random_bool(0.5);
    let forward_raw = move |x: &[f64]| -> (Vector2<f64>, Matrix2<f64>) {
        let (a, b) = (x[0], x[1]);
        let (pv, px, py) = p.eval(a, b);
        let (qv, qx, qy) = q.eval(a, b);
        let (ep, eq) = (pv.exp(), qv.exp());
        let mut v = Vector2::new(a * ep, b * eq);
        let mut j = Matrix2::new(ep * (1.0 + a * px), a * ep * py, b * eq * qx, eq * (1.0 + b * qy));
        if swap {
            v.swap_rows(0, 1);
            j.swap_rows(0, 1);
        }
        (v, j)
    };
    let e = Arc::new(ScScale::finite_dim(2, 2));
    let c = PartialQuadrant::leading(2, 2)?;
    let fwd = forward_raw;
    let eval = Arc::new(move |x: &[f64]| Ok(fwd(x).0.as_slice().to_vec()));
    let der = Arc::new(move |x: &[f64], h: &[f64]| {
        Ok((forward_raw(x).1 * Vector2::new(h[0], h[1])).as_slice().to_vec())
    });
    let forward = ScMap::new(
        format!("corner-fixture-{seed}"),
        &e,
        &e,
        Domain::quadrant(c.clone()),
        eval,
        Some(der),
    )?;
    let inv_eval = Arc::new(move |y: &[f64]| {
        let guess = if swap { [y[1], y[0]] } else { [y[0], y[1]] };
        newton_inverse(&forward_raw, y, guess)
    });
    let inverse = ScMap::new(
        format!("corner-fixture-{seed}⁻¹"),
        &e,
        &e,
        Domain::quadrant(c),
        inv_eval,
        None,
    )?;
    Ok(CornerFixture {
        name: format!("random-{seed}"),
        forward,
        inverse,
    })
}

fn newton_inverse(
    f: &impl Fn(&[f64]) -> (Vector2<f64>, Matrix2<f64>),
    y: &[f64],
    guess: [f64; 2],
) -> Result<Vec<f64>> {
    const ITERATIONS: usize = 60;
    let target = Vector2::new(y[0], y[1]);
    let mut x = Vector2::new(guess[0], guess[1]);
    let mut residual = f64::INFINITY;
    for _ in 0..ITERATIONS {
        let (v, j) = f(x.as_slice());
        let r = v - target;
        residual = r.norm();
        if residual <= 1e-14 * (1.0 + target.norm()) {
            return Ok(x.as_slice().to_vec());
        }
        let step = j
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::NonInvertible("singular Jacobian in Newton inverse".into()))?;
        x -= step;
    }
    Err(Error::NonConvergence {
        iterations: ITERATIONS,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_inverts_fixture() {
        let fx = quadrant_diffeo_fixture(3).unwrap();
        let e = fx.forward.source().clone();
        let x = ScVector::smooth(&e, vec![0.7, 1.3]).unwrap();
        let y = fx.forward.eval(&x).unwrap();
        let back = fx.inverse.eval(&y).unwrap();
        assert!(linalg::euclidean_norm(&linalg::sub(back.coeffs(), x.coeffs())) < 1e-12);
    }
}

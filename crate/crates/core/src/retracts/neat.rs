use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::retraction::{retract_tangent_basis, Retraction};
use crate::error::Result;
use crate::linalg;
use crate::sc_core::ScVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct NeatnessReport {
    /// A complement of `T_x O` inside `{quadrant coordinates = 0} ⊂ C`.
    pub complement: Verdict,
    /// A sequence in `O` approaching `x` with constant degeneracy index.
    pub approximation: Verdict,
    pub tangent_dim: usize,
    pub complement_dim: usize,
    pub degeneracy_index: usize,
    /// `"sampled"` or `"constant"` or `"none"`.
    pub sequence_kind: String,
}

impl NeatnessReport {
    pub fn pass(&self) -> bool {
        self.complement == Verdict::Pass && self.approximation == Verdict::Pass
    }
}

const SEQUENCE_LENGTH: usize = 8;
const DIRECTIONS: usize = 6;

/// Checks both neatness conditions of `r` at `x ∈ O`.
///
/// The complement is the orthogonal complement of `T_x O ∩ Z` in
/// `Z = {x_i = 0 for quadrant indices i}`, which lies in `C`; it is accepted
/// when it completes `T_x O` to the whole space. Approximating sequences are
/// searched among `r(x + 2^{-k} v)` for tangent and seeded random directions;
/// if none is found the constant sequence is used for smooth `x`, and the
/// condition is inconclusive otherwise.
pub fn neatness_check(r: &Retraction, x: &ScVector) -> Result<NeatnessReport> {
    let scale = r.scale();
    let quadrant = r.quadrant();
    let n = scale.dim();
    let tol = scale.default_tol();
    let d = quadrant.degeneracy_index(x.coeffs(), tol)?;
    let tangent = retract_tangent_basis(r, x)?;

    // With Z = {x_i = 0 for quadrant indices i}, dim(T ∩ Z) = dim T - rank(T_Q)
    // where T_Q are the quadrant rows of the tangent basis, and the complement
    // M = Z ⊖ (T ∩ Z) completes T to E iff T_Q has full row rank.
    let rows = quadrant.indices();
    let tq = DMatrix::from_fn(rows.len(), tangent.ncols(), |i, j| tangent[(rows[i], j)]);
    let rank_q = if rows.is_empty() || tangent.ncols() == 0 {
        0
    } else {
        linalg::numerical_rank(&linalg::sorted_svd(&tq).singular_values)
    };
    let free = n - rows.len();
    let complement_dim = free - (tangent.ncols() - rank_q);
    let complement = if tangent.ncols() + complement_dim == n {
        Verdict::Pass
    } else {
        Verdict::Fail
    };

    let (approximation, sequence_kind) = match sampled_sequence(r, x, &tangent, d)? {
        true => (Verdict::Pass, "sampled"),
        false if x.is_smooth() => (Verdict::Pass, "constant"),
        false => (Verdict::Inconclusive, "none"),
    };
    Ok(NeatnessReport {
        complement,
        approximation,
        tangent_dim: tangent.ncols(),
        complement_dim,
        degeneracy_index: d,
        sequence_kind: sequence_kind.into(),
    })
}

fn sampled_sequence(r: &Retraction, x: &ScVector, tangent: &DMatrix<f64>, d: usize) -> Result<bool> {
    let scale = r.scale();
    let quadrant = r.quadrant();
    let tol = scale.default_tol();
    let n = scale.dim();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for j in 0..tangent.ncols() {
        let c: Vec<f64> = tangent.column(j).iter().cloned().collect();
        dirs.push(linalg::scale(-1.0, &c));
        dirs.push(c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x4ea7);
    for _ in 0..DIRECTIONS {
        dirs.push((0..n).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    'dirs: for v in dirs {
        let norm = scale.norm_of(&v, 0)?;
        if norm == 0.0 {
            continue;
        }
        let mut last = f64::INFINITY;
        for k in 1..=SEQUENCE_LENGTH {
            let t = 2f64.powi(-(k as i32)) / norm;
            let y0 = linalg::axpy(t, &v, x.coeffs());
            if !quadrant.contains(&y0, tol) {
                continue 'dirs;
            }
            let y = match r.map().eval_raw(&y0) {
                Ok(y) => y,
                Err(_) => continue 'dirs,
            };
            let dist = scale.norm_of(&linalg::sub(&y, x.coeffs()), 0)?;
            let same = matches!(quadrant.degeneracy_index(&y, tol), Ok(dy) if dy == d);
            if !same || dist == 0.0 || dist >= last {
                continue 'dirs;
            }
            last = dist;
        }
        return Ok(true);
    }
    Ok(false)
}

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::sc_core::PartialQuadrant;

/// Bases with condition number at or above this are rejected.
pub const MAX_CONDITION: f64 = 1e6;
const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct GoodPositionReport {
    /// `n + m ∈ C ⟺ n ∈ C` held on every sampled pair with `|m| <= c|n|`.
    pub equivalence_holds: bool,
    /// Some sampled `n ∈ N ∩ C` is interior relative to `N`.
    pub interior_found: bool,
    pub pairs_checked: usize,
    /// Offending `(n, m)` pairs, first few only.
    pub counterexamples: Vec<(Vec<f64>, Vec<f64>)>,
    pub pass: bool,
}

const MAX_COUNTEREXAMPLES: usize = 8;

/// Samples coefficient grids of `resolution` points per axis on `[-1, 1]`
/// for `n ∈ N` and on `[-c|n|, c|n|]` for the complement coefficients.
pub fn good_position_check(
    n_basis: &DMatrix<f64>,
    quadrant: &PartialQuadrant,
    complement: &DMatrix<f64>,
    c: f64,
    resolution: usize,
) -> Result<GoodPositionReport> {
    let dim = quadrant.dim();
    if n_basis.nrows() != dim || complement.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: n_basis.nrows().max(complement.nrows()),
        });
    }
    if !(c > 0.0) {
        return Err(Error::InvalidChart(format!("good-position constant {c} must be positive")));
    }
    let mut joint = DMatrix::zeros(dim, n_basis.ncols() + complement.ncols());
    joint.columns_mut(0, n_basis.ncols()).copy_from(n_basis);
    joint.columns_mut(n_basis.ncols(), complement.ncols()).copy_from(complement);
    let cond = linalg::condition_number(&joint);
    if !(cond < MAX_CONDITION) {
        return Err(Error::DegenerateBasis(cond));
    }

    let res = resolution.max(2);
    let axis: Vec<f64> = (0..res).map(|i| -1.0 + 2.0 * i as f64 / (res - 1) as f64).collect();
    let ns = grid_points(&axis, n_basis.ncols());
    let ms = grid_points(&axis, complement.ncols());

    // coordinates on which N is not identically zero must be strictly positive
    let active: Vec<usize> = quadrant
        .indices()
        .iter()
        .copied()
        .filter(|&i| n_basis.row(i).amax() > MEMBERSHIP_TOL)
        .collect();

    let mut pairs_checked = 0;
    let mut counterexamples = Vec::new();
    let mut equivalence_holds = true;
    let mut interior_found = false;
    for a in &ns {
        let n = n_basis * DVector::from_column_slice(a);
        let n_norm = n.norm();
        let n_in = quadrant.contains(n.as_slice(), MEMBERSHIP_TOL);
        if n_in && active.iter().all(|&i| n[i] > MEMBERSHIP_TOL) && n_norm > 0.0 {
            interior_found = true;
        }
        for b in &ms {
            let raw = complement * DVector::from_column_slice(b);
            // rescale the complement grid onto the ball of radius c|n|
            let m = raw * (c * n_norm);
            if m.norm() > c * n_norm * (1.0 + 1e-12) {
                continue;
            }
            pairs_checked += 1;
            let sum = &n + &m;
            if quadrant.contains(sum.as_slice(), MEMBERSHIP_TOL) != n_in {
                equivalence_holds = false;
                if counterexamples.len() < MAX_COUNTEREXAMPLES {
                    counterexamples.push((n.as_slice().to_vec(), m.as_slice().to_vec()));
                }
            }
        }
    }
    Ok(GoodPositionReport {
        pass: equivalence_holds && interior_found,
        equivalence_holds,
        interior_found,
        pairs_checked,
        counterexamples,
    })
}

fn grid_points(axis: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    out
}

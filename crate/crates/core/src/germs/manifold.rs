use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::germ::{solve_germ, BasicGerm, SolveOptions};
use crate::error::{Error, Result};
use crate::linalg;
use crate::retracts::good_position_check;
use crate::sc_core::PartialQuadrant;

/// Smallest admissible singular value of the reduced linearization.
pub const SURJECTIVITY_TOL: f64 = 1e-8;
const FD_STEP: f64 = 1e-6;
const CHORD_ITERATIONS: usize = 60;
const GOOD_POSITION_CONSTANT: f64 = 0.5;

#[derive(Clone, Debug, Serialize)]
pub struct ManifoldSample {
    /// Kernel coordinate.
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub w: Vec<f64>,
    pub degeneracy_index: usize,
    /// Smallest singular value of the reduced linearization at the sample,
    /// `None` when there is no residue part.
    pub min_singular: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalManifold {
    /// `n - N`, the Fredholm index.
    pub dimension: usize,
    pub base_min_singular: Option<f64>,
    /// Whether the kernel is in good position to the parameter quadrant
    /// (`None` without quadrant coordinates).
    pub kernel_in_good_position: Option<bool>,
    pub samples: Vec<ManifoldSample>,
    /// All sampled solutions have a surjective linearization.
    pub all_surjective: bool,
}

/// `a -> residue(a, δ(a))` with `δ` solved on level 0.
fn reduced_residue(g: &BasicGerm, a: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = solve_germ(g, a, 0, opts)?.w;
    Ok((g.residue_at(a, &w)?, w))
}

/// `N × n` Jacobian of the reduced residue, forward differences along
/// quadrant coordinates sitting on their face.
fn reduced_jacobian(g: &BasicGerm, a: &[f64], opts: &SolveOptions) -> Result<DMatrix<f64>> {
    let nres = g.residue_dim;
    let mut jac = DMatrix::zeros(nres, a.len());
    let (r0, _) = reduced_residue(g, a, opts)?;
    for i in 0..a.len() {
        let mut plus = a.to_vec();
        plus[i] += FD_STEP;
        let rp = reduced_residue(g, &plus, opts)?.0;
        let forward = i < g.quadrant_count && a[i] - FD_STEP < 0.0;
        let col = if forward {
            linalg::scale(1.0 / FD_STEP, &linalg::sub(&rp, &r0))
        } else {
            let mut minus = a.to_vec();
            minus[i] -= FD_STEP;
            let rm = reduced_residue(g, &minus, opts)?.0;
            linalg::scale(0.5 / FD_STEP, &linalg::sub(&rp, &rm))
        };
        for (r, v) in col.iter().enumerate() {
            jac[(r, i)] = *v;
        }
    }
    Ok(jac)
}

fn min_singular(jac: &DMatrix<f64>) -> Option<f64> {
    (jac.nrows() > 0).then(|| linalg::min_singular_value(jac))
}

/// Samples the zero set of the germ near 0, parametrized over the kernel of
/// the reduced linearization on a grid of `points` per axis in
/// `[-radius, radius]`; grid points whose solution leaves the quadrant are
/// dropped.
pub fn local_solution_manifold(
    g: &BasicGerm,
    kernel_dim: usize,
    tol: f64,
    radius: f64,
    points: usize,
) -> Result<LocalManifold> {
    let n = g.param_dim;
    let nres = g.residue_dim;
    if nres > n || kernel_dim != n - nres {
        return Err(Error::DimensionMismatch {
            expected: n.saturating_sub(nres),
            found: kernel_dim,
        });
    }
    let opts = SolveOptions {
        tol: tol.min(1e-13),
        ..SolveOptions::default()
    };
    let a0 = vec![0.0; n];
    let jac0 = reduced_jacobian(g, &a0, &opts)?;
    let base_min_singular = min_singular(&jac0);
    if let Some(s) = base_min_singular {
        if s <= SURJECTIVITY_TOL {
            return Err(Error::NotTransversal(format!(
                "reduced linearization at 0 has smallest singular value {s:e}"
            )));
        }
    }
    let (kernel, complement) = if nres == 0 {
        (DMatrix::identity(n, n), DMatrix::zeros(n, 0))
    } else {
        (linalg::null_space(&jac0), linalg::orthonormal_range(&jac0.transpose(), false)?)
    };
    if kernel.ncols() != kernel_dim {
        return Err(Error::DimensionMismatch {
            expected: kernel_dim,
            found: kernel.ncols(),
        });
    }
    let quadrant = PartialQuadrant::leading(g.quadrant_count, n)?;
    let kernel_in_good_position = if g.quadrant_count > 0 {
        Some(good_position_check(&kernel, &quadrant, &complement, GOOD_POSITION_CONSTANT, 11)?.pass)
    } else {
        None
    };
    let chord = &jac0 * &complement;
    let chord_lu = chord.lu();

    let res = points.max(2);
    let axis: Vec<f64> = (0..res)
        .map(|i| -radius + 2.0 * radius * i as f64 / (res - 1) as f64)
        .collect();
    let mut grid = vec![Vec::new()];
    for _ in 0..kernel_dim {
        grid = grid
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }

    let mut samples = Vec::new();
    'grid: for t in grid {
        let base = &kernel * DVector::from_column_slice(&t);
        let mut u = DVector::zeros(nres);
        let mut solved = None;
        for _ in 0..CHORD_ITERATIONS {
            let a = (&base + &complement * &u).as_slice().to_vec();
            let (r, w) = match reduced_residue(g, &a, &opts) {
                Ok(v) => v,
                Err(Error::NotInQuadrant { .. }) | Err(Error::OutsideRadius { .. }) => continue 'grid,
                Err(e) => return Err(e),
            };
            if linalg::euclidean_norm(&r) <= tol {
                solved = Some((a, w));
                break;
            }
            let step = chord_lu
                .solve(&DVector::from_column_slice(&r))
                .ok_or_else(|| Error::NotTransversal("singular chord system".into()))?;
            u -= step;
        }
        let (a, w) = solved.ok_or(Error::NonConvergence {
            iterations: CHORD_ITERATIONS,
            residual: f64::NAN,
        })?;
        let degeneracy_index = quadrant.degeneracy_index(&a, 1e-9)?;
        let min_singular = match reduced_jacobian(g, &a, &opts) {
            Ok(j) => min_singular(&j),
            Err(Error::NotInQuadrant { .. }) | Err(Error::OutsideRadius { .. }) => None,
            Err(e) => return Err(e),
        };
        samples.push(ManifoldSample {
            t,
            a,
            w,
            degeneracy_index,
            min_singular,
        });
    }
    let all_surjective = samples
        .iter()
        .all(|s| s.min_singular.is_none_or(|v| v > SURJECTIVITY_TOL));
    Ok(LocalManifold {
        dimension: kernel_dim,
        base_min_singular,
        kernel_in_good_position,
        samples,
        all_surjective,
    })
}

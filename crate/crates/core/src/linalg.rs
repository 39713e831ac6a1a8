//! Dense linear-algebra helpers shared by the modules: numerical rank with a
//! guard band, orthonormal ranges, complements and principal angles.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-10;
/// Upper end of the ambiguous-rank guard band.
pub const RANK_GUARD: f64 = 1e-8;

/// Singular value decomposition with singular values sorted descending.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return SortedSvd {
            u: DMatrix::zeros(rows, 0),
            singular_values: Vec::new(),
            v: DMatrix::zeros(cols, 0),
        };
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let k = order.len();
    let mut us = DMatrix::zeros(rows, k);
    let mut vs = DMatrix::zeros(cols, k);
    let mut sv = Vec::with_capacity(k);
    for (j, &i) in order.iter().enumerate() {
        us.set_column(j, &u.column(i));
        vs.set_column(j, &v_t.row(i).transpose());
        sv.push(svd.singular_values[i]);
    }
    SortedSvd {
        u: us,
        singular_values: sv,
        v: vs,
    }
}

/// Numerical rank at `RANK_CUTOFF` relative to the largest singular value.
pub fn numerical_rank(singular_values: &[f64]) -> usize {
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    singular_values
        .iter()
        .filter(|&&s| s > RANK_CUTOFF * smax)
        .count()
}

/// Rank with the guard band enforced: relative singular values inside
/// `[RANK_CUTOFF, RANK_GUARD]` are reported as ambiguous.
pub fn guarded_rank(singular_values: &[f64]) -> Result<usize> {
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    for &s in singular_values {
        let rel = s / smax;
        if (RANK_CUTOFF..=RANK_GUARD).contains(&rel) {
            return Err(Error::AmbiguousRank(rel));
        }
    }
    Ok(numerical_rank(singular_values))
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn orthonormal_range(m: &DMatrix<f64>, guarded: bool) -> Result<DMatrix<f64>> {
    let svd = sorted_svd(m);
    let rank = if guarded {
        guarded_rank(&svd.singular_values)?
    } else {
        numerical_rank(&svd.singular_values)
    };
    Ok(svd.u.columns(0, rank).into_owned())
}

/// Orthonormal basis of the null space of `m` (columns).
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    null_space_relative_to(m, 0.0)
}

/// Null space with the rank cutoff taken relative to
/// `max(σ_max, reference)`; use when `m` itself may be entirely round-off.
pub fn null_space_relative_to(m: &DMatrix<f64>, reference: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let svd = sorted_svd(m);
    let smax = svd.singular_values.first().cloned().unwrap_or(0.0).max(reference);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| smax > 0.0 && s > RANK_CUTOFF * smax)
        .count();
    let row_space = svd.v.columns(0, rank).into_owned();
    orthogonal_complement(&row_space, cols)
}

/// Completes an orthonormal set of columns to a basis of R^n and returns the
/// added columns.
pub fn orthogonal_complement(basis: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut kept: Vec<DVector<f64>> = (0..basis.ncols())
        .map(|j| basis.column(j).into_owned())
        .collect();
    let mut added = Vec::new();
    for i in 0..n {
        if kept.len() == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for q in &kept {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            v /= norm;
            kept.push(v.clone());
            added.push(v);
        }
    }
    if added.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&added)
    }
}

/// Largest sine of the principal angles between two subspaces given by
/// orthonormal columns; 1 when the dimensions differ.
pub fn subspace_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() || a.nrows() != b.nrows() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let residual = b - a * (a.transpose() * b);
    let s = sorted_svd(&residual);
    s.singular_values.first().cloned().unwrap_or(0.0).min(1.0)
}

/// Surjectivity margin: the `rows`-th singular value, 0 when there are more
/// rows than columns, infinite for an empty target.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    if m.nrows() > m.ncols() {
        return 0.0;
    }
    let s = sorted_svd(m);
    s.singular_values.last().cloned().unwrap_or(0.0)
}

/// 2-norm condition number.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let s = sorted_svd(m);
    let smax = s.singular_values.first().cloned().unwrap_or(0.0);
    let smin = s.singular_values.last().cloned().unwrap_or(0.0);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Seeded standard-normal matrix.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// Orthonormal basis of the range of a linear operator given only by its
/// action. Small operators are assembled densely; large ones use a seeded
/// randomized range finder and fall back to dense assembly when the sketch
/// saturates.
pub fn operator_range<F>(apply: F, n_in: usize, n_out: usize, seed: u64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    const DENSE_LIMIT: usize = 256;
    const SKETCH: usize = 32;
    let dense = |apply: &F| {
        let mut m = DMatrix::zeros(n_out, n_in);
        let mut e = vec![0.0; n_in];
        for j in 0..n_in {
            e[j] = 1.0;
            let col = apply(&e);
            e[j] = 0.0;
            for i in 0..n_out {
                m[(i, j)] = col[i];
            }
        }
        m
    };
    if n_in <= DENSE_LIMIT {
        return orthonormal_range(&dense(&apply), true);
    }
    let omega = gaussian_matrix(n_in, SKETCH, seed);
    let mut y = DMatrix::zeros(n_out, SKETCH);
    for j in 0..SKETCH {
        let col: Vec<f64> = omega.column(j).iter().cloned().collect();
        let out = apply(&col);
        for i in 0..n_out {
            y[(i, j)] = out[i];
        }
    }
    let basis = orthonormal_range(&y, true)?;
    if basis.ncols() >= SKETCH - 4 {
        return orthonormal_range(&dense(&apply), true);
    }
    Ok(basis)
}

/// Dense Jacobian by centered differences.
pub fn fd_jacobian<F>(f: F, x: &[f64], n_out: usize, step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(n_out, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = step * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        for i in 0..n_out {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| alpha * a + b).collect()
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|a| alpha * a).collect()
}

/// Least-squares log-log slope of `ys` against `xs`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_rank_one() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = null_space(&m);
        assert_eq!(k.ncols(), 2);
        assert!((m * k).norm() < 1e-12);
    }

    #[test]
    fn gap_of_same_span_is_zero() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 1, &[-1.0, 0.0, 0.0]);
        assert!(subspace_gap(&a, &b) < 1e-14);
        let c = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 0.0]);
        assert!((subspace_gap(&a, &c) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn guard_band_is_loud() {
        assert!(matches!(
            guarded_rank(&[1.0, 1e-9]),
            Err(Error::AmbiguousRank(_))
        ));
        assert_eq!(guarded_rank(&[1.0, 1e-12]).unwrap(), 1);
    }

    #[test]
    fn slope_of_linear_data() {
        let xs = [1e-1, 1e-2, 1e-3];
        let ys = [2e-1, 2e-2, 2e-3];
        assert!((loglog_slope(&xs, &ys) - 1.0).abs() < 1e-12);
    }
}

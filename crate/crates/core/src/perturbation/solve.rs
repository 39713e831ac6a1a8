use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use super::bundle::{BundleSection, StrongBundleModel};
use super::multisection::{Multisection, BRANCH_TOL};
use crate::error::{Error, Result};
use crate::germs::{contraction_verify, GermMap, solve_germ, BasicGerm, GermSpec, SolveOptions, SURJECTIVITY_TOL};
use crate::linalg;
use crate::retracts::good_position_check;
use crate::sc_core::{PartialQuadrant, ScScale};

/// Contraction constant declared for the certifying germ.
pub const GERM_EPSILON: f64 = 0.5;
const GOOD_POSITION_CONSTANT: f64 = 0.5;
const FACE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SolveConfig {
    /// Newton seeds per chart axis on the window grid.
    pub seeds_per_axis: usize,
    /// Seeds with `|F(seed)|` above this are skipped.
    pub seed_filter: f64,
    pub max_newton: usize,
    pub residual_tol: f64,
    pub step_tol: f64,
    /// Roots of one branch closer than this are merged.
    pub dedupe_tol: f64,
    /// Certify surjective roots with the germ solver.
    pub certify: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            seeds_per_axis: 9,
            seed_filter: f64::INFINITY,
            max_newton: 200,
            residual_tol: 1e-13,
            step_tol: 1e-12,
            dedupe_tol: 1e-6,
            certify: true,
        }
    }
}

/// Germ-solver certificate `w = B(a, w)` with `B(a, w) = w - A⁻¹F(x + Ka +
/// Cw)`, `K` the kernel and `C` the row space of `DF(x)`, `A = DF(x) C`.
#[derive(Clone, Debug, Serialize)]
pub struct GermCertificate {
    pub radius: f64,
    pub contraction: f64,
    pub iterations: usize,
    pub rate: f64,
    pub residual: f64,
    /// `|C w*|`, the correction applied to the Newton root.
    pub correction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolutionPoint {
    pub branch: usize,
    #[serde(serialize_with = "ser_rational")]
    pub weight: BigRational,
    pub point: Vec<f64>,
    pub chart: Vec<f64>,
    pub residual: f64,
    pub tangent_dim: usize,
    pub fiber_rank: usize,
    /// Surjectivity margin of `(f - sᵢ)'(x)` restricted to `T_x O`.
    pub min_singular: f64,
    /// `sign det L` for surjective index-0 points on unretracted models.
    pub sign: Option<i32>,
    pub certificate: Option<GermCertificate>,
}

pub(crate) fn ser_rational<S: serde::Serializer>(q: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

#[derive(Clone, Debug, Serialize)]
pub struct SolutionSet {
    pub model: String,
    pub branch_count: usize,
    pub points: Vec<SolutionPoint>,
    pub seeds: usize,
    /// Seeds whose iteration failed, diverged or left the window.
    pub dropped_seeds: usize,
    /// Roots dropped because their neighborhood leaves the truncated grid.
    pub window_dropped: usize,
}

impl SolutionSet {
    /// `dim T_x O - rank F_x`, constant along the solution set.
    pub fn index(&self) -> Option<i64> {
        self.points.first().map(|p| p.tangent_dim as i64 - p.fiber_rank as i64)
    }

    /// `Σ σᵢ sign(x)` for index 0; `None` if some sign is undefined.
    pub fn weighted_count(&self) -> Option<BigRational> {
        let mut total = BigRational::zero();
        for p in &self.points {
            total += &p.weight * BigRational::from_integer(p.sign?.into());
        }
        Some(total)
    }

    pub fn to_csv(&self) -> String {
        let d = self.points.first().map_or(0, |p| p.chart.len());
        let mut out = String::from("chart");
        for k in 0..d {
            out.push_str(&format!(",p{k}"));
        }
        out.push_str(",branch,weight,min_singular,sign\n");
        for p in &self.points {
            out.push_str(&self.model);
            for v in &p.chart {
                out.push_str(&format!(",{v:.12e}"));
            }
            let sign = p.sign.map_or(String::new(), |s| s.to_string());
            out.push_str(&format!(",{},{},{:.6e},{}\n", p.branch, p.weight, p.min_singular, sign));
        }
        out
    }
}

/// `F = f̄ - s̄` on the ambient base.
struct BranchProblem<'a> {
    f: &'a BundleSection,
    s: &'a BundleSection,
}

impl BranchProblem<'_> {
    fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(linalg::sub(&self.f.eval_filled(y)?, &self.s.eval_filled(y)?))
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.f.jacobian(y)? - self.s.jacobian(y)?)
    }
}

/// Minimum-norm solution of `J δ = r`.
pub(crate) fn min_norm_solve(j: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let (rows, cols) = j.shape();
    let lu = if rows == cols {
        j.clone().lu().solve(r)
    } else if rows < cols {
        (j * j.transpose()).lu().solve(r).map(|z| j.transpose() * z)
    } else {
        None
    };
    lu.filter(|d| d.iter().all(|v| v.is_finite()))
        .or_else(|| j.clone().svd(true, true).solve(r, 1e-14).ok())
}

fn newton(p: &BranchProblem, seed: &[f64], cfg: &SolveConfig) -> Result<Option<(Vec<f64>, f64)>> {
    let mut y = seed.to_vec();
    for _ in 0..cfg.max_newton {
        let r = p.eval(&y)?;
        let rn = linalg::euclidean_norm(&r);
        if !rn.is_finite() {
            return Ok(None);
        }
        let j = p.jacobian(&y)?;
        let Some(d) = min_norm_solve(&j, &DVector::from_vec(r)) else {
            return Ok(None);
        };
        let step = d.norm();
        y = linalg::sub(&y, d.as_slice());
        if y.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
            return Ok(None);
        }
        if step <= cfg.step_tol {
            let res = linalg::euclidean_norm(&p.eval(&y)?);
            return Ok((res <= cfg.residual_tol).then_some((y, res)));
        }
    }
    Ok(None)
}

/// `(f - s)'(x)` restricted to `T_x O` in orthonormal bases of `T_x O` and
/// `F_x`.
fn restricted(model: &StrongBundleModel, j: &DMatrix<f64>, x: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let t = model.tangent_basis(x)?;
    let q = model.fiber_basis(x)?;
    Ok((q.transpose() * j * &t, t, q))
}

fn sign_of(model: &StrongBundleModel, l: &DMatrix<f64>, margin: f64) -> Option<i32> {
    (!model.is_retracted() && l.is_square() && margin > SURJECTIVITY_TOL).then(|| {
        if l.nrows() == 0 || l.determinant() > 0.0 {
            1
        } else {
            -1
        }
    })
}

fn is_window_exit(e: &Error) -> bool {
    matches!(e, Error::WindowExit(_))
}

/// Certifies a surjective root by the contraction germ; radii halve from 1
/// until the sampled contraction ratio is at most [`GERM_EPSILON`].
fn certify(p: &BranchProblem, x: &[f64], j: &DMatrix<f64>) -> Result<GermCertificate> {
    let kernel = linalg::null_space(j);
    let complement = linalg::orthonormal_range(&j.transpose(), false)?;
    let lu = j.clone() * &complement;
    let lu = lu.lu();
    let big_n = complement.ncols();
    let (x0, kk, cc) = (x.to_vec(), kernel.clone(), complement.clone());
    let (fs, ss) = (p.f.clone(), p.s.clone());
    let contraction: GermMap = Arc::new(move |av: &[f64], w: &[f64]| -> Result<Vec<f64>> {
        let shift = &kk * DVector::from_column_slice(av) + &cc * DVector::from_column_slice(w);
        let y: Vec<f64> = x0.iter().zip(shift.iter()).map(|(a, b)| a + b).collect();
        let fy = linalg::sub(&fs.eval_filled(&y)?, &ss.eval_filled(&y)?);
        let z = lu
            .solve(&DVector::from_vec(fy))
            .ok_or_else(|| Error::NonInvertible("restricted linearization".into()))?;
        Ok(w.iter().zip(z.iter()).map(|(w, z)| w - z).collect())
    });
    let fiber = Arc::new(ScScale::finite_dim(big_n, 0));
    let a0 = vec![0.0; kernel.ncols()];
    let mut radius = 1.0;
    let mut last_err = None;
    for _ in 0..=30 {
        let spec = GermSpec {
            param_dim: kernel.ncols(),
            quadrant_count: 0,
            residue_dim: 0,
            fiber: Arc::clone(&fiber),
            contraction: Arc::clone(&contraction),
            residue: None,
            epsilons: vec![GERM_EPSILON],
            radii: Some(vec![radius]),
        };
        let attempt = BasicGerm::new(spec).and_then(|g| {
            let rep = contraction_verify(&g, 0, 64, 0x6e7)?;
            Ok((g, rep))
        });
        match attempt {
            Ok((g, rep)) if rep.pass => {
                let sol = solve_germ(
                    &g,
                    &a0,
                    0,
                    &SolveOptions {
                        tol: 1e-14,
                        ..SolveOptions::default()
                    },
                )?;
                let correction = (&complement * DVector::from_column_slice(&sol.w)).norm();
                return Ok(GermCertificate {
                    radius,
                    contraction: rep.measured,
                    iterations: sol.iterations,
                    rate: sol.rate,
                    residual: sol.residual,
                    correction,
                });
            }
            Ok(_) => {}
            Err(e @ Error::InvalidChart(_)) => return Err(e),
            Err(e) => last_err = Some(e),
        }
        radius *= 0.5;
    }
    Err(last_err.unwrap_or_else(|| Error::InvalidScale("no radius makes the root germ contract".into())))
}

/// Newton roots of `f = sᵢ` per branch from window-grid seeds, each carrying
/// weight `σᵢ`, with surjective roots certified by the germ solver.
pub fn solution_set(f: &BundleSection, lambda: &Multisection, cfg: &SolveConfig) -> Result<SolutionSet> {
    let model = f.model();
    if !Arc::ptr_eq(model, lambda.model()) {
        return Err(Error::ModelMismatch(format!("{} vs {}", model.name, lambda.model().name)));
    }
    let seeds = model.sample_points(cfg.seeds_per_axis);
    let mut points = Vec::new();
    let mut dropped_seeds = 0;
    let mut window_dropped = 0;
    for (bi, branch) in lambda.branches().iter().enumerate() {
        let p = BranchProblem {
            f,
            s: &branch.section,
        };
        let roots: Vec<Result<Option<(Vec<f64>, f64)>>> = seeds
            .par_iter()
            .map(|seed| {
                let r0 = match p.eval(seed) {
                    Ok(v) => linalg::euclidean_norm(&v),
                    Err(e) if is_window_exit(&e) => return Ok(None),
                    Err(e) => return Err(e),
                };
                if r0 > cfg.seed_filter {
                    return Ok(None);
                }
                match newton(&p, seed, cfg) {
                    Err(e) if is_window_exit(&e) => Ok(None),
                    other => other,
                }
            })
            .collect();
        let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
        for r in roots {
            match r? {
                None => dropped_seeds += 1,
                Some((y, res)) => {
                    let x = match model.retract(&y) {
                        Ok(x) => x,
                        Err(e) if is_window_exit(&e) => {
                            window_dropped += 1;
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    if !model.is_charted(&x)? {
                        dropped_seeds += 1;
                        continue;
                    }
                    if found
                        .iter()
                        .all(|(z, _)| linalg::euclidean_norm(&linalg::sub(z, &x)) > cfg.dedupe_tol)
                    {
                        found.push((x, res));
                    }
                }
            }
        }
        let evaluated: Vec<Result<Option<SolutionPoint>>> = found
            .par_iter()
            .map(|(x, res)| {
                let run = || -> Result<SolutionPoint> {
                    let j = p.jacobian(x)?;
                    let (l, t, q) = restricted(model, &j, x)?;
                    let margin = linalg::min_singular_value(&l);
                    let certificate = if cfg.certify && margin > SURJECTIVITY_TOL {
                        Some(certify(&p, x, &j)?)
                    } else {
                        None
                    };
                    Ok(SolutionPoint {
                        branch: bi,
                        weight: branch.weight.clone(),
                        point: x.clone(),
                        chart: model.chart(x),
                        residual: *res,
                        tangent_dim: t.ncols(),
                        fiber_rank: q.ncols(),
                        min_singular: margin,
                        sign: sign_of(model, &l, margin),
                        certificate,
                    })
                };
                match run() {
                    Ok(sp) => Ok(Some(sp)),
                    Err(e) if is_window_exit(&e) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();
        for e in evaluated {
            match e? {
                Some(sp) => points.push(sp),
                None => window_dropped += 1,
            }
        }
    }
    Ok(SolutionSet {
        model: model.name.clone(),
        branch_count: lambda.len(),
        points,
        seeds: seeds.len(),
        dropped_seeds,
        window_dropped,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearizedBranch {
    pub branch: usize,
    #[serde(serialize_with = "ser_rational")]
    pub weight: BigRational,
    #[serde(skip)]
    pub operator: DMatrix<f64>,
    pub min_singular: f64,
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
}

/// `L(x)`: one operator `(f - sᵢ)'(x): T_x O -> F_x` per active branch.
#[derive(Clone, Debug, Serialize)]
pub struct LinearizationSet {
    pub point: Vec<f64>,
    #[serde(skip)]
    pub tangent: DMatrix<f64>,
    #[serde(skip)]
    pub fiber: DMatrix<f64>,
    pub operators: Vec<LinearizedBranch>,
}

impl LinearizationSet {
    /// Operators without repetition (comparison within `tol`).
    pub fn distinct(&self, tol: f64) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = Vec::new();
        for op in &self.operators {
            if !out.iter().any(|m| (m - &op.operator).amax() <= tol) {
                out.push(op.operator.clone());
            }
        }
        out
    }

    /// The two distinct-operator sets coincide up to reordering.
    pub fn same_operators(&self, other: &LinearizationSet, tol: f64) -> bool {
        let (a, b) = (self.distinct(tol), other.distinct(tol));
        a.len() == b.len()
            && a.iter().all(|m| b.iter().any(|n| m.shape() == n.shape() && (m - n).amax() <= tol))
    }

    pub fn worst_min_singular(&self) -> f64 {
        self.operators.iter().map(|o| o.min_singular).fold(f64::INFINITY, f64::min)
    }
}

/// `L(x)` for a solution `x`; errors with `NotASolution` when no branch
/// passes through `f(x)`.
pub fn linearization_set(f: &BundleSection, lambda: &Multisection, x: &[f64]) -> Result<LinearizationSet> {
    let model = f.model();
    let fx = f.eval(x)?;
    let values = lambda.values(x)?;
    let active: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| linalg::euclidean_norm(&linalg::sub(v, &fx)) <= BRANCH_TOL)
        .map(|(i, _)| i)
        .collect();
    if active.is_empty() {
        return Err(Error::NotASolution);
    }
    let t = model.tangent_basis(x)?;
    let q = model.fiber_basis(x)?;
    let jf = f.jacobian(x)?;
    let operators = active
        .into_iter()
        .map(|i| {
            let b = &lambda.branches()[i];
            let op = q.transpose() * (&jf - b.section.jacobian(x)?) * &t;
            let svd = linalg::sorted_svd(&op);
            let rank = linalg::numerical_rank(&svd.singular_values);
            Ok(LinearizedBranch {
                branch: i,
                weight: b.weight.clone(),
                min_singular: linalg::min_singular_value(&op),
                kernel_dim: op.ncols() - rank,
                cokernel_dim: op.nrows() - rank,
                operator: op,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearizationSet {
        point: x.to_vec(),
        tangent: t,
        fiber: q,
        operators,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TransversalWitness {
    pub point: Vec<f64>,
    pub branch: usize,
    pub min_singular: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodPositionWitness {
    pub point: Vec<f64>,
    pub branch: usize,
    /// Offending `(n, m)` with `n ∈ ker L`.
    pub counterexample: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransversalReport {
    pub solutions: usize,
    pub operators_checked: usize,
    pub worst_min_singular: f64,
    pub failures: Vec<TransversalWitness>,
    pub good_position_failures: Vec<GoodPositionWitness>,
    pub pass: bool,
}

/// Every operator in every `L(x)` must be surjective; on the boundary of
/// the base quadrant its kernel must also be in good position to the
/// tangent quadrant `C_x`.
pub fn transversal_check(f: &BundleSection, lambda: &Multisection, solutions: &SolutionSet) -> Result<TransversalReport> {
    let model = f.model();
    let sets: Vec<Result<LinearizationSet>> = solutions
        .points
        .par_iter()
        .map(|p| linearization_set(f, lambda, &p.point))
        .collect();
    let mut operators_checked = 0;
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    let mut good_position_failures = Vec::new();
    for (p, set) in solutions.points.iter().zip(sets) {
        let set = set?;
        let faces: Vec<usize> = model
            .quadrant()
            .indices()
            .iter()
            .copied()
            .filter(|&i| p.point[i].abs() <= FACE_TOL)
            .collect();
        for op in &set.operators {
            operators_checked += 1;
            worst = worst.min(op.min_singular);
            if !(op.min_singular > SURJECTIVITY_TOL) {
                failures.push(TransversalWitness {
                    point: p.point.clone(),
                    branch: op.branch,
                    min_singular: op.min_singular,
                });
                continue;
            }
            if faces.is_empty() {
                continue;
            }
            let kernel = &set.tangent * linalg::null_space(&op.operator);
            let dim = p.point.len();
            let complement = linalg::orthogonal_complement(&kernel, dim);
            let cx = PartialQuadrant::new(dim, faces.clone())?;
            let rep = good_position_check(&kernel, &cx, &complement, GOOD_POSITION_CONSTANT, 7)?;
            if !rep.pass {
                good_position_failures.push(GoodPositionWitness {
                    point: p.point.clone(),
                    branch: op.branch,
                    counterexample: rep.counterexamples.first().cloned(),
                });
            }
        }
    }
    Ok(TransversalReport {
        solutions: solutions.points.len(),
        operators_checked,
        worst_min_singular: worst,
        pass: failures.is_empty() && good_position_failures.is_empty(),
        failures,
        good_position_failures,
    })
}

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::cells::{Cell, CellMap, Face};
use super::forms::ScDifferentialForm;
use super::poly::Polynomial;
use super::subgroupoid::{BranchedSubgroupoid, IsotropyData, Region, WeightedBranch};
use crate::error::{Error, Result};
use crate::linalg;
use crate::perturbation::{min_norm_solve, perturb_to_transversal_with, BundleSection, ControlPair, Multisection, PerturbOptions, SolutionSet};

/// Deviation allowed between trial values.
pub const PAIRING_TOL: f64 = 1e-6;
const CORRECTOR_ITERATIONS: usize = 25;
const CORRECTOR_TOL: f64 = 1e-13;
const MIN_STEP: f64 = 1e-7;
const CHART_STEP: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct PairingOptions {
    pub epsilon: f64,
    pub max_attempts: usize,
    /// Arc-length step of the curve tracer.
    pub trace_step: f64,
    pub max_trace_steps: usize,
    /// Gauss–Legendre nodes per traced chord.
    pub quadrature_order: usize,
    pub perturb: PerturbOptions,
}

impl Default for PairingOptions {
    fn default() -> Self {
        PairingOptions {
            epsilon: 0.1,
            max_attempts: 20,
            trace_step: 1e-2,
            max_trace_steps: 200_000,
            quadrature_order: 4,
            perturb: PerturbOptions::new(0.1, 0, 20),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingTrial {
    pub seed: u64,
    pub attempts: usize,
    pub value: f64,
    /// Exact `Σ σ sign` for index 0.
    pub weighted_count: Option<String>,
    pub solutions: usize,
    pub curves: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingReport {
    pub index: i64,
    pub degree: usize,
    pub values: Vec<f64>,
    pub trials: Vec<PairingTrial>,
    pub max_deviation: f64,
    pub counts_identical: Option<bool>,
    pub pass: bool,
}

fn fiber_dim(f: &BundleSection) -> usize {
    f.model().fiber().dim()
}

/// `Φ_f([ω]) = ∫_{S(f, τ)} ω` for `trials` seeded transversal perturbations
/// `τ`; exactly 0 when `deg ω` differs from the Fredholm index.
pub fn de_rham_pairing(f: &BundleSection, cp: &ControlPair, omega: &ScDifferentialForm, trials: usize, seed: u64) -> Result<PairingReport> {
    de_rham_pairing_with(f, cp, omega, trials, seed, &PairingOptions::default())
}

pub fn de_rham_pairing_with(
    f: &BundleSection,
    cp: &ControlPair,
    omega: &ScDifferentialForm,
    trials: usize,
    seed: u64,
    opts: &PairingOptions,
) -> Result<PairingReport> {
    let model = f.model();
    if model.is_retracted() {
        return Err(Error::BackendUnsupported("the pairing traces solutions on unretracted models only".into()));
    }
    if omega.dim() != model.chart_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.chart_dim(),
            found: omega.dim(),
        });
    }
    let index = model.chart_dim() as i64 - fiber_dim(f) as i64;
    let degree = omega.degree();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..trials).map(|_| rng.random()).collect();
    if index != degree as i64 {
        let trials = seeds
            .iter()
            .map(|&s| PairingTrial {
                seed: s,
                attempts: 0,
                value: 0.0,
                weighted_count: None,
                solutions: 0,
                curves: 0,
            })
            .collect();
        return Ok(PairingReport {
            index,
            degree,
            values: vec![0.0; seeds.len()],
            trials,
            max_deviation: 0.0,
            counts_identical: None,
            pass: true,
        });
    }
    if index > 1 {
        return Err(Error::BackendUnsupported(format!("pairing of index {index}")));
    }
    let mut out = Vec::with_capacity(trials);
    for &s in &seeds {
        let po = PerturbOptions {
            epsilon: opts.epsilon,
            seed: s,
            max_attempts: opts.max_attempts,
            ..opts.perturb.clone()
        };
        let p = perturb_to_transversal_with(f, cp, &po)?;
        let (theta, curves) = if index == 0 {
            (point_subgroupoid(&p.solutions, model.chart_dim())?, 0)
        } else {
            let curves = trace_curves(f, &p.tau, &p.solutions, opts)?;
            let n = curves.len();
            (curve_subgroupoid(f, &p.tau, curves, model.chart_dim())?, n)
        };
        let value = theta.integrate(omega, &Region::All, opts.quadrature_order)?.value;
        let weighted_count = if index == 0 {
            p.solutions.weighted_count().map(|q| q.to_string())
        } else {
            None
        };
        out.push(PairingTrial {
            seed: s,
            attempts: p.attempts,
            value,
            weighted_count,
            solutions: p.solutions.points.len(),
            curves,
        });
    }
    let values: Vec<f64> = out.iter().map(|t| t.value).collect();
    let mut dev: f64 = 0.0;
    for a in &values {
        for b in &values {
            dev = dev.max((a - b).abs());
        }
    }
    let counts_identical = (index == 0).then(|| {
        let first = out.first().and_then(|t| t.weighted_count.clone());
        first.is_some() && out.iter().all(|t| t.weighted_count == first)
    });
    let pass = dev <= PAIRING_TOL && counts_identical.unwrap_or(true);
    Ok(PairingReport {
        index,
        degree,
        values,
        trials: out,
        max_deviation: dev,
        counts_identical,
        pass,
    })
}

fn trivial_isotropy() -> IsotropyData {
    IsotropyData {
        order: 1,
        effective_order: 1,
    }
}

/// One 0-dimensional branch per solution point, weighted by its branch
/// weight and oriented by its sign.
fn point_subgroupoid(sol: &SolutionSet, chart_dim: usize) -> Result<BranchedSubgroupoid> {
    let mut branches = Vec::with_capacity(sol.points.len());
    for p in &sol.points {
        let sign = p
            .sign
            .ok_or_else(|| Error::NotTransversal(format!("no orientation sign at {:?}", p.point)))?;
        let components = p.chart.iter().map(|&c| Polynomial::constant(0, c)).collect();
        branches.push(WeightedBranch::new(
            p.weight.clone(),
            sign as i8,
            vec![Cell::new("", CellMap::Polynomial { components })],
            Some(vec![]),
        ));
    }
    Ok(BranchedSubgroupoid::new(0, chart_dim, branches, None)?.with_isotropy(trivial_isotropy()))
}

/// A traced solution curve of one branch of `τ`: vertices with oriented unit
/// tangents, closed if it returns to its start.
#[derive(Clone, Debug)]
pub struct TracedCurve {
    pub branch: usize,
    pub points: Vec<Vec<f64>>,
    pub tangents: Vec<Vec<f64>>,
    pub closed: bool,
}

struct Problem<'a> {
    f: &'a BundleSection,
    s: &'a BundleSection,
}

impl Problem<'_> {
    fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(linalg::sub(&self.f.eval_filled(y)?, &self.s.eval_filled(y)?))
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.f.jacobian(y)? - self.s.jacobian(y)?)
    }

    /// Unit kernel vector `v` of `J` with `det[Jᵀ | v] > 0`.
    fn tangent(&self, y: &[f64]) -> Result<Vec<f64>> {
        let j = self.jacobian(y)?;
        let k = linalg::null_space(&j);
        if k.ncols() != 1 {
            return Err(Error::NotTransversal(format!("kernel of dimension {} at {y:?}", k.ncols())));
        }
        let v = k.column(0).into_owned();
        let mut m = DMatrix::zeros(j.ncols(), j.nrows() + 1);
        m.columns_mut(0, j.nrows()).copy_from(&j.transpose());
        m.set_column(j.nrows(), &v);
        let v = if m.determinant() > 0.0 { v } else { -v };
        Ok(v.as_slice().to_vec())
    }

    fn correct(&self, start: Vec<f64>) -> Result<Option<Vec<f64>>> {
        let mut y = start;
        for _ in 0..CORRECTOR_ITERATIONS {
            let r = self.eval(&y)?;
            let j = self.jacobian(&y)?;
            let Some(d) = min_norm_solve(&j, &DVector::from_vec(r.clone())) else {
                return Ok(None);
            };
            y = linalg::sub(&y, d.as_slice());
            if d.norm() <= 1e-15 || linalg::euclidean_norm(&r) <= CORRECTOR_TOL {
                let res = linalg::euclidean_norm(&self.eval(&y)?);
                return Ok((res <= 1e-11).then_some(y));
            }
        }
        Ok(None)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    linalg::euclidean_norm(&linalg::sub(a, b))
}

/// Predictor-corrector continuation from `x0` along `±v`. Returns the
/// vertices and whether the walk closed up at `x0`.
fn walk(p: &Problem, x0: &[f64], direction: f64, opts: &PairingOptions) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, bool)> {
    let model = p.f.model();
    let mut pts = vec![x0.to_vec()];
    let mut tans = vec![p.tangent(x0)?];
    let mut h = opts.trace_step;
    let mut travelled = 0.0;
    for _ in 0..opts.max_trace_steps {
        let x = pts.last().expect("nonempty").clone();
        let v = tans.last().expect("nonempty").clone();
        let pred = linalg::axpy(direction * h, &v, &x);
        let next = match p.correct(pred)? {
            Some(y) if model.is_charted(&y)? => Some(y),
            Some(_) => {
                return Ok((pts, tans, false));
            }
            None => None,
        };
        let Some(y) = next else {
            h *= 0.5;
            if h < MIN_STEP {
                return Err(Error::NonConvergence {
                    iterations: CORRECTOR_ITERATIONS,
                    residual: f64::NAN,
                });
            }
            continue;
        };
        let w = p.tangent(&y)?;
        let turn: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        if turn < 0.5 || dist(&y, &x) > 1.5 * h {
            h *= 0.5;
            if h < MIN_STEP {
                return Err(Error::NotTransversal(format!("orientation flips near {x:?}")));
            }
            continue;
        }
        travelled += dist(&y, &x);
        if travelled > 3.0 * opts.trace_step && dist(&y, x0) <= opts.trace_step {
            let gap = linalg::sub(x0, &y);
            let ahead: f64 = gap.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() * direction;
            if ahead > 0.0 {
                pts.push(y);
                tans.push(w);
            }
            pts.push(x0.to_vec());
            tans.push(tans[0].clone());
            return Ok((pts, tans, true));
        }
        pts.push(y);
        tans.push(w);
        h = (h * 1.5).min(opts.trace_step);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_trace_steps,
        residual: f64::NAN,
    })
}

/// Traces the solution curves of every branch of `τ` through the seeded
/// solution points, skipping points already on a traced curve.
pub fn trace_curves(f: &BundleSection, tau: &Multisection, sol: &SolutionSet, opts: &PairingOptions) -> Result<Vec<TracedCurve>> {
    let mut curves: Vec<TracedCurve> = Vec::new();
    for sp in &sol.points {
        let on_curve = curves
            .iter()
            .filter(|c| c.branch == sp.branch)
            .any(|c| c.points.iter().any(|q| dist(q, &sp.point) <= opts.trace_step));
        if on_curve {
            continue;
        }
        let p = Problem {
            f,
            s: &tau.branches()[sp.branch].section,
        };
        let (mut pts, mut tans, closed) = walk(&p, &sp.point, 1.0, opts)?;
        if !closed {
            let (back, back_t, _) = walk(&p, &sp.point, -1.0, opts)?;
            let mut bp: Vec<Vec<f64>> = back.into_iter().skip(1).rev().collect();
            let mut bt: Vec<Vec<f64>> = back_t.into_iter().skip(1).rev().collect();
            bp.append(&mut pts);
            bt.append(&mut tans);
            pts = bp;
            tans = bt;
        }
        curves.push(TracedCurve {
            branch: sp.branch,
            points: pts,
            tangents: tans,
            closed,
        });
    }
    Ok(curves)
}

/// Cubic Hermite chord from `(a, ta)` to `(b, tb)` with tangents scaled by
/// the chord length.
fn hermite(a: Vec<f64>, b: Vec<f64>, ta: Vec<f64>, tb: Vec<f64>) -> CellMap {
    let d = a.len();
    let l = dist(&a, &b);
    let (a2, b2, ta2, tb2) = (a.clone(), b.clone(), ta.clone(), tb.clone());
    let eval = Arc::new(move |t: &[f64]| {
        let s = t[0];
        let (h00, h10, h01, h11) = (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s, -2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
        (0..a.len()).map(|k| h00 * a[k] + h10 * l * ta[k] + h01 * b[k] + h11 * l * tb[k]).collect()
    });
    let jacobian = Arc::new(move |t: &[f64]| {
        let s = t[0];
        let (d00, d10, d01, d11) = (6.0 * s * s - 6.0 * s, 3.0 * s * s - 4.0 * s + 1.0, -6.0 * s * s + 6.0 * s, 3.0 * s * s - 2.0 * s);
        DMatrix::from_fn(a2.len(), 1, |k, _| d00 * a2[k] + d10 * l * ta2[k] + d01 * b2[k] + d11 * l * tb2[k])
    });
    CellMap::Callback {
        dim: 1,
        ambient: d,
        eval,
        jacobian,
    }
}

/// Chart image of a tangent vector by central differences of the chart map.
fn chart_tangent(f: &BundleSection, x: &[f64], v: &[f64]) -> Vec<f64> {
    let model = f.model();
    let cp = model.chart(&linalg::axpy(CHART_STEP, v, x));
    let cm = model.chart(&linalg::axpy(-CHART_STEP, v, x));
    linalg::scale(0.5 / CHART_STEP, &linalg::sub(&cp, &cm))
}

/// The traced curves as a 1-dimensional branched subgroupoid in chart
/// coordinates, one Hermite cell per chord.
fn curve_subgroupoid(f: &BundleSection, tau: &Multisection, curves: Vec<TracedCurve>, chart_dim: usize) -> Result<BranchedSubgroupoid> {
    let model = f.model();
    let mut branches = Vec::with_capacity(curves.len());
    for c in curves {
        let pts: Vec<Vec<f64>> = c.points.iter().map(|x| model.chart(x)).collect();
        let tans: Vec<Vec<f64>> = c
            .points
            .iter()
            .zip(&c.tangents)
            .map(|(x, v)| {
                let t = chart_tangent(f, x, v);
                linalg::scale(1.0 / linalg::euclidean_norm(&t), &t)
            })
            .collect();
        let cells: Vec<Cell> = (0..pts.len().saturating_sub(1))
            .map(|k| Cell::new("", hermite(pts[k].clone(), pts[k + 1].clone(), tans[k].clone(), tans[k + 1].clone())))
            .collect();
        let boundary = if c.closed || cells.is_empty() {
            vec![]
        } else {
            vec![Face::new(0, 0, 0), Face::new(cells.len() - 1, 0, 1)]
        };
        let weight: BigRational = tau.branches()[c.branch].weight.clone();
        branches.push(WeightedBranch::new(weight, 1, cells, Some(boundary)));
    }
    Ok(BranchedSubgroupoid::new(1, chart_dim, branches, None)?.with_isotropy(trivial_isotropy()))
}

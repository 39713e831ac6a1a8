use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::sc_core::ScScale;

/// `(a, w) -> value` on raw coefficients.
pub type GermMap = Arc<dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// Tolerance for `f(0) = 0`.
pub const CENTER_TOL: f64 = 1e-12;
/// Absolute slack on measured ratios for round-off in the difference quotient.
pub const RATIO_SLACK: f64 = 1e-12;
/// Sample pairs used to calibrate default radii.
pub const CALIBRATION_PAIRS: usize = 200;

/// Everything needed to build a [`BasicGerm`].
#[derive(Clone)]
pub struct GermSpec {
    /// `n`: dimension of the parameter `a ∈ [0,∞)^k × R^{n-k}`.
    pub param_dim: usize,
    /// `k`: number of leading quadrant coordinates of `a`.
    pub quadrant_count: usize,
    /// `N`: dimension of the finite residue part of `f`.
    pub residue_dim: usize,
    pub fiber: Arc<ScScale>,
    /// `B` in `P∘f(a, w) = w - B(a, w)`.
    pub contraction: GermMap,
    /// The residue part `(1 - P)∘f`, of length `N`.
    pub residue: Option<GermMap>,
    /// `ε_m` per level.
    pub epsilons: Vec<f64>,
    /// `ρ_m` per level; calibrated when absent.
    pub radii: Option<Vec<f64>>,
}

/// `f(a, w) = (residue(a, w), w - B(a, w))` with `B` a level-wise contraction
/// in `w` near the origin.
#[derive(Clone)]
pub struct BasicGerm {
    pub param_dim: usize,
    pub quadrant_count: usize,
    pub residue_dim: usize,
    fiber: Arc<ScScale>,
    contraction: GermMap,
    residue: Option<GermMap>,
    epsilons: Vec<f64>,
    radii: Vec<f64>,
}

impl fmt::Debug for BasicGerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasicGerm")
            .field("n", &self.param_dim)
            .field("k", &self.quadrant_count)
            .field("N", &self.residue_dim)
            .field("fiber_dim", &self.fiber.dim())
            .field("epsilons", &self.epsilons)
            .field("radii", &self.radii)
            .finish()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub level: usize,
    pub measured: f64,
    pub declared: f64,
    pub samples: usize,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Newton steps on `w - B(a, w)` with Picard fallback on divergence.
    pub newton: bool,
    pub initial: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-12,
            max_iter: 500,
            newton: false,
            initial: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GermSolution {
    pub w: Vec<f64>,
    pub level: usize,
    pub iterations: usize,
    /// Geometric mean of successive step ratios above round-off.
    pub rate: f64,
    /// Largest successive step ratio above round-off.
    pub max_rate: f64,
    /// `|w - B(a, w)|_m` at the returned point.
    pub residual: f64,
}

impl BasicGerm {
    pub fn new(spec: GermSpec) -> Result<Self> {
        let levels = spec.fiber.max_level() + 1;
        if spec.quadrant_count > spec.param_dim {
            return Err(Error::DimensionMismatch {
                expected: spec.param_dim,
                found: spec.quadrant_count,
            });
        }
        if spec.epsilons.len() != levels {
            return Err(Error::DimensionMismatch {
                expected: levels,
                found: spec.epsilons.len(),
            });
        }
        if let Some(bad) = spec.epsilons.iter().find(|e| !(**e >= 0.0 && **e < 1.0)) {
            return Err(Error::InvalidScale(format!("contraction constant {bad} is not in [0, 1)")));
        }
        let mut germ = BasicGerm {
            param_dim: spec.param_dim,
            quadrant_count: spec.quadrant_count,
            residue_dim: spec.residue_dim,
            fiber: spec.fiber,
            contraction: spec.contraction,
            residue: spec.residue,
            epsilons: spec.epsilons,
            radii: vec![1.0; levels],
        };
        let a0 = vec![0.0; germ.param_dim];
        let w0 = vec![0.0; germ.fiber.dim()];
        let b0 = germ.b(&a0, &w0)?;
        for m in 0..levels {
            let v = germ.fiber.norm_of(&b0, m)?;
            if v > CENTER_TOL {
                return Err(Error::InvalidChart(format!("f(0) has level-{m} fiber part {v:e}")));
            }
        }
        let r0 = germ.residue_at(&a0, &w0)?;
        if linalg::euclidean_norm(&r0) > CENTER_TOL {
            return Err(Error::InvalidChart("f(0) has a nonzero residue part".into()));
        }
        match spec.radii {
            Some(r) => {
                if r.len() != levels || r.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::InvalidScale("radii must be positive, one per level".into()));
                }
                germ.radii = r;
            }
            None => germ.calibrate_radii(1.0, 0x9e41)?,
        }
        Ok(germ)
    }

    /// Same germ with `B - P s`, i.e. `f + s`; `f(0) = 0` is not required.
    pub fn perturbed(&self, s: GermMap) -> BasicGerm {
        let b = Arc::clone(&self.contraction);
        let mut out = self.clone();
        out.contraction = Arc::new(move |a, w| {
            let base = b(a, w)?;
            Ok(linalg::sub(&base, &s(a, w)?))
        });
        out
    }

    pub fn fiber(&self) -> &Arc<ScScale> {
        &self.fiber
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn b(&self, a: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let out = (self.contraction)(a, w)?;
        if out.len() != self.fiber.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.fiber.dim(),
                found: out.len(),
            });
        }
        Ok(out)
    }

    pub fn residue_at(&self, a: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        match &self.residue {
            None => Ok(vec![0.0; self.residue_dim]),
            Some(r) => {
                let out = r(a, w)?;
                if out.len() != self.residue_dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.residue_dim,
                        found: out.len(),
                    });
                }
                Ok(out)
            }
        }
    }

    /// `f(a, w) = (residue, w - B(a, w))`.
    pub fn eval(&self, a: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.residue_at(a, w)?, linalg::sub(w, &self.b(a, w)?)))
    }

    fn check_param(&self, a: &[f64], m: usize) -> Result<()> {
        if a.len() != self.param_dim {
            return Err(Error::DimensionMismatch {
                expected: self.param_dim,
                found: a.len(),
            });
        }
        if let Some((i, v)) = a[..self.quadrant_count].iter().enumerate().find(|(_, v)| **v < -CENTER_TOL) {
            return Err(Error::NotInQuadrant { index: i, value: *v });
        }
        let norm = linalg::euclidean_norm(a);
        let radius = self.radii[m];
        if norm > radius {
            return Err(Error::OutsideRadius { norm, radius });
        }
        Ok(())
    }

    fn random_param(&self, rng: &mut ChaCha8Rng, radius: f64) -> Vec<f64> {
        let mut a: Vec<f64> = (0..self.param_dim).map(|_| StandardNormal.sample(rng)).collect();
        for v in a.iter_mut().take(self.quadrant_count) {
            *v = v.abs();
        }
        let n = linalg::euclidean_norm(&a);
        let r = radius * rng.random::<f64>();
        if n > 0.0 {
            a.iter_mut().for_each(|v| *v *= r / n);
        }
        a
    }

    fn random_fiber(&self, rng: &mut ChaCha8Rng, m: usize, radius: f64) -> Result<Vec<f64>> {
        let w: Vec<f64> = (0..self.fiber.dim()).map(|_| StandardNormal.sample(rng)).collect();
        let n = self.fiber.norm_of(&w, m)?;
        let r = radius * rng.random::<f64>();
        Ok(if n > 0.0 { linalg::scale(r / n, &w) } else { w })
    }

    fn measure(&self, m: usize, radius: f64, pairs: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let a = self.random_param(&mut rng, radius);
            let w1 = self.random_fiber(&mut rng, m, radius)?;
            let w2 = self.random_fiber(&mut rng, m, radius)?;
            let den = self.fiber.norm_of(&linalg::sub(&w1, &w2), m)?;
            if den == 0.0 {
                continue;
            }
            let num = self.fiber.norm_of(&linalg::sub(&self.b(&a, &w1)?, &self.b(&a, &w2)?), m)?;
            worst = worst.max(num / den);
        }
        Ok(worst)
    }

    /// Sets each `ρ_m` to the largest `r_max 2^{-j}` (`j <= 30`) at which the
    /// measured contraction ratio stays below `ε_m`.
    pub fn calibrate_radii(&mut self, r_max: f64, seed: u64) -> Result<()> {
        for m in 0..self.radii.len() {
            let mut r = r_max;
            let mut found = None;
            for _ in 0..=30 {
                if self.measure(m, r, CALIBRATION_PAIRS, seed)? <= self.epsilons[m] + RATIO_SLACK {
                    found = Some(r);
                    break;
                }
                r *= 0.5;
            }
            self.radii[m] = found.ok_or_else(|| {
                Error::InvalidScale(format!("no radius down to {r:e} makes B contract on level {m}"))
            })?;
        }
        Ok(())
    }
}

/// Max observed `|B(a,w) - B(a,w')|_m / |w - w'|_m` over seeded sample pairs
/// with `|a|, |w|_m, |w'|_m <= ρ_m`.
pub fn contraction_verify(g: &BasicGerm, m: usize, sample_count: usize, seed: u64) -> Result<ContractionReport> {
    if m >= g.radii.len() {
        return Err(Error::LevelOutOfRange {
            requested: m,
            declared: g.radii.len() - 1,
        });
    }
    let measured = g.measure(m, g.radii[m], sample_count, seed)?;
    Ok(ContractionReport {
        level: m,
        measured,
        declared: g.epsilons[m],
        samples: sample_count,
        pass: measured <= g.epsilons[m] + RATIO_SLACK,
    })
}

/// Fixed point `w = B(a, w)` on level `m` by Picard iteration (or Newton with
/// Picard fallback), stopping once a step is at most `tol` in the level-`m`
/// norm.
pub fn solve_germ(g: &BasicGerm, a: &[f64], m: usize, opts: &SolveOptions) -> Result<GermSolution> {
    if m >= g.radii.len() {
        return Err(Error::LevelOutOfRange {
            requested: m,
            declared: g.radii.len() - 1,
        });
    }
    g.check_param(a, m)?;
    let fiber = &g.fiber;
    let mut w = opts.initial.clone().unwrap_or_else(|| vec![0.0; fiber.dim()]);
    let mut ratios: Vec<f64> = Vec::new();
    let mut last_step: Option<f64> = None;
    let mut newton = opts.newton && fiber.dim() <= 256;
    for it in 1..=opts.max_iter {
        let bw = g.b(a, &w)?;
        let picard_step = fiber.norm_of(&linalg::sub(&bw, &w), m)?;
        let next = if newton {
            match newton_step(g, a, &w, &bw) {
                Ok(cand) => {
                    let r_new = fiber.norm_of(&linalg::sub(&g.b(a, &cand)?, &cand), m)?;
                    if r_new < picard_step {
                        cand
                    } else {
                        newton = false;
                        bw
                    }
                }
                Err(_) => {
                    newton = false;
                    bw
                }
            }
        } else {
            bw
        };
        let step = fiber.norm_of(&linalg::sub(&next, &w), m)?;
        // ratios of steps near round-off carry relative errors of order eps / step
        let floor = 1e6 * f64::EPSILON * (1.0 + fiber.norm_of(&next, m)?);
        if let Some(prev) = last_step {
            if prev > floor && step > floor {
                ratios.push(step / prev);
            }
        }
        last_step = Some(step);
        w = next;
        if step <= opts.tol {
            let residual = fiber.norm_of(&linalg::sub(&w, &g.b(a, &w)?), m)?;
            let rate = if ratios.is_empty() {
                0.0
            } else {
                (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp()
            };
            return Ok(GermSolution {
                w,
                level: m,
                iterations: it,
                rate,
                max_rate: ratios.iter().cloned().fold(0.0, f64::max),
                residual,
            });
        }
    }
    let residual = fiber.norm_of(&linalg::sub(&w, &g.b(a, &w)?), m)?;
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

fn newton_step(g: &BasicGerm, a: &[f64], w: &[f64], bw: &[f64]) -> Result<Vec<f64>> {
    let n = w.len();
    let failure = std::sync::Mutex::new(None);
    let jb = linalg::fd_jacobian(
        |x| match g.b(a, x) {
            Ok(v) => v,
            Err(e) => {
                *failure.lock().expect("unpoisoned") = Some(e);
                vec![0.0; n]
            }
        },
        w,
        n,
        1e-7,
    );
    if let Some(e) = failure.into_inner().expect("unpoisoned") {
        return Err(e);
    }
    let j = DMatrix::identity(n, n) - jb;
    let f = DVector::from_iterator(n, w.iter().zip(bw).map(|(w, b)| w - b));
    let step = j
        .lu()
        .solve(&f)
        .ok_or_else(|| Error::NonInvertible("singular Newton system".into()))?;
    Ok(linalg::sub(w, step.as_slice()))
}

/// Iteration bound `ceil(log(tol (1 - ε) / |B(a, 0)|_m) / log ε)`.
pub fn picard_iteration_bound(g: &BasicGerm, a: &[f64], m: usize, tol: f64) -> Result<usize> {
    let eps = g.epsilons[m];
    let b0 = g.fiber.norm_of(&g.b(a, &vec![0.0; g.fiber.dim()])?, m)?;
    if b0 <= tol || eps == 0.0 {
        return Ok(1);
    }
    Ok(((tol * (1.0 - eps) / b0).ln() / eps.ln()).ceil().max(1.0) as usize)
}

#[derive(Clone, Debug, Serialize)]
pub struct SheetNode {
    pub a: Vec<f64>,
    /// Solutions on levels `0..=m_max`.
    pub levels: Vec<GermSolution>,
    /// Columns `∂δ/∂a_i` on the top level by centered differences
    /// (one-sided on quadrant faces).
    pub derivative: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolutionSheet {
    pub nodes: Vec<SheetNode>,
    pub m_max: usize,
    pub tol: f64,
    /// Max over nodes and `1 <= m <= m_max` of `|δ_m - δ_{m-1}|_{m-1}`.
    pub level_deviation: f64,
}

/// Step for the difference quotients of `δ`.
pub const SHEET_FD_STEP: f64 = 1e-5;

impl SolutionSheet {
    /// Rows `a..., level, δ..., iterations, rate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(n0) = self.nodes.first() {
            let mut head: Vec<String> = (0..n0.a.len()).map(|i| format!("a{i}")).collect();
            head.push("level".into());
            head.extend((0..n0.levels[0].w.len()).map(|i| format!("delta{i}")));
            head.push("iterations".into());
            head.push("rate".into());
            out.push_str(&head.join(","));
            out.push('\n');
        }
        for node in &self.nodes {
            for sol in &node.levels {
                let mut row: Vec<String> = node.a.iter().map(|v| format!("{v}")).collect();
                row.push(sol.level.to_string());
                row.extend(sol.w.iter().map(|v| format!("{v:e}")));
                row.push(sol.iterations.to_string());
                row.push(format!("{}", sol.rate));
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        out
    }
}

/// Solves at every node and level `0..=m_max`; nodes run in parallel.
pub fn solution_sheet(g: &BasicGerm, a_grid: &[Vec<f64>], m_max: usize, tol: f64) -> Result<SolutionSheet> {
    let opts = SolveOptions {
        tol,
        ..SolveOptions::default()
    };
    let nodes: Vec<Result<SheetNode>> = a_grid
        .par_iter()
        .enumerate()
        .map(|(i, a)| solve_node(g, a, m_max, &opts).map_err(|e| Error::at_node(i, e)))
        .collect();
    let nodes: Vec<SheetNode> = nodes.into_iter().collect::<Result<_>>()?;
    let mut level_deviation: f64 = 0.0;
    for node in &nodes {
        for m in 1..=m_max {
            let d = linalg::sub(&node.levels[m].w, &node.levels[m - 1].w);
            level_deviation = level_deviation.max(g.fiber.norm_of(&d, m - 1)?);
        }
    }
    Ok(SolutionSheet {
        nodes,
        m_max,
        tol,
        level_deviation,
    })
}

fn solve_node(g: &BasicGerm, a: &[f64], m_max: usize, opts: &SolveOptions) -> Result<SheetNode> {
    let levels = (0..=m_max)
        .map(|m| solve_germ(g, a, m, opts))
        .collect::<Result<Vec<_>>>()?;
    let h = SHEET_FD_STEP;
    let mut derivative = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let mut plus = a.to_vec();
        plus[i] += h;
        let mut minus = a.to_vec();
        let one_sided = i < g.quadrant_count && a[i] - h < 0.0;
        let (lo, width) = if one_sided {
            minus.copy_from_slice(a);
            (levels[m_max].w.clone(), h)
        } else {
            minus[i] -= h;
            (solve_germ(g, &minus, m_max, opts)?.w, 2.0 * h)
        };
        let hi = solve_germ(g, &plus, m_max, opts)?.w;
        derivative.push(linalg::scale(1.0 / width, &linalg::sub(&hi, &lo)));
    }
    Ok(SheetNode {
        a: a.to_vec(),
        levels,
        derivative,
    })
}

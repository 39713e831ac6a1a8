use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::bundle::{BundleSection, SectionSpec};
use super::control::ControlPair;
use super::multisection::{Branch, Multisection};
use super::solve::{linearization_set, solution_set, ser_rational, transversal_check, SolutionSet, SolveConfig, TransversalReport};
use crate::error::{Error, Result};
use crate::germs::SURJECTIVITY_TOL;
use crate::linalg;

/// Window nodes per axis at which norms of perturbations are asserted.
pub const NORM_SAMPLES_PER_AXIS: usize = 9;
const MAX_COKERNEL_SOURCES: usize = 8;

#[derive(Clone, Debug)]
pub struct PerturbOptions {
    pub epsilon: f64,
    pub seed: u64,
    pub max_attempts: usize,
    /// Branches of each drawn multisection, weighted equally.
    pub branches: usize,
    /// Pair every drawn branch `v` with `-v`, so that a one-sided
    /// degeneracy is resolved on one of the two sides.
    pub antipodal: bool,
    pub solve: SolveConfig,
}

impl PerturbOptions {
    pub fn new(epsilon: f64, seed: u64, max_attempts: usize) -> Self {
        PerturbOptions {
            epsilon,
            seed,
            max_attempts,
            branches: 1,
            antipodal: false,
            solve: SolveConfig::default(),
        }
    }
}

/// A transversal pair `(f, τ)` with its solution set and checks.
#[derive(Clone, Debug)]
pub struct Perturbation {
    pub tau: Multisection,
    pub attempts: usize,
    pub solutions: SolutionSet,
    pub transversality: TransversalReport,
    /// `max N(τ(x))` over the norm samples and solution points.
    pub max_norm: f64,
    pub support_inside: bool,
}

/// Orthonormal fiber directions spanning the cokernels of the failing
/// operators.
fn cokernel_directions(f: &BundleSection, lambda: &Multisection, report: &TransversalReport) -> Result<DMatrix<f64>> {
    let n = f.model().fiber().dim();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut failures = report.failures.clone();
    failures.sort_by(|a, b| a.min_singular.total_cmp(&b.min_singular));
    for w in failures.iter().take(MAX_COKERNEL_SOURCES) {
        let set = linearization_set(f, lambda, &w.point)?;
        for op in set.operators.iter().filter(|o| o.branch == w.branch) {
            let svd = linalg::sorted_svd(&op.operator);
            let rows = op.operator.nrows();
            for k in 0..rows {
                let s = svd.singular_values.get(k).copied().unwrap_or(0.0);
                if s <= SURJECTIVITY_TOL {
                    // columns of U past the rank, or a complement when U is thin
                    let u = if k < svd.u.ncols() {
                        svd.u.column(k).into_owned()
                    } else {
                        linalg::orthogonal_complement(&svd.u, rows).column(k - svd.u.ncols()).into_owned()
                    };
                    cols.push(&set.fiber * u);
                }
            }
        }
    }
    if cols.is_empty() {
        return Ok(DMatrix::identity(n, n));
    }
    linalg::orthonormal_range(&DMatrix::from_columns(&cols), false)
}

fn max_norm(tau: &Multisection, cp: &ControlPair, extra: &[Vec<f64>]) -> Result<f64> {
    let model = tau.model();
    let mut worst: f64 = 0.0;
    for x in model.sample_points(NORM_SAMPLES_PER_AXIS).iter().chain(extra) {
        if model.is_charted(x)? {
            worst = worst.max(tau.norm(&cp.norm, x)?);
        }
    }
    Ok(worst)
}

/// Draws `τ` from cokernel directions at failing solutions, localized by
/// plateau bumps on the balls of `U` and rescaled so that `N(τ) < ε`, until
/// the perturbed pair is transversal.
pub fn perturb_to_transversal_with(f: &BundleSection, cp: &ControlPair, opts: &PerturbOptions) -> Result<Perturbation> {
    if !(opts.epsilon > 0.0 && opts.epsilon < 1.0) {
        return Err(Error::Config(format!("ε = {} must lie in (0, 1)", opts.epsilon)));
    }
    let model = f.model();
    let zero = Multisection::zero(model);
    let sol0 = solution_set(f, &zero, &opts.solve)?;
    let rep0 = transversal_check(f, &zero, &sol0)?;
    if rep0.pass {
        return Ok(Perturbation {
            tau: zero,
            attempts: 0,
            solutions: sol0,
            transversality: rep0,
            max_norm: 0.0,
            support_inside: true,
        });
    }
    let dirs = cokernel_directions(f, &zero, &rep0)?;
    let balls = cp.balls.len().max(1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = rep0.worst_min_singular;
    let k = opts.branches.max(1);
    for attempt in 1..=opts.max_attempts {
        let mut branches = Vec::with_capacity(k);
        for _ in 0..k {
            let coeffs: Vec<f64> = (0..dirs.ncols()).map(|_| rng.sample(StandardNormal)).collect();
            let v = &dirs * DVector::from_vec(coeffs);
            let v = v.as_slice().to_vec();
            let nv = cp.norm.eval(model, &v)?;
            if nv == 0.0 {
                continue;
            }
            let target = rng.random_range(0.2..0.8) * opts.epsilon / balls;
            let value = linalg::scale(target / nv, &v);
            let signs: &[f64] = if opts.antipodal { &[1.0, -1.0] } else { &[1.0] };
            for &sign in signs {
                let terms = cp
                    .balls
                    .iter()
                    .map(|b| SectionSpec::Bump {
                        center: b.center.clone(),
                        radius: b.radius,
                        value: linalg::scale(sign, &value),
                    })
                    .collect();
                branches.push(BundleSection::from_spec(model, SectionSpec::Sum { terms })?);
            }
        }
        if branches.is_empty() {
            continue;
        }
        let w = BigRational::new(1.into(), (branches.len() as i64).into());
        let tau = Multisection::new(
            model,
            branches
                .into_iter()
                .map(|section| Branch {
                    section,
                    weight: w.clone(),
                })
                .collect(),
        )?;
        let support_inside = tau.support().is_some_and(|s| cp.contains_support(&s));
        assert!(support_inside, "perturbation support leaves U");
        if max_norm(&tau, cp, &[])? >= opts.epsilon {
            continue;
        }
        let sol = solution_set(f, &tau, &opts.solve)?;
        let rep = transversal_check(f, &tau, &sol)?;
        let points: Vec<Vec<f64>> = sol.points.iter().map(|p| p.point.clone()).collect();
        let norm = max_norm(&tau, cp, &points)?;
        assert!(norm < opts.epsilon, "perturbation norm {norm} exceeds ε = {}", opts.epsilon);
        if rep.pass {
            return Ok(Perturbation {
                tau,
                attempts: attempt,
                solutions: sol,
                transversality: rep,
                max_norm: norm,
                support_inside,
            });
        }
        worst = worst.max(rep.worst_min_singular);
    }
    Err(Error::ExhaustedAttempts {
        attempts: opts.max_attempts,
        worst,
    })
}

pub fn perturb_to_transversal(f: &BundleSection, cp: &ControlPair, epsilon: f64, seed: u64, max_attempts: usize) -> Result<Perturbation> {
    perturb_to_transversal_with(f, cp, &PerturbOptions::new(epsilon, seed, max_attempts))
}

#[derive(Clone, Debug, Serialize)]
pub struct CobordismReport {
    pub t_samples: Vec<f64>,
    pub family_solutions: usize,
    /// Smallest singular value of `[D_x F_t | ∂_t F_t]` over the samples.
    pub family_min_singular: f64,
    pub index: Option<i64>,
    #[serde(serialize_with = "ser_opt_rational")]
    pub count0: Option<BigRational>,
    #[serde(serialize_with = "ser_opt_rational")]
    pub count1: Option<BigRational>,
    pub pass: bool,
}

fn ser_opt_rational<S: serde::Serializer>(q: &Option<BigRational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match q {
        Some(q) => ser_rational(q, s),
        None => s.serialize_none(),
    }
}

/// Interpolates `τ_t = (1 - t)τ0 + tτ1` over `t_samples`, checks that the
/// family `(t, x) -> f(x) - τ_t(x)` is transversal at every sampled
/// solution, and compares weighted signed counts at the ends (index 0).
pub fn cobordism_compare(
    f: &BundleSection,
    tau0: &Multisection,
    tau1: &Multisection,
    cp: &ControlPair,
    t_samples: usize,
    cfg: &SolveConfig,
) -> Result<CobordismReport> {
    for (name, tau) in [("τ0", tau0), ("τ1", tau1)] {
        let inside = tau.support().is_some_and(|s| cp.contains_support(&s));
        if !inside {
            return Err(Error::CertificationFailure(format!("support of {name} is not inside the certified U")));
        }
        let norm = max_norm(tau, cp, &[])?;
        if !(norm < 1.0) {
            return Err(Error::CertificationFailure(format!("N({name}) = {norm} is not below 1")));
        }
    }
    let ts: Vec<f64> = (0..t_samples.max(2))
        .map(|i| i as f64 / (t_samples.max(2) - 1) as f64)
        .collect();
    let mut family_solutions = 0;
    let mut family_min: f64 = f64::INFINITY;
    for &t in &ts {
        let lam = tau0.interpolate(tau1, t)?;
        let sol = solution_set(f, &lam, &SolveConfig { certify: false, ..cfg.clone() })?;
        for p in &sol.points {
            let set = linearization_set(f, &lam, &p.point)?;
            let x = &p.point;
            for op in &set.operators {
                // ∂_t (f - τ_t) = τ0_i(x) - τ1_j(x) for the pair (i, j)
                let (i, j) = (op.branch / tau1.len(), op.branch % tau1.len());
                let dt = linalg::sub(&tau0.branches()[i].section.eval(x)?, &tau1.branches()[j].section.eval(x)?);
                let col = set.fiber.transpose() * DVector::from_vec(dt);
                let mut ext = DMatrix::zeros(op.operator.nrows(), op.operator.ncols() + 1);
                ext.columns_mut(0, op.operator.ncols()).copy_from(&op.operator);
                ext.set_column(op.operator.ncols(), &col);
                let s = linalg::min_singular_value(&ext);
                family_min = family_min.min(s);
                if !(s > SURJECTIVITY_TOL) {
                    return Err(Error::NotTransversal(format!(
                        "family at t = {t} has smallest singular value {s:e} at {x:?}"
                    )));
                }
            }
            family_solutions += 1;
        }
    }
    let s0 = solution_set(f, tau0, cfg)?;
    let s1 = solution_set(f, tau1, cfg)?;
    let index = s0.index().or(s1.index());
    let (count0, count1) = if index.unwrap_or(0) == 0 {
        (s0.weighted_count(), s1.weighted_count())
    } else {
        (None, None)
    };
    let pass = match (&count0, &count1) {
        (Some(a), Some(b)) => a == b,
        _ => index.is_some_and(|i| i != 0),
    };
    Ok(CobordismReport {
        t_samples: ts,
        family_solutions,
        family_min_singular: family_min,
        index,
        count0,
        count1,
        pass,
    })
}

/// `f - c` for a constant fiber vector `c`.
pub fn constant_shift(f: &BundleSection, value: Vec<f64>) -> Result<BundleSection> {
    let s = BundleSection::from_spec(f.model(), SectionSpec::Constant { value })?;
    f.combine(&s, -1.0)
}

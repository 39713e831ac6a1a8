//! Acceptance suite. Each test prints one `PASS`/`FAIL` line with its
//! measured values; tests run one at a time so that runtimes are not
//! distorted by sharing the CPU.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Zero};
use polyfold_core::branched_integration::fixtures::{cap, cap_form, tilted_cap, two_caps, unit_disk, x_dy};
use polyfold_core::branched_integration::{de_rham_pairing, PolyForm, Polynomial, Region, ScDifferentialForm};
use polyfold_core::germs::{affine_fixture, solution_sheet, solve_germ, SolveOptions};
use polyfold_core::groupoids::{
    compose, compose_generalized, compose_witnesses, full_subgroupoid, identity_groupoid, isotropy, line_samples,
    natural_representation, orbit_space, reflection_groupoid, refinement_check, rotation_groupoid, sector_samples,
    trivial_action_groupoid, Diagram, EpGroupoid, Functor, RefinementWitness,
};
use polyfold_core::linalg;
use polyfold_core::perturbation::fixtures::{fold, PorkBarrel};
use polyfold_core::perturbation::{
    cobordism_compare, control_pair_build, perturb_to_transversal, perturb_to_transversal_with, AuxiliaryNorm,
    BundleSection, Multisection, PerturbOptions, SectionSpec, SolveConfig, StrongBundleModel, Window, BRANCH_TOL,
};
use polyfold_core::quadrature;
use polyfold_core::retracts::{
    bump_splicing, conjugate_bump_retraction, corner_invariance_check, quadrant_diffeo_fixture, retract_tangent_basis,
    splicing_to_retraction, tangent_independence_check, BumpFamily, BumpProfile, Retraction,
};
use polyfold_core::sc_calculus::{classical_shift_quotient, sc1_probe, shift_map};
use polyfold_core::sc_core::{degeneracy_index, PartialQuadrant, ScScale, ScVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the verdict line and fails the test on `FAIL`.
fn verdict(n: usize, title: &str, pass: bool, detail: String) {
    let mark = if pass { "PASS" } else { "FAIL" };
    println!("[{mark}] criterion {n:>2}: {title}: {detail}");
    assert!(pass, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_01_degeneracy_index() {
    let _g = serial();
    let start = Instant::now();
    let c = PartialQuadrant::leading(3, 5).unwrap();
    let e = Arc::new(ScScale::finite_dim(5, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..5)
            .map(|i| match (i < 3, rng.random_bool(0.4)) {
                (_, true) => 0.0,
                (true, false) => rng.random_range(0.0..5.0),
                (false, false) => rng.random_range(-5.0..5.0),
            })
            .collect();
        let brute = x[..3].iter().filter(|&&v| v == 0.0).count();
        let v = ScVector::smooth(&e, x).unwrap();
        mismatches += usize::from(degeneracy_index(&c, &v, 1e-12).unwrap() != brute);
    }
    let corner = degeneracy_index(&c, &ScVector::smooth(&e, vec![0.0, 0.0, 0.0, 1.5, -2.0]).unwrap(), 1e-12).unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "degeneracy index",
        mismatches == 0 && corner == 3 && secs < 1.0,
        format!("mismatches {mismatches}/1000, corner index {corner}, {secs:.3} s"),
    );
}

#[test]
fn criterion_02_shift_map_dichotomy() {
    let _g = serial();
    let start = Instant::now();
    let e = Arc::new(ScScale::weighted_grid(8.0, 1.0 / 128.0, vec![0.0, 0.1, 0.2]).unwrap());
    let phi = shift_map(&e).unwrap();
    let joined = |t: f64, u: Vec<f64>| {
        let mut v = vec![t];
        v.extend(u);
        ScVector::new(phi.source(), v, 1).unwrap()
    };
    let gaussian = e.grid().unwrap().coordinates().iter().map(|s| (-s * s).exp()).collect();
    let hs = [1e-1, 1e-2, 1e-3, 1e-4];
    let rep = sc1_probe(&phi, &joined(0.25, gaussian), &joined(1.0, vec![0.0; e.dim()]), &hs, false).unwrap();
    let saw = |s: f64| (2.0 * s).rem_euclid(1.0);
    let frechet = classical_shift_quotient(&e, saw, |_| 2.0, 0.0, &hs).unwrap();
    let floor = frechet.rows.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        2,
        "shift-map dichotomy",
        rep.fitted_slope >= 0.9 && floor > 0.1 && secs < 10.0,
        format!("sc1 slope {:.4}, sawtooth quotient floor {floor:.3}, {secs:.3} s", rep.fitted_slope),
    );
}

const SAMPLE_S: [f64; 4] = [-1.0, -0.25, 0.25, 1.0];

/// `(s, 0.8 f̂_s)` for `s > 0`, `(s, 0)` otherwise.
fn retract_point(total: &Arc<ScScale>, fiber: &Arc<ScScale>, s: f64) -> ScVector {
    let fam = BumpFamily::new(BumpProfile::polynomial(), fiber).unwrap();
    let mut x = vec![s];
    match fam.frame(s).unwrap() {
        Some(fr) => x.extend(fr.f.iter().map(|v| 0.8 * v)),
        None => x.extend(vec![0.0; fiber.dim()]),
    }
    ScVector::smooth(total, x).unwrap()
}

/// Rank of a centered-difference Jacobian of `r` applied to a Gaussian sketch.
fn fd_rank(r: &Retraction, x: &[f64]) -> usize {
    let n = x.len();
    let omega = linalg::gaussian_matrix(n, 8, 99);
    let mut y = DMatrix::zeros(n, 8);
    for j in 0..8 {
        let w: Vec<f64> = omega.column(j).iter().cloned().collect();
        let eps = 1e-6 / linalg::euclidean_norm(&w);
        let fp = r.map().eval_raw(&linalg::axpy(eps, &w, x)).unwrap();
        let fm = r.map().eval_raw(&linalg::axpy(-eps, &w, x)).unwrap();
        for i in 0..n {
            y[(i, j)] = (fp[i] - fm[i]) / (2.0 * eps);
        }
    }
    let sv = y.singular_values();
    let top = sv.max();
    sv.iter().filter(|&&v| v > 1e-6 * top).count()
}

#[test]
fn criterion_03_retraction_suite() {
    let _g = serial();
    let fiber = Arc::new(ScScale::weighted_grid(64.0, 1.0 / 16.0, vec![0.0, 0.01, 0.02, 0.03]).unwrap());
    let sp = bump_splicing(BumpProfile::polynomial(), &fiber, &SAMPLE_S).unwrap();
    let r = splicing_to_retraction(&sp).unwrap();
    let xs = fiber.grid().unwrap().coordinates();
    let samples: Vec<ScVector> = SAMPLE_S
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let shift = (1.0 / s.abs()).exp().min(40.0);
            let mut x = vec![*s];
            x.extend(xs.iter().map(|t| (1.0 + k as f64) * (-(t + shift) * (t + shift) / 2.0).exp()));
            ScVector::smooth(r.scale(), x).unwrap()
        })
        .collect();
    let rep = r.retraction_check(&samples, 3).unwrap();
    let idem = rep.residual_per_level.iter().cloned().fold(0.0, f64::max);
    let mut dims = Vec::new();
    let mut dims_ok = true;
    for s in SAMPLE_S {
        let x = retract_point(r.scale(), &fiber, s);
        let dim = retract_tangent_basis(&r, &x).unwrap().ncols();
        let oracle = fd_rank(&r, x.coeffs());
        dims_ok &= dim == oracle && dim == if s > 0.0 { 2 } else { 1 };
        dims.push(dim);
    }
    let conj = conjugate_bump_retraction(BumpProfile::polynomial(), &fiber, 0.3).unwrap();
    let points: Vec<ScVector> = SAMPLE_S.iter().map(|s| retract_point(r.scale(), &fiber, *s)).collect();
    let gap = tangent_independence_check(&r, &conj, &points).unwrap();
    verdict(
        3,
        "retraction suite",
        rep.residual_per_level.len() == 4 && idem <= 1e-9 && dims_ok && gap <= 1e-8,
        format!("idempotence residual {idem:.2e} on levels 0-3, tangent dims {dims:?}, principal-angle gap {gap:.2e}"),
    );
}

#[test]
fn criterion_04_corner_recognition() {
    let _g = serial();
    let e = Arc::new(ScScale::finite_dim(2, 2));
    let mut worst = 0;
    for seed in 0..20 {
        let fx = quadrant_diffeo_fixture(seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let pts: Vec<ScVector> = (0..50)
            .map(|_| {
                let p = (0..2)
                    .map(|_| if rng.random_bool(0.35) { 0.0 } else { rng.random_range(0.0..2.0) })
                    .collect();
                ScVector::smooth(&e, p).unwrap()
            })
            .collect();
        worst = worst.max(corner_invariance_check(&fx.forward, &fx.inverse, &pts).unwrap());
    }
    verdict(4, "corner recognition", worst == 0, format!("max index discrepancy {worst} over 20 fixtures"));
}

#[test]
fn criterion_05_germ_solver() {
    let _g = serial();
    let fx = affine_fixture(8, 2, 3, 13).unwrap();
    let grid: Vec<Vec<f64>> = (0..10)
        .flat_map(|i| (0..10).map(move |j| vec![-0.5 + 0.1 * i as f64, -0.5 + 0.1 * j as f64]))
        .collect();
    let start = Instant::now();
    let sheet = solution_sheet(&fx.germ, &grid, 3, 1e-12).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut err: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for node in &sheet.nodes {
        let oracle = fx.oracle(&node.a);
        for sol in &node.levels {
            err = err.max(linalg::euclidean_norm(&linalg::sub(&sol.w, &oracle)));
            // at a = 0 the start point is the solution and no rate is observed
            if sol.iterations > 1 {
                lo = lo.min(sol.rate);
                hi = hi.max(sol.rate);
            }
        }
    }
    let a = [0.2, -0.4];
    for m in 0..=3 {
        let s = solve_germ(&fx.germ, &a, m, &SolveOptions::default()).unwrap();
        err = err.max(linalg::euclidean_norm(&linalg::sub(&s.w, &fx.oracle(&a))));
        lo = lo.min(s.rate);
        hi = hi.max(s.rate);
    }
    verdict(
        5,
        "germ solver",
        err <= 1e-10 && lo >= 0.35 && hi <= 0.45 && sheet.level_deviation <= 2e-12 && secs < 1.0,
        format!(
            "oracle error {err:.2e}, rates [{lo:.4}, {hi:.4}], level deviation {:.2e}, 100-node sheet {secs:.3} s",
            sheet.level_deviation
        ),
    );
}

fn q(p: i64, r: i64) -> BigRational {
    BigRational::new(p.into(), r.into())
}

fn random_multisection(m: &Arc<StrongBundleModel>, rng: &mut ChaCha8Rng) -> Multisection {
    let k = rng.random_range(1..=4);
    let raw: Vec<i64> = (0..k).map(|_| rng.random_range(1..=6)).collect();
    let total: i64 = raw.iter().sum();
    let branches = raw
        .iter()
        .map(|&w| {
            let value: Vec<f64> = (0..2).map(|_| 0.25 * rng.random_range(-2..=2) as f64).collect();
            let spec = if rng.random_bool(0.5) {
                SectionSpec::Constant { value }
            } else {
                SectionSpec::Bump {
                    center: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                    radius: rng.random_range(0.5..2.0),
                    value,
                }
            };
            polyfold_core::perturbation::Branch {
                section: BundleSection::from_spec(m, spec).unwrap(),
                weight: q(w, total),
            }
        })
        .collect();
    Multisection::new(m, branches).unwrap()
}

/// `Σ_{h1 + h2 = h} Λ1(h1) Λ2(h2)` over the distinct fiber values of `Λ1`.
fn brute_convolution(a: &Multisection, b: &Multisection, x: &[f64], h: &[f64]) -> BigRational {
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let mut total = BigRational::zero();
    for h1 in a.values(x).unwrap() {
        if seen.iter().any(|s| linalg::euclidean_norm(&linalg::sub(s, &h1)) <= BRANCH_TOL) {
            continue;
        }
        total += a.eval(x, &h1).unwrap() * b.eval(x, &linalg::sub(h, &h1)).unwrap();
        seen.push(h1);
    }
    total
}

#[test]
fn criterion_06_multisection_algebra() {
    let _g = serial();
    let m = Arc::new(StrongBundleModel::euclidean("plane", 2, 2, 1, Window::cube(2, 2.0)).unwrap());
    let n = AuxiliaryNorm::for_model(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let (mut fibers, mut conv_bad, mut weight_bad) = (0, 0, 0);
    for _ in 0..40 {
        let a = random_multisection(&m, &mut rng);
        let b = random_multisection(&m, &mut rng);
        let s = a.sum(&b).unwrap();
        for x in [&a, &b, &s] {
            let total = x.branches().iter().fold(BigRational::zero(), |acc, br| acc + &br.weight);
            weight_bad += usize::from(total != BigRational::one());
        }
        for _ in 0..10 {
            let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let mut hs: Vec<Vec<f64>> = Vec::new();
            for u in a.values(&x).unwrap() {
                for v in b.values(&x).unwrap() {
                    hs.push(linalg::add(&u, &v));
                }
            }
            hs.push(vec![9.0, 9.0]);
            for h in &hs {
                fibers += 1;
                conv_bad += usize::from(s.eval(&x, h).unwrap() != brute_convolution(&a, &b, &x, h));
            }
        }
    }
    let (mut points, mut sub_bad) = (0, 0);
    while points < 1000 {
        let a = random_multisection(&m, &mut rng);
        let b = random_multisection(&m, &mut rng);
        let s = a.sum(&b).unwrap();
        for _ in 0..50 {
            let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let lhs = s.norm(&n, &x).unwrap();
            let rhs = a.norm(&n, &x).unwrap() + b.norm(&n, &x).unwrap();
            sub_bad += usize::from(lhs > rhs + 1e-14);
            points += 1;
        }
    }
    verdict(
        6,
        "multisection algebra",
        conv_bad == 0 && weight_bad == 0 && sub_bad == 0,
        format!(
            "convolution mismatches {conv_bad}/{fibers} fibers, weight sums != 1: {weight_bad}, subadditivity violations {sub_bad}/{points}"
        ),
    );
}

#[test]
fn criterion_07_transversal_perturbation() {
    let _g = serial();
    let start = Instant::now();
    let mut ok = true;
    let f = fold();
    let cp = control_pair_build(&f, &AuxiliaryNorm::for_model(f.model()), 0.3, 41).unwrap();
    let mut taus = Vec::new();
    let mut worst_norm: f64 = 0.0;
    let mut worst_sv = f64::INFINITY;
    for seed in [1, 2] {
        let p = perturb_to_transversal(&f, &cp, 0.1, seed, 20).unwrap();
        ok &= p.max_norm < 0.1 && p.support_inside && p.transversality.pass;
        for s in &p.solutions.points {
            worst_sv = worst_sv.min(s.min_singular);
        }
        worst_norm = worst_norm.max(p.max_norm);
        taus.push(p.tau);
    }
    ok &= worst_sv > 1e-8;
    let fold_rep = cobordism_compare(&f, &taus[0], &taus[1], &cp, 5, &SolveConfig::default()).unwrap();
    ok &= fold_rep.pass && fold_rep.count0.is_some() && fold_rep.count0 == fold_rep.count1;

    let pb = PorkBarrel::default();
    let g = pb.build().unwrap();
    let cp = control_pair_build(&g, &AuxiliaryNorm::for_model(g.model()), 0.5, 21).unwrap();
    let mut taus = Vec::new();
    let mut pork_sv = f64::INFINITY;
    for seed in [1, 2] {
        let mut opts = PerturbOptions::new(0.1, seed, 20);
        opts.antipodal = true;
        opts.solve = pb.solve_config();
        let p = perturb_to_transversal_with(&g, &cp, &opts).unwrap();
        ok &= p.max_norm < 0.1 && p.support_inside && p.transversality.pass && !p.solutions.points.is_empty();
        pork_sv = pork_sv.min(p.transversality.worst_min_singular);
        worst_norm = worst_norm.max(p.max_norm);
        taus.push(p.tau);
    }
    ok &= pork_sv > 1e-8;
    let pork_rep = cobordism_compare(&g, &taus[0], &taus[1], &cp, 3, &pb.solve_config()).unwrap();
    // in index 1 the weighted count is not a number; the comparison is the
    // transversality of the connecting family
    ok &= pork_rep.pass && pork_rep.index == Some(1) && pork_rep.family_min_singular > 1e-8;
    let secs = start.elapsed().as_secs_f64();
    let count = |c: &Option<BigRational>| c.as_ref().map_or("none".to_string(), |v| v.to_string());
    verdict(
        7,
        "transversal perturbation",
        ok && secs < 30.0,
        format!(
            "max norm {worst_norm:.3} < 0.1, min singular fold {worst_sv:.2e} pork {pork_sv:.2e}, fold counts {} / {}, pork index-1 family singular {:.2e}, {secs:.2} s",
            count(&fold_rep.count0),
            count(&fold_rep.count1),
            pork_rep.family_min_singular
        ),
    );
}

/// `∫ dω` over the graph of `h` by composite Gauss–Legendre in polar
/// coordinates with the pulled-back density `a_xy + a_xz h_y - a_yz h_x`.
fn graph_integral(dw: &PolyForm, h: &Polynomial) -> f64 {
    let coeff = |i: usize, j: usize, p: &[f64]| dw.coefficient(&[i, j]).map_or(0.0, |c| c.eval(p));
    let (hx, hy) = (h.derivative(0), h.derivative(1));
    quadrature::integrate(
        |r| {
            quadrature::integrate(
                |t| {
                    let (x, y) = (r * t.cos(), r * t.sin());
                    let p = [x, y, h.eval(&[x, y])];
                    let dens = coeff(0, 1, &p) + coeff(0, 2, &p) * hy.eval(&[x, y]) - coeff(1, 2, &p) * hx.eval(&[x, y]);
                    dens * r
                },
                0.0,
                2.0 * PI,
                32,
                10,
            )
        },
        0.0,
        1.0,
        8,
        10,
    )
}

#[test]
fn criterion_08_weighted_stokes() {
    let _g = serial();
    let start = Instant::now();
    let disk = unit_disk().stokes_residual(&x_dy().into(), 12).unwrap();
    let caps = two_caps();
    let dw = cap_form().exterior_derivative();
    let measure = caps.integrate(&dw.clone().into(), &Region::All, 12).unwrap().value;
    let brute = 0.5 * (0.5 * graph_integral(&dw, &cap()) + 0.5 * graph_integral(&dw, &tilted_cap()));
    let orders: Vec<usize> = (1..=14).collect();
    let rows = caps.stokes_curve(&cap_form().into(), &orders).unwrap();
    let monotone = rows.windows(2).all(|w| w[1].residual <= w[0].residual);
    let last = rows.last().unwrap().residual;
    let secs = start.elapsed().as_secs_f64();
    let ge = caps.isotropy().unwrap().effective_order;
    verdict(
        8,
        "weighted Stokes",
        disk.residual <= 1e-8 && (measure - brute).abs() <= 1e-10 && ge == 2 && monotone && last <= 1e-6 && secs < 5.0,
        format!(
            "disk residual {:.1e} at order 12, two-cap |measure - brute| {:.1e} with |G_e| = {ge}, residual order 1 {:.1e} -> order 14 {last:.1e} monotone {monotone}, {secs:.2} s",
            disk.residual,
            (measure - brute).abs(),
            rows[0].residual
        ),
    );
}

/// Restricts `d` to the full subgroupoid of its apex on `keep`, with
/// identity transformations.
fn restrict(d: &Diagram, keep: &[usize]) -> (Diagram, RefinementWitness) {
    let (_, h) = full_subgroupoid(d.apex(), keep).unwrap();
    let d2 = Diagram::new(compose(&h, &d.left).unwrap(), compose(&h, &d.right).unwrap()).unwrap();
    let tau_left = (0..keep.len()).map(|a| d.domain().identity(d2.left.object(a))).collect();
    let tau_right = (0..keep.len()).map(|a| d.codomain().identity(d2.right.object(a))).collect();
    (d2, RefinementWitness { h, tau_left, tau_right })
}

/// Isotropy order, effective order, orbit and natural representation at
/// every object against coordinate enumeration of the group elements.
fn groupoid_failures(g: &EpGroupoid, group: &[fn(&[f64]) -> Vec<f64>], faithful: bool) -> usize {
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12);
    let points: Vec<Vec<f64>> = g.objects().iter().map(|o| o.point.clone()).collect();
    let orbits = orbit_space(g);
    let mut bad = 0;
    for (x, p) in points.iter().enumerate() {
        let iso = isotropy(g, x).unwrap();
        let fixing = group.iter().filter(|a| close(&a(p), p)).count();
        let orbit: Vec<usize> = (0..points.len()).filter(|&j| group.iter().any(|a| close(&a(p), &points[j]))).collect();
        let mut members = orbits.members[orbits.projection[x]].clone();
        members.sort_unstable();
        bad += usize::from(iso.order() != fixing);
        bad += usize::from(iso.effective_order() != if faithful { fixing } else { 1 });
        bad += usize::from(members != orbit);
        bad += usize::from(!natural_representation(g, x).unwrap().pass);
    }
    bad
}

fn rot(k: usize) -> impl Fn(&[f64]) -> Vec<f64> {
    move |p: &[f64]| {
        let t = 2.0 * PI * k as f64 / 3.0;
        vec![t.cos() * p[0] - t.sin() * p[1], t.sin() * p[0] + t.cos() * p[1]]
    }
}

#[test]
fn criterion_09_groupoid_suite() {
    let _g = serial();
    let start = Instant::now();
    let line = line_samples(9, 1.0);
    let id: fn(&[f64]) -> Vec<f64> = |p| p.to_vec();
    let flip: fn(&[f64]) -> Vec<f64> = |p| vec![-p[0]];
    let refl = reflection_groupoid(&line).unwrap();
    let triv = trivial_action_groupoid(&line).unwrap();
    let z3 = rotation_groupoid(3, &sector_samples(3, &[0.5, 1.0], 4)).unwrap();
    let turns: [fn(&[f64]) -> Vec<f64>; 3] = [|p| rot(0)(p), |p| rot(1)(p), |p| rot(2)(p)];
    let enumeration = groupoid_failures(&refl, &[id, flip], true)
        + groupoid_failures(&triv, &[id, id], false)
        + groupoid_failures(&z3, &turns, true);

    let squares: Vec<Vec<f64>> = line.iter().map(|p| vec![p[0] * p[0]]).collect();
    let y = trivial_action_groupoid(&squares).unwrap();
    let f = Functor::equivariant("square", &refl, &y, |p| vec![p[0] * p[0]], &[0, 1]).unwrap();
    let d = Diagram::from_functor(f).unwrap();
    let coord = |g: &EpGroupoid, a: usize| g.object(a).point[0];
    let keep1: Vec<usize> = (0..refl.objects().len()).filter(|&a| coord(&refl, a) >= -0.5).collect();
    let (d1, w1) = restrict(&d, &keep1);
    let keep2: Vec<usize> = (0..keep1.len()).filter(|&a| coord(d1.apex(), a) >= 0.0).collect();
    let (d2, w2) = restrict(&d1, &keep2);
    let w = compose_witnesses(&d, &w1, &w2).unwrap();
    let transitive = refinement_check(&d, &d1, &w1).unwrap().pass
        && refinement_check(&d1, &d2, &w2).unwrap().pass
        && refinement_check(&d, &d2, &w).unwrap().pass;

    let cubes: Vec<Vec<f64>> = y.objects().iter().map(|o| vec![3.0 * o.point[0]]).collect();
    let z = identity_groupoid(&cubes).unwrap();
    let g = Functor::equivariant("triple", d.codomain(), &z, |p| vec![3.0 * p[0]], &[0, 0]).unwrap();
    let comp = compose_generalized(&d, &Diagram::from_functor(g).unwrap()).unwrap();
    let (xo, zo) = (orbit_space(&refl), orbit_space(&z));
    let map = comp.diagram.orbit_map();
    let composed = comp.pass
        && xo.representatives.iter().enumerate().all(|(o, &r)| {
            let v = coord(&refl, r);
            z.find_object(0, &[3.0 * v * v]).is_some_and(|t| map[o] == zo.projection[t])
        });
    let secs = start.elapsed().as_secs_f64();
    verdict(
        9,
        "groupoid suite",
        enumeration == 0 && transitive && composed && secs < 1.0,
        format!(
            "enumeration failures {enumeration} (Z2 reflection, Z2 trivial, Z3 rotation), refinement transitive {transitive}, generalized composition {composed}, {secs:.3} s"
        ),
    );
}

#[test]
fn criterion_10_pairing_stability() {
    let _g = serial();
    let f = fold();
    let cp = control_pair_build(&f, &AuxiliaryNorm::for_model(f.model()), 0.3, 41).unwrap();
    let one: ScDifferentialForm = PolyForm::function(Polynomial::constant(2, 1.0)).into();
    let r = de_rham_pairing(&f, &cp, &one, 5, 11).unwrap();
    let counts: Vec<String> = r.trials.iter().map(|t| t.weighted_count.clone().unwrap_or_default()).collect();
    let identical = r.trials.len() == 5 && r.counts_identical == Some(true) && counts.iter().all(|c| c == &counts[0]);
    let mismatch = de_rham_pairing(&f, &cp, &x_dy().into(), 5, 1).unwrap();
    let zero = mismatch.values.iter().all(|&v| v == 0.0);
    verdict(
        10,
        "pairing stability",
        r.index == 0 && identical && r.pass && zero,
        format!("index {} counts {counts:?}, mismatched degree values {:?}", r.index, mismatch.values),
    );
}

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Zero};
use polyfold_core::linalg;
use polyfold_core::perturbation::fixtures::{
    boundary_breach, circle, fold, fold_line, loop_derivative, loop_elliptic, loop_inclusion, loop_model,
    loop_multiplication, loop_samples, non_proper, PorkBarrel,
};
use polyfold_core::perturbation::*;
use polyfold_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(p: i64, r: i64) -> BigRational {
    BigRational::new(p.into(), r.into())
}

fn plane(fiber: usize) -> Arc<StrongBundleModel> {
    Arc::new(StrongBundleModel::euclidean("plane", 2, fiber, 1, Window::cube(2, 2.0)).unwrap())
}

fn constant(m: &Arc<StrongBundleModel>, value: Vec<f64>) -> BundleSection {
    BundleSection::from_spec(m, SectionSpec::Constant { value }).unwrap()
}

fn multisection(m: &Arc<StrongBundleModel>, branches: Vec<(BundleSection, BigRational)>) -> Multisection {
    Multisection::new(
        m,
        branches
            .into_iter()
            .map(|(section, weight)| Branch { section, weight })
            .collect(),
    )
    .unwrap()
}

fn weight_sum(m: &Multisection) -> BigRational {
    m.branches().iter().fold(BigRational::zero(), |acc, b| acc + &b.weight)
}

#[test]
fn zero_section_is_sc_plus() {
    let m = plane(2);
    let pts = m.sample_points(3);
    let rep = bilevel_check(&BundleSection::zero(&m), &pts).unwrap();
    assert!(rep.pass);
    assert_eq!(rep.checked, 9);
}

#[test]
fn loop_derivative_is_plain_and_inclusion_is_sc_plus() {
    let m = loop_model().unwrap();
    let samples = loop_samples(2, 11);
    let d = bilevel_check(&loop_derivative(&m), &samples).unwrap();
    assert!(d.pass, "{:?}", d.violations);
    assert_eq!(d.checked, samples.len());
    let i = bilevel_check(&loop_inclusion(&m), &samples).unwrap();
    assert!(i.pass, "{:?}", i.violations);
    // the derivative loses exactly the one order an sc⁺ tag would require
    let mut tagged = loop_derivative(&m);
    tagged.class = SectionClass::ScPlus;
    assert!(!bilevel_check(&tagged, &samples).unwrap().pass);
}

#[test]
fn elliptic_loop_section_is_regularizing() {
    let m = loop_model().unwrap();
    let rep = regularizing_check(&loop_elliptic(&m), &loop_samples(2, 3)).unwrap();
    assert!(rep.pass, "{:?}", rep.counterexamples);
    assert_eq!(rep.checked, 48);
}

#[test]
fn zero_section_on_smooth_model_is_regularizing() {
    let m = plane(2);
    let rep = regularizing_check(&BundleSection::zero(&m), &m.sample_points(4)).unwrap();
    assert!(rep.pass);
}

#[test]
fn multiplication_operator_is_not_regularizing() {
    let m = loop_model().unwrap();
    let rep = regularizing_check(&loop_multiplication(&m), &loop_samples(1, 5)).unwrap();
    assert!(!rep.pass);
    let w = &rep.counterexamples[0];
    assert_eq!(w.fiber_level, Some(w.base_level + 1));
}

#[test]
fn auxiliary_norm_is_a_norm_on_fibers() {
    let f = PorkBarrel::default().build().unwrap();
    let m = f.model();
    let n = AuxiliaryNorm::for_model(m);
    let pts = vec![m.lift(&[-0.5, 0.1]), m.lift(&[0.6, -0.3])];
    let rep = n.check(m, &pts, 9).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(m.idempotence_residual(&pts, 4).unwrap() <= 1e-12);
}

#[test]
fn single_branch_evaluation() {
    let m = plane(2);
    let s = Multisection::singleton(constant(&m, vec![0.3, -0.1])).unwrap();
    assert_eq!(s.eval(&[0.5, 0.5], &[0.3, -0.1]).unwrap(), BigRational::one());
    assert_eq!(s.eval(&[0.5, 0.5], &[0.3, 0.1]).unwrap(), BigRational::zero());
}

#[test]
fn sum_with_zero_singleton_is_identity() {
    let m = plane(1);
    let a = multisection(
        &m,
        vec![(constant(&m, vec![0.2]), q(1, 3)), (constant(&m, vec![-0.4]), q(2, 3))],
    );
    let s = a.sum(&Multisection::zero(&m)).unwrap();
    for x in m.sample_points(4) {
        for e in [0.2, -0.4, 0.0, 0.7] {
            assert_eq!(s.eval(&x, &[e]).unwrap(), a.eval(&x, &[e]).unwrap());
        }
    }
}

#[test]
fn two_by_two_sum_has_four_quarter_branches() {
    let m = plane(1);
    let a = multisection(&m, vec![(constant(&m, vec![0.0]), q(1, 2)), (constant(&m, vec![1.0]), q(1, 2))]);
    let b = multisection(&m, vec![(constant(&m, vec![0.0]), q(1, 2)), (constant(&m, vec![10.0]), q(1, 2))]);
    let s = a.sum(&b).unwrap();
    assert_eq!(s.len(), 4);
    assert!(s.branches().iter().all(|br| br.weight == q(1, 4)));
}

#[test]
fn sum_weights_multiply_and_add_to_one() {
    let m = plane(1);
    let a = multisection(&m, vec![(constant(&m, vec![0.0]), q(1, 3)), (constant(&m, vec![1.0]), q(2, 3))]);
    let b = multisection(&m, vec![(constant(&m, vec![0.0]), q(1, 4)), (constant(&m, vec![10.0]), q(3, 4))]);
    let s = a.sum(&b).unwrap();
    let mut w: Vec<BigRational> = s.branches().iter().map(|b| b.weight.clone()).collect();
    w.sort();
    assert_eq!(w, vec![q(1, 12), q(1, 6), q(1, 4), q(1, 2)]);
    assert_eq!(weight_sum(&s), BigRational::one());
}

#[test]
fn sum_rejects_foreign_model() {
    let (m1, m2) = (plane(1), plane(1));
    let a = Multisection::zero(&m1);
    let b = Multisection::zero(&m2);
    assert!(matches!(a.sum(&b), Err(Error::ModelMismatch(_))));
}

/// `Σ_{h1 + h2 = h} Λ1(h1) Λ2(h2)` by enumerating the fiber values of `Λ1`.
fn brute_convolution(a: &Multisection, b: &Multisection, x: &[f64], h: &[f64]) -> BigRational {
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let mut total = BigRational::zero();
    for h1 in a.values(x).unwrap() {
        if seen.iter().any(|s| linalg::euclidean_norm(&linalg::sub(s, &h1)) <= BRANCH_TOL) {
            continue;
        }
        let h2 = linalg::sub(h, &h1);
        total += a.eval(x, &h1).unwrap() * b.eval(x, &h2).unwrap();
        seen.push(h1);
    }
    total
}

fn random_multisection(m: &Arc<StrongBundleModel>, rng: &mut ChaCha8Rng) -> Multisection {
    let k = rng.random_range(1..=4);
    let raw: Vec<i64> = (0..k).map(|_| rng.random_range(1..=6)).collect();
    let total: i64 = raw.iter().sum();
    let branches = raw
        .iter()
        .map(|&w| {
            // values on a coarse lattice so that coincidences occur
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
            (BundleSection::from_spec(m, spec).unwrap(), q(w, total))
        })
        .collect();
    multisection(m, branches)
}

#[test]
fn convolution_matches_brute_force_enumeration() {
    let m = plane(2);
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0ff);
    for _ in 0..40 {
        let a = random_multisection(&m, &mut rng);
        let b = random_multisection(&m, &mut rng);
        let s = a.sum(&b).unwrap();
        assert_eq!(weight_sum(&s), BigRational::one());
        for _ in 0..10 {
            let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let mut fibers: Vec<Vec<f64>> = Vec::new();
            for u in a.values(&x).unwrap() {
                for v in b.values(&x).unwrap() {
                    fibers.push(linalg::add(&u, &v));
                }
            }
            fibers.push(vec![9.0, 9.0]);
            for h in &fibers {
                assert_eq!(s.eval(&x, h).unwrap(), brute_convolution(&a, &b, &x, h));
            }
        }
    }
}

#[test]
fn multisection_norm_examples() {
    let m = plane(2);
    let n = AuxiliaryNorm::for_model(&m);
    let x = [0.1, 0.2];
    assert_eq!(Multisection::zero(&m).norm(&n, &x).unwrap(), 0.0);
    let s = Multisection::singleton(constant(&m, vec![0.7, 0.0])).unwrap();
    assert!((s.norm(&n, &x).unwrap() - 0.7).abs() < 1e-15);
    let a = Multisection::singleton(constant(&m, vec![0.3, 0.0])).unwrap();
    let b = Multisection::singleton(constant(&m, vec![0.0, 0.4])).unwrap();
    let sum = a.sum(&b).unwrap();
    assert!(sum.norm(&n, &x).unwrap() <= 0.7);
    assert!(matches!(s.norm(&n, &[5.0, 0.0]), Err(Error::Uncharted)));
}

#[test]
fn norm_is_subadditive_under_sum() {
    let m = plane(2);
    let n = AuxiliaryNorm::for_model(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ab);
    let mut checked = 0;
    while checked < 1000 {
        let a = random_multisection(&m, &mut rng);
        let b = random_multisection(&m, &mut rng);
        let s = a.sum(&b).unwrap();
        for _ in 0..50 {
            let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let lhs = s.norm(&n, &x).unwrap();
            let rhs = a.norm(&n, &x).unwrap() + b.norm(&n, &x).unwrap();
            assert!(lhs <= rhs + 1e-14, "{lhs} > {rhs} at {x:?}");
            checked += 1;
        }
    }
}

#[test]
fn multisection_text_form_round_trips() {
    let m = plane(2);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a = random_multisection(&m, &mut rng);
    let spec = a.to_spec().unwrap();
    let json = serde_json::to_string(&spec).unwrap();
    let back: MultisectionSpec = serde_json::from_str(&json).unwrap();
    let b = Multisection::from_spec(&m, &MultisectionSpec::from_toml(&back.to_toml().unwrap()).unwrap()).unwrap();
    for x in m.sample_points(5) {
        for v in a.values(&x).unwrap() {
            assert_eq!(a.eval(&x, &v).unwrap(), b.eval(&x, &v).unwrap());
        }
    }
    assert!(matches!(
        MultisectionSpec::from_toml("[[branches]]\nweight = \"1/2\"\n[branches.section]\nkind = \"zero\"\n")
            .and_then(|s| Multisection::from_spec(&m, &s)),
        Err(Error::WeightSum(_))
    ));
}

#[test]
fn control_pair_single_ball_around_isolated_zero() {
    let f = fold();
    let n = AuxiliaryNorm::for_model(f.model());
    let cp = control_pair_build(&f, &n, 0.3, 41).unwrap();
    assert_eq!(cp.balls.len(), 1);
    assert!(linalg::euclidean_norm(&cp.balls[0].center) < 1e-12);
    assert!(cp.report.pass);
    // {x⁴ + y² <= 1} reaches |y| = 1 and |x| = 1
    assert!(cp.balls[0].radius > 1.0 && cp.balls[0].radius < 2.0);
}

#[test]
fn control_pair_around_circle_patch() {
    let f = circle();
    let n = AuxiliaryNorm::for_model(f.model());
    let cp = control_pair_build(&f, &n, 0.2, 33).unwrap();
    assert_eq!(cp.balls.len(), 1);
    for k in 0..16 {
        let t = std::f64::consts::TAU * k as f64 / 16.0;
        assert!(cp.contains(&[t.cos(), t.sin()]));
    }
}

#[test]
fn non_proper_section_fails_certification() {
    let f = non_proper();
    let n = AuxiliaryNorm::for_model(f.model());
    assert!(matches!(
        control_pair_build(&f, &n, 0.2, 21),
        Err(Error::CertificationFailure(_))
    ));
}

#[test]
fn zero_multisection_gives_ordinary_zero_set() {
    let f = circle();
    let sol = solution_set(&f, &Multisection::zero(f.model()), &SolveConfig::default()).unwrap();
    assert!(sol.points.len() >= 8);
    for p in &sol.points {
        assert_eq!(p.weight, BigRational::one());
        assert!((linalg::euclidean_norm(&p.point) - 1.0).abs() < 1e-12);
        assert!(p.certificate.as_ref().is_some_and(|c| c.contraction <= GERM_EPSILON));
    }
    assert_eq!(sol.index(), Some(1));
}

#[test]
fn linear_section_with_offset_branches_gives_parallel_lines() {
    let m = plane(1);
    let f = BundleSection::new(
        "x",
        SectionClass::Plain,
        &m,
        Arc::new(|x: &[f64]| Ok(vec![x[0]])),
        Some(Arc::new(|_: &[f64]| Ok(DMatrix::from_row_slice(1, 2, &[1.0, 0.0])))),
    );
    let lam = multisection(
        &m,
        vec![(constant(&m, vec![0.5]), q(1, 2)), (constant(&m, vec![-0.5]), q(1, 2))],
    );
    let sol = solution_set(&f, &lam, &SolveConfig::default()).unwrap();
    assert!(!sol.points.is_empty());
    for p in &sol.points {
        let expected = if p.branch == 0 { 0.5 } else { -0.5 };
        assert!((p.point[0] - expected).abs() < 1e-13);
        assert_eq!(p.weight, q(1, 2));
    }
    assert!(sol.points.iter().any(|p| p.branch == 0) && sol.points.iter().any(|p| p.branch == 1));
    let csv = sol.to_csv();
    assert!(csv.starts_with("chart,p0,p1,branch,weight"));
    assert!(csv.contains(",1/2,"));
}

#[test]
fn branch_without_solutions_contributes_nothing() {
    let f = circle();
    let lam = Multisection::singleton(constant(f.model(), vec![-3.0])).unwrap();
    let sol = solution_set(&f, &lam, &SolveConfig::default()).unwrap();
    assert!(sol.points.is_empty());
}

#[test]
fn linearization_of_zero_branch_is_derivative() {
    let f = circle();
    let x = [0.6, 0.8];
    let set = linearization_set(&f, &Multisection::zero(f.model()), &x).unwrap();
    assert_eq!(set.operators.len(), 1);
    let op = &set.operators[0].operator;
    assert!((op[(0, 0)] - 1.2).abs() < 1e-12 && (op[(0, 1)] - 1.6).abs() < 1e-12);
    assert!(matches!(
        linearization_set(&f, &Multisection::zero(f.model()), &[0.1, 0.1]),
        Err(Error::NotASolution)
    ));
}

#[test]
fn coincident_branches_share_one_operator() {
    let f = circle();
    let m = f.model();
    let lam = multisection(m, vec![(constant(m, vec![0.0]), q(1, 3)), (constant(m, vec![0.0]), q(2, 3))]);
    let set = linearization_set(&f, &lam, &[0.0, 1.0]).unwrap();
    assert_eq!(set.operators.len(), 2);
    assert_eq!(set.distinct(1e-12).len(), 1);
    assert_eq!(set.operators[1].weight, q(2, 3));
}

#[test]
fn linearization_is_independent_of_local_structure() {
    let f = circle();
    let m = f.model();
    let c = 0.21;
    let x = [(1.0f64 + c).sqrt(), 0.0];
    let one = Multisection::singleton(constant(m, vec![c])).unwrap();
    let halves = BundleSection::from_spec(
        m,
        SectionSpec::Sum {
            terms: vec![
                SectionSpec::Constant { value: vec![c / 2.0] },
                SectionSpec::Bump {
                    center: vec![x[0], 0.0],
                    radius: 0.5,
                    value: vec![c / 2.0],
                },
                SectionSpec::Constant { value: vec![0.0] },
            ],
        },
    )
    .unwrap();
    let split = multisection(m, vec![(halves.clone(), q(1, 2)), (halves, q(1, 2))]);
    let a = linearization_set(&f, &one, &x).unwrap();
    let b = linearization_set(&f, &split, &x).unwrap();
    assert!(a.same_operators(&b, 1e-10));
}

#[test]
fn surjective_section_is_transversal() {
    let f = circle();
    let zero = Multisection::zero(f.model());
    let sol = solution_set(&f, &zero, &SolveConfig::default()).unwrap();
    assert!(transversal_check(&f, &zero, &sol).unwrap().pass);
}

#[test]
fn rank_deficient_fold_fails_with_witness() {
    let f = fold();
    let zero = Multisection::zero(f.model());
    let sol = solution_set(&f, &zero, &SolveConfig::default()).unwrap();
    let rep = transversal_check(&f, &zero, &sol).unwrap();
    assert!(!rep.pass);
    let w = &rep.failures[0];
    assert_eq!(w.branch, 0);
    assert!(linalg::euclidean_norm(&w.point) < 1e-5);
}

#[test]
fn kernel_along_face_is_not_in_good_position() {
    let f = boundary_breach();
    let zero = Multisection::zero(f.model());
    let sol = solution_set(&f, &zero, &SolveConfig::default()).unwrap();
    assert!(!sol.points.is_empty());
    let rep = transversal_check(&f, &zero, &sol).unwrap();
    assert!(rep.failures.is_empty());
    assert!(!rep.good_position_failures.is_empty());
    assert!(rep.good_position_failures[0].counterexample.is_some());
    assert!(!rep.pass);
}

#[test]
fn transversal_section_needs_no_perturbation() {
    let f = circle();
    let n = AuxiliaryNorm::for_model(f.model());
    let cp = control_pair_build(&f, &n, 0.2, 33).unwrap();
    let p = perturb_to_transversal(&f, &cp, 0.1, 1, 5).unwrap();
    assert_eq!(p.attempts, 0);
    assert_eq!(p.tau.to_spec().unwrap().branches[0].section, SectionSpec::Zero);
}

#[test]
fn fold_line_perturbs_to_a_pair_of_lines() {
    let f = fold_line();
    let m = f.model();
    // a ball whose plateau covers the whole window
    let cp = ControlPair {
        balls: vec![Ball {
            center: vec![0.0, 0.0],
            radius: 6.0,
        }],
        norm: AuxiliaryNorm::for_model(m),
        report: ControlReport {
            resolution: 0,
            sublevel_points: 0,
            clusters: 1,
            refined_outside: 0,
            surrogate: "window-covering ball".into(),
            pass: true,
        },
    };
    let mut opts = PerturbOptions::new(0.1, 3, 10);
    opts.antipodal = true;
    let p = perturb_to_transversal_with(&f, &cp, &opts).unwrap();
    assert!(p.max_norm < 0.1);
    let shift = p.tau.values(&[0.0, 0.0]).unwrap();
    let c = shift.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
    assert!(c > 0.0);
    assert!(!p.solutions.points.is_empty());
    for s in &p.solutions.points {
        assert!((s.point[0].abs() - c.sqrt()).abs() < 1e-10);
        assert_eq!(s.tangent_dim as i64 - s.fiber_rank as i64, 1);
    }
    assert!(p.solutions.points.iter().any(|s| s.point[0] > 0.0));
    assert!(p.solutions.points.iter().any(|s| s.point[0] < 0.0));
}

#[test]
fn fold_perturbation_and_cobordism() {
    let start = Instant::now();
    let f = fold();
    let n = AuxiliaryNorm::for_model(f.model());
    let cp = control_pair_build(&f, &n, 0.3, 41).unwrap();
    let cfg = SolveConfig::default();
    let mut taus = Vec::new();
    for seed in [1, 2] {
        let p = perturb_to_transversal(&f, &cp, 0.1, seed, 20).unwrap();
        assert!(p.max_norm < 0.1);
        assert!(p.support_inside);
        assert!(p.transversality.pass);
        assert!(p.transversality.worst_min_singular > 1e-8 || p.solutions.points.is_empty());
        taus.push(p.tau);
    }
    let rep = cobordism_compare(&f, &taus[0], &taus[1], &cp, 5, &cfg).unwrap();
    assert!(rep.pass);
    assert_eq!(rep.count0, Some(BigRational::zero()));
    assert_eq!(rep.count0, rep.count1);
    let same = cobordism_compare(&f, &taus[0], &taus[0], &cp, 3, &cfg).unwrap();
    assert!(same.pass && same.count0 == same.count1);
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn shifted_fold_roots_have_opposite_signs() {
    let f = fold();
    let g = constant_shift(&f, vec![0.04, 0.3]).unwrap();
    let sol = solution_set(&g, &Multisection::zero(f.model()), &SolveConfig::default()).unwrap();
    let mut xs: Vec<(f64, i32)> = sol.points.iter().map(|p| (p.point[0], p.sign.unwrap())).collect();
    xs.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert_eq!(xs.len(), 2);
    assert!((xs[0].0 + 0.2).abs() < 1e-12 && (xs[1].0 - 0.2).abs() < 1e-12);
    assert_eq!((xs[0].1, xs[1].1), (-1, 1));
    assert_eq!(sol.weighted_count(), Some(BigRational::zero()));
}

#[test]
fn cobordism_refuses_support_outside_u() {
    let f = fold();
    let m = f.model();
    let n = AuxiliaryNorm::for_model(m);
    let cp = control_pair_build(&f, &n, 0.3, 41).unwrap();
    let far = BundleSection::from_spec(
        m,
        SectionSpec::Bump {
            center: vec![1.8, 1.8],
            radius: 0.1,
            value: vec![0.01, 0.0],
        },
    )
    .unwrap();
    let tau = Multisection::singleton(far).unwrap();
    assert!(matches!(
        cobordism_compare(&f, &tau, &Multisection::zero(m), &cp, 3, &SolveConfig::default()),
        Err(Error::CertificationFailure(_))
    ));
}

#[test]
fn pork_barrel_perturbation_crosses_the_jump() {
    let start = Instant::now();
    let pb = PorkBarrel::default();
    let f = pb.build().unwrap();
    let n = AuxiliaryNorm::for_model(f.model());
    let cp = control_pair_build(&f, &n, 0.5, 21).unwrap();
    let mut taus = Vec::new();
    for seed in [1, 2] {
        let mut opts = PerturbOptions::new(0.1, seed, 20);
        opts.antipodal = true;
        opts.solve = pb.solve_config();
        let p = perturb_to_transversal_with(&f, &cp, &opts).unwrap();
        assert!(p.max_norm < 0.1 && p.support_inside && p.transversality.pass);
        assert!(p.transversality.worst_min_singular > 1e-8);
        let dims: Vec<(usize, usize)> = p.solutions.points.iter().map(|s| (s.tangent_dim, s.fiber_rank)).collect();
        assert!(dims.contains(&(2, 1)) && dims.contains(&(3, 2)), "{dims:?}");
        assert_eq!(p.solutions.index(), Some(1));
        for s in &p.solutions.points {
            assert_eq!(s.weight, q(1, 2));
            assert!(s.chart[0] <= 0.0 || s.chart[0] >= pb.gap());
        }
        taus.push(p.tau);
    }
    let rep = cobordism_compare(&f, &taus[0], &taus[1], &cp, 3, &pb.solve_config()).unwrap();
    assert!(rep.pass);
    assert!(rep.family_min_singular > 1e-8);
    println!("pork barrel pipeline {:?}", start.elapsed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn small_sc_plus_shift_keeps_germ_normal_form(c in -0.1f64..0.1, d in -0.1f64..0.1) {
        let f = circle();
        let m = f.model();
        let s = BundleSection::from_spec(
            m,
            SectionSpec::Bump { center: vec![0.0, 0.0], radius: 4.0, value: vec![c + 0.5 * d] },
        ).unwrap();
        let g = f.combine(&s, 1.0).unwrap();
        let sol = solution_set(&g, &Multisection::zero(m), &SolveConfig::default()).unwrap();
        prop_assert!(!sol.points.is_empty());
        for p in &sol.points {
            let cert = p.certificate.as_ref();
            prop_assert!(cert.is_some_and(|k| k.contraction <= GERM_EPSILON && k.residual <= 1e-12));
        }
    }

    #[test]
    fn interpolation_keeps_weights(seed in 0u64..1000, t in 0.0f64..1.0) {
        let m = plane(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_multisection(&m, &mut rng);
        let b = random_multisection(&m, &mut rng);
        let l = a.interpolate(&b, t).unwrap();
        prop_assert_eq!(weight_sum(&l), BigRational::one());
        prop_assert_eq!(l.len(), a.len() * b.len());
    }
}

use std::sync::Arc;
use std::time::Instant;

use polyfold_core::germs::{
    affine_fixture, bump_filling_fixture, contraction_verify, filling_verify,
    local_solution_manifold, picard_iteration_bound, reflection_fixture, solution_sheet,
    solve_germ, BasicGerm, GermSpec, SolveOptions,
};
use polyfold_core::linalg;
use polyfold_core::retracts::BumpFamily;
use polyfold_core::retracts::BumpProfile;
use polyfold_core::sc_core::{ScScale, ScVector};
use polyfold_core::Error;
use proptest::prelude::*;

fn scalar_germ(
    b: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    eps: f64,
    radii: Option<Vec<f64>>,
) -> BasicGerm {
    BasicGerm::new(GermSpec {
        param_dim: 1,
        quadrant_count: 0,
        residue_dim: 0,
        fiber: Arc::new(ScScale::finite_dim(1, 1)),
        contraction: Arc::new(move |a, w| Ok(vec![b(a[0], w[0])])),
        residue: None,
        epsilons: vec![eps; 2],
        radii,
    })
    .unwrap()
}

#[test]
fn contraction_examples() {
    let zero = scalar_germ(|_, _| 0.0, 0.1, Some(vec![1.0; 2]));
    assert_eq!(contraction_verify(&zero, 0, 100, 1).unwrap().measured, 0.0);

    let affine = scalar_germ(|a, w| 0.5 * w + a, 0.5, Some(vec![1.0; 2]));
    let rep = contraction_verify(&affine, 1, 100, 2).unwrap();
    assert!((rep.measured - 0.5).abs() < 1e-12);
    assert!(rep.pass);

    // Lipschitz bound |0.3 cos| <= 0.3
    let sine = scalar_germ(|_, w| 0.3 * w.sin(), 0.3, Some(vec![1.0; 2]));
    let rep = contraction_verify(&sine, 0, 500, 3).unwrap();
    assert!(rep.measured <= 0.3 && rep.measured > 0.25);
}

#[test]
fn default_radii_are_calibrated() {
    // Lipschitz constant 0.5 + |w + w'| needs |w|, |w'| below 0.15 for ε = 0.8
    let g = scalar_germ(|a, w| 0.5 * w + w * w + a * a, 0.8, None);
    for m in 0..2 {
        let r = g.radii()[m];
        assert!((0.06..=0.15).contains(&r), "radius {r}");
        assert!(contraction_verify(&g, m, 200, 77).unwrap().pass);
    }
}

#[test]
fn solve_examples() {
    let affine = scalar_germ(|a, w| 0.5 * w + a, 0.5, Some(vec![1.0; 2]));
    let s = solve_germ(&affine, &[0.3], 0, &SolveOptions::default()).unwrap();
    assert!((s.w[0] - 0.6).abs() < 1e-12);
    assert!((s.rate - 0.5).abs() < 1e-3);

    let zero = scalar_germ(|_, _| 0.0, 0.1, Some(vec![1.0; 2]));
    assert_eq!(solve_germ(&zero, &[0.7], 1, &SolveOptions::default()).unwrap().w, vec![0.0]);

    let fx = affine_fixture(8, 3, 3, 5).unwrap();
    let a = [0.2, -0.4, 0.1];
    for m in 0..=3 {
        let s = solve_germ(&fx.germ, &a, m, &SolveOptions::default()).unwrap();
        let err = linalg::euclidean_norm(&linalg::sub(&s.w, &fx.oracle(&a)));
        assert!(err <= 1e-10, "level {m}: {err:e}");
        assert!((0.35..=0.45).contains(&s.rate), "rate {}", s.rate);
        let bound = picard_iteration_bound(&fx.germ, &a, m, 1e-12).unwrap();
        assert!(s.iterations <= bound + 2, "{} > {bound}", s.iterations);
    }
}

#[test]
fn newton_option_agrees_with_picard() {
    let fx = affine_fixture(6, 2, 1, 9).unwrap();
    let opts = SolveOptions {
        newton: true,
        ..SolveOptions::default()
    };
    let s = solve_germ(&fx.germ, &[0.3, 0.3], 1, &opts).unwrap();
    assert!(s.iterations <= 4);
    assert!(linalg::euclidean_norm(&linalg::sub(&s.w, &fx.oracle(&[0.3, 0.3]))) < 1e-10);
}

#[test]
fn non_contracting_map_does_not_converge() {
    let g = scalar_germ(|a, w| 1.5 * w + a, 0.5, Some(vec![1.0; 2]));
    let opts = SolveOptions {
        max_iter: 50,
        ..SolveOptions::default()
    };
    assert!(matches!(
        solve_germ(&g, &[0.1], 0, &opts),
        Err(Error::NonConvergence { iterations: 50, .. })
    ));
}

#[test]
fn uniqueness_from_two_initial_guesses() {
    let fx = affine_fixture(5, 2, 0, 21).unwrap();
    let a = [0.3, 0.1];
    let mut sols = Vec::new();
    for init in [vec![0.0; 5], vec![0.5, -0.5, 0.5, -0.5, 0.5]] {
        let opts = SolveOptions {
            initial: Some(init),
            ..SolveOptions::default()
        };
        sols.push(solve_germ(&fx.germ, &a, 0, &opts).unwrap().w);
    }
    assert!(linalg::euclidean_norm(&linalg::sub(&sols[0], &sols[1])) <= 2e-12);
}

#[test]
fn affine_sheet_matches_oracle_and_is_fast() {
    let fx = affine_fixture(8, 2, 3, 13).unwrap();
    let grid: Vec<Vec<f64>> = (0..10)
        .flat_map(|i| (0..10).map(move |j| vec![-0.5 + 0.1 * i as f64, -0.5 + 0.1 * j as f64]))
        .collect();
    let start = Instant::now();
    let sheet = solution_sheet(&fx.germ, &grid, 3, 1e-12).unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert!(sheet.level_deviation <= 2e-12);
    for node in &sheet.nodes {
        let oracle = fx.oracle(&node.a);
        for sol in &node.levels {
            assert!(linalg::euclidean_norm(&linalg::sub(&sol.w, &oracle)) <= 1e-10);
            assert!(sol.max_rate <= fx.germ.epsilons()[sol.level] + 0.05);
        }
    }
    let csv = sheet.to_csv();
    assert!(csv.starts_with("a0,a1,level,delta0"));
    assert_eq!(csv.lines().count(), 1 + 100 * 4);
}

#[test]
fn reflection_sheet_is_level_coherent() {
    let e = Arc::new(ScScale::weighted_grid(8.0, 1.0 / 8.0, vec![0.0, 0.05, 0.1, 0.15]).unwrap());
    let fx = reflection_fixture(&e).unwrap();
    let grid: Vec<Vec<f64>> = (0..20).map(|i| vec![-0.95 + 0.1 * i as f64]).collect();
    let sheet = solution_sheet(&fx.germ, &grid, 3, 1e-12).unwrap();
    assert!(sheet.level_deviation <= 2e-12, "{:e}", sheet.level_deviation);
    for node in &sheet.nodes {
        let oracle = fx.oracle(node.a[0]);
        for sol in &node.levels {
            let err = e.norm_of(&linalg::sub(&sol.w, &oracle), sol.level).unwrap();
            assert!(err <= 1e-10, "level {}: {err:e}", sol.level);
            assert!((0.35..=0.45).contains(&sol.rate));
        }
        // dδ/da = (φ + 0.4 φ(-·)) / 0.84
        let d = &node.derivative[0];
        let exact = fx.oracle(1.0);
        assert!(e.norm_of(&linalg::sub(d, &exact), 0).unwrap() < 1e-6);
    }
}

#[test]
fn zero_and_quadratic_sheets() {
    let zero = scalar_germ(|_, _| 0.0, 0.1, Some(vec![1.0; 2]));
    let grid: Vec<Vec<f64>> = (0..5).map(|i| vec![-0.2 + 0.1 * i as f64]).collect();
    let sheet = solution_sheet(&zero, &grid, 1, 1e-12).unwrap();
    for node in &sheet.nodes {
        assert!(node.levels.iter().all(|s| s.w == vec![0.0]));
        assert_eq!(node.derivative[0], vec![0.0]);
    }

    let quad = scalar_germ(|a, w| 0.5 * w + a * a, 0.5, Some(vec![1.0; 2]));
    let h = 1e-3;
    let grid = vec![vec![-h], vec![0.0], vec![h], vec![0.3]];
    let sheet = solution_sheet(&quad, &grid, 1, 1e-14).unwrap();
    let d = |i: usize| sheet.nodes[i].levels[1].w[0];
    let second = (d(0) - 2.0 * d(1) + d(2)) / (h * h);
    assert!((second - 4.0).abs() < 1e-4, "{second}");
    assert!((sheet.nodes[3].levels[1].w[0] - 0.18).abs() < 1e-12);
    assert!((sheet.nodes[3].derivative[0][0] - 1.2).abs() < 1e-6);
}

#[test]
fn bump_filling_passes_and_degenerate_fails() {
    let fiber = Arc::new(ScScale::weighted_grid(64.0, 0.5, vec![0.0, 0.01]).unwrap());
    let fam = BumpFamily::new(BumpProfile::polynomial(), &fiber).unwrap();
    let fd = bump_filling_fixture(&fiber, false).unwrap();
    let total = Arc::clone(fd.retraction.scale());
    let f1 = fam.frame(1.0).unwrap().unwrap().f;
    let point = |s: f64, c: f64, bump: &[f64]| {
        let mut v = vec![s];
        v.extend(bump.iter().map(|x| c * x));
        ScVector::smooth(&total, v).unwrap()
    };
    let x = point(1.0, 0.5, &f1);
    let xs = fiber.grid().unwrap().coordinates();
    let wiggle: Vec<f64> = xs.iter().map(|s| 0.1 * (-(s - 3.0) * (s - 3.0)).exp()).collect();
    let samples = vec![
        x.clone(),
        point(1.0, -0.2, &f1),
        point(-1.0, 0.0, &f1),
        point(1.0, 1.0, &wiggle),
    ];
    let rep = filling_verify(&fd, &x, &samples).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert_eq!(rep.solutions_found, 3);
    assert!(rep.condition_number.is_finite());
    assert_eq!(rep.kernel_dim, fiber.dim() - 1);

    let at_negative = filling_verify(&fd, &point(-1.0, 0.0, &f1), &samples).unwrap();
    assert!(at_negative.isomorphism_pass);
    assert_eq!(at_negative.kernel_dim, fiber.dim());

    let bad = bump_filling_fixture(&fiber, true).unwrap();
    let rep = filling_verify(&bad, &x, &samples).unwrap();
    assert!(!rep.isomorphism_pass && !rep.pass);
}

fn germ_with_residue(
    n: usize,
    k: usize,
    nres: usize,
    b: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    residue: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    fiber_dim: usize,
) -> BasicGerm {
    BasicGerm::new(GermSpec {
        param_dim: n,
        quadrant_count: k,
        residue_dim: nres,
        fiber: Arc::new(ScScale::finite_dim(fiber_dim, 0)),
        contraction: Arc::new(move |a, w| Ok(b(a, w))),
        residue: Some(Arc::new(move |a, w| Ok(residue(a, w)))),
        epsilons: vec![0.5],
        radii: Some(vec![2.0]),
    })
    .unwrap()
}

#[test]
fn local_manifold_examples() {
    let flat = germ_with_residue(2, 0, 0, |_, _| vec![0.0], |_, _| vec![], 1);
    let m = local_solution_manifold(&flat, 2, 1e-12, 0.5, 5).unwrap();
    assert_eq!(m.dimension, 2);
    assert_eq!(m.samples.len(), 25);

    // B = 0.5 w + (a0 + 2 a1) v with v = (1, 0); residue = a0 + a1 - w0
    // δ(a) = 2 (a0 + 2 a1) v, so the zero set is ℓ·a = 0 with ℓ = (-1, -3).
    let affine = germ_with_residue(
        2,
        0,
        1,
        |a, w| vec![0.5 * w[0] + a[0] + 2.0 * a[1], 0.5 * w[1]],
        |a, w| vec![a[0] + a[1] - w[0]],
        2,
    );
    let m = local_solution_manifold(&affine, 1, 1e-12, 0.5, 9).unwrap();
    assert_eq!(m.samples.len(), 9);
    assert!(m.all_surjective);
    for s in &m.samples {
        assert!((s.a[0] + 3.0 * s.a[1]).abs() < 1e-10);
        assert!((s.w[0] - 2.0 * (s.a[0] + 2.0 * s.a[1])).abs() < 1e-10);
    }

    // boundary version: a0 ∈ [0, ∞), zero set a1 = a0
    let boundary = germ_with_residue(2, 1, 1, |a, w| vec![0.5 * w[0] + a[0]], |a, _| vec![a[1] - a[0]], 1);
    let m = local_solution_manifold(&boundary, 1, 1e-12, 0.5, 9).unwrap();
    assert_eq!(m.kernel_in_good_position, Some(true));
    assert_eq!(m.samples.len(), 5);
    for s in &m.samples {
        let expected = if s.a[0].abs() < 1e-12 { 1 } else { 0 };
        assert_eq!(s.degeneracy_index, expected);
    }
    assert_eq!(m.samples.iter().filter(|s| s.degeneracy_index == 1).count(), 1);

    let degenerate = germ_with_residue(2, 0, 1, |_, w| vec![0.5 * w[0]], |a, _| vec![a[0] * a[0]], 1);
    assert!(matches!(
        local_solution_manifold(&degenerate, 1, 1e-12, 0.5, 5),
        Err(Error::NotTransversal(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn small_perturbations_keep_contraction(eta in 0.0f64..0.29, seed in 0u64..1000) {
        // ε = 0.4, radius 1: perturbations with Lipschitz constant below (1 - ε)/2
        let fx = affine_fixture(4, 2, 1, seed).unwrap();
        let s = Arc::new(move |a: &[f64], w: &[f64]| {
            Ok(w.iter().enumerate().map(|(i, v)| eta * (v + 0.1 * a[i % 2]).sin()).collect())
        });
        let g = fx.germ.perturbed(s);
        for m in 0..=1 {
            let rep = contraction_verify(&g, m, 100, seed).unwrap();
            prop_assert!(rep.measured < 1.0);
            prop_assert!(rep.measured <= 0.4 + eta + 1e-12);
        }
    }

    #[test]
    fn solutions_are_fixed_points(a0 in -0.7f64..0.7, a1 in -0.7f64..0.7, seed in 0u64..500) {
        let fx = affine_fixture(6, 2, 2, seed).unwrap();
        for m in 0..=2 {
            let s = solve_germ(&fx.germ, &[a0, a1], m, &SolveOptions::default()).unwrap();
            prop_assert!(s.residual <= 1e-12);
            prop_assert!(s.max_rate <= 0.45);
        }
    }
}

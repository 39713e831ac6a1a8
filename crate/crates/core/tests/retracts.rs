use std::sync::Arc;

use nalgebra::DMatrix;
use polyfold_core::linalg;
use polyfold_core::retracts::{
    broken_path_demo, bump_splicing, conjugate_bump_retraction, corner_invariance_check,
    good_position_check, graph_chart_build, neatness_check, parabola_charts,
    quadrant_diffeo_fixture, retract_tangent_basis, splicing_to_retraction,
    tangent_independence_check, BumpFamily, BumpProfile, Retraction, Splicing, Verdict,
};
use polyfold_core::sc_calculus::{sc1_probe, Domain, ScMap};
use polyfold_core::sc_core::{PartialQuadrant, ScScale, ScVector};
use polyfold_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLE_S: [f64; 4] = [-1.0, -0.25, 0.25, 1.0];

fn bump_fiber() -> Arc<ScScale> {
    Arc::new(ScScale::weighted_grid(64.0, 1.0 / 16.0, vec![0.0, 0.01, 0.02, 0.03]).unwrap())
}

fn bump_retraction(fiber: &Arc<ScScale>) -> Retraction {
    let sp = bump_splicing(BumpProfile::polynomial(), fiber, &SAMPLE_S).unwrap();
    splicing_to_retraction(&sp).unwrap()
}

/// Level-0 inner product by polarization of the scale norm.
fn polar_inner(e: &ScScale, a: &[f64], b: &[f64]) -> f64 {
    let p = e.norm_of(&linalg::add(a, b), 0).unwrap();
    let m = e.norm_of(&linalg::sub(a, b), 0).unwrap();
    0.25 * (p * p - m * m)
}

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

/// Rank of the centered-difference Jacobian of `r` at `x` applied to a
/// seeded Gaussian sketch.
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
    sv.iter().filter(|v| **v > 1e-6 * top).count()
}

#[test]
fn constant_splicings() {
    let v = Arc::new(ScScale::finite_dim(1, 2));
    let e = Arc::new(ScScale::finite_dim(3, 2));
    let id = splicing_to_retraction(&Splicing::constant_identity(&v, &e)).unwrap();
    let x = ScVector::smooth(id.scale(), vec![0.5, 1.0, -2.0, 3.0]).unwrap();
    assert_eq!(id.apply(&x).unwrap(), x);
    let zero = splicing_to_retraction(&Splicing::constant_zero(&v, &e)).unwrap();
    assert_eq!(zero.apply(&x).unwrap().coeffs(), &[0.5, 0.0, 0.0, 0.0]);
    assert_eq!(retract_tangent_basis(&zero, &zero.apply(&x).unwrap()).unwrap().ncols(), 1);
}

#[test]
fn non_idempotent_family_rejected() {
    let v = Arc::new(ScScale::finite_dim(1, 1));
    let e = Arc::new(ScScale::finite_dim(2, 1));
    let sp = Splicing::new(
        &v,
        PartialQuadrant::full(1),
        &e,
        Arc::new(|_, e: &[f64]| Ok(vec![2.0 * e[0], e[1]])),
        None,
        vec![vec![0.0]],
    )
    .unwrap();
    assert!(matches!(splicing_to_retraction(&sp), Err(Error::NonIdempotent(_))));
}

#[test]
fn bump_projection_examples() {
    let fiber = bump_fiber();
    let fam = BumpFamily::new(BumpProfile::polynomial(), &fiber).unwrap();
    let xs = fiber.grid().unwrap().coordinates();
    let e: Vec<f64> = xs.iter().map(|s| (-(s + 2.7) * (s + 2.7)).exp()).collect();
    assert!(fam.project(-1.0, &e).unwrap().iter().all(|v| *v == 0.0));

    let f1 = fam.frame(1.0).unwrap().unwrap().f;
    let p = fam.project(1.0, &f1).unwrap();
    assert!(fiber.norm_of(&linalg::sub(&p, &f1), 0).unwrap() < 1e-12);

    // Gram–Schmidt against f_1 in the polarized level-0 inner product
    let c = polar_inner(&fiber, &e, &f1) / polar_inner(&fiber, &f1, &f1);
    let perp = linalg::axpy(-c, &f1, &e);
    assert!(polar_inner(&fiber, &perp, &f1).abs() < 1e-12);
    assert!(fiber.norm_of(&fam.project(1.0, &perp).unwrap(), 0).unwrap() < 1e-10);
}

#[test]
fn bump_window_exit() {
    let fiber = bump_fiber();
    assert!(matches!(
        bump_splicing(BumpProfile::polynomial(), &fiber, &[0.1]),
        Err(Error::WindowExit(_))
    ));
}

#[test]
fn bump_retraction_is_idempotent_on_levels_0_to_3() {
    let fiber = bump_fiber();
    let r = bump_retraction(&fiber);
    let xs = fiber.grid().unwrap().coordinates();
    let mut samples = Vec::new();
    for (k, s) in SAMPLE_S.iter().enumerate() {
        let shift = (1.0 / s.abs()).exp().min(40.0);
        let mut x = vec![*s];
        x.extend(xs.iter().map(|t| (1.0 + k as f64) * (-(t + shift) * (t + shift) / 2.0).exp()));
        samples.push(ScVector::smooth(r.scale(), x).unwrap());
    }
    let rep = r.retraction_check(&samples, 3).unwrap();
    assert!(rep.pass, "{:?}", rep.residual_per_level);
    assert_eq!(rep.residual_per_level.len(), 4);
}

#[test]
fn bump_tangent_dimension_jumps_at_zero() {
    let fiber = bump_fiber();
    let r = bump_retraction(&fiber);
    for s in SAMPLE_S {
        let x = retract_point(r.scale(), &fiber, s);
        let dim = retract_tangent_basis(&r, &x).unwrap().ncols();
        let expected = if s > 0.0 { 2 } else { 1 };
        assert_eq!(dim, expected, "s = {s}");
        assert_eq!(fd_rank(&r, x.coeffs()), expected, "oracle at s = {s}");
    }
}

#[test]
fn conjugate_retraction_has_same_tangents() {
    let fiber = bump_fiber();
    let r = bump_retraction(&fiber);
    let conj = conjugate_bump_retraction(BumpProfile::polynomial(), &fiber, 0.3).unwrap();
    let samples: Vec<ScVector> = SAMPLE_S.iter().map(|s| retract_point(r.scale(), &fiber, *s)).collect();
    let gap = tangent_independence_check(&r, &conj, &samples).unwrap();
    assert!(gap <= 1e-8, "gap {gap:e}");
    // the conjugate is a retraction in its own right
    let off = samples[3].plus_scaled(0.4, &retract_point(r.scale(), &fiber, 0.25)).unwrap();
    assert!(conj.retraction_check(&[off], 2).unwrap().pass);
}

#[test]
fn splicing_joint_map_is_sc1() {
    let fiber = bump_fiber();
    let r = bump_retraction(&fiber);
    let x = retract_point(r.scale(), &fiber, 1.0);
    let xs = fiber.grid().unwrap().coordinates();
    let mut d = vec![0.3];
    d.extend(xs.iter().map(|t| (-(t + 2.5) * (t + 2.5)).exp()));
    let d = ScVector::smooth(r.scale(), d).unwrap();
    let rep = sc1_probe(r.map(), &x, &d, &[1e-1, 1e-2, 1e-3, 1e-4], false).unwrap();
    assert!(rep.pass, "slope {}", rep.fitted_slope);
}

#[test]
fn restriction_and_tangent_retraction() {
    let fiber = bump_fiber();
    let r = bump_retraction(&fiber);
    let center = retract_point(r.scale(), &fiber, 1.0);
    let restricted = r.restrict_to_image_ball(center.coeffs().to_vec(), 1.0).unwrap();
    let near = center.plus_scaled(0.1, &retract_point(r.scale(), &fiber, 0.25)).unwrap();
    assert!(restricted.retraction_check(std::slice::from_ref(&near), 3).unwrap().pass);
    let far = retract_point(r.scale(), &fiber, -1.0);
    assert!(matches!(restricted.apply(&far), Err(Error::DomainExit(_))));

    let tr = r.tangent_retraction().unwrap();
    let mut xh = near.coeffs().to_vec();
    xh.extend(near.coeffs().iter().map(|v| 0.5 * v));
    let xh = ScVector::smooth(tr.scale(), xh).unwrap();
    assert!(tr.retraction_check(&[xh], 2).unwrap().pass);
}

#[test]
fn neatness_examples() {
    let e = Arc::new(ScScale::finite_dim(2, 1));
    let id_interior = Retraction::new(ScMap::identity(&e)).unwrap();
    let x = ScVector::smooth(&e, vec![0.4, -1.0]).unwrap();
    let rep = neatness_check(&id_interior, &x).unwrap();
    assert!(rep.pass());
    assert_eq!(rep.sequence_kind, "sampled");

    let fiber = bump_fiber();
    let r = bump_retraction(&fiber);
    let x0 = retract_point(r.scale(), &fiber, 0.0);
    let rep = neatness_check(&r, &x0).unwrap();
    assert_eq!(rep.complement, Verdict::Pass);
    assert_eq!(rep.approximation, Verdict::Pass);
    assert_eq!(rep.sequence_kind, "sampled");
    assert_eq!(rep.degeneracy_index, 0);
}

fn corner_samples(seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..2)
                .map(|_| if rng.random_bool(0.35) { 0.0 } else { rng.random_range(0.0..2.0) })
                .collect()
        })
        .collect()
}

#[test]
fn corner_recognition_on_fixtures() {
    let e = Arc::new(ScScale::finite_dim(2, 2));
    let c = PartialQuadrant::leading(2, 2).unwrap();
    let to_vecs = |pts: Vec<Vec<f64>>| -> Vec<ScVector> {
        pts.into_iter().map(|p| ScVector::smooth(&e, p).unwrap()).collect()
    };
    let samples = to_vecs(corner_samples(1, 64));

    let id = ScMap::new("id", &e, &e, Domain::quadrant(c.clone()), Arc::new(|x: &[f64]| Ok(x.to_vec())), None).unwrap();
    assert_eq!(corner_invariance_check(&id, &id, &samples).unwrap(), 0);

    let diag = ScMap::new("diag", &e, &e, Domain::quadrant(c.clone()), Arc::new(|x: &[f64]| Ok(vec![2.0 * x[0], 3.0 * x[1]])), None).unwrap();
    let diag_inv = ScMap::new("diag⁻¹", &e, &e, Domain::quadrant(c.clone()), Arc::new(|x: &[f64]| Ok(vec![x[0] / 2.0, x[1] / 3.0])), None).unwrap();
    assert_eq!(corner_invariance_check(&diag, &diag_inv, &samples).unwrap(), 0);

    let shear = ScMap::new("shear", &e, &e, Domain::quadrant(c.clone()), Arc::new(|x: &[f64]| Ok(vec![x[0], x[1] + x[0] * x[0] * x[1]])), None).unwrap();
    let shear_inv = ScMap::new("shear⁻¹", &e, &e, Domain::quadrant(c.clone()), Arc::new(|x: &[f64]| Ok(vec![x[0], x[1] / (1.0 + x[0] * x[0])])), None).unwrap();
    assert_eq!(corner_invariance_check(&shear, &shear_inv, &samples).unwrap(), 0);

    // a map that is not inverted by the claimed inverse
    assert!(matches!(
        corner_invariance_check(&diag, &id, &samples),
        Err(Error::NonInvertible(_))
    ));

    for seed in 0..20 {
        let fx = quadrant_diffeo_fixture(seed).unwrap();
        let pts = to_vecs(corner_samples(100 + seed, 50));
        assert_eq!(corner_invariance_check(&fx.forward, &fx.inverse, &pts).unwrap(), 0, "fixture {seed}");
    }
}

#[test]
fn good_position_examples() {
    let c = PartialQuadrant::leading(2, 2).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let diag = DMatrix::from_column_slice(2, 1, &[s, s]);
    let anti = DMatrix::from_column_slice(2, 1, &[s, -s]);
    let rep = good_position_check(&diag, &c, &anti, 0.5, 21).unwrap();
    assert!(rep.pass && rep.pairs_checked > 0);

    let face = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let up = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let rep = good_position_check(&face, &c, &up, 0.3, 21).unwrap();
    assert!(rep.interior_found);
    assert!(!rep.equivalence_holds && !rep.pass);
    let (n, m) = &rep.counterexamples[0];
    assert!(n[0] > 0.0 && m[1] < 0.0);

    let whole = DMatrix::identity(2, 2);
    let none = DMatrix::zeros(2, 0);
    assert!(good_position_check(&whole, &c, &none, 7.0, 11).unwrap().pass);

    let degenerate = DMatrix::from_column_slice(2, 1, &[1.0, 1e-9]);
    assert!(matches!(
        good_position_check(&face, &c, &degenerate, 0.5, 5),
        Err(Error::DegenerateBasis(_))
    ));
}

#[test]
fn parabola_transition_matches_closed_form() {
    let g = parabola_charts(0.6).unwrap();
    for q in [0.3, 0.5, 0.6, 0.75, 0.9] {
        let tau = g.base.transition(&g.rotated, &[q]).unwrap()[0];
        assert!((tau - g.transition_oracle(q)).abs() < 1e-12, "q = {q}");
    }
    let samples: Vec<Vec<f64>> = (0..20).map(|i| vec![-1.0 + 0.1 * i as f64]).collect();
    assert!(g.base.injective_on(&samples).unwrap());
    let t = g.base.transition_map(&g.rotated, 2).unwrap();
    let x = ScVector::smooth(t.source(), vec![0.7]).unwrap();
    let d = ScVector::smooth(t.source(), vec![1.0]).unwrap();
    let rep = sc1_probe(&t, &x, &d, &[1e-1, 1e-2, 1e-3, 1e-4], true).unwrap();
    assert!(rep.pass, "slope {}", rep.fitted_slope);
}

#[test]
fn chart_on_bump_retract_axis() {
    let fiber = bump_fiber();
    let r = bump_retraction(&fiber);
    let n = r.scale().dim();
    let axis = DMatrix::from_fn(n, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let origin = |s: f64| {
        let mut o = vec![0.0; n];
        o[0] = s;
        o
    };
    let zero = Arc::new(move |_: &[f64]| vec![0.0; n]);
    let c1 = graph_chart_build(origin(-1.0), axis.clone(), None, zero.clone(), 0.6).unwrap();
    let c2 = graph_chart_build(origin(-0.5), axis, None, zero, 0.4).unwrap();
    for q in [0.2, 0.3, 0.45, 0.55] {
        let p = c1.gamma(&[q]).unwrap();
        let on = ScVector::smooth(r.scale(), p.clone()).unwrap();
        assert!(r.contains(&on).unwrap());
        // numeric composition oracle: p = c2(τ) with τ = q - 0.5
        let tau = c1.transition(&c2, &[q]).unwrap();
        assert!((tau[0] - (q - 0.5)).abs() < 1e-12);
        assert_eq!(c2.gamma(&tau).unwrap(), p);
    }
}

#[test]
fn broken_path_degeneracy_values() {
    let fiber = bump_fiber();
    let demo = broken_path_demo(&[0.0, 0.0], &[1.0, 0.5], &[2.0, -1.0], &fiber).unwrap();
    let by = |name: &str| demo.rows.iter().find(|r| r.sample == name).unwrap().clone();
    assert_eq!(by("broken").degeneracy_index, 1);
    assert_eq!(by("unbroken").degeneracy_index, 0);
    assert_eq!(by("glued g=0.5").degeneracy_index, 0);
    assert_eq!(by("broken").local_dimension, 1);
    assert_eq!(by("unbroken").local_dimension, 2);
    let json: serde_json::Value = serde_json::from_str(&demo.to_json()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), demo.rows.len());
    for key in ["sample", "level", "local_dimension", "degeneracy_index"] {
        assert!(json[0].get(key).is_some());
    }
}

/// `P = A (Bᵀ A)⁻¹ Bᵀ`, an oblique projection onto `span A`.
fn oblique_projection(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let a = linalg::gaussian_matrix(n, k, seed);
    let b = linalg::gaussian_matrix(n, k, seed + 1);
    let inner = (b.transpose() * &a).try_inverse().unwrap();
    &a * inner * b.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linear_projections_are_retractions(n in 2usize..6, k in 1usize..4, seed in 0u64..1000) {
        let k = k.min(n - 1);
        let e = Arc::new(ScScale::finite_dim(n, 2));
        let p = oblique_projection(n, k, seed);
        prop_assume!(p.norm() < 1e3);
        let r = Retraction::new(ScMap::linear("p", &e, &e, p).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = ScVector::smooth(&e, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        prop_assert!(r.retraction_check(std::slice::from_ref(&x), 2).unwrap().residual_per_level[0] <= 1e-9 * (1.0 + r.apply(&x).unwrap().level_norm(0).unwrap()));
        let rx = r.apply(&x).unwrap();
        prop_assert_eq!(retract_tangent_basis(&r, &rx).unwrap().ncols(), k);
        let tr = r.tangent_retraction().unwrap();
        let mut xh = x.coeffs().to_vec();
        xh.extend(x.coeffs());
        let xh = ScVector::smooth(tr.scale(), xh).unwrap();
        let rep = tr.retraction_check(&[xh], 1).unwrap();
        prop_assert!(rep.residual_per_level[0] <= 1e-8);
    }

    #[test]
    fn random_corner_fixtures_preserve_indices(seed in 0u64..10_000) {
        let fx = quadrant_diffeo_fixture(seed).unwrap();
        let e = fx.forward.source().clone();
        let pts: Vec<ScVector> = corner_samples(seed, 16).into_iter().map(|p| ScVector::smooth(&e, p).unwrap()).collect();
        prop_assert_eq!(corner_invariance_check(&fx.forward, &fx.inverse, &pts).unwrap(), 0);
    }
}

use std::sync::Arc;

use nalgebra::DMatrix;
use polyfold_core::sc_core::{
    degeneracy_index, LinearScOperator, PartialQuadrant, ScScale, ScVector, ScaleConfig,
};
use polyfold_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Weighted H¹ norm of the gaussian from analytic derivatives, integrated by
/// Simpson's rule on each half-window of a finer grid.
fn gaussian_h1_norm_oracle(radius: f64, h: f64, delta: f64) -> f64 {
    let k = (radius / h).round() as usize;
    assert!(k.is_multiple_of(2));
    let integrand = |s: f64| {
        let w = (delta * s.abs()).exp();
        let u = (-s * s).exp();
        let du = -2.0 * s * u;
        w * w * (u * u + du * du)
    };
    let mut acc = 0.0;
    for sign in [-1.0, 1.0] {
        for i in 0..=k {
            let c = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += c * h / 3.0 * integrand(sign * i as f64 * h);
        }
    }
    acc.sqrt()
}

#[test]
fn zero_vector_has_zero_norm() {
    let e = Arc::new(ScScale::weighted_grid(4.0, 0.125, vec![0.0, 0.2, 0.4]).unwrap());
    let z = ScVector::zeros(&e, 2).unwrap();
    for m in 0..=2 {
        assert_eq!(z.level_norm(m).unwrap(), 0.0);
    }
}

#[test]
fn gaussian_level_one_norm_matches_fine_grid() {
    let e = Arc::new(ScScale::weighted_grid(8.0, 1.0 / 64.0, vec![0.0, 0.1]).unwrap());
    let u = ScVector::from_fn(&e, 1, |s| (-s * s).exp()).unwrap();
    let got = u.level_norm(1).unwrap();
    let oracle = gaussian_h1_norm_oracle(8.0, 1.0 / 512.0, 0.1);
    assert!((got - oracle).abs() / oracle < 1e-6, "{got} vs {oracle}");
}

#[test]
fn level_above_declared_is_rejected() {
    let e = Arc::new(ScScale::finite_dim(2, 3));
    let x = ScVector::new(&e, vec![3.0, 4.0], 1).unwrap();
    assert!(matches!(
        x.level_norm(2),
        Err(Error::LevelOutOfRange { requested: 2, declared: 1 })
    ));
}

#[test]
fn finite_embedding_ratios_are_one() {
    let e = ScScale::finite_dim(4, 3);
    for m in 0..3 {
        let r = e.embedding_report(m, 50, 7).unwrap();
        assert_eq!(r.max_ratio, 1.0);
        assert!(!r.violation);
    }
}

#[test]
fn grid_embedding_constant_dominates_basis_vectors() {
    let e = ScScale::weighted_grid(2.0, 0.125, vec![0.0, 0.3, 0.5, 0.9]).unwrap();
    let n = e.dim();
    for m in 0..3 {
        // exhaustive maximization over the coordinate basis
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            worst = worst.max(e.norm_of(&v, m).unwrap() / e.norm_of(&v, m + 1).unwrap());
        }
        let c = e.embedding_constants()[m];
        assert!(worst <= c * (1.0 + 1e-12), "level {m}: {worst} > {c}");
        let r = e.embedding_report(m, 64, 3).unwrap();
        assert!(!r.violation);
        assert_eq!(r.tail_profile.len(), 3);
    }
}

#[test]
fn non_monotone_weights_rejected() {
    assert!(matches!(
        ScScale::weighted_grid(4.0, 0.25, vec![0.0, 0.5, 0.2]),
        Err(Error::InvalidScale(_))
    ));
}

#[test]
fn degeneracy_examples() {
    let c2 = PartialQuadrant::leading(2, 2).unwrap();
    let e2 = Arc::new(ScScale::finite_dim(2, 0));
    let at = |v: Vec<f64>| ScVector::smooth(&e2, v).unwrap();
    assert_eq!(degeneracy_index(&c2, &at(vec![1.0, 2.0]), 1e-12).unwrap(), 0);
    assert_eq!(degeneracy_index(&c2, &at(vec![0.0, 0.0]), 1e-12).unwrap(), 2);
    let c3 = PartialQuadrant::leading(3, 3).unwrap();
    assert_eq!(c3.degeneracy_index(&[0.0, 3.2, 0.0], 1e-12).unwrap(), 2);
}

/// Rank by Gaussian elimination with partial pivoting.
fn elimination_rank(m: &DMatrix<f64>) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.amax().max(1e-300);
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let (p, val) = (rank..rows)
            .map(|r| (r, a[(r, c)].abs()))
            .fold((rank, 0.0), |best, x| if x.1 > best.1 { x } else { best });
        if val <= 1e-10 * scale {
            continue;
        }
        a.swap_rows(rank, p);
        for r in rank + 1..rows {
            let f = a[(r, c)] / a[(rank, c)];
            for k in c..cols {
                a[(r, k)] -= f * a[(rank, k)];
            }
        }
        rank += 1;
    }
    rank
}

#[test]
fn fredholm_index_examples() {
    let e5 = Arc::new(ScScale::finite_dim(5, 1));
    let d = LinearScOperator::identity(&e5).fredholm_split().unwrap();
    assert_eq!((d.kernel.ncols(), d.cokernel.ncols(), d.index), (0, 0, 0));

    let e3 = Arc::new(ScScale::finite_dim(3, 1));
    let e2 = Arc::new(ScScale::finite_dim(2, 1));
    let d = LinearScOperator::matrix(&e3, &e2, DMatrix::zeros(2, 3))
        .unwrap()
        .fredholm_split()
        .unwrap();
    assert_eq!(d.index, 1);

    let e4 = Arc::new(ScScale::finite_dim(4, 1));
    let e3b = Arc::new(ScScale::finite_dim(3, 1));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
    let b = DMatrix::from_fn(2, 4, |_, _| rng.random_range(-1.0..1.0));
    let t = a * b;
    assert_eq!(elimination_rank(&t), 2);
    let d = LinearScOperator::matrix(&e4, &e3b, t.clone())
        .unwrap()
        .fredholm_split()
        .unwrap();
    assert_eq!(d.kernel.ncols(), 2);
    assert_eq!(d.cokernel.ncols(), 1);
    assert_eq!(d.index, 1);
    assert!(d.reconstruction_residual < 1e-12);
    assert!((t * &d.kernel).norm() < 1e-12);
}

#[test]
fn direct_sum_examples() {
    let s = ScScale::direct_sum(&ScScale::finite_dim(2, 2), &ScScale::finite_dim(3, 2)).unwrap();
    for m in 0..=2 {
        assert_eq!(s.dim_at(m).unwrap(), 5);
    }
    assert!(matches!(
        ScScale::direct_sum(&ScScale::finite_dim(2, 2), &ScScale::finite_dim(3, 1)),
        Err(Error::MismatchedMaxLevel(2, 1))
    ));

    let g = ScScale::weighted_grid(2.0, 0.125, vec![0.0, 0.2]).unwrap();
    let zero = ScScale::finite_dim(0, 1);
    let gz = ScScale::direct_sum(&g, &zero).unwrap();
    let u: Vec<f64> = g.grid().unwrap().coordinates().iter().map(|s| s.cos()).collect();
    for m in 0..=1 {
        assert_eq!(gz.norm_of(&u, m).unwrap(), g.norm_of(&u, m).unwrap());
    }

    let f = ScScale::finite_dim(2, 1);
    let mixed = ScScale::direct_sum(&g, &f).unwrap();
    let mut x = u.clone();
    x.extend([1.5, -2.0]);
    for m in 0..=1 {
        let a = g.norm_of(&u, m).unwrap();
        let b = (1.5f64 * 1.5 + 4.0).sqrt();
        assert!((mixed.norm_of(&x, m).unwrap() - (a * a + b * b).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn config_builds_both_backends() {
    let e = ScaleConfig::from_toml("backend = \"finite_dim\"\nmax_level = 2\ndims = [3, 3, 3]\n")
        .unwrap()
        .build()
        .unwrap();
    assert_eq!((e.dim(), e.max_level()), (3, 2));
    let bad = ScaleConfig::from_toml("backend = \"finite_dim\"\nmax_level = 2\ndims = [3, 4, 3]\n")
        .unwrap()
        .build();
    assert!(bad.is_err());
}

proptest! {
    #[test]
    fn degeneracy_is_permutation_invariant(
        vals in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], 4),
        perm_seed in 0u64..1000,
    ) {
        let c = PartialQuadrant::leading(4, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        let mut p: Vec<usize> = (0..4).collect();
        for i in (1..4).rev() {
            p.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<f64> = p.iter().map(|&i| vals[i]).collect();
        prop_assert_eq!(
            c.degeneracy_index(&vals, 1e-12).unwrap(),
            c.degeneracy_index(&permuted, 1e-12).unwrap()
        );
    }

    #[test]
    fn grid_levels_are_nested(coeffs in prop::collection::vec(-1.0f64..1.0, 33)) {
        let e = ScScale::weighted_grid(2.0, 0.125, vec![0.0, 0.2, 0.4]).unwrap();
        for m in 0..2 {
            let lo = e.norm_of(&coeffs, m).unwrap();
            let hi = e.norm_of(&coeffs, m + 1).unwrap();
            prop_assert!(lo <= e.embedding_constants()[m] * hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn direct_sum_is_pythagorean(
        a in prop::collection::vec(-3.0f64..3.0, 2),
        b in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let ea = ScScale::finite_dim(2, 1);
        let eb = ScScale::finite_dim(3, 1);
        let s = ScScale::direct_sum(&ea, &eb).unwrap();
        let mut x = a.clone();
        x.extend(&b);
        let na = ea.norm_of(&a, 0).unwrap();
        let nb = eb.norm_of(&b, 0).unwrap();
        let ns = s.norm_of(&x, 0).unwrap();
        prop_assert!((ns * ns - na * na - nb * nb).abs() <= 1e-12 * (1.0 + ns * ns));
    }

    #[test]
    fn index_matches_elimination(rows in 1usize..6, cols in 1usize..6, r in 0usize..4, seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = r.min(rows).min(cols);
        let a = DMatrix::from_fn(rows, r, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(r, cols, |_, _| rng.random_range(-1.0..1.0));
        let t = a * b;
        let rank = elimination_rank(&t);
        let src = Arc::new(ScScale::finite_dim(cols, 1));
        let tgt = Arc::new(ScScale::finite_dim(rows, 1));
        let d = LinearScOperator::matrix(&src, &tgt, t).unwrap().fredholm_split().unwrap();
        prop_assert_eq!(d.index, (cols - rank) as i64 - (rows - rank) as i64);
    }
}

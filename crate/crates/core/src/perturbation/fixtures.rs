use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::bundle::{BundleSection, ChartFn, JacobianFn, PointFn, SectionClass, StrongBundleModel, Window};
use super::solve::SolveConfig;
use crate::error::Result;
use crate::germs::FiberProjection;
use crate::retracts::{splicing_to_retraction, BumpFamily, BumpProfile, Splicing};
use crate::sc_core::{PartialQuadrant, ScScale};

/// Grid points of the loop model.
pub const LOOP_POINTS: usize = 256;

fn analytic(model: &Arc<StrongBundleModel>, name: &str, f: PointFn, j: JacobianFn) -> BundleSection {
    BundleSection::new(name, SectionClass::Plain, model, f, Some(j))
}

fn plane(name: &str, fiber: usize) -> Arc<StrongBundleModel> {
    Arc::new(StrongBundleModel::euclidean(name, 2, fiber, 1, Window::cube(2, 2.0)).expect("valid plane model"))
}

/// `(x, y) -> (x², y)` on `R² ◁ R²`: index 0, degenerate at the origin.
pub fn fold() -> BundleSection {
    let m = plane("fold", 2);
    analytic(
        &m,
        "fold",
        Arc::new(|x: &[f64]| Ok(vec![x[0] * x[0], x[1]])),
        Arc::new(|x: &[f64]| Ok(DMatrix::from_row_slice(2, 2, &[2.0 * x[0], 0.0, 0.0, 1.0]))),
    )
}

/// `(x, y) -> x²` on `R² ◁ R`: index 1, zero set the degenerate line `x = 0`.
pub fn fold_line() -> BundleSection {
    let m = plane("fold-line", 1);
    analytic(
        &m,
        "fold-line",
        Arc::new(|x: &[f64]| Ok(vec![x[0] * x[0]])),
        Arc::new(|x: &[f64]| Ok(DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 0.0]))),
    )
}

/// `(x, y) -> (x³, y)`: index 0 with one degenerate root of degree 1.
pub fn cubic() -> BundleSection {
    let m = plane("cubic", 2);
    analytic(
        &m,
        "cubic",
        Arc::new(|x: &[f64]| Ok(vec![x[0].powi(3), x[1]])),
        Arc::new(|x: &[f64]| Ok(DMatrix::from_row_slice(2, 2, &[3.0 * x[0] * x[0], 0.0, 0.0, 1.0]))),
    )
}

/// `(x, y) -> x² + y² - 1`: index 1, transversal zero set the unit circle.
pub fn circle() -> BundleSection {
    let m = plane("circle", 1);
    analytic(
        &m,
        "circle",
        Arc::new(|x: &[f64]| Ok(vec![x[0] * x[0] + x[1] * x[1] - 1.0])),
        Arc::new(|x: &[f64]| Ok(DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]]))),
    )
}

/// `(x, y) -> (x, y / (1 + y²))`: bounded in `y`, so `{N(f) <= 1}` fills the
/// window strip and the pair cannot be certified.
pub fn non_proper() -> BundleSection {
    let m = plane("non-proper", 2);
    analytic(
        &m,
        "non-proper",
        Arc::new(|x: &[f64]| Ok(vec![x[0], x[1] / (1.0 + x[1] * x[1])])),
        Arc::new(|x: &[f64]| {
            let q = 1.0 + x[1] * x[1];
            Ok(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, (1.0 - x[1] * x[1]) / (q * q)]))
        }),
    )
}

/// `(x, y) -> x` on `[0, ∞) × R ◁ R`: the kernel `span(e_y)` lies in the
/// boundary face, so the solutions on `x = 0` are not in good position.
pub fn boundary_breach() -> BundleSection {
    let m = Arc::new(
        StrongBundleModel::euclidean("half-plane", 2, 1, 1, Window::new(vec![0.0, -2.0], vec![2.0, 2.0]).expect("box"))
            .expect("valid model")
            .with_quadrant(PartialQuadrant::new(2, vec![0]).expect("quadrant"))
            .expect("matching dimension"),
    );
    analytic(
        &m,
        "boundary-breach",
        Arc::new(|x: &[f64]| Ok(vec![x[0]])),
        Arc::new(|_: &[f64]| Ok(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]))),
    )
}

/// Loop model `H¹(S¹) ◁ L²(S¹)` on [`LOOP_POINTS`] nodes with three extra
/// levels, chart dimension 0.
pub fn loop_model() -> Result<Arc<StrongBundleModel>> {
    let base = Arc::new(ScScale::periodic(LOOP_POINTS, 1, 3)?);
    let fiber = Arc::new(ScScale::periodic(LOOP_POINTS, 0, 3)?);
    let zeros: ChartFn = Arc::new(|_: &[f64]| vec![0.0; LOOP_POINTS]);
    Ok(Arc::new(StrongBundleModel::with_chart(
        "loop",
        base,
        fiber,
        Arc::new(|_: &[f64]| Vec::new()),
        zeros,
        Window {
            lower: Vec::new(),
            upper: Vec::new(),
        },
    )?))
}

/// Spectral derivative on the uniform grid of `[0, 2π)`.
pub fn spectral_derivative(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = u.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let freq = if 2 * k == n {
            0.0
        } else if k < n / 2 + 1 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        *c *= Complex::new(0.0, freq);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Loops of observed base level `m`: Fourier modes `|k|^{-(m + 2)}` with
/// seeded phases, 16 samples per level `0..=max_level`.
pub fn loop_samples(max_level: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = LOOP_POINTS;
    let ts: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
    let mut out = Vec::new();
    for m in 0..=max_level {
        for _ in 0..16 {
            let mut u = vec![0.0; n];
            for k in 1..n / 2 {
                let a = (k as f64).powf(-(m as f64 + 2.0));
                let phase: f64 = rng.random_range(0.0..TAU);
                for (v, t) in u.iter_mut().zip(&ts) {
                    *v += a * (k as f64 * t + phase).cos();
                }
            }
            out.push(u);
        }
    }
    out
}

/// `x -> ẋ`, a plain section of the loop model.
pub fn loop_derivative(model: &Arc<StrongBundleModel>) -> BundleSection {
    BundleSection::new(
        "x'",
        SectionClass::Plain,
        model,
        Arc::new(|x: &[f64]| Ok(spectral_derivative(x))),
        None,
    )
}

/// `x -> x`, an sc⁺-section of the loop model.
pub fn loop_inclusion(model: &Arc<StrongBundleModel>) -> BundleSection {
    BundleSection::new("x", SectionClass::ScPlus, model, Arc::new(|x: &[f64]| Ok(x.to_vec())), None)
}

/// `x -> ẋ + x`, regularizing.
pub fn loop_elliptic(model: &Arc<StrongBundleModel>) -> BundleSection {
    BundleSection::new(
        "x' + x",
        SectionClass::Plain,
        model,
        Arc::new(|x: &[f64]| Ok(spectral_derivative(x).iter().zip(x).map(|(d, v)| d + v).collect())),
        None,
    )
}

/// `x -> (2 + cos t) x`, order preserving and not regularizing.
pub fn loop_multiplication(model: &Arc<StrongBundleModel>) -> BundleSection {
    BundleSection::new(
        "(2 + cos t) x",
        SectionClass::Plain,
        model,
        Arc::new(|x: &[f64]| {
            let n = x.len();
            Ok(x.iter()
                .enumerate()
                .map(|(i, v)| (2.0 + (TAU * i as f64 / n as f64).cos()) * v)
                .collect())
        }),
        None,
    )
}

/// Parameters of the pork-barrel bundle.
#[derive(Clone, Copy, Debug)]
pub struct PorkBarrel {
    /// Half-width of the weighted grid carrying the bump fiber.
    pub grid_radius: f64,
    pub grid_spacing: f64,
    /// Squared radius of the degenerate zero circle.
    pub radius_sq: f64,
}

impl Default for PorkBarrel {
    fn default() -> Self {
        PorkBarrel {
            grid_radius: 32.0,
            grid_spacing: 1.0,
            radius_sq: 0.25,
        }
    }
}

impl PorkBarrel {
    /// Smallest `s > 0` for which the bump support fits in the grid.
    pub fn gap(&self) -> f64 {
        1.0 / (self.grid_radius - 1.0).ln()
    }

    /// Seeds on a 13-node grid per axis, restricted to `|F| <= 1`.
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            seeds_per_axis: 13,
            seed_filter: 1.0,
            ..SolveConfig::default()
        }
    }

    /// Varying-rank bundle over the splicing core `{(s, y, π_s e)}` of
    /// `R² ⊕ E`, with fiber `R ⊕ E` projected by `(k, h) -> (k, π_s h)`, and
    /// the section `(s, y, e) -> ((s² + y² - ρ)², π_s e)`. The base has
    /// dimension 2 for `s <= 0` and 3 for `s > 0`, the fiber rank 1 or 2, and
    /// the zero set is a degenerate circle crossing the jump locus.
    pub fn build(&self) -> Result<BundleSection> {
        let e = Arc::new(ScScale::weighted_grid(self.grid_radius, self.grid_spacing, vec![0.0, 0.01, 0.02])?);
        let top = e.max_level();
        let bumps = Arc::new(BumpFamily::new(BumpProfile::polynomial(), &e)?);
        let param = Arc::new(ScScale::finite_dim(2, top));
        let (b1, b2) = (Arc::clone(&bumps), Arc::clone(&bumps));
        let probes = vec![vec![-1.0, 0.0], vec![0.5, 0.0], vec![1.0, 0.3]];
        let splicing = Splicing::new(
            &param,
            PartialQuadrant::full(2),
            &e,
            Arc::new(move |v, h| b1.project(v[0], h)),
            Some(Arc::new(move |v, h, dv, dh| b2.project_derivative(v[0], h, dv[0], dh))),
            probes,
        )?;
        let retraction = splicing_to_retraction(&splicing)?;
        let fiber = Arc::new(ScScale::direct_sum(&ScScale::finite_dim(1, top), &e)?);
        let b3 = Arc::clone(&bumps);
        let phi: FiberProjection = Arc::new(move |x: &[f64], h: &[f64]| {
            let mut out = vec![h[0]];
            out.extend(b3.project(x[0], &h[1..])?);
            Ok(out)
        });
        let base_dim = 2 + e.dim();
        let chart: ChartFn = Arc::new(|x: &[f64]| vec![x[0], x[1]]);
        let lift: ChartFn = Arc::new(move |p: &[f64]| {
            let mut x = vec![0.0; base_dim];
            x[..2].copy_from_slice(&p[..2]);
            x
        });
        let model = Arc::new(StrongBundleModel::retracted(
            "pork-barrel",
            retraction,
            fiber,
            phi,
            chart,
            lift,
            Window::cube(2, 2.0),
        )?);
        let rho = self.radius_sq;
        let g = move |x: &[f64]| (x[0] * x[0] + x[1] * x[1] - rho).powi(2);
        let b4 = Arc::clone(&bumps);
        let eval: PointFn = Arc::new(move |x: &[f64]| {
            let mut out = vec![g(x)];
            out.extend(b4.project(x[0], &x[2..])?);
            Ok(out)
        });
        let filled: PointFn = Arc::new(move |x: &[f64]| {
            let mut out = vec![g(x)];
            out.extend_from_slice(&x[2..]);
            Ok(out)
        });
        let jacobian: JacobianFn = Arc::new(move |x: &[f64]| {
            let n = x.len();
            let mut j = DMatrix::zeros(n - 1, n);
            let c = 4.0 * (x[0] * x[0] + x[1] * x[1] - rho);
            j[(0, 0)] = c * x[0];
            j[(0, 1)] = c * x[1];
            for i in 2..n {
                j[(i - 1, i)] = 1.0;
            }
            Ok(j)
        });
        Ok(BundleSection::filled(
            "pork-barrel",
            SectionClass::Plain,
            &model,
            eval,
            filled,
            Some(jacobian),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_derivative_of_sine() {
        let n = LOOP_POINTS;
        let u: Vec<f64> = (0..n).map(|i| (3.0 * TAU * i as f64 / n as f64).sin()).collect();
        let d = spectral_derivative(&u);
        for (i, v) in d.iter().enumerate() {
            assert!((v - 3.0 * (3.0 * TAU * i as f64 / n as f64).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn loop_samples_have_their_level() {
        let m = loop_model().unwrap();
        let samples = loop_samples(2, 7);
        for (i, x) in samples.iter().enumerate() {
            assert_eq!(m.base().observed_level(x).unwrap(), Some(i / 16));
        }
    }

    #[test]
    fn pork_barrel_fiber_rank_jumps() {
        let f = PorkBarrel::default().build().unwrap();
        let m = f.model();
        let rank = |s: f64| m.fiber_basis(&m.lift(&[s, 0.0])).unwrap().ncols();
        assert_eq!(rank(-0.5), 1);
        assert_eq!(rank(0.5), 2);
        assert_eq!(m.tangent_basis(&m.lift(&[-0.5, 0.0])).unwrap().ncols(), 2);
        assert_eq!(m.tangent_basis(&m.lift(&[0.5, 0.0])).unwrap().ncols(), 3);
    }
}

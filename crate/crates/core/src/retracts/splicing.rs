use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::retraction::Retraction;
use crate::error::{Error, Result};
use crate::linalg;
use crate::quadrature;
use crate::sc_calculus::{Domain, ScMap};
use crate::sc_core::{PartialQuadrant, ScScale, WeightedGrid};

/// `(v, e) -> π_v(e)`.
pub type ProjectionFamily = Arc<dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync>;
/// `(v, e, dv, de) -> D[(v, e) -> π_v(e)](dv, de)`.
pub type ProjectionDerivative =
    Arc<dyn Fn(&[f64], &[f64], &[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// Tolerance for idempotence and linearity of each `π_v`.
pub const PROJECTION_TOL: f64 = 1e-10;

/// A family of linear projections `π_v` on a fiber scale, parametrized by an
/// open subset of a partial quadrant.
#[derive(Clone)]
pub struct Splicing {
    pub param: Arc<ScScale>,
    pub param_quadrant: PartialQuadrant,
    pub fiber: Arc<ScScale>,
    family: ProjectionFamily,
    derivative: Option<ProjectionDerivative>,
    /// Parameters at which idempotence and linearity are verified.
    pub probe_params: Vec<Vec<f64>>,
}

impl fmt::Debug for Splicing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Splicing")
            .field("param_dim", &self.param.dim())
            .field("fiber_dim", &self.fiber.dim())
            .field("probe_params", &self.probe_params.len())
            .finish()
    }
}

impl Splicing {
    pub fn new(
        param: &Arc<ScScale>,
        param_quadrant: PartialQuadrant,
        fiber: &Arc<ScScale>,
        family: ProjectionFamily,
        derivative: Option<ProjectionDerivative>,
        probe_params: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if param_quadrant.dim() != param.dim() {
            return Err(Error::DimensionMismatch {
                expected: param.dim(),
                found: param_quadrant.dim(),
            });
        }
        Ok(Splicing {
            param: Arc::clone(param),
            param_quadrant,
            fiber: Arc::clone(fiber),
            family,
            derivative,
            probe_params,
        })
    }

    /// `π_v = identity` for every `v`.
    pub fn constant_identity(param: &Arc<ScScale>, fiber: &Arc<ScScale>) -> Self {
        Splicing {
            param: Arc::clone(param),
            param_quadrant: PartialQuadrant::full(param.dim()),
            fiber: Arc::clone(fiber),
            family: Arc::new(|_, e| Ok(e.to_vec())),
            derivative: Some(Arc::new(|_, _, _, de| Ok(de.to_vec()))),
            probe_params: vec![vec![0.0; param.dim()]],
        }
    }

    /// `π_v = 0` for every `v`.
    pub fn constant_zero(param: &Arc<ScScale>, fiber: &Arc<ScScale>) -> Self {
        let n = fiber.dim();
        Splicing {
            param: Arc::clone(param),
            param_quadrant: PartialQuadrant::full(param.dim()),
            fiber: Arc::clone(fiber),
            family: Arc::new(move |_, _| Ok(vec![0.0; n])),
            derivative: Some(Arc::new(move |_, _, _, _| Ok(vec![0.0; n]))),
            probe_params: vec![vec![0.0; param.dim()]],
        }
    }

    pub fn project(&self, v: &[f64], e: &[f64]) -> Result<Vec<f64>> {
        (self.family)(v, e)
    }

    /// Worst idempotence / linearity residual over the probe parameters with
    /// seeded random fiber vectors.
    pub fn projection_residual(&self, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.fiber.dim();
        let mut worst: f64 = 0.0;
        for v in &self.probe_params {
            let e1: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let e2: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let scale = self.fiber.norm_of(&e1, 0)? + self.fiber.norm_of(&e2, 0)?;
            let p1 = self.project(v, &e1)?;
            let p2 = self.project(v, &e2)?;
            let pp1 = self.project(v, &p1)?;
            let idem = self.fiber.norm_of(&linalg::sub(&pp1, &p1), 0)?;
            let alpha = 0.37;
            let combo = self.project(v, &linalg::axpy(alpha, &e1, &e2))?;
            let lin = self
                .fiber
                .norm_of(&linalg::sub(&combo, &linalg::axpy(alpha, &p1, &p2)), 0)?;
            worst = worst.max(idem.max(lin) / scale.max(1e-300));
        }
        Ok(worst)
    }
}

/// `r(v, e) = (v, π_v(e))` on `V ⊕ E`; its image is the splicing core.
pub fn splicing_to_retraction(sp: &Splicing) -> Result<Retraction> {
    let residual = sp.projection_residual(0x5b1)?;
    if residual > PROJECTION_TOL {
        return Err(Error::NonIdempotent(residual));
    }
    let total = Arc::new(ScScale::direct_sum(&sp.param, &sp.fiber)?);
    let k = sp.param.dim();
    let quadrant = PartialQuadrant::new(total.dim(), sp.param_quadrant.indices().to_vec())?;
    let fam = Arc::clone(&sp.family);
    let eval = Arc::new(move |x: &[f64]| -> Result<Vec<f64>> {
        let (v, e) = x.split_at(k);
        let mut out = v.to_vec();
        out.extend(fam(v, e)?);
        Ok(out)
    });
    let derivative = sp.derivative.as_ref().map(|d| {
        let d = Arc::clone(d);
        Arc::new(move |x: &[f64], h: &[f64]| -> Result<Vec<f64>> {
            let (v, e) = x.split_at(k);
            let (dv, de) = h.split_at(k);
            let mut out = dv.to_vec();
            out.extend(d(v, e, dv, de)?);
            Ok(out)
        }) as crate::sc_calculus::MapDerivative
    });
    Retraction::new(ScMap::new(
        "splicing",
        &total,
        &total,
        Domain::quadrant(quadrant),
        eval,
        derivative,
    )?)
}

/// A compactly supported bump `β` on `[-support, support]` with derivative.
#[derive(Clone)]
pub struct BumpProfile {
    pub support: f64,
    value: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>,
}

impl fmt::Debug for BumpProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BumpProfile(support = {})", self.support)
    }
}

impl BumpProfile {
    /// `c (1 - t²)⁴` on `[-1, 1]` with `c` making `∫β² = 1`.
    pub fn polynomial() -> Self {
        // ∫(1 - t²)^8 dt over [-1, 1] = 2^17 (8!)² / 17!
        let mut fact8 = 1.0f64;
        for k in 1..=8 {
            fact8 *= k as f64;
        }
        let mut fact17 = 1.0f64;
        for k in 1..=17 {
            fact17 *= k as f64;
        }
        let integral = 2f64.powi(17) * fact8 * fact8 / fact17;
        let c = 1.0 / integral.sqrt();
        BumpProfile {
            support: 1.0,
            value: Arc::new(move |t: f64| {
                if t.abs() >= 1.0 {
                    (0.0, 0.0)
                } else {
                    let q = 1.0 - t * t;
                    (c * q.powi(4), -8.0 * c * t * q.powi(3))
                }
            }),
        }
    }

    /// A custom profile; `f` returns `(β(t), β'(t))`.
    pub fn custom(support: f64, f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        BumpProfile {
            support,
            value: Arc::new(f),
        }
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        (self.value)(t)
    }

    /// `∫β²` by composite Gauss–Legendre on the support.
    pub fn l2_norm_sq(&self) -> f64 {
        quadrature::integrate(|t| self.eval(t).0.powi(2), -self.support, self.support, 16, 12)
    }
}

/// The family `f_s(t) = β(t + e^{1/s})` for `s > 0` (and `f_s = 0` for
/// `s <= 0`) on a weighted grid, with projections orthogonal for the grid's
/// level-0 inner product.
#[derive(Clone, Debug)]
pub struct BumpFamily {
    pub beta: BumpProfile,
    pub grid: WeightedGrid,
    weights: Vec<f64>,
}

/// Normalized `f̂_s` and its `s`-derivative.
pub struct BumpFrame {
    pub f: Vec<f64>,
    pub df: Vec<f64>,
}

impl BumpFamily {
    pub fn new(beta: BumpProfile, scale: &ScScale) -> Result<Self> {
        let grid = scale
            .grid()
            .ok_or_else(|| Error::BackendUnsupported("bump splicing needs a weighted grid".into()))?
            .clone();
        if grid.orders[0] != 0 || grid.deltas[0] != 0.0 {
            return Err(Error::InvalidScale(
                "bump splicing needs an unweighted L² level 0".into(),
            ));
        }
        let norm = beta.l2_norm_sq();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Normalization(format!("∫β² = {norm}")));
        }
        let weights = grid.quadrature_weights();
        Ok(BumpFamily {
            beta,
            grid,
            weights,
        })
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    /// Center of the support of `f_s`, `-e^{1/s}`.
    pub fn center(s: f64) -> f64 {
        -(1.0 / s).exp()
    }

    /// `None` for `s <= 0`; window-exit error if the support leaves the grid.
    pub fn frame(&self, s: f64) -> Result<Option<BumpFrame>> {
        if s <= 0.0 {
            return Ok(None);
        }
        let shift = (1.0 / s).exp();
        if !(shift + self.beta.support < self.grid.radius) {
            return Err(Error::WindowExit(format!(
                "support of f_s at s = {s} is centered at -{shift:e}, outside [-{r}, {r}]",
                r = self.grid.radius
            )));
        }
        let dshift = -shift / (s * s);
        let xs = self.grid.coordinates();
        let mut f = Vec::with_capacity(xs.len());
        let mut df = Vec::with_capacity(xs.len());
        for t in xs {
            let (b, db) = self.beta.eval(t + shift);
            f.push(b);
            df.push(db * dshift);
        }
        let norm = self.inner(&f, &f).sqrt();
        if norm == 0.0 {
            return Err(Error::Normalization(format!("f_s vanishes on the grid at s = {s}")));
        }
        let fhat: Vec<f64> = f.iter().map(|v| v / norm).collect();
        let c = self.inner(&fhat, &df);
        let dfhat: Vec<f64> = df
            .iter()
            .zip(&fhat)
            .map(|(d, fh)| (d - c * fh) / norm)
            .collect();
        Ok(Some(BumpFrame { f: fhat, df: dfhat }))
    }

    /// `π_s(e) = <f̂_s, e> f̂_s`.
    pub fn project(&self, s: f64, e: &[f64]) -> Result<Vec<f64>> {
        Ok(match self.frame(s)? {
            None => vec![0.0; e.len()],
            Some(fr) => {
                let a = self.inner(&fr.f, e);
                fr.f.iter().map(|v| a * v).collect()
            }
        })
    }

    /// Derivative of `(s, e) -> π_s(e)` in direction `(ds, de)`.
    pub fn project_derivative(&self, s: f64, e: &[f64], ds: f64, de: &[f64]) -> Result<Vec<f64>> {
        Ok(match self.frame(s)? {
            None => vec![0.0; e.len()],
            Some(fr) => {
                let a = self.inner(&fr.f, e);
                let da = ds * self.inner(&fr.df, e) + self.inner(&fr.f, de);
                fr.f.iter()
                    .zip(&fr.df)
                    .map(|(f, df)| da * f + a * ds * df)
                    .collect()
            }
        })
    }
}

/// The β-bump splicing on `R ⊕ E` with `E` a weighted grid; its retract
/// `{(s, t f_s)}` has dimension 1 for `s <= 0` and 2 for `s > 0`.
pub fn bump_splicing(beta: BumpProfile, fiber: &Arc<ScScale>, probe_s: &[f64]) -> Result<Splicing> {
    let family = Arc::new(BumpFamily::new(beta, fiber)?);
    for &s in probe_s {
        family.frame(s)?;
    }
    let param = Arc::new(ScScale::finite_dim(1, fiber.max_level()));
    let f1 = Arc::clone(&family);
    let f2 = Arc::clone(&family);
    Splicing::new(
        &param,
        PartialQuadrant::full(1),
        fiber,
        Arc::new(move |v, e| f1.project(v[0], e)),
        Some(Arc::new(move |v, e, dv, de| f2.project_derivative(v[0], e, dv[0], de))),
        probe_s.iter().map(|s| vec![*s]).collect(),
    )
}

/// Same as [`bump_splicing`] with the parameter constrained to `[0, ∞)`.
pub fn bump_splicing_on_half_line(
    beta: BumpProfile,
    fiber: &Arc<ScScale>,
    probe_s: &[f64],
) -> Result<Splicing> {
    let mut sp = bump_splicing(beta, fiber, probe_s)?;
    sp.param_quadrant = PartialQuadrant::leading(1, 1)?;
    Ok(sp)
}

/// The nonlinear fiber map `g(a) = a (1 + κ a²)` and its inverse.
#[derive(Clone, Copy, Debug)]
struct Rescale {
    kappa: f64,
}

impl Rescale {
    fn g(&self, a: f64) -> f64 {
        a * (1.0 + self.kappa * a * a)
    }

    fn dg(&self, a: f64) -> f64 {
        1.0 + 3.0 * self.kappa * a * a
    }

    /// Unique real root of `κ a³ + a - b = 0` (Cardano).
    fn ginv(&self, b: f64) -> f64 {
        let p = 1.0 / self.kappa;
        let q = -b / self.kappa;
        let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        (-q / 2.0 + disc).cbrt() + (-q / 2.0 - disc).cbrt()
    }
}

/// `ψ(s, u) = (s, u + (g(<f̂_s, u>) - <f̂_s, u>) f̂_s)` (or its inverse) as a
/// map on `R ⊕ E`; it preserves the bump retract.
fn fiber_rescaling(family: &Arc<BumpFamily>, total: &Arc<ScScale>, kappa: f64, inverse: bool) -> Result<ScMap> {
    let rs = Rescale { kappa };
    let fwd = move |a: f64| if inverse { rs.ginv(a) } else { rs.g(a) };
    let dfwd = move |a: f64| {
        if inverse {
            1.0 / rs.dg(rs.ginv(a))
        } else {
            rs.dg(a)
        }
    };
    let fam = Arc::clone(family);
    let eval = Arc::new(move |x: &[f64]| -> Result<Vec<f64>> {
        let (s, u) = (x[0], &x[1..]);
        let mut out = x.to_vec();
        if let Some(fr) = fam.frame(s)? {
            let a = fam.inner(&fr.f, u);
            let c = fwd(a) - a;
            for (o, f) in out[1..].iter_mut().zip(&fr.f) {
                *o += c * f;
            }
        }
        Ok(out)
    });
    let fam = Arc::clone(family);
    let derivative = Arc::new(move |x: &[f64], h: &[f64]| -> Result<Vec<f64>> {
        let (s, u) = (x[0], &x[1..]);
        let (ds, v) = (h[0], &h[1..]);
        let mut out = h.to_vec();
        if let Some(fr) = fam.frame(s)? {
            let a = fam.inner(&fr.f, u);
            let da = ds * fam.inner(&fr.df, u) + fam.inner(&fr.f, v);
            let c = fwd(a) - a;
            let dc = (dfwd(a) - 1.0) * da;
            for ((o, f), df) in out[1..].iter_mut().zip(&fr.f).zip(&fr.df) {
                *o += dc * f + c * ds * df;
            }
        }
        Ok(out)
    });
    ScMap::new(
        if inverse { "rescale⁻¹" } else { "rescale" },
        total,
        total,
        Domain::whole(total.dim()),
        eval,
        Some(derivative),
    )
}

/// `ψ ∘ r ∘ ψ⁻¹` for the β-bump retraction `r` and a fiber rescaling `ψ`
/// with strength `kappa > 0`; the image is unchanged.
pub fn conjugate_bump_retraction(
    beta: BumpProfile,
    fiber: &Arc<ScScale>,
    kappa: f64,
) -> Result<Retraction> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidChart(format!("rescaling strength {kappa} must be positive")));
    }
    let family = Arc::new(BumpFamily::new(beta.clone(), fiber)?);
    let r = splicing_to_retraction(&bump_splicing(beta, fiber, &[])?)?;
    let total = Arc::clone(r.scale());
    let psi = fiber_rescaling(&family, &total, kappa, false)?;
    let psi_inv = fiber_rescaling(&family, &total, kappa, true)?;
    let inner = ScMap::compose(&psi_inv, r.map())?;
    Retraction::new(ScMap::compose(&inner, &psi)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardano_inverts_cubic() {
        let rs = Rescale { kappa: 0.3 };
        for b in [-5.0, -0.2, 0.0, 0.7, 12.0] {
            assert!((rs.g(rs.ginv(b)) - b).abs() < 1e-12);
        }
    }

    #[test]
    fn polynomial_bump_is_normalized() {
        assert!((BumpProfile::polynomial().l2_norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_bump_rejected() {
        let e = ScScale::weighted_grid(4.0, 0.125, vec![0.0, 0.1]).unwrap();
        let b = BumpProfile::custom(1.0, |t: f64| if t.abs() < 1.0 { (1.0 - t * t, -2.0 * t) } else { (0.0, 0.0) });
        assert!(matches!(BumpFamily::new(b, &e), Err(Error::Normalization(_))));
    }
}

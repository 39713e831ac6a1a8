use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::germs::FiberProjection;
use crate::linalg;
use crate::retracts::{retract_tangent_basis, Retraction};
use crate::sc_core::{PartialQuadrant, ScScale, ScVector};

pub type PointFn = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync>;
pub type ChartFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Step of the centered-difference Jacobian fallback.
pub const JACOBIAN_STEP: f64 = 1e-6;

/// Axis-aligned box in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidChart("window bounds must satisfy lower < upper".into()));
        }
        Ok(Window { lower, upper })
    }

    /// `[-half, half]^dim`.
    pub fn cube(dim: usize, half: f64) -> Self {
        Window {
            lower: vec![-half; dim],
            upper: vec![half; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(&self.lower).zip(&self.upper).all(|((v, a), b)| v >= a && v <= b)
    }

    /// `points` nodes per axis including the faces, in row-major order.
    pub fn grid(&self, points: usize) -> Vec<Vec<f64>> {
        let n = points.max(2);
        let mut out = vec![Vec::new()];
        for d in 0..self.dim() {
            let (a, b) = (self.lower[d], self.upper[d]);
            out = out
                .into_iter()
                .flat_map(|p: Vec<f64>| {
                    (0..n).map(move |i| {
                        let mut q = p.clone();
                        q.push(a + (b - a) * i as f64 / (n - 1) as f64);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// Multi-index of a row-major grid position.
    pub fn grid_index(&self, flat: usize, points: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        let mut r = flat;
        for d in (0..self.dim()).rev() {
            idx[d] = r % points;
            r /= points;
        }
        idx
    }
}

/// Bundle element `(x, h)` of bi-level `(m, k)` with `k <= m + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleElement {
    pub base: Vec<f64>,
    pub fiber: Vec<f64>,
    pub bilevel: (usize, usize),
}

/// Strong bundle `U ◁ F` with the double filtration `(U ◁ F)_{m,k} = U_m ⊕
/// F_k`, `0 <= k <= m + 1`, optionally retracted by `R(u, h) = (r(u),
/// φ(u) h)`. Sections are localized in chart coordinates `chart(x) ∈ R^d`,
/// and `lift` maps chart coordinates back onto the base.
#[derive(Clone)]
pub struct StrongBundleModel {
    pub name: String,
    base: Arc<ScScale>,
    fiber: Arc<ScScale>,
    retraction: Option<Retraction>,
    phi: Option<FiberProjection>,
    quadrant: PartialQuadrant,
    chart: ChartFn,
    lift: ChartFn,
    window: Window,
}

impl fmt::Debug for StrongBundleModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StrongBundleModel")
            .field("name", &self.name)
            .field("base_dim", &self.base.dim())
            .field("fiber_dim", &self.fiber.dim())
            .field("retracted", &self.retraction.is_some())
            .field("window", &self.window)
            .finish()
    }
}

impl StrongBundleModel {
    /// `R^n ◁ R^N` with chart coordinates equal to base coordinates.
    pub fn trivial(name: impl Into<String>, base: Arc<ScScale>, fiber: Arc<ScScale>, window: Window) -> Result<Self> {
        if window.dim() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: window.dim(),
            });
        }
        Self::with_chart(
            name,
            base,
            fiber,
            Arc::new(|x: &[f64]| x.to_vec()),
            Arc::new(|p: &[f64]| p.to_vec()),
            window,
        )
    }

    /// Unretracted model localized in custom chart coordinates.
    pub fn with_chart(
        name: impl Into<String>,
        base: Arc<ScScale>,
        fiber: Arc<ScScale>,
        chart: ChartFn,
        lift: ChartFn,
        window: Window,
    ) -> Result<Self> {
        if base.max_level() + 1 < fiber.max_level() {
            return Err(Error::Inadmissible {
                base: base.max_level(),
                fiber: fiber.max_level(),
            });
        }
        let n = base.dim();
        Ok(StrongBundleModel {
            name: name.into(),
            quadrant: PartialQuadrant::full(n),
            base,
            fiber,
            retraction: None,
            phi: None,
            chart,
            lift,
            window,
        })
    }

    /// Finite-dimensional `R^n ◁ R^N` with levels `0..=max_level`.
    pub fn euclidean(name: impl Into<String>, n: usize, big_n: usize, max_level: usize, window: Window) -> Result<Self> {
        Self::trivial(
            name,
            Arc::new(ScScale::finite_dim(n, max_level)),
            Arc::new(ScScale::finite_dim(big_n, max_level)),
            window,
        )
    }

    /// Retracted model; `phi(u, h)` must be a projection for `u ∈ O`.
    #[allow(clippy::too_many_arguments)]
    pub fn retracted(
        name: impl Into<String>,
        retraction: Retraction,
        fiber: Arc<ScScale>,
        phi: FiberProjection,
        chart: ChartFn,
        lift: ChartFn,
        window: Window,
    ) -> Result<Self> {
        let base = Arc::clone(retraction.scale());
        let probe = lift(&window.grid(2)[0]);
        if probe.len() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: probe.len(),
            });
        }
        if chart(&probe).len() != window.dim() {
            return Err(Error::DimensionMismatch {
                expected: window.dim(),
                found: chart(&probe).len(),
            });
        }
        Ok(StrongBundleModel {
            name: name.into(),
            quadrant: retraction.quadrant().clone(),
            base,
            fiber,
            retraction: Some(retraction),
            phi: Some(phi),
            chart,
            lift,
            window,
        })
    }

    /// Constrains base coordinates to a partial quadrant (trivial models).
    pub fn with_quadrant(mut self, quadrant: PartialQuadrant) -> Result<Self> {
        if quadrant.dim() != self.base.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.base.dim(),
                found: quadrant.dim(),
            });
        }
        self.quadrant = quadrant;
        Ok(self)
    }

    pub fn base(&self) -> &Arc<ScScale> {
        &self.base
    }

    pub fn fiber(&self) -> &Arc<ScScale> {
        &self.fiber
    }

    pub fn quadrant(&self) -> &PartialQuadrant {
        &self.quadrant
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn is_retracted(&self) -> bool {
        self.retraction.is_some()
    }

    pub fn chart_dim(&self) -> usize {
        self.window.dim()
    }

    pub fn chart(&self, x: &[f64]) -> Vec<f64> {
        (self.chart)(x)
    }

    pub fn lift(&self, p: &[f64]) -> Vec<f64> {
        (self.lift)(p)
    }

    /// The element `(x, h)` at bi-level `(m, k)`; rejects `k > m + 1`.
    pub fn element(&self, base: Vec<f64>, m: usize, fiber: Vec<f64>, k: usize) -> Result<BundleElement> {
        if k > m + 1 || m > self.base.max_level() || k > self.fiber.max_level() {
            return Err(Error::Inadmissible { base: m, fiber: k });
        }
        if base.len() != self.base.dim() || fiber.len() != self.fiber.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.base.dim() + self.fiber.dim(),
                found: base.len() + fiber.len(),
            });
        }
        Ok(BundleElement {
            base,
            fiber,
            bilevel: (m, k),
        })
    }

    /// `r(y)`, or `y` without a retraction.
    pub fn retract(&self, y: &[f64]) -> Result<Vec<f64>> {
        match &self.retraction {
            Some(r) => r.map().eval_raw(y),
            None => Ok(y.to_vec()),
        }
    }

    /// `φ(x) h`, or `h` without a retraction.
    pub fn project(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        match &self.phi {
            Some(phi) => phi(x, h),
            None => Ok(h.to_vec()),
        }
    }

    /// Whether `x` lies on the base (the retract `O`) and in the window.
    pub fn is_charted(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.base.dim() || !self.window.contains(&self.chart(x)) {
            return Ok(false);
        }
        match &self.retraction {
            // points the truncated fiber grid cannot represent are off-chart
            Some(r) => match r.contains(&ScVector::smooth(&self.base, x.to_vec())?) {
                Err(Error::WindowExit(_)) => Ok(false),
                other => other,
            },
            None => Ok(self.quadrant.contains(x, 1e-12)),
        }
    }

    pub fn require_charted(&self, x: &[f64]) -> Result<()> {
        if self.is_charted(x)? {
            Ok(())
        } else {
            Err(Error::Uncharted)
        }
    }

    /// Orthonormal basis of `T_x O` (the identity without a retraction).
    pub fn tangent_basis(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        match &self.retraction {
            Some(r) => retract_tangent_basis(r, &ScVector::smooth(&self.base, x.to_vec())?),
            None => Ok(DMatrix::identity(self.base.dim(), self.base.dim())),
        }
    }

    /// Orthonormal basis of the fiber `φ(x) F` (the identity without a
    /// retraction).
    pub fn fiber_basis(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.fiber.dim();
        match &self.phi {
            Some(phi) => {
                let failure = std::sync::Mutex::new(None);
                let basis = linalg::operator_range(
                    |h| match phi(x, h) {
                        Ok(v) => v,
                        Err(e) => {
                            *failure.lock().expect("unpoisoned") = Some(e);
                            vec![0.0; n]
                        }
                    },
                    n,
                    n,
                    0x51be,
                )?;
                if let Some(e) = failure.into_inner().expect("unpoisoned") {
                    return Err(e);
                }
                Ok(basis)
            }
            None => Ok(DMatrix::identity(n, n)),
        }
    }

    /// Max `|φ(x)φ(x)h - φ(x)h|` over seeded unit `h` and the given points.
    pub fn idempotence_residual(&self, points: &[Vec<f64>], seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for x in points {
            for _ in 0..4 {
                let h: Vec<f64> = (0..self.fiber.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let p = self.project(x, &h)?;
                let pp = self.project(x, &p)?;
                worst = worst.max(linalg::euclidean_norm(&linalg::sub(&pp, &p)));
            }
        }
        Ok(worst)
    }

    /// Window grid lifted onto the base.
    pub fn sample_points(&self, per_axis: usize) -> Vec<Vec<f64>> {
        self.window.grid(per_axis).iter().map(|p| self.lift(p)).collect()
    }
}

/// Plain sections map level `m` to bi-level `(m, m)`; sc⁺-sections to
/// `(m, m + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionClass {
    Plain,
    ScPlus,
}

/// Parametric sc⁺-sections with a text form. `Bump` is `χ(|p - c| / r)
/// φ(x) v` in chart coordinates `p`, with `χ = 1` on `[0, 1/2]` and `0` on
/// `[1, ∞)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SectionSpec {
    Zero,
    Constant { value: Vec<f64> },
    Bump { center: Vec<f64>, radius: f64, value: Vec<f64> },
    Sum { terms: Vec<SectionSpec> },
}

fn psi(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else {
        let e = (-1.0 / t).exp();
        (e, e / (t * t))
    }
}

/// Smooth plateau cutoff: 1 on `[0, 1/2]`, 0 on `[1, ∞)`, with derivative.
pub fn plateau(rho: f64) -> (f64, f64) {
    let (a, da) = psi(1.0 - rho);
    let (b, db) = psi(rho - 0.5);
    let s = a + b;
    // d/dρ of a/(a+b) with da/dρ = -ψ'(1-ρ), db/dρ = ψ'(ρ-1/2)
    let d = (-da * s - a * (-da + db)) / (s * s);
    (a / s, d)
}

impl SectionSpec {
    fn check(&self, model: &StrongBundleModel) -> Result<()> {
        let n = model.fiber().dim();
        let d = model.chart_dim();
        match self {
            SectionSpec::Zero => Ok(()),
            SectionSpec::Constant { value } if value.len() == n => Ok(()),
            SectionSpec::Bump { center, radius, value } if value.len() == n && center.len() == d && *radius > 0.0 => {
                Ok(())
            }
            SectionSpec::Sum { terms } => terms.iter().try_for_each(|t| t.check(model)),
            _ => Err(Error::Config(format!("section spec does not fit {}: {self:?}", model.name))),
        }
    }

    fn eval(&self, model: &StrongBundleModel, x: &[f64]) -> Result<Vec<f64>> {
        let n = model.fiber().dim();
        Ok(match self {
            SectionSpec::Zero => vec![0.0; n],
            SectionSpec::Constant { value } => model.project(x, value)?,
            SectionSpec::Bump { center, radius, value } => {
                let p = model.chart(x);
                let rho = linalg::euclidean_norm(&linalg::sub(&p, center)) / radius;
                let chi = plateau(rho).0;
                if chi == 0.0 {
                    vec![0.0; n]
                } else {
                    linalg::scale(chi, &model.project(x, value)?)
                }
            }
            SectionSpec::Sum { terms } => {
                let mut acc = vec![0.0; n];
                for t in terms {
                    acc = linalg::add(&acc, &t.eval(model, x)?);
                }
                acc
            }
        })
    }

    /// Chart-space support: balls `(center, radius)`, `None` if unbounded.
    pub fn support(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        match self {
            SectionSpec::Zero => Some(Vec::new()),
            SectionSpec::Constant { value } => value.iter().all(|v| *v == 0.0).then(Vec::new),
            SectionSpec::Bump { center, radius, value } => Some(if value.iter().all(|v| *v == 0.0) {
                Vec::new()
            } else {
                vec![(center.clone(), *radius)]
            }),
            SectionSpec::Sum { terms } => {
                let mut out = Vec::new();
                for t in terms {
                    out.extend(t.support()?);
                }
                Some(out)
            }
        }
    }
}

/// A section of a strong bundle model given on the base. `filled` extends
/// it to the ambient space so that zeros of the extension lie on the base;
/// without a retraction it equals the section.
#[derive(Clone)]
pub struct BundleSection {
    pub name: String,
    pub class: SectionClass,
    model: Arc<StrongBundleModel>,
    eval: PointFn,
    filled: PointFn,
    jacobian: Option<JacobianFn>,
    spec: Option<SectionSpec>,
}

impl fmt::Debug for BundleSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BundleSection")
            .field("name", &self.name)
            .field("class", &self.class)
            .field("model", &self.model.name)
            .field("spec", &self.spec)
            .finish()
    }
}

impl BundleSection {
    /// `jacobian`, when given, is the ambient Jacobian of the filled section.
    pub fn new(
        name: impl Into<String>,
        class: SectionClass,
        model: &Arc<StrongBundleModel>,
        eval: PointFn,
        jacobian: Option<JacobianFn>,
    ) -> Self {
        BundleSection {
            name: name.into(),
            class,
            model: Arc::clone(model),
            filled: Arc::clone(&eval),
            eval,
            jacobian,
            spec: None,
        }
    }

    /// A section together with its filled extension.
    pub fn filled(
        name: impl Into<String>,
        class: SectionClass,
        model: &Arc<StrongBundleModel>,
        eval: PointFn,
        filled: PointFn,
        jacobian: Option<JacobianFn>,
    ) -> Self {
        BundleSection {
            name: name.into(),
            class,
            model: Arc::clone(model),
            eval,
            filled,
            jacobian,
            spec: None,
        }
    }

    /// The sc⁺-section described by `spec`, extended by `x -> s(r(x))`.
    pub fn from_spec(model: &Arc<StrongBundleModel>, spec: SectionSpec) -> Result<Self> {
        spec.check(model)?;
        let (m1, s1) = (Arc::clone(model), spec.clone());
        let eval: PointFn = Arc::new(move |x: &[f64]| s1.eval(&m1, x));
        let (m2, s2) = (Arc::clone(model), spec.clone());
        let filled: PointFn = Arc::new(move |y: &[f64]| s2.eval(&m2, &m2.retract(y)?));
        Ok(BundleSection {
            name: format!("{spec:?}"),
            class: SectionClass::ScPlus,
            model: Arc::clone(model),
            eval,
            filled,
            jacobian: None,
            spec: Some(spec),
        })
    }

    pub fn zero(model: &Arc<StrongBundleModel>) -> Self {
        Self::from_spec(model, SectionSpec::Zero).expect("zero fits every model")
    }

    pub fn model(&self) -> &Arc<StrongBundleModel> {
        &self.model
    }

    pub fn spec(&self) -> Option<&SectionSpec> {
        self.spec.as_ref()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        (self.eval)(x)
    }

    pub fn eval_filled(&self, y: &[f64]) -> Result<Vec<f64>> {
        (self.filled)(y)
    }

    /// Ambient Jacobian of the filled section, analytic when supplied.
    pub fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        if let Some(j) = &self.jacobian {
            return j(y);
        }
        let n_out = self.model.fiber().dim();
        let failure = std::sync::Mutex::new(None);
        let jac = linalg::fd_jacobian(
            |z| match (self.filled)(z) {
                Ok(v) => v,
                Err(e) => {
                    *failure.lock().expect("unpoisoned") = Some(e);
                    vec![0.0; n_out]
                }
            },
            y,
            n_out,
            JACOBIAN_STEP,
        );
        match failure.into_inner().expect("unpoisoned") {
            Some(e) => Err(e),
            None => Ok(jac),
        }
    }

    /// Directional derivative of the filled section.
    pub fn derivative(&self, y: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        Ok((self.jacobian(y)? * DVector::from_column_slice(h)).as_slice().to_vec())
    }

    /// `self + other` (`sign = 1`) or `self - other` (`sign = -1`); the
    /// class is the weaker of the two.
    pub fn combine(&self, other: &BundleSection, sign: f64) -> Result<Self> {
        if !Arc::ptr_eq(&self.model, &other.model) {
            return Err(Error::ModelMismatch(format!("{} vs {}", self.model.name, other.model.name)));
        }
        let class = if self.class == SectionClass::ScPlus && other.class == SectionClass::ScPlus {
            SectionClass::ScPlus
        } else {
            SectionClass::Plain
        };
        let (a, b) = (Arc::clone(&self.eval), Arc::clone(&other.eval));
        let eval: PointFn = Arc::new(move |x: &[f64]| Ok(linalg::axpy(sign, &b(x)?, &a(x)?)));
        let (a, b) = (Arc::clone(&self.filled), Arc::clone(&other.filled));
        let filled: PointFn = Arc::new(move |x: &[f64]| Ok(linalg::axpy(sign, &b(x)?, &a(x)?)));
        let jacobian: Option<JacobianFn> = match (&self.jacobian, &other.jacobian) {
            (Some(ja), Some(jb)) => {
                let (ja, jb) = (Arc::clone(ja), Arc::clone(jb));
                Some(Arc::new(move |x: &[f64]| Ok(ja(x)? + jb(x)? * sign)))
            }
            _ => None,
        };
        let spec = match (&self.spec, &other.spec, sign > 0.0) {
            (Some(SectionSpec::Zero), Some(s), true) | (Some(s), Some(SectionSpec::Zero), _) => Some(s.clone()),
            (Some(s), Some(t), true) => Some(SectionSpec::Sum {
                terms: vec![s.clone(), t.clone()],
            }),
            _ => None,
        };
        let op = if sign > 0.0 { "+" } else { "-" };
        Ok(BundleSection {
            name: format!("({}) {op} ({})", self.name, other.name),
            class,
            model: Arc::clone(&self.model),
            eval,
            filled,
            jacobian,
            spec,
        })
    }
}

/// Bi-level witness: base level `m`, fiber level `k` of `s(x)`.
#[derive(Clone, Debug, Serialize)]
pub struct LevelWitness {
    pub sample: usize,
    pub base_level: usize,
    pub fiber_level: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BilevelReport {
    pub class: SectionClass,
    pub checked: usize,
    /// Samples whose base level could not be read off.
    pub skipped: usize,
    pub violations: Vec<LevelWitness>,
    pub pass: bool,
}

/// Level of the base sample, or `None` when undetermined.
fn base_level(model: &StrongBundleModel, x: &[f64]) -> Result<Option<usize>> {
    model.base().observed_level(x)
}

/// Verifies the declared class at samples: plain sections must keep the
/// fiber level at least `m`, sc⁺-sections at least `m + 1` (capped at the
/// fiber's top level).
pub fn bilevel_check(s: &BundleSection, samples: &[Vec<f64>]) -> Result<BilevelReport> {
    let model = s.model();
    let top = model.fiber().max_level();
    let mut checked = 0;
    let mut skipped = 0;
    let mut violations = Vec::new();
    for (i, x) in samples.iter().enumerate() {
        let Some(m) = base_level(model, x)? else {
            skipped += 1;
            continue;
        };
        checked += 1;
        let need = match s.class {
            SectionClass::Plain => m,
            SectionClass::ScPlus => m + 1,
        }
        .min(top);
        let k = model.fiber().observed_level(&s.eval(x)?)?;
        if k.is_none_or(|k| k < need) {
            violations.push(LevelWitness {
                sample: i,
                base_level: m,
                fiber_level: k,
            });
        }
    }
    Ok(BilevelReport {
        class: s.class,
        checked,
        skipped,
        pass: violations.is_empty(),
        violations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularizingReport {
    pub checked: usize,
    pub skipped: usize,
    /// Samples with `f(x)` one level above `x`.
    pub counterexamples: Vec<LevelWitness>,
    pub pass: bool,
}

/// `f(x) ∈ F_{m+1}` for `x ∈ X_m` must force `x ∈ X_{m+1}`; iterated, the
/// base level must reach the fiber level of `f(x)` (capped at the base's
/// top level).
pub fn regularizing_check(f: &BundleSection, samples: &[Vec<f64>]) -> Result<RegularizingReport> {
    let model = f.model();
    let top = model.base().max_level();
    let mut checked = 0;
    let mut skipped = 0;
    let mut counterexamples = Vec::new();
    for (i, x) in samples.iter().enumerate() {
        let (Some(m), Some(k)) = (base_level(model, x)?, model.fiber().observed_level(&f.eval(x)?)?) else {
            skipped += 1;
            continue;
        };
        checked += 1;
        if m < k.min(top) {
            counterexamples.push(LevelWitness {
                sample: i,
                base_level: m,
                fiber_level: Some(k),
            });
        }
    }
    Ok(RegularizingReport {
        checked,
        skipped,
        pass: counterexamples.is_empty(),
        counterexamples,
    })
}

/// `N(x, h) = |h|_level` on the fibers of `W_{0,1}`.
#[derive(Clone, Debug, Serialize)]
pub struct AuxiliaryNorm {
    pub level: usize,
    /// Fibers are complete (finite-dimensional or grid-truncated).
    pub complete: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub pairs: usize,
    pub worst_homogeneity: f64,
    pub worst_triangle_excess: f64,
    pub pass: bool,
}

impl AuxiliaryNorm {
    /// The level-1 fiber norm (level 0 for single-level fibers).
    pub fn for_model(model: &StrongBundleModel) -> Self {
        AuxiliaryNorm {
            level: model.fiber().max_level().min(1),
            complete: true,
        }
    }

    pub fn eval(&self, model: &StrongBundleModel, h: &[f64]) -> Result<f64> {
        model.fiber().norm_of(h, self.level)
    }

    /// Homogeneity and the triangle inequality on seeded fiber pairs over
    /// the given base points.
    pub fn check(&self, model: &StrongBundleModel, points: &[Vec<f64>], seed: u64) -> Result<NormReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = model.fiber().dim();
        let mut worst_homogeneity: f64 = 0.0;
        let mut worst_triangle_excess: f64 = 0.0;
        let mut pairs = 0;
        for x in points {
            for _ in 0..8 {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let (a, b) = (model.project(x, &a)?, model.project(x, &b)?);
                let t: f64 = rng.random_range(-3.0..3.0);
                let (na, nb) = (self.eval(model, &a)?, self.eval(model, &b)?);
                let nta = self.eval(model, &linalg::scale(t, &a))?;
                worst_homogeneity = worst_homogeneity.max((nta - t.abs() * na).abs() / (1.0 + na));
                let nab = self.eval(model, &linalg::add(&a, &b))?;
                worst_triangle_excess = worst_triangle_excess.max(nab - na - nb);
                pairs += 1;
            }
        }
        Ok(NormReport {
            pairs,
            worst_homogeneity,
            worst_triangle_excess,
            pass: worst_homogeneity <= 1e-12 && worst_triangle_excess <= 1e-12,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane() -> Arc<StrongBundleModel> {
        Arc::new(StrongBundleModel::euclidean("plane", 2, 2, 1, Window::cube(2, 2.0)).unwrap())
    }

    #[test]
    fn admissibility_rejects_two_level_jump() {
        let m = plane();
        assert!(m.element(vec![0.0; 2], 0, vec![0.0; 2], 1).is_ok());
        assert!(matches!(
            m.element(vec![0.0; 2], 0, vec![0.0; 2], 2),
            Err(Error::Inadmissible { base: 0, fiber: 2 })
        ));
    }

    #[test]
    fn plateau_is_flat_then_vanishes() {
        assert_eq!(plateau(0.3).0, 1.0);
        assert_eq!(plateau(1.2).0, 0.0);
        let (v, d) = plateau(0.75);
        assert!(v > 0.0 && v < 1.0 && d < 0.0);
        let h = 1e-6;
        let fd = (plateau(0.7 + h).0 - plateau(0.7 - h).0) / (2.0 * h);
        assert!((fd - plateau(0.7).1).abs() < 1e-6);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = SectionSpec::Sum {
            terms: vec![
                SectionSpec::Zero,
                SectionSpec::Bump {
                    center: vec![0.0, 0.0],
                    radius: 1.0,
                    value: vec![0.1, 0.0],
                },
            ],
        };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SectionSpec>(&text).unwrap(), s);
    }

    #[test]
    fn fd_jacobian_of_bump_matches_chain_rule() {
        let m = plane();
        let s = BundleSection::from_spec(
            &m,
            SectionSpec::Bump {
                center: vec![0.0, 0.0],
                radius: 1.0,
                value: vec![1.0, 2.0],
            },
        )
        .unwrap();
        let x = [0.5, 0.4];
        let r = (0.41f64).sqrt();
        let d = plateau(r).1;
        let j = s.jacobian(&x).unwrap();
        for (i, v) in [1.0, 2.0].iter().enumerate() {
            for k in 0..2 {
                assert!((j[(i, k)] - v * d * x[k] / r).abs() < 1e-7);
            }
        }
    }
}

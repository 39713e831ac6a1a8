use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use crate::error::{Error, Result};
use crate::groupoids::EpGroupoid;

/// Central difference step of the finite-difference exterior derivative.
/// The truncation error is `O(h²)` times third derivatives of the
/// coefficients, about `1e-10` for unit-scale smooth forms.
pub const FD_STEP: f64 = 1e-5;
/// Swap-sign tolerance of the skew-symmetry check, relative to `max(1, |ω|)`.
pub const SKEW_TOL: f64 = 1e-10;
/// Deviation allowed by the morphism-invariance check.
pub const INVARIANCE_TOL: f64 = 1e-9;
/// Displacement of the probe points around a morphism source.
const INVARIANCE_RADIUS: f64 = 1e-2;

/// `Σ_I c_I(x) dx_I` over strictly increasing index sets `I` of size `degree`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyFormText", into = "PolyFormText")]
pub struct PolyForm {
    dim: usize,
    degree: usize,
    coeffs: BTreeMap<Vec<usize>, Polynomial>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormTerm {
    pub indices: Vec<usize>,
    pub coeff: Polynomial,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyFormText {
    pub dim: usize,
    pub degree: usize,
    #[serde(default)]
    pub terms: Vec<FormTerm>,
}

impl TryFrom<PolyFormText> for PolyForm {
    type Error = Error;

    fn try_from(t: PolyFormText) -> Result<Self> {
        let mut f = PolyForm::zero(t.dim, t.degree);
        for term in t.terms {
            f = f.add(&PolyForm::term(t.dim, term.indices, term.coeff)?)?;
        }
        Ok(f)
    }
}

impl From<PolyForm> for PolyFormText {
    fn from(f: PolyForm) -> Self {
        PolyFormText {
            dim: f.dim,
            degree: f.degree,
            terms: f
                .coeffs
                .into_iter()
                .map(|(indices, coeff)| FormTerm { indices, coeff })
                .collect(),
        }
    }
}

/// Sorts `indices` by bubble sort and returns the permutation sign, or
/// `None` if an index repeats.
fn sort_with_sign(indices: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 0..indices.len() {
        for j in 0..indices.len() - 1 - i {
            if indices[j] > indices[j + 1] {
                indices.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    indices.windows(2).all(|w| w[0] < w[1]).then_some(sign)
}

/// Determinant with explicit formulas up to size 3, so that column swaps
/// negate the value up to summation order.
fn det(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)]) - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => m.determinant(),
    }
}

impl PolyForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        PolyForm {
            dim,
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    /// `c dx_{i₁} ∧ ⋯ ∧ dx_{i_k}` for indices in any order.
    pub fn term(dim: usize, indices: Vec<usize>, coeff: Polynomial) -> Result<Self> {
        if coeff.nvars() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coeff.nvars(),
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad + 1 });
        }
        let mut f = PolyForm::zero(dim, indices.len());
        let mut idx = indices;
        if let Some(sign) = sort_with_sign(&mut idx) {
            let c = coeff.scale(sign);
            if !c.is_zero() {
                f.coeffs.insert(idx, c);
            }
        }
        Ok(f)
    }

    /// The 0-form `p`.
    pub fn function(p: Polynomial) -> Self {
        let dim = p.nvars();
        PolyForm::term(dim, vec![], p).expect("a polynomial is a 0-form in its own variables")
    }

    /// `dx_0 ∧ ⋯ ∧ dx_{dim-1}`.
    pub fn volume(dim: usize) -> Self {
        PolyForm::term(dim, (0..dim).collect(), Polynomial::constant(dim, 1.0)).expect("indices are in range")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coefficient(&self, indices: &[usize]) -> Option<&Polynomial> {
        self.coeffs.get(indices)
    }

    /// `ω_x(v₁, …, v_k) = Σ_I c_I(x) det(v_j[I])`.
    pub fn eval(&self, x: &[f64], vectors: &[Vec<f64>]) -> f64 {
        let mut acc = 0.0;
        for (idx, c) in &self.coeffs {
            let m = DMatrix::from_fn(self.degree, self.degree, |r, col| vectors[col][idx[r]]);
            acc += c.eval(x) * det(&m);
        }
        acc
    }

    /// Exact `dω = Σ_I Σ_i ∂_i c_I dx_i ∧ dx_I`.
    pub fn exterior_derivative(&self) -> PolyForm {
        let mut out = PolyForm::zero(self.dim, self.degree + 1);
        for (idx, c) in &self.coeffs {
            for i in 0..self.dim {
                if idx.contains(&i) {
                    continue;
                }
                let dc = c.derivative(i);
                if dc.is_zero() {
                    continue;
                }
                let mut key = vec![i];
                key.extend_from_slice(idx);
                let sign = sort_with_sign(&mut key).expect("i is not in I");
                out.accumulate(key, dc.scale(sign));
            }
        }
        out
    }

    fn accumulate(&mut self, key: Vec<usize>, c: Polynomial) {
        let sum = match self.coeffs.remove(&key) {
            Some(prev) => prev.add(&c).expect("coefficients share the ambient dimension"),
            None => c,
        };
        if !sum.is_zero() {
            self.coeffs.insert(key, sum);
        }
    }

    fn check_same(&self, other: &PolyForm) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch {
                form: other.degree,
                expected: self.degree,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &PolyForm) -> Result<PolyForm> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (k, c) in &other.coeffs {
            out.accumulate(k.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, a: f64) -> PolyForm {
        let mut out = PolyForm::zero(self.dim, self.degree);
        for (k, c) in &self.coeffs {
            out.accumulate(k.clone(), c.scale(a));
        }
        out
    }

    /// `f·ω` for a polynomial function `f`.
    pub fn mul_function(&self, f: &Polynomial) -> Result<PolyForm> {
        let mut out = PolyForm::zero(self.dim, self.degree);
        for (k, c) in &self.coeffs {
            out.accumulate(k.clone(), c.mul(f)?);
        }
        Ok(out)
    }

    pub fn wedge(&self, other: &PolyForm) -> Result<PolyForm> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut out = PolyForm::zero(self.dim, self.degree + other.degree);
        for (ka, ca) in &self.coeffs {
            for (kb, cb) in &other.coeffs {
                let mut key = ka.clone();
                key.extend_from_slice(kb);
                if let Some(sign) = sort_with_sign(&mut key) {
                    out.accumulate(key, ca.mul(cb)?.scale(sign));
                }
            }
        }
        Ok(out)
    }
}

pub type FormEvaluator = Arc<dyn Fn(&[f64], &[Vec<f64>]) -> f64 + Send + Sync>;

/// A form given by an evaluator, with an optional closed-form derivative.
#[derive(Clone)]
pub struct CallbackForm {
    pub dim: usize,
    pub degree: usize,
    pub eval: FormEvaluator,
    pub derivative: Option<Box<ScDifferentialForm>>,
    /// Fall back to central differences when `derivative` is absent.
    pub finite_difference: bool,
}

/// A differential form on a finite-dimensional chart.
#[derive(Clone)]
pub enum ScDifferentialForm {
    Polynomial(PolyForm),
    Callback(CallbackForm),
}

impl fmt::Debug for ScDifferentialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScDifferentialForm::Polynomial(p) => f.debug_tuple("Polynomial").field(p).finish(),
            ScDifferentialForm::Callback(c) => f
                .debug_struct("Callback")
                .field("dim", &c.dim)
                .field("degree", &c.degree)
                .field("derivative", &c.derivative.is_some())
                .field("finite_difference", &c.finite_difference)
                .finish(),
        }
    }
}

impl From<PolyForm> for ScDifferentialForm {
    fn from(p: PolyForm) -> Self {
        ScDifferentialForm::Polynomial(p)
    }
}

impl ScDifferentialForm {
    pub fn callback(dim: usize, degree: usize, eval: FormEvaluator) -> Self {
        ScDifferentialForm::Callback(CallbackForm {
            dim,
            degree,
            eval,
            derivative: None,
            finite_difference: false,
        })
    }

    pub fn with_derivative(self, d: ScDifferentialForm) -> Self {
        match self {
            ScDifferentialForm::Callback(mut c) => {
                c.derivative = Some(Box::new(d));
                ScDifferentialForm::Callback(c)
            }
            p => p,
        }
    }

    pub fn with_finite_difference(self, on: bool) -> Self {
        match self {
            ScDifferentialForm::Callback(mut c) => {
                c.finite_difference = on;
                ScDifferentialForm::Callback(c)
            }
            p => p,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ScDifferentialForm::Polynomial(p) => p.dim(),
            ScDifferentialForm::Callback(c) => c.dim,
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            ScDifferentialForm::Polynomial(p) => p.degree(),
            ScDifferentialForm::Callback(c) => c.degree,
        }
    }

    pub fn as_polynomial(&self) -> Option<&PolyForm> {
        match self {
            ScDifferentialForm::Polynomial(p) => Some(p),
            ScDifferentialForm::Callback(_) => None,
        }
    }

    pub fn eval(&self, x: &[f64], vectors: &[Vec<f64>]) -> f64 {
        match self {
            ScDifferentialForm::Polynomial(p) => p.eval(x, vectors),
            ScDifferentialForm::Callback(c) => (c.eval)(x, vectors),
        }
    }

    /// `dω`: exact for polynomial forms, the supplied derivative for
    /// callbacks, else central differences if enabled.
    pub fn exterior_derivative(&self) -> Result<ScDifferentialForm> {
        match self {
            ScDifferentialForm::Polynomial(p) => Ok(p.exterior_derivative().into()),
            ScDifferentialForm::Callback(c) => {
                if let Some(d) = &c.derivative {
                    return Ok((**d).clone());
                }
                if !c.finite_difference {
                    return Err(Error::MissingDerivative);
                }
                let inner = Arc::clone(&c.eval);
                // dω_x(v₀, …, v_k) = Σ_i (-1)^i D_{v_i}[ω(v₀, …, v̂_i, …, v_k)](x)
                let eval: FormEvaluator = Arc::new(move |x: &[f64], vs: &[Vec<f64>]| {
                    let mut acc = 0.0;
                    for i in 0..vs.len() {
                        let rest: Vec<Vec<f64>> = vs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.clone()).collect();
                        let xp: Vec<f64> = x.iter().zip(&vs[i]).map(|(a, b)| a + FD_STEP * b).collect();
                        let xm: Vec<f64> = x.iter().zip(&vs[i]).map(|(a, b)| a - FD_STEP * b).collect();
                        let der = (inner(&xp, &rest) - inner(&xm, &rest)) / (2.0 * FD_STEP);
                        acc += if i % 2 == 0 { der } else { -der };
                    }
                    acc
                });
                Ok(ScDifferentialForm::Callback(CallbackForm {
                    dim: c.dim,
                    degree: c.degree + 1,
                    eval,
                    derivative: None,
                    finite_difference: true,
                }))
            }
        }
    }

    /// `a·ω₁ + b·ω₂`.
    pub fn combine(&self, a: f64, other: &ScDifferentialForm, b: f64) -> Result<ScDifferentialForm> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if self.degree() != other.degree() {
            return Err(Error::DegreeMismatch {
                form: other.degree(),
                expected: self.degree(),
            });
        }
        if let (Some(p), Some(q)) = (self.as_polynomial(), other.as_polynomial()) {
            return Ok(p.scale(a).add(&q.scale(b))?.into());
        }
        let (s, o) = (self.clone(), other.clone());
        let eval: FormEvaluator = Arc::new(move |x: &[f64], vs: &[Vec<f64>]| a * s.eval(x, vs) + b * o.eval(x, vs));
        let derivative = match (self.exterior_derivative(), other.exterior_derivative()) {
            (Ok(d1), Ok(d2)) => Some(Box::new(d1.combine(a, &d2, b)?)),
            _ => None,
        };
        Ok(ScDifferentialForm::Callback(CallbackForm {
            dim: self.dim(),
            degree: self.degree(),
            eval,
            derivative,
            finite_difference: false,
        }))
    }
}

fn random_vectors(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SkewReport {
    pub samples: usize,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Swaps each adjacent argument pair at `points` with seeded random vectors
/// and records `|ω(…, v, w, …) + ω(…, w, v, …)| / max(1, |ω|)`.
pub fn skew_check(form: &ScDifferentialForm, points: &[Vec<f64>], seed: u64) -> SkewReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = form.degree();
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for x in points {
        let vs = random_vectors(&mut rng, k, form.dim());
        let base = form.eval(x, &vs);
        for i in 0..k.saturating_sub(1) {
            let mut sw = vs.clone();
            sw.swap(i, i + 1);
            let dev = (form.eval(x, &sw) + base).abs() / base.abs().max(1.0);
            worst = worst.max(dev);
            samples += 1;
        }
    }
    SkewReport {
        samples,
        max_deviation: worst,
        pass: worst <= SKEW_TOL,
    }
}

/// `max |d(dω)_x(v₀, …, v_{k+1})|` over `count` seeded points of the box
/// `[-scale, scale]^dim`.
pub fn d_squared_check(form: &ScDifferentialForm, count: usize, scale: f64, seed: u64) -> Result<f64> {
    let dd = form.exterior_derivative()?.exterior_derivative()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let x: Vec<f64> = (0..form.dim()).map(|_| rng.random_range(-scale..=scale)).collect();
        let vs = random_vectors(&mut rng, dd.degree(), form.dim());
        worst = worst.max(dd.eval(&x, &vs).abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub morphisms: usize,
    pub samples: usize,
    pub max_deviation: f64,
}

/// Checks `ω_{φ(p)}(Aφ v₁, …, Aφ v_k) = ω_p(v₁, …, v_k)` for the germ `φ` of
/// every morphism, at its source point and `probes` seeded points nearby.
pub fn invariance_check(form: &ScDifferentialForm, groupoid: &EpGroupoid, probes: usize, seed: u64) -> Result<InvarianceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for m in groupoid.morphisms() {
        let p0 = &groupoid.object(m.source).point;
        if p0.len() != form.dim() || m.germ.dim_in() != form.dim() {
            return Err(Error::DimensionMismatch {
                expected: form.dim(),
                found: p0.len(),
            });
        }
        for probe in 0..=probes {
            let p: Vec<f64> = if probe == 0 {
                p0.clone()
            } else {
                p0.iter().map(|c| c + INVARIANCE_RADIUS * rng.random_range(-1.0..=1.0)).collect()
            };
            let vs = random_vectors(&mut rng, form.degree(), form.dim());
            let pushed: Vec<Vec<f64>> = vs
                .iter()
                .map(|v| (&m.germ.linear * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec())
                .collect();
            let lhs = form.eval(&m.germ.apply(&p), &pushed);
            let rhs = form.eval(&p, &vs);
            worst = worst.max((lhs - rhs).abs());
            samples += 1;
        }
    }
    if worst > INVARIANCE_TOL {
        return Err(Error::NotInvariant(worst));
    }
    Ok(InvarianceReport {
        morphisms: groupoid.morphisms().len(),
        samples,
        max_deviation: worst,
    })
}

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;
use crate::sc_core::{PartialQuadrant, ScScale, ScVector};

pub type MapEval = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;
/// `(x, h) -> Df(x) h` on raw coefficients.
pub type MapDerivative = Arc<dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// Relatively open subset of a partial quadrant: the intersection of the
/// quadrant with level-wise balls around a center.
#[derive(Clone, Debug)]
pub struct Domain {
    pub quadrant: PartialQuadrant,
    pub center: Vec<f64>,
    /// Radius per level; levels beyond the list are unconstrained.
    pub radii: Vec<f64>,
}

impl Domain {
    /// The whole quadrant.
    pub fn quadrant(quadrant: PartialQuadrant) -> Self {
        let dim = quadrant.dim();
        Domain {
            quadrant,
            center: vec![0.0; dim],
            radii: Vec::new(),
        }
    }

    pub fn whole(dim: usize) -> Self {
        Self::quadrant(PartialQuadrant::full(dim))
    }

    pub fn ball(quadrant: PartialQuadrant, center: Vec<f64>, radii: Vec<f64>) -> Self {
        Domain {
            quadrant,
            center,
            radii,
        }
    }

    pub fn check(&self, scale: &ScScale, x: &ScVector) -> Result<()> {
        let tol = scale.default_tol();
        if !self.quadrant.contains(x.coeffs(), tol) {
            return Err(Error::DomainExit("point leaves the partial quadrant".into()));
        }
        for (m, r) in self.radii.iter().enumerate().take(x.level() + 1) {
            let d = scale.norm_of(&linalg::sub(x.coeffs(), &self.center), m)?;
            if d >= *r {
                return Err(Error::DomainExit(format!(
                    "level-{m} distance {d} to the center reaches radius {r}"
                )));
            }
        }
        Ok(())
    }
}

/// A level-preserving map between open subsets of partial quadrants.
#[derive(Clone)]
pub struct ScMap {
    pub name: String,
    source: Arc<ScScale>,
    target: Arc<ScScale>,
    domain: Domain,
    eval: MapEval,
    derivative: Option<MapDerivative>,
}

impl fmt::Debug for ScMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScMap")
            .field("name", &self.name)
            .field("source_dim", &self.source.dim())
            .field("target_dim", &self.target.dim())
            .field("has_derivative", &self.derivative.is_some())
            .finish()
    }
}

/// A point of `TU`: base at level `1 + i`, vector at level `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentElement {
    pub base: ScVector,
    pub vector: ScVector,
}

impl TangentElement {
    pub fn new(base: ScVector, vector: ScVector) -> Result<Self> {
        if base.level() < 1 {
            return Err(Error::LevelOutOfRange {
                requested: 1,
                declared: base.level(),
            });
        }
        if base.scale() != vector.scale() {
            return Err(Error::TypeMismatch(
                "base and vector live in different scales".into(),
            ));
        }
        Ok(TangentElement { base, vector })
    }

    /// Level in `TU`: `min(level(base) - 1, level(vector))`.
    pub fn level(&self) -> usize {
        (self.base.level() - 1).min(self.vector.level())
    }
}

impl ScMap {
    pub fn new(
        name: impl Into<String>,
        source: &Arc<ScScale>,
        target: &Arc<ScScale>,
        domain: Domain,
        eval: MapEval,
        derivative: Option<MapDerivative>,
    ) -> Result<Self> {
        if domain.quadrant.dim() != source.dim() || domain.center.len() != source.dim() {
            return Err(Error::DimensionMismatch {
                expected: source.dim(),
                found: domain.quadrant.dim(),
            });
        }
        if source.max_level() != target.max_level() {
            return Err(Error::MismatchedMaxLevel(source.max_level(), target.max_level()));
        }
        Ok(ScMap {
            name: name.into(),
            source: Arc::clone(source),
            target: Arc::clone(target),
            domain,
            eval,
            derivative,
        })
    }

    /// `x -> A x` on the whole space.
    pub fn linear(
        name: impl Into<String>,
        source: &Arc<ScScale>,
        target: &Arc<ScScale>,
        a: nalgebra::DMatrix<f64>,
    ) -> Result<Self> {
        if a.ncols() != source.dim() || a.nrows() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: source.dim(),
                found: a.ncols(),
            });
        }
        let a = Arc::new(a);
        let a2 = Arc::clone(&a);
        let apply = move |m: &nalgebra::DMatrix<f64>, x: &[f64]| -> Vec<f64> {
            (m * nalgebra::DVector::from_column_slice(x)).iter().cloned().collect()
        };
        Self::new(
            name,
            source,
            target,
            Domain::whole(source.dim()),
            Arc::new(move |x| Ok(apply(&a, x))),
            Some(Arc::new(move |_, h| Ok(apply(&a2, h)))),
        )
    }

    pub fn identity(scale: &Arc<ScScale>) -> Self {
        let n = scale.dim();
        Self::linear("identity", scale, scale, nalgebra::DMatrix::identity(n, n))
            .expect("square identity")
    }

    pub fn source(&self) -> &Arc<ScScale> {
        &self.source
    }

    pub fn target(&self) -> &Arc<ScScale> {
        &self.target
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn without_derivative(&self) -> Self {
        ScMap {
            derivative: None,
            ..self.clone()
        }
    }

    pub fn eval_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        (self.eval)(x)
    }

    /// `f(x)` at the level of `x`.
    pub fn eval(&self, x: &ScVector) -> Result<ScVector> {
        if **x.scale() != *self.source {
            return Err(Error::TypeMismatch(format!(
                "{}: input does not live in the source scale",
                self.name
            )));
        }
        self.domain.check(&self.source, x)?;
        ScVector::new(&self.target, (self.eval)(x.coeffs())?, x.level())
    }

    /// Centered finite difference with step `1e-5 (|x|_1 + 1)` along `h`.
    pub fn fd_derivative_raw(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        let hn = linalg::euclidean_norm(h);
        if hn == 0.0 {
            return Ok(vec![0.0; self.target.dim()]);
        }
        let level = 1.min(self.source.max_level());
        let eps = 1e-5 * (self.source.norm_of(x, level)? + 1.0);
        let t = eps / hn;
        let fp = (self.eval)(&linalg::axpy(t, h, x))?;
        let fm = (self.eval)(&linalg::axpy(-t, h, x))?;
        Ok(fp
            .iter()
            .zip(&fm)
            .map(|(a, b)| (a - b) / (2.0 * t))
            .collect())
    }

    pub fn derivative_raw(&self, x: &[f64], h: &[f64], allow_fd: bool) -> Result<Vec<f64>> {
        match (&self.derivative, allow_fd) {
            (Some(d), _) => d(x, h),
            (None, true) => self.fd_derivative_raw(x, h),
            (None, false) => Err(Error::MissingDerivative),
        }
    }

    /// `Df(x) h`, requiring `x` at level at least 1.
    pub fn derivative(&self, x: &ScVector, h: &ScVector, allow_fd: bool) -> Result<ScVector> {
        if x.level() < 1 {
            return Err(Error::LevelOutOfRange {
                requested: 1,
                declared: x.level(),
            });
        }
        self.domain.check(&self.source, x)?;
        let out = self.derivative_raw(x.coeffs(), h.coeffs(), allow_fd)?;
        ScVector::new(&self.target, out, h.level().min(x.level() - 1))
    }

    /// `Tf(x, h) = (f(x), Df(x) h)`.
    pub fn tangent_map(&self, te: &TangentElement) -> Result<TangentElement> {
        if self.derivative.is_none() {
            return Err(Error::MissingDerivative);
        }
        let fx = self.eval(&te.base)?;
        let dfh = self.derivative(&te.base, &te.vector, false)?;
        TangentElement::new(fx, dfh)
    }

    /// `g ∘ f` with the chained derivative `Dg(f(x)) Df(x)` when both exist.
    pub fn compose(f: &ScMap, g: &ScMap) -> Result<ScMap> {
        if *f.target != *g.source {
            return Err(Error::Composability(format!(
                "target of {} is not the source of {}",
                f.name, g.name
            )));
        }
        let (f1, g1) = (f.clone(), g.clone());
        let eval: MapEval = Arc::new(move |x| {
            let y = f1.eval_raw(x)?;
            g1.domain.check(
                &g1.source,
                &ScVector::new(&g1.source, y.clone(), 0)?,
            )?;
            g1.eval_raw(&y)
        });
        let derivative: Option<MapDerivative> = match (&f.derivative, &g.derivative) {
            (Some(df), Some(dg)) => {
                let (f2, df, dg) = (f.clone(), Arc::clone(df), Arc::clone(dg));
                Some(Arc::new(move |x: &[f64], h: &[f64]| {
                    let y = f2.eval_raw(x)?;
                    dg(&y, &df(x, h)?)
                }))
            }
            _ => None,
        };
        ScMap::new(
            format!("{}∘{}", g.name, f.name),
            &f.source,
            &g.target,
            f.domain.clone(),
            eval,
            derivative,
        )
    }
}

/// Max over samples of `|T(g∘f)(te) - Tg(Tf(te))|_0`.
///
/// The left side uses the analytic derivative of `composite` when given,
/// otherwise centered finite differences of `g ∘ f`.
pub fn chain_rule_check(
    f: &ScMap,
    g: &ScMap,
    composite: Option<&ScMap>,
    samples: &[TangentElement],
) -> Result<f64> {
    if **f.target() != **g.source() {
        return Err(Error::Composability(format!(
            "target of {} is not the source of {}",
            f.name, g.name
        )));
    }
    let gf = match composite {
        Some(c) => {
            if c.source() != f.source() || c.target() != g.target() {
                return Err(Error::Composability(
                    "composite does not match f and g".into(),
                ));
            }
            c.clone()
        }
        None => ScMap::compose(f, g)?.without_derivative(),
    };
    let mut worst: f64 = 0.0;
    for te in samples {
        let lhs = gf.derivative(&te.base, &te.vector, true)?;
        let right = g.tangent_map(&f.tangent_map(te)?)?;
        let diff = lhs.sub(&right.vector.in_scale(lhs.scale(), lhs.level())?)?;
        worst = worst.max(diff.level_norm(0)?);
    }
    Ok(worst)
}

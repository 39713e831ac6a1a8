use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::cells::{Cell, Face};
use super::forms::{invariance_check, ScDifferentialForm};
use super::poly::Polynomial;
use crate::error::{Error, Result};
use crate::groupoids::{EpGroupoid, IsotropyGroup};
use crate::perturbation::parse_weight;

/// Chart distance at which a point counts as lying on a branch.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Relative margin added around the sampled cell hull when no window is given.
const WINDOW_MARGIN: f64 = 0.1;
const INVARIANCE_PROBES: usize = 2;

fn ser_weight<S: Serializer>(q: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

fn de_weight<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
    let text = String::deserialize(d)?;
    parse_weight(&text).map_err(serde::de::Error::custom)
}

/// A parametrized branch `Mᵢ` with weight `σᵢ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedBranch {
    #[serde(serialize_with = "ser_weight", deserialize_with = "de_weight")]
    pub weight: BigRational,
    /// `+1` if the cube orientation of every cell is the branch orientation,
    /// `-1` if opposite.
    #[serde(default)]
    pub orientation: Option<i8>,
    pub cells: Vec<Cell>,
    /// Boundary faces of the branch; `Some(vec![])` for a closed branch.
    #[serde(default)]
    pub boundary: Option<Vec<Face>>,
}

impl WeightedBranch {
    pub fn new(weight: BigRational, orientation: i8, cells: Vec<Cell>, boundary: Option<Vec<Face>>) -> Self {
        WeightedBranch {
            weight,
            orientation: Some(orientation),
            cells,
            boundary,
        }
    }
}

/// Isotropy orders `|G_x|` and `|G_e|` of the neighborhood.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsotropyData {
    pub order: usize,
    pub effective_order: usize,
}

impl From<&IsotropyGroup> for IsotropyData {
    fn from(g: &IsotropyGroup) -> Self {
        IsotropyData {
            order: g.order(),
            effective_order: g.effective_order(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoveredWindow {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CoveredWindow {
    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.lower.len() && y.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchedText {
    pub dim: usize,
    pub ambient: usize,
    #[serde(default)]
    pub isotropy: Option<IsotropyData>,
    #[serde(default)]
    pub window: Option<CoveredWindow>,
    pub branches: Vec<WeightedBranch>,
}

/// A finite weighted family of oriented `n`-dimensional branches in one
/// chart neighborhood, with its isotropy data.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "BranchedText", into = "BranchedText")]
pub struct BranchedSubgroupoid {
    dim: usize,
    ambient: usize,
    branches: Vec<WeightedBranch>,
    isotropy: Option<IsotropyData>,
    window: CoveredWindow,
    explicit_window: bool,
    groupoid: Option<Arc<EpGroupoid>>,
}

impl TryFrom<BranchedText> for BranchedSubgroupoid {
    type Error = Error;

    fn try_from(t: BranchedText) -> Result<Self> {
        let mut s = BranchedSubgroupoid::new(t.dim, t.ambient, t.branches, t.window)?;
        s.isotropy = t.isotropy;
        Ok(s)
    }
}

impl From<BranchedSubgroupoid> for BranchedText {
    fn from(s: BranchedSubgroupoid) -> Self {
        BranchedText {
            dim: s.dim,
            ambient: s.ambient,
            isotropy: s.isotropy,
            window: s.explicit_window.then_some(s.window),
            branches: s.branches,
        }
    }
}

/// Tensor Gauss–Legendre nodes and weights on `[0, 1]^n`.
pub fn cube_rule(n: usize, order: usize) -> Vec<(Vec<f64>, f64)> {
    let (xs, ws) = crate::quadrature::gauss_legendre(order);
    let mut out = vec![(Vec::with_capacity(n), 1.0)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * order);
        for (t, w) in &out {
            for (x, wx) in xs.iter().zip(&ws) {
                let mut t2 = t.clone();
                t2.push(0.5 * (x + 1.0));
                next.push((t2, w * 0.5 * wx));
            }
        }
        out = next;
    }
    out
}

/// A finite union of cells selected by label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    All,
    Labels(Vec<String>),
}

impl Region {
    pub fn contains(&self, label: &str) -> bool {
        match self {
            Region::All => true,
            Region::Labels(ls) => ls.iter().any(|l| l == label),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchContribution {
    pub branch: usize,
    pub weight: String,
    pub orientation: i8,
    /// `∫_{Kᵢ} ω|Mᵢ` in the cube orientation.
    pub integral: f64,
    /// `σᵢ oᵢ ∫_{Kᵢ} ω / |G_e|`.
    pub contribution: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightedMeasureResult {
    pub value: f64,
    pub per_branch: Vec<BranchContribution>,
    pub quadrature_order: usize,
    /// `|I_q - I_{q-1}|`, or `|I_1 - I_2|` at order 1.
    pub est_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StokesRow {
    pub order: usize,
    pub interior: f64,
    pub boundary: f64,
    pub residual: f64,
}

type Integrand<'a> = &'a (dyn Fn(&[f64], &[Vec<f64>]) -> f64 + Sync);

impl BranchedSubgroupoid {
    pub fn new(dim: usize, ambient: usize, branches: Vec<WeightedBranch>, window: Option<CoveredWindow>) -> Result<Self> {
        for (i, b) in branches.iter().enumerate() {
            if b.weight <= BigRational::zero() {
                return Err(Error::WeightSum(format!("branch {i} has nonpositive weight {}", b.weight)));
            }
            if let Some(o) = b.orientation {
                if o != 1 && o != -1 {
                    return Err(Error::Config(format!("branch {i} orientation {o} is not ±1")));
                }
            }
            for c in &b.cells {
                c.map.validate()?;
                if c.map.dim() != dim || c.map.ambient() != ambient {
                    return Err(Error::InvalidChart(format!(
                        "branch {i}: cell {:?} maps [0,1]^{} into R^{}, expected [0,1]^{dim} into R^{ambient}",
                        c.label,
                        c.map.dim(),
                        c.map.ambient()
                    )));
                }
            }
            for f in b.boundary.iter().flatten() {
                if f.cell >= b.cells.len() || f.axis >= dim || f.side > 1 {
                    return Err(Error::InvalidChart(format!("branch {i}: invalid face {f:?}")));
                }
            }
        }
        let explicit_window = window.is_some();
        let window = match window {
            Some(w) => {
                if w.lower.len() != ambient || w.upper.len() != ambient {
                    return Err(Error::DimensionMismatch {
                        expected: ambient,
                        found: w.lower.len(),
                    });
                }
                w
            }
            None => hull(ambient, dim, &branches),
        };
        Ok(BranchedSubgroupoid {
            dim,
            ambient,
            branches,
            isotropy: None,
            window,
            explicit_window,
            groupoid: None,
        })
    }

    pub fn with_isotropy(mut self, data: IsotropyData) -> Self {
        self.isotropy = Some(data);
        self
    }

    /// Attaches the ambient groupoid: forms must be invariant under its
    /// morphisms before they are integrated.
    pub fn with_groupoid(mut self, g: Arc<EpGroupoid>) -> Self {
        self.groupoid = Some(g);
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn branches(&self) -> &[WeightedBranch] {
        &self.branches
    }

    pub fn isotropy(&self) -> Option<IsotropyData> {
        self.isotropy
    }

    pub fn window(&self) -> &CoveredWindow {
        &self.window
    }

    /// `|G_e|`, defaulting to 1 with a warning when no isotropy was supplied.
    pub fn effective_order(&self) -> usize {
        match self.isotropy {
            Some(d) => d.effective_order,
            None => {
                log::warn!("no isotropy data supplied, taking |G_e| = 1");
                1
            }
        }
    }

    /// Every weight multiplied by `q > 0`.
    pub fn scale_weights(&self, q: &BigRational) -> Result<Self> {
        if *q <= BigRational::zero() {
            return Err(Error::WeightSum(format!("scale {q} is not positive")));
        }
        let mut s = self.clone();
        for b in &mut s.branches {
            b.weight = &b.weight * q;
        }
        Ok(s)
    }

    /// Branch `i` with reversed orientation.
    pub fn reversed(&self, i: usize) -> Self {
        let mut s = self.clone();
        if let Some(o) = s.branches[i].orientation.as_mut() {
            *o = -*o;
        }
        s
    }

    /// Support check: every quadrature node of every cell lies in the window.
    pub fn support_in_window(&self, order: usize) -> bool {
        let rule = cube_rule(self.dim, order);
        self.branches
            .iter()
            .flat_map(|b| &b.cells)
            .all(|c| rule.iter().all(|(t, _)| self.window.contains(&c.map.eval(t))))
    }

    /// `Θ(y) = Σ_{i: y ∈ Mᵢ} σᵢ`.
    pub fn theta_eval(&self, y: &[f64]) -> Result<BigRational> {
        if !self.window.contains(y) {
            return Err(Error::UncoveredPoint);
        }
        let mut total = BigRational::zero();
        for b in &self.branches {
            if b.cells.iter().any(|c| cell_distance(c, y) <= MEMBERSHIP_TOL) {
                total += &b.weight;
            }
        }
        Ok(total)
    }

    fn check_form(&self, omega: &ScDifferentialForm, degree: usize) -> Result<Vec<i8>> {
        if omega.dim() != self.ambient {
            return Err(Error::DimensionMismatch {
                expected: self.ambient,
                found: omega.dim(),
            });
        }
        if omega.degree() != degree {
            return Err(Error::DegreeMismatch {
                form: omega.degree(),
                expected: degree,
            });
        }
        let orientations = self
            .branches
            .iter()
            .enumerate()
            .map(|(i, b)| b.orientation.ok_or(Error::Unoriented(i)))
            .collect::<Result<Vec<_>>>()?;
        if let Some(g) = &self.groupoid {
            invariance_check(omega, g, INVARIANCE_PROBES, 0)?;
        }
        Ok(orientations)
    }

    fn combine(&self, raw: &[f64], raw_lower: &[f64], orientations: &[i8], order: usize) -> WeightedMeasureResult {
        let ge = self.effective_order() as f64;
        let per_branch: Vec<BranchContribution> = self
            .branches
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let sigma = b.weight.to_f64().unwrap_or(f64::NAN);
                BranchContribution {
                    branch: i,
                    weight: b.weight.to_string(),
                    orientation: orientations[i],
                    integral: raw[i],
                    contribution: sigma * f64::from(orientations[i]) * raw[i] / ge,
                }
            })
            .collect();
        let value = self.formula(raw, orientations, ge);
        let lower = self.formula(raw_lower, orientations, ge);
        WeightedMeasureResult {
            value,
            per_branch,
            quadrature_order: order,
            est_error: (value - lower).abs(),
        }
    }

    fn formula(&self, raw: &[f64], orientations: &[i8], ge: f64) -> f64 {
        let sum: f64 = self
            .branches
            .iter()
            .zip(raw.iter().zip(orientations))
            .map(|(b, (r, &o))| b.weight.to_f64().unwrap_or(f64::NAN) * f64::from(o) * r)
            .sum();
        sum / ge
    }

    fn interior_raw(&self, f: Integrand, region: &Region, order: usize) -> Vec<f64> {
        let rule = cube_rule(self.dim, order);
        self.branches
            .par_iter()
            .map(|b| {
                b.cells
                    .iter()
                    .filter(|c| region.contains(&c.label))
                    .map(|c| {
                        rule.iter()
                            .map(|(t, w)| {
                                let j = c.map.jacobian(t);
                                w * f(&c.map.eval(t), &columns(&j, None))
                            })
                            .sum::<f64>()
                    })
                    .sum()
            })
            .collect()
    }

    fn boundary_raw(&self, f: Integrand, region: &Region, order: usize) -> Vec<f64> {
        let rule = cube_rule(self.dim - 1, order);
        self.branches
            .par_iter()
            .map(|b| {
                b.boundary
                    .iter()
                    .flatten()
                    .filter(|face| region.contains(face.label.as_deref().unwrap_or(&b.cells[face.cell].label)))
                    .map(|face| {
                        let map = &b.cells[face.cell].map;
                        let s: f64 = rule
                            .iter()
                            .map(|(u, w)| {
                                let t = face.embed(u);
                                let j = map.jacobian(&t);
                                w * f(&map.eval(&t), &columns(&j, Some(face.axis)))
                            })
                            .sum();
                        face.orientation() * s
                    })
                    .sum()
            })
            .collect()
    }

    fn lower_order(order: usize) -> usize {
        if order > 1 {
            order - 1
        } else {
            2
        }
    }

    /// `μ_ω(K) = (1/|G_e|) Σᵢ σᵢ ∫_{Kᵢ} ω|Mᵢ` by tensor Gauss–Legendre of
    /// `order` nodes per axis on every cell of `K`.
    pub fn integrate(&self, omega: &ScDifferentialForm, region: &Region, order: usize) -> Result<WeightedMeasureResult> {
        let orientations = self.check_form(omega, self.dim)?;
        let f = |x: &[f64], vs: &[Vec<f64>]| omega.eval(x, vs);
        let raw = self.interior_raw(&f, region, order);
        let lower = self.interior_raw(&f, region, Self::lower_order(order));
        Ok(self.combine(&raw, &lower, &orientations, order))
    }

    /// `∫_K g dμ_τ`, integrating `g` against the measure of `τ` node by node.
    pub fn integrate_against(
        &self,
        g: &Polynomial,
        tau: &ScDifferentialForm,
        region: &Region,
        order: usize,
    ) -> Result<WeightedMeasureResult> {
        if g.nvars() != self.ambient {
            return Err(Error::DimensionMismatch {
                expected: self.ambient,
                found: g.nvars(),
            });
        }
        let orientations = self.check_form(tau, self.dim)?;
        let f = |x: &[f64], vs: &[Vec<f64>]| g.eval(x) * tau.eval(x, vs);
        let raw = self.interior_raw(&f, region, order);
        let lower = self.interior_raw(&f, region, Self::lower_order(order));
        Ok(self.combine(&raw, &lower, &orientations, order))
    }

    /// `μ^∂_τ(K) = (1/|G_e|) Σᵢ σᵢ ∫_{Kᵢ} τ|∂Mᵢ` over the boundary faces with
    /// outward-normal-first orientation.
    pub fn integrate_boundary(&self, tau: &ScDifferentialForm, region: &Region, order: usize) -> Result<WeightedMeasureResult> {
        if self.dim == 0 {
            return Err(Error::DegreeMismatch {
                form: tau.degree(),
                expected: 0,
            });
        }
        let orientations = self.check_form(tau, self.dim - 1)?;
        if let Some(i) = self.branches.iter().position(|b| b.boundary.is_none()) {
            return Err(Error::MissingBoundary(i));
        }
        let f = |x: &[f64], vs: &[Vec<f64>]| tau.eval(x, vs);
        let raw = self.boundary_raw(&f, region, order);
        let lower = self.boundary_raw(&f, region, Self::lower_order(order));
        Ok(self.combine(&raw, &lower, &orientations, order))
    }

    /// `|∫ dω - ∫_∂ ω|` at one quadrature order.
    pub fn stokes_residual(&self, omega: &ScDifferentialForm, order: usize) -> Result<StokesRow> {
        let d = omega.exterior_derivative()?;
        let interior = self.integrate(&d, &Region::All, order)?.value;
        let boundary = self.integrate_boundary(omega, &Region::All, order)?.value;
        Ok(StokesRow {
            order,
            interior,
            boundary,
            residual: (interior - boundary).abs(),
        })
    }

    pub fn stokes_curve(&self, omega: &ScDifferentialForm, orders: &[usize]) -> Result<Vec<StokesRow>> {
        orders.iter().map(|&q| self.stokes_residual(omega, q)).collect()
    }
}

/// Columns of `j`, skipping `skip`.
fn columns(j: &DMatrix<f64>, skip: Option<usize>) -> Vec<Vec<f64>> {
    (0..j.ncols())
        .filter(|&k| Some(k) != skip)
        .map(|k| j.column(k).iter().copied().collect())
        .collect()
}

/// Bounding box of cell samples, widened by a relative margin.
fn hull(ambient: usize, dim: usize, branches: &[WeightedBranch]) -> CoveredWindow {
    let mut lower = vec![f64::INFINITY; ambient];
    let mut upper = vec![f64::NEG_INFINITY; ambient];
    let rule = grid(dim, 9);
    for c in branches.iter().flat_map(|b| &b.cells) {
        for t in &rule {
            for (k, v) in c.map.eval(t).into_iter().enumerate() {
                lower[k] = lower[k].min(v);
                upper[k] = upper[k].max(v);
            }
        }
    }
    for k in 0..ambient {
        if !lower[k].is_finite() {
            lower[k] = 0.0;
            upper[k] = 0.0;
        }
        let pad = WINDOW_MARGIN * (upper[k] - lower[k]).max(1.0);
        lower[k] -= pad;
        upper[k] += pad;
    }
    CoveredWindow { lower, upper }
}

/// Uniform grid with `per_axis` points per axis on `[0, 1]^n`.
fn grid(n: usize, per_axis: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..per_axis).map(move |i| {
                    let mut t2 = t.clone();
                    t2.push(i as f64 / (per_axis - 1).max(1) as f64);
                    t2
                })
            })
            .collect();
    }
    out
}

/// Distance from `y` to the image of a cell, by projected Levenberg–Marquardt
/// from a coarse grid of starts.
fn cell_distance(c: &Cell, y: &[f64]) -> f64 {
    let n = c.map.dim();
    let dist = |t: &[f64]| {
        let p = c.map.eval(t);
        p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    };
    let mut best = f64::INFINITY;
    for start in grid(n, 5) {
        let mut t = start;
        let mut d = dist(&t);
        let mut mu = 1e-3;
        for _ in 0..100 {
            if d <= MEMBERSHIP_TOL * 1e-3 {
                break;
            }
            let j = c.map.jacobian(&t);
            let r = DVector::from_iterator(y.len(), c.map.eval(&t).iter().zip(y).map(|(a, b)| a - b));
            let jt = j.transpose();
            let lhs = &jt * &j + DMatrix::identity(n, n) * mu;
            let Some(step) = lhs.lu().solve(&(&jt * r)) else {
                break;
            };
            let cand: Vec<f64> = t.iter().zip(step.iter()).map(|(a, s)| (a - s).clamp(0.0, 1.0)).collect();
            let dc = dist(&cand);
            if dc < d {
                let moved = cand.iter().zip(&t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                t = cand;
                d = dc;
                mu = (mu * 0.3).max(1e-15);
                if moved < 1e-15 {
                    break;
                }
            } else {
                mu *= 10.0;
                if mu > 1e8 {
                    break;
                }
            }
        }
        best = best.min(d);
        if best <= MEMBERSHIP_TOL {
            break;
        }
    }
    best
}

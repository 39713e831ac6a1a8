use std::sync::Arc;

use serde::Serialize;

use super::retraction::{retract_tangent_basis, Retraction};
use super::splicing::{bump_splicing_on_half_line, splicing_to_retraction, BumpFamily, BumpProfile};
use crate::error::{Error, Result};
use crate::linalg;
use crate::sc_core::{ScScale, ScVector};

/// One sampled point of the demo model.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DemoRow {
    pub sample: String,
    pub gluing: f64,
    pub level: usize,
    pub local_dimension: usize,
    pub degeneracy_index: usize,
}

/// Gluing-parameter surrogate for once-broken paths from `a` to `c` through
/// `b`: the parameter `g ∈ [0, ∞)` is the quadrant coordinate, `g = 0` is the
/// broken stratum and `g > 0` glues with neck length `e^{1/g}`.
#[derive(Clone, Debug)]
pub struct BrokenPathDemo {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub retraction: Retraction,
    pub rows: Vec<DemoRow>,
}

impl BrokenPathDemo {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("rows serialize")
    }
}

/// Gluing parameters sampled by the demo, all inside the window of a grid
/// with radius 64.
pub const DEMO_GLUING: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn sigma(t: f64) -> f64 {
    0.5 * (1.0 + t.tanh())
}

/// The glued path `a + (b - a) σ(s + L/2) + (c - b) σ(s - L/2)` at time `s`
/// with `L = e^{1/g}`.
pub fn glued_path(a: &[f64], b: &[f64], c: &[f64], g: f64, s: f64) -> Result<Vec<f64>> {
    if !(g > 0.0) {
        return Err(Error::DomainExit("glued paths need a positive gluing parameter".into()));
    }
    let half = 0.5 * (1.0 / g).exp();
    let (w1, w2) = (sigma(s + half), sigma(s - half));
    Ok(a
        .iter()
        .zip(b)
        .zip(c)
        .map(|((a, b), c)| a + (b - a) * w1 + (c - b) * w2)
        .collect())
}

pub fn broken_path_demo(a: &[f64], b: &[f64], c: &[f64], fiber: &Arc<ScScale>) -> Result<BrokenPathDemo> {
    if a.len() != b.len() || a.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: if b.len() != a.len() { b.len() } else { c.len() },
        });
    }
    let distinct = |p: &[f64], q: &[f64]| linalg::euclidean_norm(&linalg::sub(p, q)) > 1e-12;
    if !(distinct(a, b) && distinct(b, c) && distinct(a, c)) {
        return Err(Error::CoincidentPoints);
    }
    let beta = BumpProfile::polynomial();
    let probes: Vec<f64> = DEMO_GLUING.to_vec();
    let sp = bump_splicing_on_half_line(beta.clone(), fiber, &probes)?;
    let r = splicing_to_retraction(&sp)?;
    let family = BumpFamily::new(beta, fiber)?;
    let total = Arc::clone(r.scale());
    let mut rows = Vec::with_capacity(DEMO_GLUING.len());
    for &g in &DEMO_GLUING {
        let mut x = vec![g];
        match family.frame(g)? {
            Some(fr) => x.extend(fr.f.iter().map(|v| 0.5 * v)),
            None => x.extend(std::iter::repeat_n(0.0, fiber.dim())),
        }
        let x = ScVector::smooth(&total, x)?;
        let local_dimension = retract_tangent_basis(&r, &x)?.ncols();
        let degeneracy_index = r.quadrant().degeneracy_index(x.coeffs(), total.default_tol())?;
        let sample = if g == 0.0 {
            "broken".to_string()
        } else if g == 1.0 {
            "unbroken".to_string()
        } else {
            format!("glued g={g}")
        };
        rows.push(DemoRow {
            sample,
            gluing: g,
            level: x.level(),
            local_dimension,
            degeneracy_index,
        });
    }
    Ok(BrokenPathDemo {
        a: a.to_vec(),
        b: b.to_vec(),
        c: c.to_vec(),
        retraction: r,
        rows,
    })
}

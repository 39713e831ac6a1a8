use serde::Serialize;

use super::bundle::{AuxiliaryNorm, BundleSection, Window};
use crate::error::{Error, Result};
use crate::linalg;

/// Chart-coordinate ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, p: &[f64]) -> bool {
        linalg::euclidean_norm(&linalg::sub(p, &self.center)) < self.radius
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlReport {
    pub resolution: usize,
    pub sublevel_points: usize,
    pub clusters: usize,
    /// Sublevel points of the refined grid outside `U` (accumulation
    /// surrogate).
    pub refined_outside: usize,
    pub surrogate: String,
    pub pass: bool,
}

/// `(U, N)`: a union of chart balls around the zero set whose sampled
/// sublevel set `{N(f) <= 1}` is bounded and accumulates inside `U`.
#[derive(Clone, Debug, Serialize)]
pub struct ControlPair {
    pub balls: Vec<Ball>,
    pub norm: AuxiliaryNorm,
    pub report: ControlReport,
}

impl ControlPair {
    pub fn contains(&self, p: &[f64]) -> bool {
        self.balls.iter().any(|b| b.contains(p))
    }

    /// Whether every support ball `(c, r)` lies inside one of the balls of `U`.
    pub fn contains_support(&self, support: &[(Vec<f64>, f64)]) -> bool {
        support.iter().all(|(c, r)| {
            self.balls
                .iter()
                .any(|b| linalg::euclidean_norm(&linalg::sub(c, &b.center)) + r <= b.radius * (1.0 + 1e-12))
        })
    }
}

fn sublevel(f: &BundleSection, n: &AuxiliaryNorm, window: &Window, points: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let model = f.model();
    let mut out = Vec::new();
    for (i, p) in window.grid(points).into_iter().enumerate() {
        let x = model.lift(&p);
        if !model.is_charted(&x)? {
            continue;
        }
        let v = f.eval(&x)?;
        if n.eval(model, &v)? <= 1.0 {
            out.push((i, p));
        }
    }
    Ok(out)
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut j = i;
    while parent[j] != r {
        let next = parent[j];
        parent[j] = r;
        j = next;
    }
    r
}

/// Samples `N(f)` on a window grid with `resolution` nodes per axis,
/// clusters the sublevel set `{N(f) <= 1}` by grid adjacency and covers each
/// cluster by one ball (mean center, radius = farthest member + `margin`).
/// Certification fails if the sublevel set reaches the window faces or if
/// the sublevel set of the doubled grid leaves `U`.
pub fn control_pair_build(f: &BundleSection, n: &AuxiliaryNorm, margin: f64, resolution: usize) -> Result<ControlPair> {
    let model = f.model();
    let window = model.window();
    let res = resolution.max(3);
    let d = window.dim();
    let pts = sublevel(f, n, window, res)?;
    let on_face = |p: &[f64]| {
        p.iter()
            .enumerate()
            .any(|(k, v)| (v - window.lower[k]).abs() < 1e-12 || (v - window.upper[k]).abs() < 1e-12)
    };
    if let Some((_, p)) = pts.iter().find(|(_, p)| on_face(p)) {
        return Err(Error::CertificationFailure(format!(
            "sublevel set {{N(f) <= 1}} reaches the window face at {p:?}"
        )));
    }

    let index: std::collections::HashMap<usize, usize> = pts.iter().enumerate().map(|(k, (i, _))| (*i, k)).collect();
    let mut parent: Vec<usize> = (0..pts.len()).collect();
    for (k, (i, _)) in pts.iter().enumerate() {
        let idx = window.grid_index(*i, res);
        for off in 0..3usize.pow(d as u32) {
            let mut flat = 0usize;
            let mut r = off;
            let mut ok = true;
            for (axis, &c) in idx.iter().enumerate() {
                let delta = (r % 3) as i64 - 1;
                r /= 3;
                let v = c as i64 + delta;
                if v < 0 || v >= res as i64 {
                    ok = false;
                    break;
                }
                flat += v as usize * res.pow((d - 1 - axis) as u32);
            }
            if let (true, Some(&other)) = (ok, index.get(&flat)) {
                let (a, b) = (find(&mut parent, k), find(&mut parent, other));
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for k in 0..pts.len() {
        let root = find(&mut parent, k);
        groups.entry(root).or_default().push(k);
    }
    let balls: Vec<Ball> = groups
        .values()
        .map(|members| {
            let mut center = vec![0.0; d];
            for &k in members {
                center = linalg::add(&center, &pts[k].1);
            }
            center = linalg::scale(1.0 / members.len() as f64, &center);
            let far = members
                .iter()
                .map(|&k| linalg::euclidean_norm(&linalg::sub(&pts[k].1, &center)))
                .fold(0.0, f64::max);
            Ball {
                center,
                radius: far + margin,
            }
        })
        .collect();

    let refined = sublevel(f, n, window, 2 * res - 1)?;
    let refined_outside = refined.iter().filter(|(_, p)| !balls.iter().any(|b| b.contains(p))).count();
    let report = ControlReport {
        resolution: res,
        sublevel_points: pts.len(),
        clusters: balls.len(),
        refined_outside,
        surrogate: "bounded sampled sublevel set inside the window; doubled-grid sublevel points inside U".into(),
        pass: refined_outside == 0,
    };
    if refined_outside > 0 {
        return Err(Error::CertificationFailure(format!(
            "{refined_outside} refined sublevel samples fall outside U"
        )));
    }
    Ok(ControlPair {
        balls,
        norm: n.clone(),
        report,
    })
}

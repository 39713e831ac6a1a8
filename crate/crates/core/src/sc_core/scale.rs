use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::stencil;
use crate::error::{Error, Result};

/// Uniform grid on the truncation window `[-radius, radius]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGrid {
    pub radius: f64,
    pub spacing: f64,
    pub points: usize,
    /// Exponential weight per level.
    pub deltas: Vec<f64>,
    /// Highest derivative entering the norm per level.
    pub orders: Vec<usize>,
}

impl WeightedGrid {
    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points)
            .map(|i| -self.radius + i as f64 * self.spacing)
            .collect()
    }

    /// Pointwise energy density of the level-`m` norm.
    fn density(&self, u: &[f64], m: usize) -> Vec<f64> {
        let delta = self.deltas[m];
        let xs = self.coordinates();
        let weights: Vec<f64> = xs.iter().map(|s| (delta * s.abs()).exp()).collect();
        let mut dens = vec![0.0; u.len()];
        for j in 0..=self.orders[m] {
            let d = stencil::derivative(u, j, self.spacing);
            for i in 0..u.len() {
                let v = weights[i] * d[i];
                dens[i] += v * v;
            }
        }
        dens
    }

    /// Quadrature weights: composite Simpson on `[-R, 0]` and `[0, R]`
    /// separately, since the weight `exp(δ|s|)` has a kink at the origin.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let n = self.points;
        let mut w = vec![0.0; n];
        if n.is_multiple_of(2) || n < 5 {
            // no node at the origin: plain trapezoid
            for (i, wi) in w.iter_mut().enumerate() {
                *wi = if i == 0 || i == n - 1 { 0.5 } else { 1.0 } * self.spacing;
            }
            return w;
        }
        let k = (n - 1) / 2;
        let half = composite_simpson(k + 1, self.spacing);
        for i in 0..=k {
            w[i] += half[i];
            w[k + i] += half[i];
        }
        w
    }

    fn norm(&self, u: &[f64], m: usize) -> f64 {
        let dens = self.density(u, m);
        let w = self.quadrature_weights();
        dens.iter().zip(&w).map(|(d, q)| d * q).sum::<f64>().sqrt()
    }
}

/// Simpson weights on `points` equispaced nodes, finishing with the 3/8 rule
/// when the interval count is odd.
fn composite_simpson(points: usize, h: f64) -> Vec<f64> {
    let intervals = points - 1;
    let mut w = vec![0.0; points];
    if intervals == 1 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let simpson_end = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
    let mut i = 0;
    while i < simpson_end {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
        i += 2;
    }
    if simpson_end < intervals {
        let c = 3.0 * h / 8.0;
        w[i] += c;
        w[i + 1] += 3.0 * c;
        w[i + 2] += 3.0 * c;
        w[i + 3] += c;
    }
    w
}

/// Loops sampled at `points` equidistant nodes of `[0, 2π)`, level `m` carrying
/// the Sobolev norm of order `orders[m]` computed spectrally.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGrid {
    pub points: usize,
    pub orders: Vec<usize>,
}

impl PeriodicGrid {
    pub fn coordinates(&self) -> Vec<f64> {
        let h = std::f64::consts::TAU / self.points as f64;
        (0..self.points).map(|i| i as f64 * h).collect()
    }

    /// Normalized Fourier coefficients with their integer frequencies.
    pub fn spectrum(&self, u: &[f64]) -> Vec<(i64, Complex<f64>)> {
        let n = self.points;
        let mut buf: Vec<Complex<f64>> = u.iter().map(|&x| Complex::new(x, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        buf.iter()
            .enumerate()
            .map(|(k, c)| {
                let freq = if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
                (freq, c / n as f64)
            })
            .collect()
    }

    /// Squared Sobolev norm of order `s` (real-valued, not necessarily integer).
    pub fn sobolev_sq(&self, u: &[f64], s: f64) -> f64 {
        self.spectrum(u)
            .iter()
            .map(|(k, c)| (1.0 + (*k as f64).powi(2)).powf(s) * c.norm_sqr())
            .sum::<f64>()
            * std::f64::consts::TAU
    }

    fn norm(&self, u: &[f64], m: usize) -> f64 {
        self.sobolev_sq(u, self.orders[m] as f64).sqrt()
    }

    /// Largest Sobolev order `s <= max_order` whose dyadic high-frequency block
    /// energies decay (ratio at most 0.9) or are negligible.
    pub fn observed_order(&self, u: &[f64], max_order: usize) -> Option<usize> {
        let spec = self.spectrum(u);
        let n = self.points as i64;
        let block = |s: f64, lo: i64, hi: i64| -> f64 {
            spec.iter()
                .filter(|(k, _)| k.abs() >= lo && k.abs() < hi)
                .map(|(k, c)| (*k as f64).powf(2.0 * s) * c.norm_sqr())
                .sum()
        };
        let mut best = None;
        for s in 0..=max_order {
            let sf = s as f64;
            let total: f64 = spec
                .iter()
                .map(|(k, c)| (1.0 + (*k as f64).powi(2)).powf(sf) * c.norm_sqr())
                .sum();
            let b1 = block(sf, n / 16, n / 8);
            let b2 = block(sf, n / 8, n / 4);
            let b3 = block(sf, n / 4, n / 2);
            let negligible = b2 + b3 <= 1e-6 * total;
            let decaying = b2 <= 0.9 * b1 && b3 <= 0.9 * b2;
            if negligible || decaying {
                best = Some(s);
            } else {
                break;
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Backend {
    FiniteDim { dim: usize },
    WeightedGrid(WeightedGrid),
    PeriodicGrid(PeriodicGrid),
    Sum(Box<ScScale>, Box<ScScale>),
}

/// A finite-level truncation `E_0 ⊃ E_1 ⊃ … ⊃ E_{max_level}` of an sc-scale.
///
/// All backends store the same coefficient vector at every level; the level
/// changes only the norm.
#[derive(Clone, Debug, PartialEq)]
pub struct ScScale {
    backend: Backend,
    max_level: usize,
    /// Recorded bound for `|x|_m <= c_m |x|_{m+1}`.
    embedding: Vec<f64>,
}

/// One factor of a level, used to compare level structures of sums.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelFactor {
    pub kind: &'static str,
    pub dim: usize,
    pub weight: f64,
    pub order: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub level: usize,
    pub samples: usize,
    pub max_ratio: f64,
    pub embedding_constant: f64,
    pub violation: bool,
    /// `(radius or frequency cutoff, mean fraction of level-m energy beyond it)`.
    pub tail_profile: Vec<(f64, f64)>,
}

impl ScScale {
    /// The constant scale `R^dim` at every level.
    pub fn finite_dim(dim: usize, max_level: usize) -> Self {
        ScScale {
            backend: Backend::FiniteDim { dim },
            max_level,
            embedding: vec![1.0; max_level],
        }
    }

    /// Weighted Sobolev scale `H^{m, δ_m}` on `[-radius, radius]`, where level
    /// `m` carries derivatives up to order `m`.
    pub fn weighted_grid(radius: f64, spacing: f64, deltas: Vec<f64>) -> Result<Self> {
        let orders = (0..deltas.len()).collect();
        Self::weighted_grid_with_orders(radius, spacing, deltas, orders)
    }

    /// Like [`ScScale::weighted_grid`] with an explicit derivative order per
    /// level; `orders = [0; M+1]` gives the weighted `L²` scale.
    pub fn weighted_grid_with_orders(
        radius: f64,
        spacing: f64,
        deltas: Vec<f64>,
        orders: Vec<usize>,
    ) -> Result<Self> {
        if deltas.first().copied() != Some(0.0) {
            return Err(Error::InvalidScale("delta_0 must be 0".into()));
        }
        Self::grid_unchecked_origin(radius, spacing, deltas, orders)
    }

    fn grid_unchecked_origin(
        radius: f64,
        spacing: f64,
        deltas: Vec<f64>,
        orders: Vec<usize>,
    ) -> Result<Self> {
        if !(radius > 0.0 && spacing > 0.0 && spacing < radius) {
            return Err(Error::InvalidScale(format!(
                "window radius {radius} and spacing {spacing}"
            )));
        }
        if deltas.is_empty() || deltas.len() != orders.len() {
            return Err(Error::InvalidScale(
                "deltas and orders must be non-empty and of equal length".into(),
            ));
        }
        if deltas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidScale(format!(
                "weights must be strictly increasing: {deltas:?}"
            )));
        }
        if orders.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidScale(format!(
                "derivative orders must be nondecreasing: {orders:?}"
            )));
        }
        let steps = 2.0 * radius / spacing;
        if (steps - steps.round()).abs() > 1e-9 * steps {
            return Err(Error::InvalidScale(
                "spacing must divide the window length".into(),
            ));
        }
        let max_level = deltas.len() - 1;
        Ok(ScScale {
            backend: Backend::WeightedGrid(WeightedGrid {
                radius,
                spacing,
                points: steps.round() as usize + 1,
                deltas,
                orders,
            }),
            max_level,
            // pointwise weights and derivative sets both grow with m
            embedding: vec![1.0; max_level],
        })
    }

    /// Loop scale with level `m` equal to `H^{base_order + m}(S¹)`.
    pub fn periodic(points: usize, base_order: usize, max_level: usize) -> Result<Self> {
        if points < 16 {
            return Err(Error::InvalidScale("periodic grid needs at least 16 points".into()));
        }
        Ok(ScScale {
            backend: Backend::PeriodicGrid(PeriodicGrid {
                points,
                orders: (0..=max_level).map(|m| base_order + m).collect(),
            }),
            max_level,
            embedding: vec![1.0; max_level],
        })
    }

    /// `(E ⊕ F)_m = E_m ⊕ F_m` with `|(e, f)|_m = sqrt(|e|_m² + |f|_m²)`.
    pub fn direct_sum(e: &ScScale, f: &ScScale) -> Result<Self> {
        if e.max_level != f.max_level {
            return Err(Error::MismatchedMaxLevel(e.max_level, f.max_level));
        }
        let embedding = e
            .embedding
            .iter()
            .zip(&f.embedding)
            .map(|(a, b)| a.max(*b))
            .collect();
        Ok(ScScale {
            backend: Backend::Sum(Box::new(e.clone()), Box::new(f.clone())),
            max_level: e.max_level,
            embedding,
        })
    }

    /// The shifted scale `E^k` with `(E^k)_m = E_{m+k}`.
    pub fn shifted(&self, k: usize) -> Result<Self> {
        self.restrict(k, self.max_level)
    }

    /// The same scale with its top `k` levels dropped.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k > self.max_level {
            return Err(Error::LevelOutOfRange {
                requested: k,
                declared: self.max_level,
            });
        }
        self.restrict(0, self.max_level - k)
    }

    /// Levels `start..=top` renumbered from 0.
    fn restrict(&self, start: usize, top: usize) -> Result<Self> {
        if top > self.max_level || start > top {
            return Err(Error::LevelOutOfRange {
                requested: start.max(top),
                declared: self.max_level,
            });
        }
        let max_level = top - start;
        let backend = match &self.backend {
            Backend::FiniteDim { dim } => Backend::FiniteDim { dim: *dim },
            Backend::WeightedGrid(g) => {
                return Self::grid_unchecked_origin(
                    g.radius,
                    g.spacing,
                    g.deltas[start..=top].to_vec(),
                    g.orders[start..=top].to_vec(),
                );
            }
            Backend::PeriodicGrid(p) => Backend::PeriodicGrid(PeriodicGrid {
                points: p.points,
                orders: p.orders[start..=top].to_vec(),
            }),
            Backend::Sum(a, b) => Backend::Sum(
                Box::new(a.restrict(start, top)?),
                Box::new(b.restrict(start, top)?),
            ),
        };
        Ok(ScScale {
            backend,
            max_level,
            embedding: self.embedding[start..top].to_vec(),
        })
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn embedding_constants(&self) -> &[f64] {
        &self.embedding
    }

    /// Coefficient count (identical at every level).
    pub fn dim(&self) -> usize {
        match &self.backend {
            Backend::FiniteDim { dim } => *dim,
            Backend::WeightedGrid(g) => g.points,
            Backend::PeriodicGrid(p) => p.points,
            Backend::Sum(a, b) => a.dim() + b.dim(),
        }
    }

    /// Dimension at level `m`.
    pub fn dim_at(&self, m: usize) -> Result<usize> {
        self.check_level(m)?;
        Ok(self.dim())
    }

    pub fn is_finite_dim(&self) -> bool {
        match &self.backend {
            Backend::FiniteDim { .. } => true,
            Backend::Sum(a, b) => a.is_finite_dim() && b.is_finite_dim(),
            _ => false,
        }
    }

    /// Default absolute tolerance for membership and vanishing tests.
    pub fn default_tol(&self) -> f64 {
        if self.is_finite_dim() {
            1e-12
        } else {
            1e-9
        }
    }

    pub fn grid(&self) -> Option<&WeightedGrid> {
        match &self.backend {
            Backend::WeightedGrid(g) => Some(g),
            _ => None,
        }
    }

    pub fn periodic_grid(&self) -> Option<&PeriodicGrid> {
        match &self.backend {
            Backend::PeriodicGrid(p) => Some(p),
            _ => None,
        }
    }

    /// Components of a direct sum.
    pub fn summands(&self) -> Option<(&ScScale, &ScScale)> {
        match &self.backend {
            Backend::Sum(a, b) => Some((a, b)),
            _ => None,
        }
    }

    fn check_level(&self, m: usize) -> Result<()> {
        if m > self.max_level {
            Err(Error::LevelOutOfRange {
                requested: m,
                declared: self.max_level,
            })
        } else {
            Ok(())
        }
    }

    /// Level-`m` norm of a raw coefficient vector.
    pub fn norm_of(&self, coeffs: &[f64], m: usize) -> Result<f64> {
        self.check_level(m)?;
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: coeffs.len(),
            });
        }
        Ok(self.norm_unchecked(coeffs, m))
    }

    fn norm_unchecked(&self, coeffs: &[f64], m: usize) -> f64 {
        match &self.backend {
            Backend::FiniteDim { .. } => coeffs.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Backend::WeightedGrid(g) => g.norm(coeffs, m),
            Backend::PeriodicGrid(p) => p.norm(coeffs, m),
            Backend::Sum(a, b) => {
                let (x, y) = coeffs.split_at(a.dim());
                a.norm_unchecked(x, m).hypot(b.norm_unchecked(y, m))
            }
        }
    }

    /// Flattened description of level `m` as a list of factors.
    pub fn level_profile(&self, m: usize) -> Result<Vec<LevelFactor>> {
        self.check_level(m)?;
        Ok(match &self.backend {
            Backend::FiniteDim { dim } => vec![LevelFactor {
                kind: "finite_dim",
                dim: *dim,
                weight: 0.0,
                order: 0,
            }],
            Backend::WeightedGrid(g) => vec![LevelFactor {
                kind: "weighted_grid",
                dim: g.points,
                weight: g.deltas[m],
                order: g.orders[m],
            }],
            Backend::PeriodicGrid(p) => vec![LevelFactor {
                kind: "periodic_grid",
                dim: p.points,
                weight: 0.0,
                order: p.orders[m],
            }],
            Backend::Sum(a, b) => {
                let mut v = a.level_profile(m)?;
                v.extend(b.level_profile(m)?);
                v
            }
        })
    }

    /// Highest level the coefficients plausibly belong to. Only the periodic
    /// backend can distinguish levels from samples; finite-dimensional
    /// components are smooth.
    pub fn observed_level(&self, coeffs: &[f64]) -> Result<Option<usize>> {
        match &self.backend {
            Backend::FiniteDim { .. } => Ok(Some(self.max_level)),
            Backend::PeriodicGrid(p) => {
                let top = p.orders[self.max_level];
                Ok(p.observed_order(coeffs, top).and_then(|s| {
                    if s < p.orders[0] {
                        None
                    } else {
                        Some((s - p.orders[0]).min(self.max_level))
                    }
                }))
            }
            Backend::WeightedGrid(_) => Err(Error::BackendUnsupported(
                "level detection on truncated weighted grids".into(),
            )),
            Backend::Sum(a, b) => {
                let (x, y) = coeffs.split_at(a.dim());
                Ok(match (a.observed_level(x)?, b.observed_level(y)?) {
                    (Some(p), Some(q)) => Some(p.min(q)),
                    _ => None,
                })
            }
        }
    }

    /// Sampled check of `|x|_m <= c_m |x|_{m+1}` on seeded random unit vectors
    /// of level `m + 1`, with the mean distribution of level-`m` energy.
    pub fn embedding_report(&self, m: usize, sample_count: usize, seed: u64) -> Result<EmbeddingReport> {
        self.check_level(m + 1)?;
        let c = self.embedding[m];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim();
        let mut max_ratio: f64 = 0.0;
        let cutoffs = self.tail_cutoffs();
        let mut tails = vec![0.0; cutoffs.len()];
        for _ in 0..sample_count {
            let raw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let top = self.norm_unchecked(&raw, m + 1);
            if top == 0.0 {
                continue;
            }
            max_ratio = max_ratio.max(self.norm_unchecked(&raw, m) / top);
            let x: Vec<f64> = raw.iter().map(|v| v / top).collect();
            for (t, frac) in tails.iter_mut().zip(self.tail_fractions(&x, m, &cutoffs)) {
                *t += frac / sample_count as f64;
            }
        }
        Ok(EmbeddingReport {
            level: m,
            samples: sample_count,
            max_ratio,
            embedding_constant: c,
            violation: max_ratio > c * (1.0 + 1e-12),
            tail_profile: cutoffs.into_iter().zip(tails).collect(),
        })
    }

    fn tail_cutoffs(&self) -> Vec<f64> {
        match &self.backend {
            Backend::WeightedGrid(g) => (1..4).map(|j| j as f64 * g.radius / 4.0).collect(),
            Backend::PeriodicGrid(p) => [16, 8, 4].iter().map(|d| (p.points / d) as f64).collect(),
            _ => Vec::new(),
        }
    }

    fn tail_fractions(&self, x: &[f64], m: usize, cutoffs: &[f64]) -> Vec<f64> {
        match &self.backend {
            Backend::WeightedGrid(g) => {
                let q = g.quadrature_weights();
                let dens: Vec<f64> = g.density(x, m).iter().zip(&q).map(|(d, w)| d * w).collect();
                let total: f64 = dens.iter().sum();
                let xs = g.coordinates();
                cutoffs
                    .iter()
                    .map(|r| {
                        let tail: f64 = xs
                            .iter()
                            .zip(&dens)
                            .filter(|(s, _)| s.abs() > *r)
                            .map(|(_, d)| d)
                            .sum();
                        if total > 0.0 {
                            tail / total
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            Backend::PeriodicGrid(p) => {
                let s = p.orders[m] as f64;
                let spec = p.spectrum(x);
                let energy = |k: i64, c: &Complex<f64>| (1.0 + (k as f64).powi(2)).powf(s) * c.norm_sqr();
                let total: f64 = spec.iter().map(|(k, c)| energy(*k, c)).sum();
                cutoffs
                    .iter()
                    .map(|kc| {
                        let tail: f64 = spec
                            .iter()
                            .filter(|(k, _)| k.abs() as f64 > *kc)
                            .map(|(k, c)| energy(*k, c))
                            .sum();
                        if total > 0.0 {
                            tail / total
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn into_shared(self) -> Arc<ScScale> {
        Arc::new(self)
    }
}

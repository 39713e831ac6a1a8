use std::sync::Arc;

use super::map::{Domain, ScMap};
use super::probe::{ProbeReport, ProbeRow};
use crate::error::{Error, Result};
use crate::linalg;
use crate::sc_core::{stencil, ScScale, WeightedGrid};

/// Piecewise cubic Hermite interpolant of grid samples, extended by zero
/// outside the window.
#[derive(Clone, Debug)]
pub struct HermiteInterpolant {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteInterpolant {
    pub fn new(grid: &WeightedGrid, values: &[f64]) -> Self {
        HermiteInterpolant {
            x0: -grid.radius,
            h: grid.spacing,
            values: values.to_vec(),
            slopes: stencil::derivative(values, 1, grid.spacing),
        }
    }

    /// Value and first derivative at `p`.
    pub fn eval(&self, p: f64) -> (f64, f64) {
        let n = self.values.len();
        let pos = (p - self.x0) / self.h;
        if pos < 0.0 || pos > (n - 1) as f64 {
            return (0.0, 0.0);
        }
        let i = (pos.floor() as usize).min(n - 2);
        let t = pos - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.h, self.slopes[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let dvalue = (6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1;
        (value, dvalue / self.h)
    }
}

fn grid_of(scale: &ScScale) -> Result<&WeightedGrid> {
    scale
        .grid()
        .ok_or_else(|| Error::BackendUnsupported("shift map needs a weighted grid".into()))
}

/// `u(· + t)` sampled on the grid.
pub fn shift_samples(grid: &WeightedGrid, t: f64, u: &[f64]) -> Result<Vec<f64>> {
    if t.abs() >= grid.radius {
        return Err(Error::WindowExit(format!(
            "shift {t} leaves the window [-{r}, {r}]",
            r = grid.radius
        )));
    }
    let interp = HermiteInterpolant::new(grid, u);
    Ok(grid.coordinates().iter().map(|s| interp.eval(s + t).0).collect())
}

/// `Φ(t, u)(s) = u(s + t)` on `R ⊕ E`, where `E` is a weighted grid scale.
/// The source scale is `finite_dim(1) ⊕ E` with the same number of levels.
pub fn shift_map(scale: &Arc<ScScale>) -> Result<ScMap> {
    let grid = grid_of(scale)?.clone();
    let n = grid.points;
    let source = Arc::new(ScScale::direct_sum(
        &ScScale::finite_dim(1, scale.max_level()),
        scale,
    )?);
    let g1 = grid.clone();
    let eval = Arc::new(move |x: &[f64]| shift_samples(&g1, x[0], &x[1..]));
    let g2 = grid;
    let derivative = Arc::new(move |x: &[f64], d: &[f64]| -> Result<Vec<f64>> {
        let t = x[0];
        if t.abs() >= g2.radius {
            return Err(Error::WindowExit(format!("shift {t}")));
        }
        let iu = HermiteInterpolant::new(&g2, &x[1..]);
        let iv = HermiteInterpolant::new(&g2, &d[1..]);
        Ok(g2
            .coordinates()
            .iter()
            .map(|s| d[0] * iu.eval(s + t).1 + iv.eval(s + t).0)
            .collect())
    });
    ScMap::new(
        "shift",
        &source,
        scale,
        Domain::whole(n + 1),
        eval,
        Some(derivative),
    )
}

/// Classical Fréchet quotient of the shift in the `t` direction measured in
/// the level-0 norm, using direct evaluation of `u` and its almost-everywhere
/// derivative `du` at shifted grid points:
/// `sup_{τ = ±1} |u(·+t+hτ) - u(·+t) - hτ du(·+t)|_0 / |h|`.
pub fn classical_shift_quotient(
    scale: &ScScale,
    u: impl Fn(f64) -> f64,
    du: impl Fn(f64) -> f64,
    t: f64,
    h_sequence: &[f64],
) -> Result<ProbeReport> {
    let grid = grid_of(scale)?;
    let xs = grid.coordinates();
    let base: Vec<f64> = xs.iter().map(|s| u(s + t)).collect();
    let slope: Vec<f64> = xs.iter().map(|s| du(s + t)).collect();
    let mut rows = Vec::with_capacity(h_sequence.len());
    for &h in h_sequence {
        let mut worst: f64 = 0.0;
        for tau in [1.0, -1.0] {
            let step = h * tau;
            if (t + step).abs() >= grid.radius {
                return Err(Error::WindowExit(format!("shift {}", t + step)));
            }
            let diff: Vec<f64> = xs
                .iter()
                .zip(&base)
                .zip(&slope)
                .map(|((s, b), d)| u(s + t + step) - b - step * d)
                .collect();
            worst = worst.max(scale.norm_of(&diff, 0)? / h);
        }
        rows.push(ProbeRow { h, residual: worst });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let rs: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    let fitted_slope = linalg::loglog_slope(&hs, &rs);
    Ok(ProbeReport {
        pass: rs.iter().all(|r| *r < 1e-12) || fitted_slope >= super::probe::SLOPE_THRESHOLD,
        rows,
        fitted_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sc_core::ScVector;

    fn l2_scale() -> Arc<ScScale> {
        Arc::new(ScScale::weighted_grid(8.0, 1.0 / 64.0, vec![0.0, 0.1, 0.2]).unwrap())
    }

    #[test]
    fn zero_shift_is_identity() {
        let e = l2_scale();
        let phi = shift_map(&e).unwrap();
        let u = ScVector::from_fn(&e, 2, |s| (-s * s).exp()).unwrap();
        let mut x = vec![0.0];
        x.extend_from_slice(u.coeffs());
        let out = phi.eval_raw(&x).unwrap();
        assert!(out.iter().zip(u.coeffs()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn shifted_gaussian_matches_closed_form() {
        let e = l2_scale();
        let grid = e.grid().unwrap();
        let u: Vec<f64> = grid.coordinates().iter().map(|s| (-s * s).exp()).collect();
        let out = shift_samples(grid, 0.5, &u).unwrap();
        for (s, v) in grid.coordinates().iter().zip(&out) {
            assert!((v - (-(s + 0.5) * (s + 0.5)).exp()).abs() < 1e-6);
        }
        assert!(matches!(
            shift_samples(grid, 8.0, &u),
            Err(Error::WindowExit(_))
        ));
    }
}

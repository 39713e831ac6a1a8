use serde::Serialize;

use super::map::ScMap;
use crate::error::{Error, Result};
use crate::linalg;
use crate::sc_core::ScVector;

/// Slope threshold on the log-log residual fit.
pub const SLOPE_THRESHOLD: f64 = 0.9;
/// Residuals below this count as exact.
pub const EXACT_RESIDUAL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct ProbeRow {
    pub h: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    pub fitted_slope: f64,
    pub pass: bool,
}

impl ProbeReport {
    fn from_rows(rows: Vec<ProbeRow>) -> Self {
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let rs: Vec<f64> = rows.iter().map(|r| r.residual).collect();
        let fitted_slope = linalg::loglog_slope(&hs, &rs);
        let exact = rs.iter().all(|r| *r < EXACT_RESIDUAL);
        ProbeReport {
            pass: exact || fitted_slope >= SLOPE_THRESHOLD,
            rows,
            fitted_slope,
        }
    }

    /// `h,residual,fitted_slope` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,residual,fitted_slope\n");
        for r in &self.rows {
            out.push_str(&format!("{:e},{:e},{}\n", r.h, r.residual, self.fitted_slope));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// sc¹ evidence at `x`: `|f(x + h d) - f(x) - Df(x)(h d)|_0 / |h d|_1` for
/// each `h`.
pub fn sc1_probe(
    f: &ScMap,
    x: &ScVector,
    direction: &ScVector,
    h_sequence: &[f64],
    allow_fd: bool,
) -> Result<ProbeReport> {
    if x.level() < 1 || direction.level() < 1 {
        return Err(Error::LevelOutOfRange {
            requested: 1,
            declared: x.level().min(direction.level()),
        });
    }
    let fx = f.eval(x)?;
    let mut rows = Vec::with_capacity(h_sequence.len());
    for &h in h_sequence {
        let step = direction.scaled(h);
        let xh = x.add(&step)?;
        let fxh = f.eval(&xh)?;
        let lin = f.derivative_raw(x.coeffs(), step.coeffs(), allow_fd)?;
        let diff: Vec<f64> = fxh
            .coeffs()
            .iter()
            .zip(fx.coeffs())
            .zip(&lin)
            .map(|((a, b), c)| a - b - c)
            .collect();
        let num = f.target().norm_of(&diff, 0)?;
        let den = step.level_norm(1)?;
        rows.push(ProbeRow {
            h,
            residual: if den > 0.0 { num / den } else { 0.0 },
        });
    }
    Ok(ProbeReport::from_rows(rows))
}

use std::sync::Arc;

use anyhow::{Context, Result};
use polyfold_core::sc_calculus::{classical_shift_quotient, sc1_probe, shift_map, EXACT_RESIDUAL};
use polyfold_core::sc_core::{ScScale, ScVector};

use crate::config::Config;
use crate::report::Report;

pub fn run(cfg: &Config, report: &mut Report) -> Result<()> {
    let c = &cfg.shiftmap;
    let e = Arc::new(ScScale::weighted_grid(c.grid.radius, c.grid.spacing, c.grid.weights.clone()).context("sc_core")?);
    let phi = shift_map(&e).context("sc_calculus")?;
    let joined = |t: f64, u: Vec<f64>| {
        let mut v = vec![t];
        v.extend(u);
        ScVector::new(phi.source(), v, 1).context("sc_core")
    };
    let gaussian = e.grid().context("sc_core")?.coordinates().iter().map(|s| (-s * s).exp()).collect();
    let x = joined(c.shift, gaussian)?;
    let dir = joined(1.0, vec![0.0; e.dim()])?;
    let probe = sc1_probe(&phi, &x, &dir, &c.steps, false).context("sc_calculus")?;
    let exact = probe.rows.iter().all(|r| r.residual < EXACT_RESIDUAL);
    report.check("sc1_slope", exact || probe.fitted_slope >= c.slope_threshold, probe.fitted_slope, c.slope_threshold);

    let saw = |s: f64| (2.0 * s).rem_euclid(1.0);
    let frechet = classical_shift_quotient(&e, saw, |_| 2.0, 0.0, &c.steps).context("sc_calculus")?;
    let floor = frechet.rows.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    report.check("frechet_stagnates", floor > c.stagnation_floor, floor, c.stagnation_floor);

    report.file("sc1_probe.csv", probe.to_csv());
    report.file("frechet_sawtooth.csv", frechet.to_csv());
    report.plot("sc1_probe.dat", ["h", "residual"], probe.rows.iter().map(|r| (r.h, r.residual)));
    report.plot("frechet_sawtooth.dat", ["h", "residual"], frechet.rows.iter().map(|r| (r.h, r.residual)));
    Ok(())
}

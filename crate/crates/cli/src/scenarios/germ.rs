use std::sync::Arc;

use anyhow::{Context, Result};
use polyfold_core::germs::{affine_fixture, solution_sheet, BasicGerm, GermSpec};
use polyfold_core::linalg;
use polyfold_core::sc_core::ScScale;

use crate::config::Config;
use crate::report::Report;

pub fn run(cfg: &Config, report: &mut Report) -> Result<()> {
    scalar(cfg, report)?;
    affine(cfg, report)
}

/// `B(a, w) = c w + a` with solution `δ(a) = a / (1 - c)`.
fn scalar(cfg: &Config, report: &mut Report) -> Result<()> {
    let c = &cfg.germ;
    let k = c.contraction;
    let germ = BasicGerm::new(GermSpec {
        param_dim: 1,
        quadrant_count: 0,
        residue_dim: 0,
        fiber: Arc::new(ScScale::finite_dim(1, 1)),
        contraction: Arc::new(move |a, w| Ok(vec![k * w[0] + a[0]])),
        residue: None,
        epsilons: vec![k.max(1e-3); 2],
        radii: Some(vec![1.0; 2]),
    })
    .context("germs")?;
    let grid: Vec<Vec<f64>> = (0..c.nodes)
        .map(|i| vec![-c.a_max + 2.0 * c.a_max * i as f64 / (c.nodes - 1) as f64])
        .collect();
    let sheet = solution_sheet(&germ, &grid, 1, 1e-14).context("germs")?;
    let slope = 1.0 / (1.0 - k);
    let mut err: f64 = 0.0;
    let mut derr: f64 = 0.0;
    for node in &sheet.nodes {
        for sol in &node.levels {
            err = err.max((sol.w[0] - slope * node.a[0]).abs());
        }
        derr = derr.max((node.derivative[0][0] - slope).abs());
    }
    report.at_most("scalar_sheet_closed_form", err, c.tolerance);
    report.at_most("scalar_derivative", derr, 1e-6);
    report.file("scalar_sheet.csv", sheet.to_csv());
    report.plot(
        "scalar_sheet.dat",
        ["a", "delta"],
        sheet.nodes.iter().map(|n| (n.a[0], n.levels[0].w[0])),
    );
    Ok(())
}

/// `B(a, w) = Q w + g(a)` with `|Q| = 0.4` against the linear-solve oracle.
fn affine(cfg: &Config, report: &mut Report) -> Result<()> {
    let c = &cfg.germ;
    let fx = affine_fixture(c.fiber_dim, c.param_dim, c.max_level, cfg.seed).context("germs")?;
    let n = c.nodes_per_axis;
    let axis: Vec<f64> = (0..n).map(|i| -0.5 + i as f64 / n as f64).collect();
    let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..c.param_dim {
        grid = grid
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    let sheet = solution_sheet(&fx.germ, &grid, c.max_level, 1e-12).context("germs")?;
    let mut err: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut rows = Vec::new();
    for node in &sheet.nodes {
        let oracle = fx.oracle(&node.a);
        for sol in &node.levels {
            err = err.max(linalg::euclidean_norm(&linalg::sub(&sol.w, &oracle)));
            // the rate is undefined where iteration stops at the start point
            if sol.iterations > 1 && sol.rate > 0.0 {
                lo = lo.min(sol.rate);
                hi = hi.max(sol.rate);
                rows.push((sol.level as f64, sol.rate));
            }
        }
    }
    report.at_most("affine_oracle_error", err, c.tolerance);
    report.check("affine_rate_min", lo >= c.rate_range[0], lo, c.rate_range[0]);
    report.check("affine_rate_max", hi <= c.rate_range[1], hi, c.rate_range[1]);
    report.at_most("affine_level_coherence", sheet.level_deviation, c.level_tolerance);
    report.file("affine_sheet.csv", sheet.to_csv());
    report.plot("affine_rates.dat", ["level", "rate"], rows);
    Ok(())
}

use std::sync::Arc;

use anyhow::{Context, Result};
use polyfold_core::retracts::broken_path_demo;
use polyfold_core::sc_core::ScScale;

use crate::config::Config;
use crate::report::{csv, Report};

pub fn run(cfg: &Config, report: &mut Report) -> Result<()> {
    let c = &cfg.brokenpath;
    let fiber = Arc::new(ScScale::weighted_grid(c.grid.radius, c.grid.spacing, c.grid.weights.clone()).context("sc_core")?);
    let demo = broken_path_demo(&c.a, &c.b, &c.c, &fiber).context("retracts")?;
    for row in &demo.rows {
        // broken paths sit on the boundary face with a one-dimensional retract
        let (index, dim) = if row.gluing == 0.0 { (1, 1) } else { (0, 2) };
        let name = row.sample.replace(' ', "_").replace('=', "");
        report.at_most(
            &format!("degeneracy_{name}"),
            (row.degeneracy_index as f64 - index as f64).abs(),
            0.0,
        );
        report.at_most(
            &format!("dimension_{name}"),
            (row.local_dimension as f64 - dim as f64).abs(),
            0.0,
        );
    }
    report.file(
        "degeneracy.csv",
        csv(
            &["sample", "gluing", "level", "local_dimension", "degeneracy_index"],
            demo.rows.iter().map(|r| {
                vec![
                    r.sample.clone(),
                    r.gluing.to_string(),
                    r.level.to_string(),
                    r.local_dimension.to_string(),
                    r.degeneracy_index.to_string(),
                ]
            }),
        ),
    );
    report.file("degeneracy.json", demo.to_json() + "\n");
    report.plot(
        "degeneracy.dat",
        ["gluing", "degeneracy_index"],
        demo.rows.iter().map(|r| (r.gluing, r.degeneracy_index as f64)),
    );
    report.plot(
        "dimension.dat",
        ["gluing", "local_dimension"],
        demo.rows.iter().map(|r| (r.gluing, r.local_dimension as f64)),
    );
    Ok(())
}

use std::f64::consts::PI;

use anyhow::{Context, Result};
use polyfold_core::branched_integration::fixtures::{cap_form, two_caps, unit_disk, x_dy};
use polyfold_core::branched_integration::{Region, StokesRow};

use crate::config::Config;
use crate::report::{csv, Report};

fn table(rows: &[StokesRow]) -> String {
    csv(
        &["order", "interior", "boundary", "residual"],
        rows.iter().map(|r| {
            vec![
                r.order.to_string(),
                r.interior.to_string(),
                r.boundary.to_string(),
                r.residual.to_string(),
            ]
        }),
    )
}

pub fn run(cfg: &Config, report: &mut Report) -> Result<()> {
    let c = &cfg.stokes;
    let disk = unit_disk();
    let row = disk.stokes_residual(&x_dy().into(), c.disk_order).context("branched_integration")?;
    report.at_most("disk_residual", row.residual, c.disk_tolerance);
    report.file("stokes_disk.csv", table(&[row]));

    // both caps bound the unit circle at z = 0, where the form restricts to
    // x dy, so the weighted measure of dω is (1/2)(π/2 + π/2) = π/2
    let caps = two_caps();
    let form = cap_form();
    let measure = caps
        .integrate(&form.exterior_derivative().into(), &Region::All, c.measure_order)
        .context("branched_integration")?;
    report.at_most("caps_measure", (measure.value - PI / 2.0).abs(), c.measure_tolerance);

    let rows = caps.stokes_curve(&form.into(), &c.orders).context("branched_integration")?;
    let increases = rows.windows(2).filter(|w| w[1].residual > w[0].residual).count();
    report.at_most("caps_monotone_decay", increases as f64, 0.0);
    let last = rows.last().map_or(f64::NAN, |r| r.residual);
    report.at_most("caps_final_residual", last, c.final_tolerance);
    report.file("stokes_caps.csv", table(&rows));
    report.plot("stokes_caps.dat", ["order", "residual"], rows.iter().map(|r| (r.order as f64, r.residual)));
    let mut json = serde_json::to_string_pretty(&measure).context("serializing measure")?;
    json.push('\n');
    report.file("caps_measure.json", json);
    Ok(())
}

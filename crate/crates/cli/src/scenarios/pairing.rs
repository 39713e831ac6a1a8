use anyhow::{Context, Result};
use polyfold_core::branched_integration::fixtures::{angle_form, x_dy};
use polyfold_core::branched_integration::{de_rham_pairing, PairingReport, PolyForm, Polynomial, ScDifferentialForm};
use polyfold_core::perturbation::fixtures::{circle, cubic, fold};
use polyfold_core::perturbation::{control_pair_build, AuxiliaryNorm, BundleSection};

use crate::config::Config;
use crate::report::{csv, Report};

fn pair(f: &BundleSection, margin: f64, resolution: usize, form: &ScDifferentialForm, trials: usize, seed: u64) -> Result<PairingReport> {
    let cp = control_pair_build(f, &AuxiliaryNorm::for_model(f.model()), margin, resolution).context("perturbation")?;
    de_rham_pairing(f, &cp, form, trials, seed).context("branched_integration")
}

fn rows(name: &str, r: &PairingReport, out: &mut Vec<Vec<String>>) {
    for t in &r.trials {
        out.push(vec![
            name.to_string(),
            t.seed.to_string(),
            t.value.to_string(),
            t.weighted_count.clone().unwrap_or_default(),
            t.solutions.to_string(),
            t.curves.to_string(),
        ]);
    }
}

/// Counts are identical across trials and equal to `expected`.
fn exact_counts(name: &str, r: &PairingReport, expected: &str, report: &mut Report) {
    let wrong = r.trials.iter().filter(|t| t.weighted_count.as_deref() != Some(expected)).count();
    report.at_most(&format!("{name}_count_is_{expected}"), wrong as f64, 0.0);
    report.holds(&format!("{name}_stable"), r.pass && r.counts_identical == Some(true));
}

pub fn run(cfg: &Config, report: &mut Report) -> Result<()> {
    let c = &cfg.pairing;
    let one: ScDifferentialForm = PolyForm::function(Polynomial::constant(2, 1.0)).into();
    let mut table = Vec::new();

    let f = fold();
    let r = pair(&f, 0.3, 41, &one, c.trials, cfg.seed)?;
    exact_counts("fold", &r, "0", report);
    rows("fold", &r, &mut table);

    let g = cubic();
    let r = pair(&g, 0.3, 41, &one, c.trials, cfg.seed)?;
    exact_counts("cubic", &r, "1", report);
    rows("cubic", &r, &mut table);

    let r = pair(&f, 0.3, 41, &x_dy().into(), c.trials, cfg.seed)?;
    let nonzero = r.values.iter().filter(|&&v| v != 0.0).count();
    report.at_most("degree_mismatch_is_zero", nonzero as f64, 0.0);
    rows("fold_mismatch", &r, &mut table);

    let h = circle();
    let r = pair(&h, 0.2, 33, &angle_form(), c.trials, cfg.seed)?;
    let dev = r.values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    report.at_most("circle_angle_form", dev, c.loop_tolerance);
    report.holds("circle_stable", r.pass);
    rows("circle_angle", &r, &mut table);

    report.file(
        "pairing.csv",
        csv(&["fixture", "seed", "value", "weighted_count", "solutions", "curves"], table),
    );
    Ok(())
}

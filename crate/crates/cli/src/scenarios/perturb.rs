use anyhow::{Context, Result};
use polyfold_core::perturbation::fixtures::fold;
use polyfold_core::perturbation::{
    cobordism_compare, control_pair_build, perturb_to_transversal, AuxiliaryNorm, SolveConfig,
};

use crate::config::Config;
use crate::report::{csv, Report};

/// Transversal search on the fold `(x, y) -> (x², y)` for two seeds and the
/// cobordism comparison of the resulting weighted counts.
pub fn run(cfg: &Config, report: &mut Report) -> Result<()> {
    let c = &cfg.perturb;
    let f = fold();
    let n = AuxiliaryNorm::for_model(f.model());
    let cp = control_pair_build(&f, &n, c.control_margin, c.control_resolution).context("perturbation")?;
    report.holds("control_pair_certified", cp.report.pass);
    let mut taus = Vec::new();
    let mut rows = Vec::new();
    for (k, seed) in [cfg.seed, cfg.seed.wrapping_add(1)].into_iter().enumerate() {
        let p = perturb_to_transversal(&f, &cp, c.epsilon, seed, c.max_attempts).context("perturbation")?;
        report.check(&format!("trial{k}_norm_below_epsilon"), p.max_norm < c.epsilon, p.max_norm, c.epsilon);
        report.holds(&format!("trial{k}_support_inside"), p.support_inside);
        let singular = if p.solutions.points.is_empty() {
            f64::INFINITY
        } else {
            p.transversality.worst_min_singular
        };
        report.check(
            &format!("trial{k}_surjective"),
            p.transversality.pass && singular > c.min_singular,
            singular,
            c.min_singular,
        );
        for s in &p.solutions.points {
            rows.push(vec![
                k.to_string(),
                seed.to_string(),
                s.branch.to_string(),
                s.weight.to_string(),
                s.point[0].to_string(),
                s.point[1].to_string(),
                s.sign.map_or("undefined".into(), |v| v.to_string()),
                s.min_singular.to_string(),
            ]);
        }
        taus.push(p.tau);
    }
    let rep = cobordism_compare(&f, &taus[0], &taus[1], &cp, c.cobordism_samples, &SolveConfig::default())
        .context("perturbation")?;
    report.check("cobordism", rep.pass, rep.family_min_singular, c.min_singular);
    let same = rep.count0.is_some() && rep.count0 == rep.count1;
    report.holds("weighted_counts_identical", same);
    report.file(
        "solutions.csv",
        csv(&["trial", "seed", "branch", "weight", "x", "y", "sign", "min_singular"], rows),
    );
    let mut json = serde_json::to_string_pretty(&rep).context("serializing cobordism report")?;
    json.push('\n');
    report.file("cobordism.json", json);
    Ok(())
}

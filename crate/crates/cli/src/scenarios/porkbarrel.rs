use std::sync::Arc;

use anyhow::{Context, Result};
use polyfold_core::perturbation::fixtures::PorkBarrel;
use polyfold_core::perturbation::{
    cobordism_compare, control_pair_build, perturb_to_transversal_with, AuxiliaryNorm, PerturbOptions,
};
use polyfold_core::retracts::{bump_splicing, retract_tangent_basis, splicing_to_retraction, BumpFamily, BumpProfile};
use polyfold_core::sc_core::{ScScale, ScVector};

use crate::config::Config;
use crate::report::{csv, Report};

/// Probe parameters of the splicing, away from the jump.
const PROBES: [f64; 4] = [-1.0, -0.25, 0.25, 1.0];

pub fn run(cfg: &Config, report: &mut Report) -> Result<()> {
    profile(cfg, report)?;
    if cfg.porkbarrel.transversal_demo {
        transversal(cfg, report)?;
    }
    Ok(())
}

/// Tangent dimension of the retract at `(s, 0.8 f̂_s)`, or at `(s, 0)`
/// where no bump fits.
fn profile(cfg: &Config, report: &mut Report) -> Result<()> {
    let c = &cfg.porkbarrel;
    let fiber = Arc::new(ScScale::weighted_grid(c.grid.radius, c.grid.spacing, c.grid.weights.clone()).context("sc_core")?);
    let sp = bump_splicing(BumpProfile::polynomial(), &fiber, &PROBES).context("retracts")?;
    let r = splicing_to_retraction(&sp).context("retracts")?;
    let family = BumpFamily::new(BumpProfile::polynomial(), &fiber).context("retracts")?;
    let mut rows = Vec::new();
    for &s in &c.s_values {
        let mut x = vec![s];
        let resolved = match family.frame(s).context("retracts")? {
            Some(fr) => {
                x.extend(fr.f.iter().map(|v| 0.8 * v));
                true
            }
            None => {
                x.extend(vec![0.0; fiber.dim()]);
                false
            }
        };
        let x = ScVector::smooth(r.scale(), x).context("sc_core")?;
        let dim = retract_tangent_basis(&r, &x).context("retracts")?.ncols();
        rows.push((s, dim, resolved));
    }
    let outside = rows.iter().filter(|(_, d, _)| *d != 1 && *d != 2).count();
    report.at_most("dimension_values_in_1_2", outside as f64, 0.0);
    let left_bad = rows.iter().filter(|(s, d, _)| *s <= 0.0 && *d != 1).count();
    report.at_most("dimension_1_for_s_le_0", left_bad as f64, 0.0);
    // for 0 < s below the support gap no bump fits in the grid
    let right_bad = rows.iter().filter(|(s, d, ok)| *s > 0.0 && *ok && *d != 2).count();
    report.at_most("dimension_2_for_s_gt_0", right_bad as f64, 0.0);
    let last_left = rows.iter().filter(|(s, _, _)| *s <= 0.0).max_by(|a, b| a.0.total_cmp(&b.0));
    let first_right = rows.iter().filter(|(s, _, ok)| *s > 0.0 && *ok).min_by(|a, b| a.0.total_cmp(&b.0));
    let jump = match (last_left, first_right) {
        (Some(l), Some(r)) => r.1 as f64 - l.1 as f64,
        _ => f64::NAN,
    };
    report.check("jump_at_s_0", jump == 1.0, jump, 0.0);
    report.file(
        "dimension_profile.csv",
        csv(
            &["s", "tangent_dimension", "bump_resolved"],
            rows.iter().map(|(s, d, ok)| vec![s.to_string(), d.to_string(), ok.to_string()]),
        ),
    );
    report.plot("dimension_profile.dat", ["s", "tangent_dimension"], rows.iter().map(|(s, d, _)| (*s, *d as f64)));
    Ok(())
}

/// Perturbs the degenerate zero circle of the pork-barrel bundle for two
/// seeds; the solution set crosses from the rank-1 to the rank-2 side.
fn transversal(cfg: &Config, report: &mut Report) -> Result<()> {
    let c = &cfg.porkbarrel;
    let pb = PorkBarrel::default();
    let f = pb.build().context("perturbation")?;
    let n = AuxiliaryNorm::for_model(f.model());
    let cp = control_pair_build(&f, &n, 0.5, 21).context("perturbation")?;
    let mut taus = Vec::new();
    let mut rows = Vec::new();
    for (k, seed) in [cfg.seed, cfg.seed.wrapping_add(1)].into_iter().enumerate() {
        let mut opts = PerturbOptions::new(c.epsilon, seed, c.max_attempts);
        opts.antipodal = true;
        opts.solve = pb.solve_config();
        let p = perturb_to_transversal_with(&f, &cp, &opts).context("perturbation")?;
        report.check(&format!("trial{k}_norm_below_epsilon"), p.max_norm < c.epsilon, p.max_norm, c.epsilon);
        report.holds(&format!("trial{k}_support_inside"), p.support_inside);
        report.check(
            &format!("trial{k}_surjective"),
            p.transversality.pass && p.transversality.worst_min_singular > 1e-8,
            p.transversality.worst_min_singular,
            1e-8,
        );
        let has = |t: usize, r: usize| p.solutions.points.iter().any(|s| s.tangent_dim == t && s.fiber_rank == r);
        report.holds(&format!("trial{k}_reaches_disk_side"), has(2, 1));
        report.holds(&format!("trial{k}_reaches_ball_side"), has(3, 2));
        for s in &p.solutions.points {
            rows.push(vec![
                k.to_string(),
                seed.to_string(),
                s.branch.to_string(),
                s.weight.to_string(),
                s.chart[0].to_string(),
                s.chart[1].to_string(),
                s.tangent_dim.to_string(),
                s.fiber_rank.to_string(),
                (s.tangent_dim - s.fiber_rank).to_string(),
            ]);
        }
        taus.push(p.tau);
    }
    let rep = cobordism_compare(&f, &taus[0], &taus[1], &cp, 3, &pb.solve_config()).context("perturbation")?;
    report.check("cobordism", rep.pass, rep.family_min_singular, 1e-8);
    report.file(
        "transversal_solutions.csv",
        csv(
            &["trial", "seed", "branch", "weight", "s", "y", "tangent_dim", "fiber_rank", "solution_dim"],
            rows,
        ),
    );
    Ok(())
}

use std::sync::Arc;

use anyhow::{Context, Result};
use nalgebra::DMatrix;
use polyfold_core::groupoids::{
    compose, compose_generalized, compose_witnesses, full_subgroupoid, identity_groupoid, isotropy, line_samples,
    natural_representation, orbit_space, reflection_groupoid, refinement_check, rotation_groupoid, sector_samples,
    trivial_action_groupoid, AffineMap, Diagram, EpGroupoid, Functor, RefinementWitness,
};

use crate::config::Config;
use crate::report::{csv, Report};

const TOL: f64 = 1e-12;

/// Group elements fixing `p` and the orbit of `p`, by direct enumeration.
fn brute(group: &[AffineMap], p: &[f64], points: &[Vec<f64>]) -> (usize, Vec<usize>) {
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= TOL);
    let fixing = group.iter().filter(|g| close(&g.apply(p), p)).count();
    let orbit = (0..points.len())
        .filter(|&j| group.iter().any(|g| close(&g.apply(p), &points[j])))
        .collect();
    (fixing, orbit)
}

fn audit(name: &str, g: &EpGroupoid, group: &[AffineMap], faithful: bool, report: &mut Report, rows: &mut Vec<Vec<String>>) -> Result<()> {
    let points: Vec<Vec<f64>> = g.objects().iter().map(|o| o.point.clone()).collect();
    let orbits = orbit_space(g);
    let (mut order_bad, mut eff_bad, mut orbit_bad, mut natural_bad) = (0, 0, 0, 0);
    for x in 0..points.len() {
        let iso = isotropy(g, x).context("groupoids")?;
        let (fixing, orbit) = brute(group, &points[x], &points);
        let mut members = orbits.members[orbits.projection[x]].clone();
        members.sort_unstable();
        order_bad += usize::from(iso.order() != fixing);
        let effective = if faithful { fixing } else { 1 };
        eff_bad += usize::from(iso.effective_order() != effective);
        orbit_bad += usize::from(members != orbit);
        let natural = natural_representation(g, x).context("groupoids")?;
        natural_bad += usize::from(!natural.pass);
        let coords: Vec<String> = points[x].iter().map(|v| v.to_string()).collect();
        rows.push(vec![
            name.to_string(),
            x.to_string(),
            coords.join(" "),
            orbits.projection[x].to_string(),
            iso.order().to_string(),
            iso.effective_order().to_string(),
            natural.pass.to_string(),
        ]);
    }
    report.at_most(&format!("{name}_isotropy_orders"), order_bad as f64, 0.0);
    report.at_most(&format!("{name}_effective_orders"), eff_bad as f64, 0.0);
    report.at_most(&format!("{name}_orbits"), orbit_bad as f64, 0.0);
    report.at_most(&format!("{name}_natural_representation"), natural_bad as f64, 0.0);
    Ok(())
}

/// Restricts `d` to the full subgroupoid of its apex on `keep`, with
/// identity transformations.
fn restrict(d: &Diagram, keep: &[usize]) -> Result<(Diagram, RefinementWitness)> {
    let (_, h) = full_subgroupoid(d.apex(), keep)?;
    let d2 = Diagram::new(compose(&h, &d.left)?, compose(&h, &d.right)?)?;
    let tau_left = (0..keep.len()).map(|a| d.domain().identity(d2.left.object(a))).collect();
    let tau_right = (0..keep.len()).map(|a| d.codomain().identity(d2.right.object(a))).collect();
    Ok((d2, RefinementWitness { h, tau_left, tau_right }))
}

/// `X <- X -> Y` with `X` the reflection groupoid and `Y` the trivial action
/// on squares; checks transitivity of refinement and generalized composition.
fn diagrams(line: &[Vec<f64>], report: &mut Report) -> Result<()> {
    let x = reflection_groupoid(line)?;
    let squares: Vec<Vec<f64>> = line.iter().map(|p| vec![p[0] * p[0]]).collect();
    let y = trivial_action_groupoid(&squares)?;
    let f = Functor::equivariant("square", &x, &y, |p| vec![p[0] * p[0]], &[0, 1])?;
    let d = Diagram::from_functor(f)?;
    let coord = |g: &EpGroupoid, a: usize| g.object(a).point[0];
    let keep1: Vec<usize> = (0..x.objects().len()).filter(|&a| coord(&x, a) >= -0.5).collect();
    let (d1, w1) = restrict(&d, &keep1)?;
    let keep2: Vec<usize> = (0..keep1.len()).filter(|&a| coord(d1.apex(), a) >= 0.0).collect();
    let (d2, w2) = restrict(&d1, &keep2)?;
    report.holds("refinement_first", refinement_check(&d, &d1, &w1)?.pass);
    report.holds("refinement_second", refinement_check(&d1, &d2, &w2)?.pass);
    let w = compose_witnesses(&d, &w1, &w2)?;
    report.holds("refinement_transitive", refinement_check(&d, &d2, &w)?.pass);

    let yg: &Arc<EpGroupoid> = d.codomain();
    let cubes: Vec<Vec<f64>> = yg.objects().iter().map(|o| vec![3.0 * o.point[0]]).collect();
    let z = identity_groupoid(&cubes)?;
    let g = Functor::equivariant("triple", yg, &z, |p| vec![3.0 * p[0]], &[0, 0])?;
    let comp = compose_generalized(&d, &Diagram::from_functor(g)?)?;
    // brute force: the orbit of x goes to the orbit of 3x²
    let xo = orbit_space(&x);
    let zo = orbit_space(&z);
    let map = comp.diagram.orbit_map();
    let mut misses = 0;
    for (o, &rep) in xo.representatives.iter().enumerate() {
        let v = coord(&x, rep);
        match z.find_object(0, &[3.0 * v * v]) {
            Some(t) if map[o] == zo.projection[t] => {}
            _ => misses += 1,
        }
    }
    report.holds("generalized_composition", comp.pass);
    report.at_most("generalized_composition_orbits", misses as f64, 0.0);
    Ok(())
}

pub fn run(cfg: &Config, report: &mut Report) -> Result<()> {
    let c = &cfg.groupoid;
    let line = line_samples(c.line_samples, c.line_extent);
    let reflection = [AffineMap::identity(1), AffineMap::linear(DMatrix::from_element(1, 1, -1.0))];
    let mut rows = Vec::new();
    let refl = reflection_groupoid(&line).context("groupoids")?;
    audit("z2_reflection", &refl, &reflection, true, report, &mut rows)?;
    let triv = trivial_action_groupoid(&line).context("groupoids")?;
    audit("z2_trivial", &triv, &[AffineMap::identity(1), AffineMap::identity(1)], false, report, &mut rows)?;
    let sectors = sector_samples(3, &c.rotation_radii, c.rotation_angles);
    let rot = rotation_groupoid(3, &sectors).context("groupoids")?;
    let turns: Vec<AffineMap> = (0..3).map(|k| AffineMap::rotation(2.0 * std::f64::consts::PI * k as f64 / 3.0)).collect();
    audit("z3_rotation", &rot, &turns, true, report, &mut rows)?;
    diagrams(&line, report).context("groupoids")?;
    report.file(
        "objects.csv",
        csv(
            &["groupoid", "object", "point", "orbit", "isotropy_order", "effective_order", "natural_representation"],
            rows,
        ),
    );
    Ok(())
}

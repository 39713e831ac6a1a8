use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::action::MAX_CONDITION;
use super::groupoid::{isotropy, orbit_space, Backend, EpGroupoid, Morphism, Object};
use crate::error::{Error, Result};
use crate::linalg;

const FD_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regularity {
    Smooth,
    Ck(u32),
}

/// A functor between finite ep-groupoids with the Jacobian of its object
/// map at every object.
#[derive(Clone, Debug)]
pub struct Functor {
    pub name: String,
    pub regularity: Regularity,
    source: Arc<EpGroupoid>,
    target: Arc<EpGroupoid>,
    object_map: Vec<usize>,
    morphism_map: Vec<usize>,
    jacobians: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    /// Largest Jacobian condition number over the objects.
    pub worst_condition: f64,
    pub local_diffeo: bool,
    /// Two objects in distinct orbits whose images share an orbit.
    pub collapsed_pair: Option<(usize, usize)>,
    /// Representative of a target orbit not in the image.
    pub missed_orbit: Option<usize>,
    pub orbit_bijection: bool,
    /// Object whose isotropy is not mapped bijectively.
    pub isotropy_witness: Option<usize>,
    pub isotropy_bijection: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NaturalityReport {
    pub checked: usize,
    pub violations: usize,
    pub first_violation: Option<usize>,
    /// Set when `τ` is not a family of morphisms `F(x) -> G(x)`.
    pub type_error: Option<String>,
    pub pass: bool,
}

impl NaturalityReport {
    pub(crate) fn ill_typed(message: String) -> Self {
        NaturalityReport {
            checked: 0,
            violations: 0,
            first_violation: None,
            type_error: Some(message),
            pass: false,
        }
    }
}

impl Functor {
    /// Checks that sources, targets, identities and composites are preserved
    /// on the full table.
    pub fn new(
        name: impl Into<String>,
        source: &Arc<EpGroupoid>,
        target: &Arc<EpGroupoid>,
        object_map: Vec<usize>,
        morphism_map: Vec<usize>,
        jacobians: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let (no, nm) = (source.objects().len(), source.morphisms().len());
        if object_map.len() != no || jacobians.len() != no {
            return Err(Error::DimensionMismatch {
                expected: no,
                found: object_map.len().min(jacobians.len()),
            });
        }
        if morphism_map.len() != nm {
            return Err(Error::DimensionMismatch {
                expected: nm,
                found: morphism_map.len(),
            });
        }
        if object_map.iter().any(|&y| y >= target.objects().len())
            || morphism_map.iter().any(|&m| m >= target.morphisms().len())
        {
            return Err(Error::FunctorLaw("image outside the target groupoid".into()));
        }
        for m in 0..nm {
            let fm = morphism_map[m];
            if target.source(fm) != object_map[source.source(m)] || target.target(fm) != object_map[source.target(m)] {
                return Err(Error::FunctorLaw(format!("morphism {m} changes its ends")));
            }
        }
        for x in 0..no {
            if morphism_map[source.identity(x)] != target.identity(object_map[x]) {
                return Err(Error::FunctorLaw(format!("identity at object {x} not preserved")));
            }
        }
        for (&(g, f), &gf) in source.composition_table() {
            if target.compose(morphism_map[g], morphism_map[f]) != Some(morphism_map[gf]) {
                return Err(Error::FunctorLaw(format!("composite ({g}, {f}) not preserved")));
            }
        }
        Ok(Functor {
            name: name.into(),
            regularity: Regularity::Smooth,
            source: Arc::clone(source),
            target: Arc::clone(target),
            object_map,
            morphism_map,
            jacobians,
        })
    }

    pub fn identity(x: &Arc<EpGroupoid>) -> Self {
        let n = x.objects().len();
        Functor {
            name: format!("id_{}", x.name),
            regularity: Regularity::Smooth,
            source: Arc::clone(x),
            target: Arc::clone(x),
            object_map: (0..n).collect(),
            morphism_map: (0..x.morphisms().len()).collect(),
            jacobians: x
                .objects()
                .iter()
                .map(|o| DMatrix::identity(o.point.len(), o.point.len()))
                .collect(),
        }
    }

    /// Functor between translation groupoids induced by a point map `f` on
    /// the single chart and a group homomorphism `rho` with
    /// `f(g y) = rho(g) f(y)`: `x -> f(x)`, `(g, x) -> (rho(g), f(x))`.
    pub fn equivariant<F>(
        name: impl Into<String>,
        source: &Arc<EpGroupoid>,
        target: &Arc<EpGroupoid>,
        f: F,
        rho: &[usize],
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let (Backend::Translation(a), Backend::Translation(b)) = (source.backend(), target.backend()) else {
            return Err(Error::BackendUnsupported(
                "equivariant functors need translation groupoids".into(),
            ));
        };
        if !a.group.is_homomorphism(&b.group, rho) {
            return Err(Error::FunctorLaw("rho is not a group homomorphism".into()));
        }
        let mut object_map = Vec::with_capacity(source.objects().len());
        let mut jacobians = Vec::with_capacity(source.objects().len());
        for o in source.objects() {
            let y = target.find_object(0, &f(&o.point)).ok_or(Error::Uncharted)?;
            object_map.push(y);
            jacobians.push(linalg::fd_jacobian(&f, &o.point, b.dim, FD_STEP));
        }
        let morphism_map = source
            .morphisms()
            .iter()
            .map(|m| {
                let g = m.element.expect("translation morphisms are labelled");
                target.translate(object_map[m.source], rho[g]).ok_or(Error::Uncharted)
            })
            .collect::<Result<Vec<_>>>()?;
        Functor::new(name, source, target, object_map, morphism_map, jacobians)
    }

    pub fn source(&self) -> &Arc<EpGroupoid> {
        &self.source
    }

    pub fn target(&self) -> &Arc<EpGroupoid> {
        &self.target
    }

    pub fn object(&self, x: usize) -> usize {
        self.object_map[x]
    }

    pub fn morphism(&self, m: usize) -> usize {
        self.morphism_map[m]
    }

    pub fn jacobian(&self, x: usize) -> &DMatrix<f64> {
        &self.jacobians[x]
    }

    /// A morphism `a -> b` mapped to `m`, if any.
    pub fn lift(&self, m: usize, a: usize, b: usize) -> Option<usize> {
        self.source.hom(a, b).into_iter().find(|&h| self.morphism_map[h] == m)
    }

    /// The orbit-space map `|F|` as orbit indices.
    pub fn orbit_map(&self) -> Vec<usize> {
        let (src, tgt) = (orbit_space(&self.source), orbit_space(&self.target));
        src.representatives
            .iter()
            .map(|&x| tgt.projection[self.object_map[x]])
            .collect()
    }
}

/// `g ∘ f`.
pub fn compose(f: &Functor, g: &Functor) -> Result<Functor> {
    if !Arc::ptr_eq(&f.target, &g.source) {
        return Err(Error::TypeMismatch(format!("{} does not land in the source of {}", f.name, g.name)));
    }
    let object_map: Vec<usize> = f.object_map.iter().map(|&y| g.object_map[y]).collect();
    let morphism_map = f.morphism_map.iter().map(|&m| g.morphism_map[m]).collect();
    let jacobians = f
        .jacobians
        .iter()
        .zip(&f.object_map)
        .map(|(j, &y)| &g.jacobians[y] * j)
        .collect();
    let regularity = match (f.regularity, g.regularity) {
        (Regularity::Smooth, r) | (r, Regularity::Smooth) => r,
        (Regularity::Ck(a), Regularity::Ck(b)) => Regularity::Ck(a.min(b)),
    };
    Ok(Functor {
        name: format!("{}∘{}", g.name, f.name),
        regularity,
        source: Arc::clone(&f.source),
        target: Arc::clone(&g.target),
        object_map,
        morphism_map,
        jacobians,
    })
}

/// The full subgroupoid on `objects` (in the given order) and its
/// inclusion functor.
pub fn full_subgroupoid(x: &Arc<EpGroupoid>, objects: &[usize]) -> Result<(Arc<EpGroupoid>, Functor)> {
    let mut index = HashMap::new();
    for (i, &o) in objects.iter().enumerate() {
        if o >= x.objects().len() || index.insert(o, i).is_some() {
            return Err(Error::TypeMismatch(format!("object {o} is missing or repeated")));
        }
    }
    let mut morphisms = Vec::new();
    let mut morphism_map = Vec::new();
    let mut new_id = HashMap::new();
    for &o in objects {
        for &m in x.outgoing(o) {
            if let Some(&t) = index.get(&x.target(m)) {
                new_id.insert(m, morphisms.len());
                morphism_map.push(m);
                let old = x.morphism(m);
                morphisms.push(Morphism {
                    source: index[&o],
                    target: t,
                    element: old.element,
                    germ: old.germ.clone(),
                });
            }
        }
    }
    let mut table = HashMap::new();
    for (&(g, f), &gf) in x.composition_table() {
        if let (Some(&g2), Some(&f2)) = (new_id.get(&g), new_id.get(&f)) {
            table.insert((g2, f2), new_id[&gf]);
        }
    }
    let objs: Vec<Object> = objects.iter().map(|&o| x.object(o).clone()).collect();
    let sub = Arc::new(EpGroupoid::assemble(
        format!("{}|sub", x.name),
        objs,
        morphisms,
        table,
        Backend::Table,
    )?);
    let jacobians = objects
        .iter()
        .map(|&o| {
            let d = x.object(o).point.len();
            DMatrix::identity(d, d)
        })
        .collect();
    let inclusion = Functor::new(
        format!("incl_{}", sub.name),
        &sub,
        x,
        objects.to_vec(),
        morphism_map,
        jacobians,
    )?;
    Ok((sub, inclusion))
}

/// Local diffeomorphism on objects, bijection on orbits (both directions)
/// and bijection on isotropy groups, all on the sampled tables.
pub fn is_equivalence(f: &Functor) -> Result<EquivalenceReport> {
    let mut worst_condition: f64 = 1.0;
    for j in &f.jacobians {
        let c = if j.is_square() {
            linalg::condition_number(j)
        } else {
            f64::INFINITY
        };
        worst_condition = worst_condition.max(c);
    }
    let local_diffeo = worst_condition < MAX_CONDITION;

    let (src, tgt) = (orbit_space(&f.source), orbit_space(&f.target));
    let image = f.orbit_map();
    let mut first_preimage: Vec<Option<usize>> = vec![None; tgt.len()];
    let mut collapsed_pair = None;
    for (o, &t) in image.iter().enumerate() {
        match first_preimage[t] {
            None => first_preimage[t] = Some(o),
            Some(p) if collapsed_pair.is_none() => {
                collapsed_pair = Some((src.representatives[p], src.representatives[o]));
            }
            Some(_) => {}
        }
    }
    let missed_orbit = first_preimage
        .iter()
        .position(|p| p.is_none())
        .map(|t| tgt.representatives[t]);
    let orbit_bijection = collapsed_pair.is_none() && missed_orbit.is_none();

    let mut isotropy_witness = None;
    for x in 0..f.source.objects().len() {
        let gx = isotropy(&f.source, x)?;
        let gy = isotropy(&f.target, f.object_map[x])?;
        let mut images: Vec<usize> = gx.elements.iter().map(|&m| f.morphism_map[m]).collect();
        images.sort_unstable();
        images.dedup();
        if images.len() != gx.order() || gx.order() != gy.order() {
            isotropy_witness = Some(x);
            break;
        }
    }
    let isotropy_bijection = isotropy_witness.is_none();
    Ok(EquivalenceReport {
        worst_condition,
        local_diffeo,
        collapsed_pair,
        missed_orbit,
        orbit_bijection,
        isotropy_witness,
        isotropy_bijection,
        pass: local_diffeo && orbit_bijection && isotropy_bijection,
    })
}

/// Counts morphisms `h: x -> x'` with `τ(x') ∘ F(h) != G(h) ∘ τ(x)`.
pub fn natural_transformation_check(f: &Functor, g: &Functor, tau: &[usize]) -> Result<NaturalityReport> {
    if !Arc::ptr_eq(&f.source, &g.source) || !Arc::ptr_eq(&f.target, &g.target) {
        return Err(Error::TypeMismatch("functors do not share source and target".into()));
    }
    let (x, y) = (&f.source, &f.target);
    if tau.len() != x.objects().len() {
        return Err(Error::DimensionMismatch {
            expected: x.objects().len(),
            found: tau.len(),
        });
    }
    for (o, &t) in tau.iter().enumerate() {
        if t >= y.morphisms().len() || y.source(t) != f.object_map[o] || y.target(t) != g.object_map[o] {
            return Err(Error::TypeMismatch(format!("τ({o}) is not a morphism F({o}) -> G({o})")));
        }
    }
    let mut violations = 0;
    let mut first_violation = None;
    for h in 0..x.morphisms().len() {
        let (s, t) = (x.source(h), x.target(h));
        let lhs = y.compose(tau[t], f.morphism_map[h]);
        let rhs = y.compose(g.morphism_map[h], tau[s]);
        if lhs.is_none() || lhs != rhs {
            violations += 1;
            first_violation.get_or_insert(h);
        }
    }
    Ok(NaturalityReport {
        checked: x.morphisms().len(),
        violations,
        first_violation,
        type_error: None,
        pass: violations == 0,
    })
}

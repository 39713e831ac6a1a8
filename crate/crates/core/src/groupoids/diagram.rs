use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::functor::{compose, is_equivalence, natural_transformation_check, EquivalenceReport, Functor, NaturalityReport};
use super::groupoid::{orbit_space, Backend, EpGroupoid, Morphism, Object};
use crate::error::{Error, Result};

/// `X <-F- A -Φ-> Y` with `F` an equivalence.
#[derive(Clone, Debug)]
pub struct Diagram {
    pub left: Functor,
    pub right: Functor,
}

/// `H: A' -> A` together with `τ_left: F∘H => F'` and `τ_right: Φ∘H => Φ'`.
#[derive(Clone, Debug)]
pub struct RefinementWitness {
    pub h: Functor,
    pub tau_left: Vec<usize>,
    pub tau_right: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementReport {
    pub equivalence: EquivalenceReport,
    pub left: NaturalityReport,
    pub right: NaturalityReport,
    /// Representatives of `X`-orbits on which `|d|` and `|d'|` differ.
    pub orbit_mismatches: Vec<usize>,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct Composite {
    pub diagram: Diagram,
    pub apex: Arc<EpGroupoid>,
    /// Projections of the weak fibered product to the two apexes.
    pub to_first: Functor,
    pub to_second: Functor,
    /// The middle morphism `φ: Φ1(a) -> F2(b)` of each apex object.
    pub middle: Vec<usize>,
    /// Representatives of `X`-orbits where `|composite| != |d2| ∘ |d1|`.
    pub orbit_mismatches: Vec<usize>,
    pub pass: bool,
}

impl Diagram {
    pub fn new(left: Functor, right: Functor) -> Result<Self> {
        if !Arc::ptr_eq(left.source(), right.source()) {
            return Err(Error::TypeMismatch("legs do not share an apex".into()));
        }
        let rep = is_equivalence(&left)?;
        if !rep.pass {
            return Err(Error::NotAnEquivalence(format!(
                "{}: local diffeo {}, orbit bijection {}, isotropy bijection {}",
                left.name, rep.local_diffeo, rep.orbit_bijection, rep.isotropy_bijection
            )));
        }
        Ok(Diagram { left, right })
    }

    /// `X <-id- X -F-> Y`.
    pub fn from_functor(f: Functor) -> Result<Self> {
        Diagram::new(Functor::identity(f.source()), f)
    }

    /// `Y <-Φ- A -F-> X`, defined when `Φ` is an equivalence.
    pub fn reversed(&self) -> Result<Self> {
        Diagram::new(self.right.clone(), self.left.clone())
    }

    pub fn apex(&self) -> &Arc<EpGroupoid> {
        self.left.source()
    }

    pub fn domain(&self) -> &Arc<EpGroupoid> {
        self.left.target()
    }

    pub fn codomain(&self) -> &Arc<EpGroupoid> {
        self.right.target()
    }

    /// `|d| = |Φ| ∘ |F|⁻¹` on orbit indices.
    pub fn orbit_map(&self) -> Vec<usize> {
        let (fl, fr) = (self.left.orbit_map(), self.right.orbit_map());
        let mut out = vec![usize::MAX; orbit_space(self.domain()).len()];
        for (a, &x) in fl.iter().enumerate() {
            out[x] = fr[a];
        }
        out
    }
}

/// Checks that `H` is an equivalence, that both naturality squares
/// commute, and that `|d| = |d'|` on every sampled orbit.
pub fn refinement_check(d: &Diagram, d_prime: &Diagram, w: &RefinementWitness) -> Result<RefinementReport> {
    if !Arc::ptr_eq(w.h.source(), d_prime.apex()) || !Arc::ptr_eq(w.h.target(), d.apex()) {
        return Err(Error::TypeMismatch("H must run from the apex of d' to the apex of d".into()));
    }
    if !Arc::ptr_eq(d.domain(), d_prime.domain()) || !Arc::ptr_eq(d.codomain(), d_prime.codomain()) {
        return Err(Error::TypeMismatch("diagrams have different ends".into()));
    }
    let equivalence = is_equivalence(&w.h)?;
    let naturality = |f: &Functor, g: &Functor, tau: &[usize]| match natural_transformation_check(f, g, tau) {
        Err(Error::TypeMismatch(msg)) => Ok(NaturalityReport::ill_typed(msg)),
        Err(Error::DimensionMismatch { expected, found }) => Ok(NaturalityReport::ill_typed(format!(
            "τ has {found} components for {expected} objects"
        ))),
        other => other,
    };
    let left = naturality(&compose(&w.h, &d.left)?, &d_prime.left, &w.tau_left)?;
    let right = naturality(&compose(&w.h, &d.right)?, &d_prime.right, &w.tau_right)?;
    let reps = orbit_space(d.domain()).representatives;
    let orbit_mismatches: Vec<usize> = d
        .orbit_map()
        .iter()
        .zip(d_prime.orbit_map())
        .zip(&reps)
        .filter(|((a, b), _)| **a != *b)
        .map(|(_, &r)| r)
        .collect();
    let pass = equivalence.pass && left.pass && right.pass && orbit_mismatches.is_empty();
    Ok(RefinementReport {
        equivalence,
        left,
        right,
        orbit_mismatches,
        pass,
    })
}

/// The witness refining `d` by `d''` from witnesses for `(d, d')` and
/// `(d', d'')`: `H = H1 ∘ H2` and `τ(a) = τ2(a) ∘ τ1(H2 a)`.
pub fn compose_witnesses(d: &Diagram, outer: &RefinementWitness, inner: &RefinementWitness) -> Result<RefinementWitness> {
    let h = compose(&inner.h, &outer.h)?;
    let n = inner.h.source().objects().len();
    let chain = |t1: &[usize], t2: &[usize], home: &EpGroupoid| -> Result<Vec<usize>> {
        (0..n)
            .map(|a| {
                home.compose(t2[a], t1[inner.h.object(a)])
                    .ok_or_else(|| Error::TypeMismatch(format!("transformations do not chain at object {a}")))
            })
            .collect()
    };
    let tau_left = chain(&outer.tau_left, &inner.tau_left, d.domain())?;
    let tau_right = chain(&outer.tau_right, &inner.tau_right, d.codomain())?;
    Ok(RefinementWitness { h, tau_left, tau_right })
}

/// Weak fibered product `A ×_Y B` for `d1 = (F1, Φ1): X <- A -> Y` and
/// `d2 = (F2, Φ2): Y <- B -> Z`, with objects `(a, φ, b)` for
/// `φ: Φ1(a) -> F2(b)` and morphisms `(α, β)` with
/// `φ' ∘ Φ1(α) = F2(β) ∘ φ`. Objects carry the chart coordinates of `a`.
pub fn compose_generalized(d1: &Diagram, d2: &Diagram) -> Result<Composite> {
    let y = d1.codomain();
    if !Arc::ptr_eq(y, d2.domain()) {
        return Err(Error::TypeMismatch("diagrams do not share the middle groupoid".into()));
    }
    let (a_grp, b_grp) = (d1.apex(), d2.apex());
    let (phi1, f2) = (&d1.right, &d2.left);

    let mut triples = Vec::new();
    let mut index = HashMap::new();
    for a in 0..a_grp.objects().len() {
        for b in 0..b_grp.objects().len() {
            for phi in y.hom(phi1.object(a), f2.object(b)) {
                index.insert((a, phi, b), triples.len());
                triples.push((a, phi, b));
            }
        }
    }
    if triples.is_empty() {
        return Err(Error::EmptyFiberedProduct);
    }
    let mut morphisms = Vec::new();
    let mut key = HashMap::new();
    let mut pairs = Vec::new();
    for (c, &(a, phi, b)) in triples.iter().enumerate() {
        for &alpha in a_grp.outgoing(a) {
            for &beta in b_grp.outgoing(b) {
                let back = y.inverse(phi1.morphism(alpha));
                let phi_t = y
                    .compose(f2.morphism(beta), phi)
                    .and_then(|m| y.compose(m, back))
                    .ok_or_else(|| Error::GroupoidAxiom("middle composites missing".into()))?;
                let target = index[&(a_grp.target(alpha), phi_t, b_grp.target(beta))];
                key.insert((c, alpha, beta), morphisms.len());
                pairs.push((alpha, beta));
                morphisms.push(Morphism {
                    source: c,
                    target,
                    element: None,
                    germ: a_grp.morphism(alpha).germ.clone(),
                });
            }
        }
    }
    let mut table = HashMap::new();
    for f in 0..morphisms.len() {
        let (c, (a1, b1)) = (morphisms[f].source, pairs[f]);
        let ct = morphisms[f].target;
        let (a_t, _, b_t) = triples[ct];
        for &a2 in a_grp.outgoing(a_t) {
            for &b2 in b_grp.outgoing(b_t) {
                let g = key[&(ct, a2, b2)];
                let aa = a_grp.compose(a2, a1).expect("composable");
                let bb = b_grp.compose(b2, b1).expect("composable");
                table.insert((g, f), key[&(c, aa, bb)]);
            }
        }
    }
    let objects: Vec<Object> = triples.iter().map(|&(a, _, _)| a_grp.object(a).clone()).collect();
    let apex = Arc::new(EpGroupoid::assemble(
        format!("{}×{}", a_grp.name, b_grp.name),
        objects,
        morphisms,
        table,
        Backend::Table,
    )?);

    let dim = |g: &EpGroupoid, o: usize| g.object(o).point.len();
    let to_first = Functor::new(
        "pr_A",
        &apex,
        a_grp,
        triples.iter().map(|t| t.0).collect(),
        pairs.iter().map(|p| p.0).collect(),
        triples.iter().map(|&(a, _, _)| DMatrix::identity(dim(a_grp, a), dim(a_grp, a))).collect(),
    )?;
    let jac_b = triples
        .iter()
        .map(|&(a, phi, b)| {
            let inv = f2
                .jacobian(b)
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::NonInvertible(format!("Jacobian of {} at {b}", f2.name)))?;
            Ok(inv * &y.morphism(phi).germ.linear * phi1.jacobian(a))
        })
        .collect::<Result<Vec<_>>>()?;
    let to_second = Functor::new(
        "pr_B",
        &apex,
        b_grp,
        triples.iter().map(|t| t.2).collect(),
        pairs.iter().map(|p| p.1).collect(),
        jac_b,
    )?;
    let diagram = Diagram::new(compose(&to_first, &d1.left)?, compose(&to_second, &d2.right)?)?;
    let (m1, m2, mc) = (d1.orbit_map(), d2.orbit_map(), diagram.orbit_map());
    let reps = orbit_space(d1.domain()).representatives;
    let orbit_mismatches: Vec<usize> = (0..mc.len())
        .filter(|&o| m1[o] == usize::MAX || m2[m1[o]] != mc[o])
        .map(|o| reps[o])
        .collect();
    let pass = orbit_mismatches.is_empty();
    Ok(Composite {
        diagram,
        apex,
        to_first,
        to_second,
        middle: triples.iter().map(|t| t.1).collect(),
        orbit_mismatches,
        pass,
    })
}

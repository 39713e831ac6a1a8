use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use serde::Serialize;

use super::action::{AffineMap, GroupAction, MAP_TOL};
use crate::error::{Error, Result};
use crate::linalg;

/// Chart-coordinate distance under which two points are the same object.
pub const POINT_TOL: f64 = 1e-9;
pub const MAX_OBJECTS: usize = 100_000;
pub const MAX_MORPHISMS: usize = 2_000_000;
/// Offset of the probe points used to test germs near an object.
const NEAR: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Object {
    pub chart: usize,
    pub point: Vec<f64>,
}

impl Object {
    pub fn same_point(&self, chart: usize, point: &[f64]) -> bool {
        self.chart == chart
            && self.point.len() == point.len()
            && linalg::euclidean_norm(&linalg::sub(&self.point, point)) <= POINT_TOL
    }
}

/// An arrow `source -> target` with its local diffeomorphism `t ∘ s⁻¹`
/// in chart coordinates.
#[derive(Clone, Debug)]
pub struct Morphism {
    pub source: usize,
    pub target: usize,
    /// Group element for translation groupoids.
    pub element: Option<usize>,
    pub germ: AffineMap,
}

#[derive(Clone, Debug)]
pub enum Backend {
    Translation(Arc<GroupAction>),
    Table,
}

/// A finite ep-groupoid over sampled objects with an exact composition table.
#[derive(Clone, Debug)]
pub struct EpGroupoid {
    pub name: String,
    objects: Vec<Object>,
    morphisms: Vec<Morphism>,
    backend: Backend,
    identity: Vec<usize>,
    inverse: Vec<usize>,
    compose: HashMap<(usize, usize), usize>,
    outgoing: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitSpace {
    /// Smallest object index in each orbit.
    pub representatives: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    /// Object index to orbit index.
    pub projection: Vec<usize>,
}

impl OrbitSpace {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IsotropyGroup {
    pub object: usize,
    /// Morphisms `x -> x`; entry 0 is the identity.
    pub elements: Vec<usize>,
    /// `table[i][j]` is the index of `elements[i] ∘ elements[j]`.
    pub table: Vec<Vec<usize>>,
    /// Indices of elements whose germ is the identity near `x`.
    pub non_effective: Vec<usize>,
    /// Cosets `g G_ne`, each sorted, ordered by smallest member.
    pub cosets: Vec<Vec<usize>>,
    /// Multiplication of the effective quotient on coset indices.
    pub effective_table: Vec<Vec<usize>>,
}

impl IsotropyGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn effective_order(&self) -> usize {
        self.cosets.len()
    }
}

impl EpGroupoid {
    /// Validates the groupoid axioms exactly on the table: composites have
    /// the right ends, every composable pair has a composite, identities and
    /// inverses exist, composition is associative, and germs are local
    /// diffeomorphisms compatible with composition.
    pub fn assemble(
        name: impl Into<String>,
        objects: Vec<Object>,
        morphisms: Vec<Morphism>,
        compose: HashMap<(usize, usize), usize>,
        backend: Backend,
    ) -> Result<Self> {
        let n = objects.len();
        if n > MAX_OBJECTS {
            return Err(Error::TableOverflow(MAX_OBJECTS));
        }
        if morphisms.len() > MAX_MORPHISMS {
            return Err(Error::TableOverflow(MAX_MORPHISMS));
        }
        let mut outgoing = vec![Vec::new(); n];
        let mut incoming = vec![Vec::new(); n];
        for (i, m) in morphisms.iter().enumerate() {
            if m.source >= n || m.target >= n {
                return Err(Error::GroupoidAxiom(format!("morphism {i} has an end outside the objects")));
            }
            let (s, t) = (&objects[m.source], &objects[m.target]);
            if !m.germ.is_local_diffeo() || m.germ.dim_in() != s.point.len() || m.germ.dim_out() != t.point.len() {
                return Err(Error::GroupoidAxiom(format!("germ of morphism {i} is not a local diffeomorphism")));
            }
            if !t.same_point(t.chart, &m.germ.apply(&s.point)) {
                return Err(Error::GroupoidAxiom(format!("germ of morphism {i} misses its target")));
            }
            outgoing[m.source].push(i);
            incoming[m.target].push(i);
        }
        let composable: usize = (0..n).map(|x| incoming[x].len() * outgoing[x].len()).sum();
        if composable != compose.len() {
            return Err(Error::GroupoidAxiom(format!(
                "{} composites for {composable} composable pairs",
                compose.len()
            )));
        }
        for (&(g, f), &gf) in &compose {
            let ok = g < morphisms.len()
                && f < morphisms.len()
                && gf < morphisms.len()
                && morphisms[f].target == morphisms[g].source
                && morphisms[gf].source == morphisms[f].source
                && morphisms[gf].target == morphisms[g].target;
            if !ok {
                return Err(Error::GroupoidAxiom(format!("composite of ({g}, {f}) has the wrong ends")));
            }
            let x = &objects[morphisms[f].source];
            let lhs = morphisms[gf].germ.clone();
            let rhs = morphisms[g].germ.after(&morphisms[f].germ);
            if !germs_agree_near(&lhs, &rhs, &x.point) {
                return Err(Error::GroupoidAxiom(format!("germ of ({g}, {f}) is not the composite germ")));
            }
        }
        let mut g = EpGroupoid {
            name: name.into(),
            objects,
            morphisms,
            backend,
            identity: Vec::new(),
            inverse: Vec::new(),
            compose,
            outgoing,
        };
        g.identity = (0..n)
            .map(|x| {
                g.outgoing[x]
                    .iter()
                    .copied()
                    .find(|&e| g.morphisms[e].target == x && g.is_identity_at(e, x, &incoming[x]))
                    .ok_or_else(|| Error::GroupoidAxiom(format!("object {x} has no identity")))
            })
            .collect::<Result<_>>()?;
        g.inverse = (0..g.morphisms.len())
            .map(|f| {
                let (s, t) = (g.morphisms[f].source, g.morphisms[f].target);
                g.outgoing[t]
                    .iter()
                    .copied()
                    .find(|&h| {
                        g.morphisms[h].target == s
                            && g.compose[&(h, f)] == g.identity[s]
                            && g.compose[&(f, h)] == g.identity[t]
                    })
                    .ok_or_else(|| Error::GroupoidAxiom(format!("morphism {f} has no inverse")))
            })
            .collect::<Result<_>>()?;
        for f in 0..g.morphisms.len() {
            for &h in &g.outgoing[g.morphisms[f].target] {
                let hf = g.compose[&(h, f)];
                for &k in &g.outgoing[g.morphisms[h].target] {
                    if g.compose[&(k, hf)] != g.compose[&(g.compose[&(k, h)], f)] {
                        return Err(Error::GroupoidAxiom(format!("associativity fails at ({k}, {h}, {f})")));
                    }
                }
            }
        }
        Ok(g)
    }

    fn is_identity_at(&self, e: usize, x: usize, incoming: &[usize]) -> bool {
        self.outgoing[x].iter().all(|&g| self.compose[&(g, e)] == g)
            && incoming.iter().all(|&f| self.compose[&(e, f)] == f)
    }

    /// Translation groupoid of `action` on the closure of `samples` under
    /// the group; morphism `(g, x)` runs from `x` to `g x`.
    pub fn translation(name: impl Into<String>, action: Arc<GroupAction>, samples: &[Vec<f64>]) -> Result<Self> {
        let k = action.group.order();
        let mut objects: Vec<Object> = Vec::new();
        let find = |objects: &[Object], p: &[f64]| objects.iter().position(|o| o.same_point(0, p));
        for s in samples {
            if s.len() != action.dim {
                return Err(Error::DimensionMismatch {
                    expected: action.dim,
                    found: s.len(),
                });
            }
            for g in 0..k {
                let p = action.act(g, s);
                if find(&objects, &p).is_none() {
                    if objects.len() == MAX_OBJECTS {
                        return Err(Error::TableOverflow(MAX_OBJECTS));
                    }
                    objects.push(Object { chart: 0, point: p });
                }
            }
        }
        if objects.len() * k > MAX_MORPHISMS {
            return Err(Error::TableOverflow(MAX_MORPHISMS));
        }
        let id = |x: usize, g: usize| x * k + g;
        let mut morphisms = Vec::with_capacity(objects.len() * k);
        for (x, o) in objects.iter().enumerate() {
            for g in 0..k {
                let target = find(&objects, &action.act(g, &o.point))
                    .ok_or_else(|| Error::GroupoidAxiom("sample set is not closed under the action".into()))?;
                morphisms.push(Morphism {
                    source: x,
                    target,
                    element: Some(g),
                    germ: action.maps[g].clone(),
                });
            }
        }
        let mut compose = HashMap::with_capacity(morphisms.len() * k);
        for x in 0..objects.len() {
            for g in 0..k {
                let gx = morphisms[id(x, g)].target;
                for h in 0..k {
                    compose.insert((id(gx, h), id(x, g)), id(x, action.group.mul(h, g)));
                }
            }
        }
        EpGroupoid::assemble(name, objects, morphisms, compose, Backend::Translation(action))
    }

    pub fn objects(&self) -> &[Object] {
        &self.objects
    }

    pub fn object(&self, x: usize) -> &Object {
        &self.objects[x]
    }

    pub fn morphisms(&self) -> &[Morphism] {
        &self.morphisms
    }

    pub fn morphism(&self, m: usize) -> &Morphism {
        &self.morphisms[m]
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn source(&self, m: usize) -> usize {
        self.morphisms[m].source
    }

    pub fn target(&self, m: usize) -> usize {
        self.morphisms[m].target
    }

    pub fn identity(&self, x: usize) -> usize {
        self.identity[x]
    }

    pub fn inverse(&self, m: usize) -> usize {
        self.inverse[m]
    }

    /// `g ∘ f`, `None` when not composable.
    pub fn compose(&self, g: usize, f: usize) -> Option<usize> {
        self.compose.get(&(g, f)).copied()
    }

    pub fn composition_table(&self) -> &HashMap<(usize, usize), usize> {
        &self.compose
    }

    pub fn outgoing(&self, x: usize) -> &[usize] {
        &self.outgoing[x]
    }

    pub fn hom(&self, x: usize, y: usize) -> Vec<usize> {
        self.outgoing[x]
            .iter()
            .copied()
            .filter(|&m| self.morphisms[m].target == y)
            .collect()
    }

    pub fn find_object(&self, chart: usize, point: &[f64]) -> Option<usize> {
        self.objects.iter().position(|o| o.same_point(chart, point))
    }

    /// The morphism out of `x` labelled by group element `g`.
    pub fn translate(&self, x: usize, g: usize) -> Option<usize> {
        self.outgoing[x]
            .iter()
            .copied()
            .find(|&m| self.morphisms[m].element == Some(g))
    }

    fn check_object(&self, x: usize) -> Result<()> {
        if x >= self.objects.len() {
            return Err(Error::DimensionMismatch {
                expected: self.objects.len(),
                found: x,
            });
        }
        Ok(())
    }
}

/// Germs agree at `x` and at the probe points `x ± NEAR e_i`.
pub(crate) fn germs_agree_near(a: &AffineMap, b: &AffineMap, x: &[f64]) -> bool {
    probe_points(x).iter().all(|p| {
        let (u, v) = (a.apply(p), b.apply(p));
        u.len() == v.len() && linalg::euclidean_norm(&linalg::sub(&u, &v)) <= MAP_TOL
    })
}

fn probe_points(x: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![x.to_vec()];
    for i in 0..x.len() {
        for sign in [-1.0, 1.0] {
            let mut p = x.to_vec();
            p[i] += sign * NEAR;
            out.push(p);
        }
    }
    out
}

/// Connected components of the morphism graph, in order of smallest member.
pub fn orbit_space(x: &EpGroupoid) -> OrbitSpace {
    let n = x.objects.len();
    let mut projection = vec![usize::MAX; n];
    let mut members = Vec::new();
    for start in 0..n {
        if projection[start] != usize::MAX {
            continue;
        }
        let orbit = members.len();
        let mut list = vec![start];
        projection[start] = orbit;
        let mut queue = VecDeque::from([start]);
        while let Some(o) = queue.pop_front() {
            for &m in &x.outgoing[o] {
                let t = x.morphisms[m].target;
                if projection[t] == usize::MAX {
                    projection[t] = orbit;
                    list.push(t);
                    queue.push_back(t);
                }
            }
        }
        list.sort_unstable();
        members.push(list);
    }
    OrbitSpace {
        representatives: members.iter().map(|m| m[0]).collect(),
        members,
        projection,
    }
}

/// All morphisms `x -> x`, with the non-effective part read off from the
/// germs on probe points near `x`.
pub fn isotropy(g: &EpGroupoid, x: usize) -> Result<IsotropyGroup> {
    g.check_object(x)?;
    let id = g.identity(x);
    let mut elements = vec![id];
    elements.extend(g.hom(x, x).into_iter().filter(|&m| m != id));
    let pos = |m: usize| elements.iter().position(|&e| e == m).expect("closed under composition");
    let table: Vec<Vec<usize>> = elements
        .iter()
        .map(|&a| elements.iter().map(|&b| pos(g.compose[&(a, b)])).collect())
        .collect();
    let point = &g.objects[x].point;
    let identity_germ = AffineMap::identity(point.len());
    let non_effective: Vec<usize> = (0..elements.len())
        .filter(|&i| germs_agree_near(&g.morphisms[elements[i]].germ, &identity_germ, point))
        .collect();
    let mut cosets: Vec<Vec<usize>> = Vec::new();
    let mut coset_of = vec![usize::MAX; elements.len()];
    for i in 0..elements.len() {
        if coset_of[i] != usize::MAX {
            continue;
        }
        let mut c: Vec<usize> = non_effective.iter().map(|&n| table[i][n]).collect();
        c.sort_unstable();
        for &j in &c {
            coset_of[j] = cosets.len();
        }
        cosets.push(c);
    }
    let effective_table = cosets
        .iter()
        .map(|a| cosets.iter().map(|b| coset_of[table[a[0]][b[0]]]).collect())
        .collect();
    Ok(IsotropyGroup {
        object: x,
        elements,
        table,
        non_effective,
        cosets,
        effective_table,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NaturalRepresentation {
    pub object: usize,
    /// Radius of the chart ball around the object; `U` is its largest
    /// isotropy-invariant part.
    pub radius: f64,
    pub neighborhood: Vec<usize>,
    /// Group elements of the isotropy, `φ(g)` being the action of `g`.
    pub elements: Vec<usize>,
    /// `Γ(g, x) = g` failures.
    pub identity_violations: usize,
    /// `Γ(g, y)` missing, with wrong ends, or leaving `U`.
    pub section_violations: usize,
    pub morphisms_checked: usize,
    /// Morphisms inside `U` hit by zero or several `Γ(g, y)`.
    pub uniqueness_violations: usize,
    pub pass: bool,
}

/// Builds `U`, `φ` and `Γ(g, y) = (g, y)` at `x` for a translation
/// groupoid and checks the three defining properties on every sampled
/// object and morphism in `U`.
pub fn natural_representation(g: &EpGroupoid, x: usize) -> Result<NaturalRepresentation> {
    g.check_object(x)?;
    let action = match &g.backend {
        Backend::Translation(a) => Arc::clone(a),
        Backend::Table => {
            return Err(Error::BackendUnsupported(
                "natural representation needs a translation groupoid".into(),
            ))
        }
    };
    let iso = isotropy(g, x)?;
    let elements: Vec<usize> = iso
        .elements
        .iter()
        .map(|&m| g.morphisms[m].element.expect("translation morphisms are labelled"))
        .collect();
    let point = &g.objects[x].point;
    let mut radius = f64::INFINITY;
    for (h, map) in action.maps.iter().enumerate() {
        let d = linalg::euclidean_norm(&linalg::sub(&action.act(h, point), point));
        if d > POINT_TOL && !elements.contains(&h) {
            let norm = linalg::sorted_svd(&map.linear).singular_values[0];
            radius = radius.min(0.5 * d / (1.0 + norm));
        }
    }
    if !radius.is_finite() {
        radius = 1.0;
    }
    let in_ball = |p: &[f64]| linalg::euclidean_norm(&linalg::sub(p, point)) < radius;
    // The largest G_x-invariant part of the ball.
    let in_u = |y: usize| {
        g.objects[y].chart == g.objects[x].chart
            && elements.iter().all(|&e| {
                g.translate(y, e)
                    .is_some_and(|m| in_ball(&g.objects[g.morphisms[m].target].point))
            })
    };
    let neighborhood: Vec<usize> = (0..g.objects.len()).filter(|&y| in_u(y)).collect();

    let identity_violations = iso
        .elements
        .iter()
        .zip(&elements)
        .filter(|(&m, &e)| g.translate(x, e) != Some(m))
        .count();
    let mut section_violations = 0;
    for &y in &neighborhood {
        for &e in &elements {
            let ok = g.translate(y, e).is_some_and(|m| {
                let t = g.morphisms[m].target;
                g.morphisms[m].source == y
                    && g.objects[t].same_point(g.objects[y].chart, &action.act(e, &g.objects[y].point))
                    && in_u(t)
            });
            if !ok {
                section_violations += 1;
            }
        }
    }
    let mut morphisms_checked = 0;
    let mut uniqueness_violations = 0;
    for &y in &neighborhood {
        for &m in &g.outgoing[y] {
            if !in_u(g.morphisms[m].target) {
                continue;
            }
            morphisms_checked += 1;
            let hits = elements.iter().filter(|&&e| g.translate(y, e) == Some(m)).count();
            if hits != 1 {
                uniqueness_violations += 1;
            }
        }
    }
    Ok(NaturalRepresentation {
        object: x,
        radius,
        neighborhood,
        elements,
        identity_violations,
        section_violations,
        morphisms_checked,
        uniqueness_violations,
        pass: identity_violations == 0 && section_violations == 0 && uniqueness_violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::super::action::FiniteGroup;
    use super::*;

    #[test]
    fn missing_composite_rejected() {
        let objects = vec![Object {
            chart: 0,
            point: vec![0.0],
        }];
        let morphisms = vec![Morphism {
            source: 0,
            target: 0,
            element: None,
            germ: AffineMap::identity(1),
        }];
        assert!(EpGroupoid::assemble("broken", objects, morphisms, HashMap::new(), Backend::Table).is_err());
    }

    #[test]
    fn translation_closes_samples() {
        let a = Arc::new(GroupAction::new(FiniteGroup::cyclic(2), vec![AffineMap::identity(1), AffineMap::linear(nalgebra::DMatrix::from_element(1, 1, -1.0))]).unwrap());
        let g = EpGroupoid::translation("z2", a, &[vec![0.5]]).unwrap();
        assert_eq!(g.objects().len(), 2);
        assert_eq!(g.morphisms().len(), 4);
    }
}

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Entrywise tolerance for comparing coordinate maps.
pub const MAP_TOL: f64 = 1e-9;
/// Condition numbers at or above this do not count as local diffeomorphisms.
pub const MAX_CONDITION: f64 = 1e8;

/// `y -> A y + b` on chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub linear: DMatrix<f64>,
    pub translation: DVector<f64>,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        if linear.nrows() != translation.len() {
            return Err(Error::DimensionMismatch {
                expected: linear.nrows(),
                found: translation.len(),
            });
        }
        Ok(AffineMap { linear, translation })
    }

    pub fn linear(linear: DMatrix<f64>) -> Self {
        let n = linear.nrows();
        AffineMap {
            linear,
            translation: DVector::zeros(n),
        }
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap::linear(DMatrix::identity(dim, dim))
    }

    /// Rotation of the plane by `angle`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        AffineMap::linear(DMatrix::from_row_slice(2, 2, &[c, -s, s, c]))
    }

    pub fn dim_in(&self) -> usize {
        self.linear.ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.linear.nrows()
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        (&self.linear * DVector::from_column_slice(y) + &self.translation)
            .as_slice()
            .to_vec()
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            linear: &self.linear * &inner.linear,
            translation: &self.linear * &inner.translation + &self.translation,
        }
    }

    pub fn approx_eq(&self, other: &AffineMap, tol: f64) -> bool {
        self.linear.shape() == other.linear.shape()
            && (&self.linear - &other.linear).amax() <= tol
            && (&self.translation - &other.translation).amax() <= tol
    }

    pub fn is_local_diffeo(&self) -> bool {
        self.dim_in() == self.dim_out() && linalg::condition_number(&self.linear) < MAX_CONDITION
    }
}

/// A finite group given by its Cayley table, with element 0 the identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FiniteGroup {
    table: Vec<Vec<usize>>,
    inverse: Vec<usize>,
}

impl FiniteGroup {
    /// `table[a][b] = a b`.
    pub fn from_table(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 || table.iter().any(|row| row.len() != n || row.iter().any(|&v| v >= n)) {
            return Err(Error::GroupoidAxiom("Cayley table must be square with entries < order".into()));
        }
        if (0..n).any(|g| table[0][g] != g || table[g][0] != g) {
            return Err(Error::GroupoidAxiom("element 0 is not the identity".into()));
        }
        let mut inverse = Vec::with_capacity(n);
        for g in 0..n {
            let inv = (0..n)
                .find(|&h| table[g][h] == 0 && table[h][g] == 0)
                .ok_or_else(|| Error::GroupoidAxiom(format!("element {g} has no inverse")))?;
            inverse.push(inv);
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(Error::GroupoidAxiom(format!("({a} {b}) {c} != {a} ({b} {c})")));
                    }
                }
            }
        }
        Ok(FiniteGroup { table, inverse })
    }

    pub fn trivial() -> Self {
        FiniteGroup::cyclic(1)
    }

    /// `ℤ_n` with `a b = a + b mod n`.
    pub fn cyclic(n: usize) -> Self {
        let n = n.max(1);
        FiniteGroup {
            table: (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect(),
            inverse: (0..n).map(|a| (n - a) % n).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn is_homomorphism(&self, target: &FiniteGroup, rho: &[usize]) -> bool {
        let n = self.order();
        rho.len() == n
            && rho.iter().all(|&v| v < target.order())
            && (0..n).all(|a| (0..n).all(|b| rho[self.mul(a, b)] == target.mul(rho[a], rho[b])))
    }
}

/// A finite group acting on one chart by affine diffeomorphisms.
#[derive(Clone, Debug)]
pub struct GroupAction {
    pub group: FiniteGroup,
    pub dim: usize,
    pub maps: Vec<AffineMap>,
}

impl GroupAction {
    pub fn new(group: FiniteGroup, maps: Vec<AffineMap>) -> Result<Self> {
        if maps.len() != group.order() {
            return Err(Error::DimensionMismatch {
                expected: group.order(),
                found: maps.len(),
            });
        }
        let dim = maps[0].dim_in();
        for (g, m) in maps.iter().enumerate() {
            if m.dim_in() != dim || m.dim_out() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.dim_out(),
                });
            }
            if !m.is_local_diffeo() {
                return Err(Error::NonInvertible(format!("action of element {g}")));
            }
        }
        for a in 0..group.order() {
            for b in 0..group.order() {
                if !maps[group.mul(a, b)].approx_eq(&maps[a].after(&maps[b]), MAP_TOL) {
                    return Err(Error::GroupoidAxiom(format!(
                        "action is not a homomorphism at ({a}, {b})"
                    )));
                }
            }
        }
        Ok(GroupAction { group, dim, maps })
    }

    /// The group generated by the given maps, with the maps themselves as
    /// elements (an effective action).
    pub fn generated(dim: usize, generators: &[AffineMap], max_order: usize) -> Result<Self> {
        let mut elements = vec![AffineMap::identity(dim)];
        let mut frontier = 0;
        while frontier < elements.len() {
            let current = elements[frontier].clone();
            for g in generators {
                if g.dim_in() != dim || g.dim_out() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: g.dim_out(),
                    });
                }
                let next = g.after(&current);
                if !elements.iter().any(|e| e.approx_eq(&next, MAP_TOL)) {
                    if elements.len() == max_order {
                        return Err(Error::TableOverflow(max_order));
                    }
                    elements.push(next);
                }
            }
            frontier += 1;
        }
        let find = |m: &AffineMap| {
            elements
                .iter()
                .position(|e| e.approx_eq(m, MAP_TOL))
                .ok_or_else(|| Error::GroupoidAxiom("generated set is not closed".into()))
        };
        let n = elements.len();
        let mut table = vec![vec![0; n]; n];
        for a in 0..n {
            for b in 0..n {
                table[a][b] = find(&elements[a].after(&elements[b]))?;
            }
        }
        GroupAction::new(FiniteGroup::from_table(table)?, elements)
    }

    pub fn act(&self, g: usize, y: &[f64]) -> Vec<f64> {
        self.maps[g].apply(y)
    }
}

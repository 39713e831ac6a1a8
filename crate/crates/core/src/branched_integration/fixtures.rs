use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_rational::BigRational;

use super::cells::{Cell, CellMap, Face};
use super::forms::{PolyForm, ScDifferentialForm};
use super::poly::Polynomial;
use super::subgroupoid::{BranchedSubgroupoid, IsotropyData, WeightedBranch};
use crate::groupoids::{isotropy, rotation_groupoid};

pub fn weight(num: i64, den: i64) -> BigRational {
    BigRational::new(num.into(), den.into())
}

/// Polar cells over the angle range `[a0, a1]` split into `pieces`, with
/// the outer arc as boundary.
fn sector_cells(a0: f64, a1: f64, pieces: usize, lift: Option<Polynomial>) -> (Vec<Cell>, Vec<Face>) {
    let step = (a1 - a0) / pieces as f64;
    let cells: Vec<Cell> = (0..pieces)
        .map(|k| {
            Cell::new(
                format!("sector{k}"),
                CellMap::Polar {
                    center: [0.0, 0.0],
                    radius: [0.0, 1.0],
                    angle: [a0 + k as f64 * step, a0 + (k + 1) as f64 * step],
                    lift: lift.clone(),
                },
            )
        })
        .collect();
    let faces = (0..pieces).map(|k| Face::new(k, 0, 1)).collect();
    (cells, faces)
}

/// The unit disk in `R²` as four quarter cells, one branch of weight `σ`.
pub fn unit_disk_branch(sigma: BigRational) -> WeightedBranch {
    let (cells, faces) = sector_cells(0.0, 2.0 * PI, 4, None);
    WeightedBranch::new(sigma, 1, cells, Some(faces))
}

pub fn unit_disk() -> BranchedSubgroupoid {
    BranchedSubgroupoid::new(2, 2, vec![unit_disk_branch(weight(1, 1))], None)
        .expect("valid disk")
        .with_isotropy(trivial())
}

pub fn trivial() -> IsotropyData {
    IsotropyData {
        order: 1,
        effective_order: 1,
    }
}

/// Right and left half-disks of weight 1/2 each; the boundary of each is
/// its arc and its diameter, traversed in opposite directions.
pub fn half_disks() -> BranchedSubgroupoid {
    let half = |a0: f64| {
        let (cells, mut faces) = sector_cells(a0, a0 + PI, 2, None);
        let mut start = Face::new(0, 1, 0);
        start.label = Some("diameter".into());
        let mut end = Face::new(1, 1, 1);
        end.label = Some("diameter".into());
        faces.push(start);
        faces.push(end);
        WeightedBranch::new(weight(1, 2), 1, cells, Some(faces))
    };
    BranchedSubgroupoid::new(2, 2, vec![half(-FRAC_PI_2), half(FRAC_PI_2)], None)
        .expect("valid half-disks")
        .with_isotropy(trivial())
}

/// `1 - x² - y²` in `(x, y)`.
pub fn cap() -> Polynomial {
    Polynomial::constant(2, 1.0)
        .add(&Polynomial::monomial(vec![2, 0], -1.0))
        .and_then(|p| p.add(&Polynomial::monomial(vec![0, 2], -1.0)))
        .expect("two variables")
}

/// `(1 - x² - y²)(1/2 + x)`, crossing the cap over the line `x = 1/2`.
pub fn tilted_cap() -> Polynomial {
    cap()
        .mul(&Polynomial::constant(2, 0.5).add(&Polynomial::var(2, 0)).expect("two variables"))
        .expect("two variables")
}

/// Angle offset of the cap cells, chosen so that no quadrature symmetry
/// makes low orders exact.
pub const CAP_OFFSET: f64 = 0.3;

/// Two graph branches over the unit disk in `R³` with weights 1/2 and the
/// isotropy of the `Z₂` rotation at the origin (`|G_e| = 2`).
pub fn two_caps() -> BranchedSubgroupoid {
    let branch = |h: Polynomial| {
        let (cells, faces) = sector_cells(CAP_OFFSET, CAP_OFFSET + 2.0 * PI, 3, Some(h));
        WeightedBranch::new(weight(1, 2), 1, cells, Some(faces))
    };
    let g = rotation_groupoid(2, &[vec![0.0, 0.0]]).expect("Z2 rotation groupoid");
    let iso = isotropy(&g, 0).expect("origin is an object");
    BranchedSubgroupoid::new(2, 3, vec![branch(cap()), branch(tilted_cap())], None)
        .expect("valid caps")
        .with_isotropy(IsotropyData::from(&iso))
}

/// `x dy` on `R²`.
pub fn x_dy() -> PolyForm {
    PolyForm::term(2, vec![1], Polynomial::var(2, 0)).expect("in range")
}

/// `(1 + x) dy` on `R²`.
pub fn shifted_x_dy() -> PolyForm {
    PolyForm::term(2, vec![1], Polynomial::constant(2, 1.0).add(&Polynomial::var(2, 0)).expect("two variables")).expect("in range")
}

/// `x dy + xz dy + y² dz + xy³ dx + x⁴y² dz` on `R³`.
pub fn cap_form() -> PolyForm {
    let t = |idx: usize, powers: Vec<u32>| PolyForm::term(3, vec![idx], Polynomial::monomial(powers, 1.0)).expect("in range");
    [t(1, vec![1, 0, 1]), t(2, vec![0, 2, 0]), t(0, vec![1, 3, 0]), t(2, vec![4, 2, 0])]
        .iter()
        .fold(t(1, vec![1, 0, 0]), |acc, f| acc.add(f).expect("same degree"))
}

/// `(x dy - y dx) / (2π (x² + y²))`, integral 1 over positively oriented
/// loops around the origin; closed, with `d = 0` supplied.
pub fn angle_form() -> ScDifferentialForm {
    let eval = Arc::new(|x: &[f64], vs: &[Vec<f64>]| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        (x[0] * vs[0][1] - x[1] * vs[0][0]) / (2.0 * PI * r2)
    });
    ScDifferentialForm::callback(2, 1, eval).with_derivative(PolyForm::zero(2, 2).into())
}

//! Basic germs `w - B(a, w)`, contraction checks, level-wise fixed-point
//! solving, fillings and sampled local solution sets.

mod filling;
mod fixtures;
mod germ;
mod manifold;

pub use filling::{
    bump_filling_fixture, filling_verify, trivial_filling, FiberProjection, FillingData,
    FillingReport, PointMap, MAX_FILLING_CONDITION,
};
pub use fixtures::{
    affine_fixture, reflection_fixture, AffineGermFixture, ReflectionGermFixture, AFFINE_NORM,
};
pub use germ::{
    contraction_verify, picard_iteration_bound, solution_sheet, solve_germ, BasicGerm,
    ContractionReport, GermMap, GermSolution, GermSpec, SheetNode, SolutionSheet, SolveOptions,
    CALIBRATION_PAIRS, CENTER_TOL, RATIO_SLACK, SHEET_FD_STEP,
};
pub use manifold::{local_solution_manifold, LocalManifold, ManifoldSample, SURJECTIVITY_TOL};

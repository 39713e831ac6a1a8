//! sc-retractions, splicings, local models, neatness, corner recognition,
//! good position, submanifold charts and the varying-dimension examples.

mod broken_path;
mod chart;
mod corners;
mod good_position;
mod neat;
mod retraction;
mod splicing;

pub use broken_path::{broken_path_demo, glued_path, BrokenPathDemo, DemoRow};
pub use chart::{graph_chart_build, parabola_charts, ChartGraph, SubmanifoldChart};
pub use corners::{corner_invariance_check, quadrant_diffeo_fixture, CornerFixture};
pub use good_position::{good_position_check, GoodPositionReport};
pub use neat::{neatness_check, NeatnessReport, Verdict};
pub use retraction::{
    retract_tangent_basis, tangent_independence_check, LocalScModel, Retraction,
    RetractionReport, IDEMPOTENCE_TOL, MEMBERSHIP_TOL,
};
pub use splicing::{
    bump_splicing, bump_splicing_on_half_line, conjugate_bump_retraction, splicing_to_retraction,
    BumpFamily, BumpFrame, BumpProfile, ProjectionDerivative, ProjectionFamily, Splicing,
    PROJECTION_TOL,
};

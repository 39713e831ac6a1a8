//! Strong bundle models, sc⁺-multisections, compactness control and
//! transversal perturbation of Fredholm sections.

mod bundle;
mod control;
pub mod fixtures;
mod multisection;
mod search;
mod solve;

pub(crate) use solve::min_norm_solve;

pub use bundle::{
    bilevel_check, plateau, regularizing_check, AuxiliaryNorm, BilevelReport, BundleElement, BundleSection, ChartFn,
    JacobianFn, LevelWitness, NormReport, PointFn, RegularizingReport, SectionClass, SectionSpec, StrongBundleModel,
    Window, JACOBIAN_STEP,
};
pub use control::{control_pair_build, Ball, ControlPair, ControlReport};
pub use multisection::{parse_weight, Branch, BranchSpec, Multisection, MultisectionSpec, BRANCH_TOL, MERGE_SAMPLES_PER_AXIS};
pub use search::{
    cobordism_compare, constant_shift, perturb_to_transversal, perturb_to_transversal_with, CobordismReport,
    PerturbOptions, Perturbation, NORM_SAMPLES_PER_AXIS,
};
pub use solve::{
    linearization_set, solution_set, transversal_check, GermCertificate, GoodPositionWitness, LinearizationSet,
    LinearizedBranch, SolutionPoint, SolutionSet, SolveConfig, TransversalReport, TransversalWitness, GERM_EPSILON,
};

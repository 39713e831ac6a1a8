//! Weighted branched subgroupoids, polynomial and callback differential
//! forms, canonical (boundary) measures, Stokes checks and the pairing of
//! forms with perturbed solution sets.

mod cells;
mod forms;
pub mod fixtures;
mod pairing;
mod poly;
mod subgroupoid;

pub use cells::{Cell, CellEval, CellJacobian, CellMap, Face};
pub use forms::{
    d_squared_check, invariance_check, skew_check, CallbackForm, FormEvaluator, FormTerm, InvarianceReport, PolyForm,
    PolyFormText, ScDifferentialForm, SkewReport, FD_STEP, INVARIANCE_TOL, SKEW_TOL,
};
pub use pairing::{de_rham_pairing, de_rham_pairing_with, trace_curves, PairingOptions, PairingReport, PairingTrial, TracedCurve, PAIRING_TOL};
pub use poly::{Polynomial, PolynomialText, Term};
pub use subgroupoid::{
    cube_rule, BranchContribution, BranchedSubgroupoid, BranchedText, CoveredWindow, IsotropyData, Region, StokesRow,
    WeightedBranch, WeightedMeasureResult, MEMBERSHIP_TOL,
};

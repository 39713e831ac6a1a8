//! Finite ep-groupoids over sampled chart points: translation groupoids of
//! finite group actions, orbit spaces, isotropy, natural representations,
//! functors, equivalences and the diagram calculus of generalized maps.

mod action;
mod diagram;
mod fixtures;
mod functor;
mod groupoid;

pub use action::{AffineMap, FiniteGroup, GroupAction, MAP_TOL, MAX_CONDITION};
pub use diagram::{compose_generalized, compose_witnesses, refinement_check, Composite, Diagram, RefinementReport, RefinementWitness};
pub use fixtures::{
    identity_groupoid, line_samples, reflection_groupoid, rotation_groupoid, sector_samples, trivial_action_groupoid,
    AffineConfig, GroupoidConfig, MAX_GROUP_ORDER,
};
pub use functor::{
    compose, full_subgroupoid, is_equivalence, natural_transformation_check, EquivalenceReport, Functor,
    NaturalityReport, Regularity,
};
pub use groupoid::{
    isotropy, natural_representation, orbit_space, Backend, EpGroupoid, IsotropyGroup, Morphism, NaturalRepresentation,
    Object, OrbitSpace, MAX_MORPHISMS, MAX_OBJECTS, POINT_TOL,
};

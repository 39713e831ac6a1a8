//! Numerical scale calculus: graded scales and sc-maps, retractions with
//! varying-dimension images, contraction germs, finite ep-groupoids,
//! multisection perturbations and weighted integration over branched
//! solution sets.

pub mod branched_integration;
pub mod error;
pub mod germs;
pub mod groupoids;
pub mod linalg;
pub mod perturbation;
pub mod quadrature;
pub mod retracts;
pub mod sc_calculus;
pub mod sc_core;

pub use error::{Error, Result};

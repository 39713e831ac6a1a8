//! sc⁰/sc¹ maps, tangent scales, differentiability probes and the
//! translation map on weighted grids.

mod map;
mod probe;
mod shift;
mod tangent;

pub use map::{chain_rule_check, Domain, MapDerivative, MapEval, ScMap, TangentElement};
pub use probe::{sc1_probe, ProbeReport, ProbeRow, EXACT_RESIDUAL, SLOPE_THRESHOLD};
pub use shift::{classical_shift_quotient, shift_map, shift_samples, HermiteInterpolant};
pub use tangent::tangent_scale;

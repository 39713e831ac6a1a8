use crate::error::{Error, Result};
use crate::sc_core::ScScale;

/// `(TE)_i = E_{i+1} ⊕ E_i`, one level fewer than `E`.
pub fn tangent_scale(e: &ScScale) -> Result<ScScale> {
    if e.max_level() == 0 {
        return Err(Error::NoRoomToShift);
    }
    ScScale::direct_sum(&e.shifted(1)?, &e.truncated(1)?)
}

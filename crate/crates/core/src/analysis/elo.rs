use crate::error::{Error, Result};

/// `R = 400 log10(w / (1 - w)) + r0`. Win rates of exactly 0 or 1 have no
/// finite rating.
pub fn elo_from_winrate(w: f64, r0: f64) -> Result<f64> {
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::UnboundedRating(w));
    }
    Ok(400.0 * (w / (1.0 - w)).log10() + r0)
}

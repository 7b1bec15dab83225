//! Asymptotic BB84 secret fraction.

use crate::error::{Error, Result};

/// QBER at which `1 - 2 h2(q)` vanishes; above it no key can be distilled.
pub const QBER_SECURITY_LIMIT: f64 = 0.110_027_864_438_359_55;

/// Binary entropy in bits, with `h2(0) = h2(1) = 0`.
pub fn binary_entropy(q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("binary entropy needs q in [0, 1], got {q}")));
    }
    if q == 0.0 || q == 1.0 {
        return Ok(0.0);
    }
    Ok(-q * q.log2() - (1.0 - q) * (1.0 - q).log2())
}

/// `max(0, fraction * (1 - 2 h2(qber)))`, the secret key per sifted bit of the
/// unselected acquisition.
pub fn key_rate(sifted_fraction: f64, qber: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&sifted_fraction) {
        return Err(Error::Domain(format!(
            "sifted fraction must lie in [0, 1], got {sifted_fraction}"
        )));
    }
    if !(0.0..=0.5).contains(&qber) {
        return Err(Error::Domain(format!("qber must lie in [0, 0.5], got {qber}")));
    }
    let secret = 1.0 - 2.0 * binary_entropy(qber)?;
    Ok((sifted_fraction * secret).max(0.0))
}

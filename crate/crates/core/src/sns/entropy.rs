use crate::{Error, Result};

/// Binary Shannon entropy in bits, with `h(0) = h(1) = 0`.
pub fn shannon_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            expected: "[0, 1]",
        });
    }
    Ok(binary_entropy(x))
}

/// Unchecked variant for callers that have already clamped `x`.
pub(crate) fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

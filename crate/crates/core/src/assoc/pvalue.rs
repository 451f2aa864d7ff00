use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{GkError, Result};

/// Smallest p-value carried through conversions; smaller inputs are clamped.
pub const P_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Converted {
    pub z: f64,
    /// Set when the input p-value was below [`P_FLOOR`] and got clamped.
    pub clamped: bool,
}

/// Two-sided p-value of a standard normal statistic.
pub fn z_to_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// `x ≥ 0` with upper-tail probability `tail ≤ 1/2`.
///
/// The library quantile is only good to ~1e-10 relative, so it is polished
/// with Newton steps against the accurate `erfc`.
fn upper_quantile(tail: f64) -> f64 {
    let mut x = Normal::standard().inverse_cdf(tail).abs();
    for _ in 0..3 {
        let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if density == 0.0 {
            break;
        }
        let f = 0.5 * erfc(x / std::f64::consts::SQRT_2) - tail;
        x = (x + f / density).max(0.0);
    }
    x
}

/// Signed Z-score whose two-sided p-value is `p`:
/// `sign · |Φ⁻¹(p / 2)|`. A zero p-value is clamped to [`P_FLOOR`].
pub fn p_to_z(p: f64, beta_sign: i8) -> Result<Converted> {
    if !(p >= 0.0 && p <= 1.0) {
        return Err(GkError::Data(format!("p-value {p} is outside [0, 1]")));
    }
    let clamped = p < P_FLOOR;
    let p = p.max(P_FLOOR);
    let x = upper_quantile(p / 2.0);
    let sign = match beta_sign {
        s if s > 0 => 1.0,
        s if s < 0 => -1.0,
        _ => 0.0,
    };
    let z = if p == 1.0 { 0.0 } else { sign * x };
    Ok(Converted { z, clamped })
}

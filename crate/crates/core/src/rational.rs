use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Exact rational with a decimal rendering alongside.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalJson {
    pub num: i64,
    pub den: i64,
    pub decimal: String,
}

impl From<Rational> for RationalJson {
    fn from(r: Rational) -> Self {
        Self {
            num: *r.numer(),
            den: *r.denom(),
            decimal: format!("{:.6}", to_f64(r)),
        }
    }
}

impl RationalJson {
    pub fn to_rational(&self) -> Result<Rational> {
        if self.den == 0 {
            return Err(Error::InvalidSpec("rational with zero denominator".into()));
        }
        Ok(Rational::new(self.num, self.den))
    }
}

pub fn to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Smallest-denominator rational within `1e-12` (relative) of `x`, found by
/// continued-fraction expansion; `0.1` becomes `1/10`.
pub fn from_decimal(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::InvalidSpec(format!("{x} has no rational value")));
    }
    let tol = 1e-12 * x.abs().max(1e-300);
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut rest = x.abs();
    for _ in 0..64 {
        let a = rest.floor();
        if a > 1e15 {
            break;
        }
        let a_i = a as i128;
        let h2 = a_i * h1 + h0;
        let k2 = a_i * k1 + k0;
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if h1 > i64::MAX as i128 || k1 > i64::MAX as i128 {
            break;
        }
        if ((h1 as f64 / k1 as f64) - x.abs()).abs() <= tol {
            let sign = if x < 0.0 { -1 } else { 1 };
            return Ok(Rational::new(sign * h1 as i64, k1 as i64));
        }
        let frac = rest - a;
        if frac == 0.0 {
            break;
        }
        rest = 1.0 / frac;
    }
    Err(Error::InvalidSpec(format!(
        "{x} has no short rational representation"
    )))
}

//! Mutation probabilities that remember their exact rational value.
//!
//! `"0.1"` and `"1/10"` both parse to the exact rational 1/10; a float
//! literal passed through [`Probability::from_f64`] keeps the exact binary
//! value of the double.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Probability {
    value: f64,
    exact: BigRational,
    from_fraction: bool,
}

impl Probability {
    /// Accepts any probability in the closed interval [0, 1].
    pub fn new_closed(exact: BigRational) -> Result<Self> {
        if exact.is_negative() || exact > BigRational::one() {
            return Err(Error::InvalidParameter(format!("probability {exact} outside [0, 1]")));
        }
        let value = ratio_to_f64(&exact);
        Ok(Probability { value, exact, from_fraction: false })
    }

    /// Accepts a probability in the open interval (0, 1).
    pub fn new(exact: BigRational) -> Result<Self> {
        if !exact.is_positive() || exact >= BigRational::one() {
            return Err(Error::InvalidParameter(format!("probability {exact} outside (0, 1)")));
        }
        Self::new_closed(exact)
    }

    pub fn from_ratio(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidParameter("zero denominator".into()));
        }
        let mut p = Self::new(BigRational::new(num.into(), den.into()))?;
        p.from_fraction = true;
        Ok(p)
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        let exact = BigRational::from_float(x)
            .ok_or_else(|| Error::InvalidParameter(format!("non-finite probability {x}")))?;
        Self::new(exact)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> &BigRational {
        &self.exact
    }

    /// True when the probability was written as a fraction such as `1/10`.
    pub fn from_fraction(&self) -> bool {
        self.from_fraction
    }

    pub fn complement(&self) -> f64 {
        1.0 - self.value
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.from_fraction {
            write!(f, "{}", self.exact)
        } else {
            write!(f, "{}", self.value)
        }
    }
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.from_fraction {
            serializer.serialize_str(&self.to_string())
        } else {
            serializer.serialize_f64(self.value)
        }
    }
}

impl FromStr for Probability {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (exact, from_fraction) = if let Some((n, d)) = s.split_once('/') {
            let n = BigInt::from_str(n.trim()).map_err(|_| bad(s))?;
            let d = BigInt::from_str(d.trim()).map_err(|_| bad(s))?;
            if d.is_zero() {
                return Err(bad(s));
            }
            (BigRational::new(n, d), true)
        } else {
            (parse_decimal(s).ok_or_else(|| bad(s))?, false)
        };
        let mut p = Probability::new(exact)?;
        p.from_fraction = from_fraction;
        Ok(p)
    }
}

fn bad(s: &str) -> Error {
    Error::InvalidParameter(format!("cannot parse probability '{s}'"))
}

/// Exact rational value of a plain decimal literal (`0.125`, `.3`, `1e-2`).
fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit() || c == '-' || c == '+') {
        return None;
    }
    let num = BigInt::from_str(&digits).ok()?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10u8);
    Some(if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    })
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // to_f64 can fail for huge numerators and denominators; scale first.
        let shift = r.numer().bits().max(r.denom().bits()) as i64 - 60;
        let n = (r.numer() >> shift.max(0) as usize).to_f64().unwrap_or(f64::NAN);
        let d = (r.denom() >> shift.max(0) as usize).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_and_fraction_agree() {
        let a: Probability = "0.1".parse().unwrap();
        let b: Probability = "1/10".parse().unwrap();
        assert_eq!(a.exact(), b.exact());
        assert!(b.from_fraction());
        assert!(!a.from_fraction());
        assert_eq!(a.value(), 0.1);
    }

    #[test]
    fn scientific_notation() {
        let p: Probability = "2.5e-1".parse().unwrap();
        assert_eq!(p.exact(), &BigRational::new(1.into(), 4.into()));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!("0".parse::<Probability>().is_err());
        assert!("1".parse::<Probability>().is_err());
        assert!("3/2".parse::<Probability>().is_err());
        assert!("abc".parse::<Probability>().is_err());
        assert!("1/0".parse::<Probability>().is_err());
    }
}

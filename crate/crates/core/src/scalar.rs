//! Numeric backends for resource values and payoffs.
//!
//! Game analysis is generic over [`Scalar`]: `f64`/`f32` for user data compared
//! at a small tolerance, and [`Rational`] when a check has to be exact.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

use crate::error::Error;

/// Arbitrary-precision rational number.
pub type Rational = BigRational;

pub trait Scalar:
    Num + Signed + Clone + Debug + Display + PartialOrd + Send + Sync + 'static
{
    /// Tolerance used for equilibrium and bound comparisons when the caller
    /// does not supply one. Zero for exact types.
    fn default_tolerance() -> Self;

    fn from_rational(r: &Rational) -> Self;

    /// `None` for non-finite input.
    fn from_f64(x: f64) -> Option<Self>;

    fn to_f64(&self) -> f64;

    /// Exact textual form (`p/q` for rationals, shortest round-trip decimal
    /// for floats).
    fn to_exact_string(&self) -> String;

    fn is_exact() -> bool {
        false
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    fn default_tolerance() -> Self {
        1e-9
    }

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_exact_string(&self) -> String {
        format!("{self}")
    }
}

impl Scalar for f32 {
    fn default_tolerance() -> Self {
        1e-5
    }

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r) as f32
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x as f32)
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn to_exact_string(&self) -> String {
        format!("{self}")
    }
}

impl Scalar for Rational {
    fn default_tolerance() -> Self {
        Rational::zero()
    }

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn from_f64(x: f64) -> Option<Self> {
        Rational::from_float(x)
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn to_exact_string(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn is_exact() -> bool {
        true
    }
}

/// Converts with correct handling of numerators/denominators that overflow
/// `f64` individually (large factorial ratios).
pub fn rational_to_f64(r: &Rational) -> f64 {
    if let Some(x) = ToPrimitive::to_f64(r) {
        if x.is_finite() {
            return x;
        }
    }
    let n = r.numer();
    let d = r.denom();
    let shift = n.bits().max(d.bits()).saturating_sub(1000);
    let n = n >> shift;
    let d = d >> shift;
    ToPrimitive::to_f64(&n).unwrap_or(f64::NAN) / ToPrimitive::to_f64(&d).unwrap_or(f64::NAN)
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"0.418"` or
/// `"1e-4"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, Error> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i64 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let joined = format!("{whole}{frac}");
    let numer = BigInt::from_str(if joined.is_empty() { "0" } else { &joined }).map_err(|_| bad())?;
    let scale = exponent - frac.len() as i64;
    if scale.unsigned_abs() > 4096 {
        return Err(bad());
    }
    let ten = BigInt::from(10);
    let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
    let mut value = if scale >= 0 {
        Rational::from_integer(numer * pow)
    } else {
        Rational::new(numer, pow)
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Renders with `digits` significant digits, computed from the exact value.
pub fn to_significant(r: &Rational, digits: usize) -> String {
    let x = rational_to_f64(r);
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let rendered = format!("{:.*}", decimals, x);
    if rendered.contains('.') {
        rendered.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        rendered
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals_exactly() {
        assert_eq!(parse_rational("3/5").unwrap(), ratio(3, 5));
        assert_eq!(parse_rational("0.6").unwrap(), ratio(3, 5));
        assert_eq!(parse_rational("-0.125").unwrap(), ratio(-1, 8));
        assert_eq!(parse_rational("1e-4").unwrap(), ratio(1, 10_000));
        assert_eq!(parse_rational("2.5E1").unwrap(), int(25));
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn huge_ratios_convert_to_f64() {
        let big = Rational::new(factorial(200), factorial(200) * BigInt::from(3));
        assert!((rational_to_f64(&big) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn significant_digit_rendering() {
        assert_eq!(to_significant(&ratio(2, 3), 12), "0.666666666667");
        assert_eq!(to_significant(&int(1), 12), "1");
        assert_eq!(to_significant(&ratio(1, 2), 12), "0.5");
    }

    #[test]
    fn exact_strings() {
        assert_eq!(ratio(6, 4).to_exact_string(), "3/2");
        assert_eq!(int(2).to_exact_string(), "2");
        assert_eq!(0.5f64.to_exact_string(), "0.5");
    }
}

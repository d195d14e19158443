//! Scalar abstraction for the exact linear algebra underneath everything else.
//!
//! All core math is generic over a field-like scalar via `num-traits`. The
//! concrete instantiation used throughout the higher modules is [`Rat`], an
//! arbitrary-precision rational, so every identity in the library is exact.

use std::fmt;

use num_traits::{FromPrimitive, Num, Signed};

/// A field scalar: exact arithmetic, no rounding.
///
/// `Num` supplies ring operations plus division and `from_str_radix`, which
/// for rationals parses the `"p/q"` wire format used by the JSON schemas.
pub trait Scalar:
    Num + Signed + FromPrimitive + Clone + PartialEq + fmt::Debug + fmt::Display + 'static
{
    /// Scalar from an integer, for building matrices in model code.
    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer embeds into scalar")
    }

    /// Scalar from a ratio of integers.
    fn from_frac(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    /// Parse the `"p/q"` (or plain `"p"`) wire format.
    fn parse_frac(s: &str) -> Result<Self, crate::Error> {
        let t = s.trim();
        Self::from_str_radix(t, 10)
            .or_else(|_| {
                // Rational types insist on a denominator; integers don't.
                if t.contains('/') {
                    Err(())
                } else {
                    Self::from_str_radix(&format!("{}/1", t), 10).map_err(|_| ())
                }
            })
            .map_err(|_| crate::Error::Parse(s.to_string()))
    }

    /// Render in the `"p/q"` wire format (integers render without `/q`).
    fn to_frac_string(&self) -> String {
        format!("{}", self)
    }
}

impl<T> Scalar for T where
    T: Num + Signed + FromPrimitive + Clone + PartialEq + fmt::Debug + fmt::Display + 'static
{
}

/// The concrete scalar used by the models and the CLI: exact big rationals.
pub type Rat = num_rational::BigRational;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_round_trip() {
        let x = Rat::parse_frac("-3/4").unwrap();
        assert_eq!(x, Rat::from_frac(-3, 4));
        assert_eq!(x.to_frac_string(), "-3/4");
        let y = Rat::parse_frac("5").unwrap();
        assert_eq!(y, Rat::from_int(5));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(Rat::parse_frac("one half").is_err());
    }
}

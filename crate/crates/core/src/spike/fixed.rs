use std::fmt;

use serde::{Deserialize, Serialize};

use super::SpikeError;

/// Fractional bits of the membrane representation.
pub const FRAC_BITS: u32 = 8;

/// Exclusive magnitude bound on raw accumulator values: sign + 16 integer
/// + 8 fractional bits.
pub const RAW_LIMIT: i64 = 1 << 24;

/// Signed fixed-point value with [`FRAC_BITS`] fractional bits.
///
/// Integer currents produced by the PIM arrays are interpreted directly as
/// raw values, so one weight unit equals `2^-8` of the membrane scale.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub struct Fixed(i32);

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);
    pub const ONE: Fixed = Fixed(1 << FRAC_BITS);

    pub const fn from_raw(raw: i32) -> Self {
        Fixed(raw)
    }

    pub const fn raw(self) -> i32 {
        self.0
    }

    /// Rounds to the nearest representable value (ties away from zero).
    pub fn from_f64(value: f64) -> Result<Self, SpikeError> {
        let scaled = (value * f64::from(1u32 << FRAC_BITS)).round();
        if !scaled.is_finite() || scaled.abs() >= RAW_LIMIT as f64 {
            return Err(SpikeError::FixedRange(value));
        }
        Ok(Fixed(scaled as i32))
    }

    pub fn from_int(value: i32) -> Result<Self, SpikeError> {
        let raw = i64::from(value) << FRAC_BITS;
        if raw.abs() >= RAW_LIMIT {
            return Err(SpikeError::FixedRange(f64::from(value)));
        }
        Ok(Fixed(raw as i32))
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.0) / f64::from(1u32 << FRAC_BITS)
    }

    /// Fixed-point product, rounded to nearest with ties away from zero.
    pub fn mul_round(self, other: Fixed) -> i64 {
        let product = i64::from(self.0) * i64::from(other.0);
        let half = 1i64 << (FRAC_BITS - 1);
        let magnitude = (product.abs() + half) >> FRAC_BITS;
        if product < 0 {
            -magnitude
        } else {
            magnitude
        }
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl From<Fixed> for f64 {
    fn from(value: Fixed) -> f64 {
        value.to_f64()
    }
}

impl TryFrom<f64> for Fixed {
    type Error = SpikeError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Fixed::from_f64(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(Fixed::from_f64(1.0).unwrap(), Fixed::ONE);
        assert_eq!(Fixed::from_f64(0.3).unwrap().raw(), 77);
        assert_eq!(Fixed::from_f64(-0.3).unwrap().raw(), -77);
        assert_eq!(Fixed::from_int(3).unwrap().raw(), 768);
        assert!(Fixed::from_f64(65536.0).is_err());
        assert!(Fixed::from_f64(f64::NAN).is_err());
    }

    #[test]
    fn multiply_rounds_to_nearest() {
        let half = Fixed::from_f64(0.5).unwrap();
        assert_eq!(half.mul_round(half), 64);
        // 0.5 * (1/256) = 0.5 raw units -> rounds away from zero
        assert_eq!(half.mul_round(Fixed::from_raw(1)), 1);
        assert_eq!(half.mul_round(Fixed::from_raw(-1)), -1);
        assert_eq!(Fixed::ONE.mul_round(Fixed::from_raw(-1234)), -1234);
    }
}

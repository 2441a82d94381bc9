//! Exact fixed-point vertex weights.
//!
//! Distances are compared against dyadic radii (`2^(j-3)` times a unit), so
//! weights are stored as integers scaled by `2^32`. Every dyadic rational
//! with at most 32 fractional bits is exact, and all comparisons against
//! scaled powers of two are done in integer arithmetic.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const FRAC_BITS: u32 = 32;
const ONE_RAW: u64 = 1 << FRAC_BITS;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Weight(u64);

impl Weight {
    pub const ZERO: Weight = Weight(0);
    pub const ONE: Weight = Weight(ONE_RAW);

    pub const fn from_raw(raw: u64) -> Self {
        Weight(raw)
    }

    pub const fn raw(self) -> u64 {
        self.0
    }

    pub fn from_int(v: u64) -> Self {
        Weight(v.checked_mul(ONE_RAW).expect("weight overflow"))
    }

    /// Rounds to the nearest representable value. Rejects negative, NaN and
    /// infinite inputs, and anything at or above `2^31`.
    pub fn from_f64(v: f64) -> Result<Self> {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::input(format!(
                "weight {v} is not a finite nonnegative number"
            )));
        }
        if v >= (1u64 << 31) as f64 {
            return Err(Error::input(format!("weight {v} too large")));
        }
        Ok(Weight((v * ONE_RAW as f64).round() as u64))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / ONE_RAW as f64
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn mul_int(self, k: u64) -> Self {
        Weight(self.0.checked_mul(k).expect("weight overflow"))
    }

    /// Compares `self` with `base * 2^exp` exactly.
    pub fn cmp_pow2(self, base: Weight, exp: i32) -> Ordering {
        let lhs = self.0 as u128;
        let rhs = base.0 as u128;
        if exp >= 0 {
            let e = exp as u32;
            if rhs == 0 {
                return lhs.cmp(&0);
            }
            if e >= 64 {
                return Ordering::Less;
            }
            lhs.cmp(&(rhs << e))
        } else {
            let e = (-exp) as u32;
            if lhs == 0 {
                return 0.cmp(&rhs);
            }
            if e >= 64 {
                return Ordering::Greater;
            }
            (lhs << e).cmp(&rhs)
        }
    }
}

impl Add for Weight {
    type Output = Weight;
    fn add(self, rhs: Weight) -> Weight {
        Weight(self.0.checked_add(rhs.0).expect("weight overflow"))
    }
}

impl AddAssign for Weight {
    fn add_assign(&mut self, rhs: Weight) {
        *self = *self + rhs;
    }
}

impl Sub for Weight {
    type Output = Weight;
    fn sub(self, rhs: Weight) -> Weight {
        Weight(self.0.checked_sub(rhs.0).expect("weight underflow"))
    }
}

impl Sum for Weight {
    fn sum<I: Iterator<Item = Weight>>(iter: I) -> Weight {
        iter.fold(Weight::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Weight::from_f64(v).map_err(serde::de::Error::custom)
    }
}

/// A dyadic multiple `base * 2^shift` of a weight. Used both for the length
/// unit of a run and for ball radii such as `2^(j-3)` units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dyadic {
    pub base: Weight,
    pub shift: i32,
}

impl Dyadic {
    pub const ONE: Dyadic = Dyadic {
        base: Weight::ONE,
        shift: 0,
    };

    pub fn new(base: Weight, shift: i32) -> Self {
        Dyadic { base, shift }
    }

    pub fn of(w: Weight) -> Self {
        Dyadic { base: w, shift: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.base.is_zero()
    }

    /// `self * 2^exp`.
    pub fn times_pow2(&self, exp: i32) -> Dyadic {
        Dyadic {
            base: self.base,
            shift: self.shift + exp,
        }
    }

    /// Orders `w` against this value.
    pub fn cmp_weight(&self, w: Weight) -> Ordering {
        w.cmp_pow2(self.base, self.shift)
    }

    /// `w < self`
    pub fn exceeds(&self, w: Weight) -> bool {
        self.cmp_weight(w) == Ordering::Less
    }

    pub fn to_f64(&self) -> f64 {
        self.base.to_f64() * 2f64.powi(self.shift)
    }

    /// Smallest `j >= 0` with `w <= self * 2^j`.
    pub fn level_of(&self, w: Weight) -> u32 {
        assert!(!self.base.is_zero(), "level of a zero unit");
        let mut j = 0u32;
        while self.times_pow2(j as i32).cmp_weight(w) == Ordering::Greater {
            j += 1;
        }
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_values_are_exact() {
        let w = Weight::from_f64(0.125).unwrap();
        assert_eq!(w.cmp_pow2(Weight::ONE, -3), Ordering::Equal);
        assert_eq!(
            Weight::from_int(3).cmp_pow2(Weight::ONE, 1),
            Ordering::Greater
        );
        assert_eq!(Weight::from_int(3).cmp_pow2(Weight::ONE, 2), Ordering::Less);
        assert_eq!(Weight::ZERO.cmp_pow2(Weight::ONE, -70), Ordering::Less);
        assert_eq!(Weight::ONE.cmp_pow2(Weight::ONE, 80), Ordering::Less);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(Weight::from_f64(-1.0).is_err());
        assert!(Weight::from_f64(f64::NAN).is_err());
        assert!(Weight::from_f64(f64::INFINITY).is_err());
    }

    #[test]
    fn levels() {
        let u = Dyadic::ONE;
        assert_eq!(u.level_of(Weight::from_int(1)), 0);
        assert_eq!(u.level_of(Weight::from_int(2)), 1);
        assert_eq!(u.level_of(Weight::from_int(3)), 2);
        assert_eq!(u.level_of(Weight::from_f64(0.3).unwrap()), 0);
        let half = Dyadic::new(Weight::from_int(3), -2);
        // 3/4 * 2^2 = 3
        assert_eq!(half.level_of(Weight::from_int(3)), 2);
    }
}

//! Scalar abstraction for value and price arithmetic.
//!
//! Everything that only adds, subtracts, compares and doubles values is
//! written against [`Scalar`], so the same code runs on `f64`, `f32` and
//! exact rationals (`Ratio<i64>`). Monte-Carlo statistics always convert to
//! `f64`.

use std::fmt::{Debug, Display};

use num_traits::{FromPrimitive, Num, ToPrimitive};

pub trait Scalar:
    Copy + Debug + Display + PartialOrd + Num + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// `max(self, 0)`.
    #[inline]
    fn positive_part(self) -> Self {
        self.max_of(Self::zero())
    }

    #[inline]
    fn is_negative(self) -> bool {
        self < Self::zero()
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts from `f64`, falling back to zero when the target type cannot
    /// represent the value.
    #[inline]
    fn from_f64_or_zero(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::zero)
    }

    /// Finite and not NaN (always true for exact types).
    #[inline]
    fn is_finite_value(self) -> bool {
        self.to_f64().map(f64::is_finite).unwrap_or(false)
    }
}

impl<T> Scalar for T where
    T: Copy
        + Debug
        + Display
        + PartialOrd
        + Num
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
        + 'static
{
}

/// Smallest power of two `2^k` (`k` any integer) that is `>= x`; zero maps
/// to zero since the set of powers of two has no minimum.
pub fn round_up_pow2<T: Scalar>(x: T) -> T {
    let zero = T::zero();
    if x <= zero {
        return zero;
    }
    let two = T::two();
    let mut p = T::one();
    if p >= x {
        while p / two >= x {
            p = p / two;
        }
    } else {
        while p < x {
            p = p * two;
        }
    }
    p
}

/// `true` when `x` is zero or an exact integer power of two.
pub fn is_pow2_or_zero<T: Scalar>(x: T) -> bool {
    x == T::zero() || round_up_pow2(x) == x
}

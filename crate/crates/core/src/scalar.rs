//! Numeric abstraction shared by the exact and floating-point code paths.
//!
//! The stationary solves and the static placement optimizers are written once
//! against [`Scalar`] and instantiated for `f32`, `f64` and [`Rational`]
//! (`Ratio<i64>`). Rationals make ties and bracket checks exact, floats are
//! what the simulator uses.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Exact rational scalar.
pub type Rational = Ratio<i64>;

pub trait Scalar:
    Num + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Absolute slack used when comparing values that should be equal.
    /// Zero for exact types.
    fn tolerance() -> Self;

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// `|a - b| <= tolerance * max(1, |a|, |b|)`.
    fn approx_eq(self, other: Self) -> bool {
        let scale = Self::one().max_of(self.abs()).max_of(other.abs());
        (self - other).abs() <= Self::tolerance() * scale
    }

    /// `self <= other` up to tolerance.
    fn approx_le(self, other: Self) -> bool {
        self <= other || self.approx_eq(other)
    }

    /// True when the value is a nonnegative whole number.
    fn is_whole(self) -> bool {
        match self.to_f64() {
            Some(v) => v >= 0.0 && v.fract() == 0.0 && Self::from_f64(v) == Some(self),
            None => false,
        }
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-4
    }
}

impl Scalar for Rational {
    fn tolerance() -> Self {
        Ratio::from_integer(0)
    }

    fn is_whole(self) -> bool {
        self.is_integer() && self >= Ratio::from_integer(0)
    }
}

/// Sum with a fixed left-to-right order.
pub fn sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}

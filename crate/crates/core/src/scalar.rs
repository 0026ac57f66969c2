//! Scalar abstraction for measure arithmetic.
//!
//! Monte Carlo paths run on `f64`; the exhaustive-enumeration identities run
//! on exact rationals with zero tolerance. The mode is picked per value by
//! instantiating the generic measure machinery with the scalar type, never by
//! a global switch.

use num::{BigRational, FromPrimitive, Num, Rational64};

/// Arithmetic required of a mass value.
pub trait MassScalar: Num + Clone + PartialOrd {
    fn from_count(n: u64) -> Self;

    /// Human-readable decimal rendering (exact types render as fractions).
    fn render(&self) -> String;

    fn to_f64_lossy(&self) -> f64;
}

impl MassScalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }

    fn render(&self) -> String {
        format!("{self}")
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl MassScalar for BigRational {
    fn from_count(n: u64) -> Self {
        BigRational::from_integer(n.into())
    }

    fn render(&self) -> String {
        format!("{self}")
    }

    fn to_f64_lossy(&self) -> f64 {
        num::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl MassScalar for Rational64 {
    fn from_count(n: u64) -> Self {
        Rational64::from_integer(n as i64)
    }

    fn render(&self) -> String {
        format!("{self}")
    }

    fn to_f64_lossy(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// `base^exp` by repeated squaring, for scalar types without a pow.
pub fn scalar_pow<S: MassScalar>(base: &S, mut exp: u64) -> S {
    let mut result = S::one();
    let mut acc = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * acc.clone();
        }
        acc = acc.clone() * acc.clone();
        exp >>= 1;
    }
    result
}

//! Arithmetic on `[0, ∞]` with the conventions used by every resistance
//! and capacity formula: `1/0 = ∞`, `1/∞ = 0`, `x + ∞ = ∞`.

use serde::{Serialize, Serializer};
use std::fmt;
use std::ops::Add;

/// A nonnegative extended real.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtendedNonneg(f64);

impl ExtendedNonneg {
    pub const ZERO: ExtendedNonneg = ExtendedNonneg(0.0);
    pub const INFINITY: ExtendedNonneg = ExtendedNonneg(f64::INFINITY);

    /// Wraps a finite or infinite nonnegative value; tiny negatives are
    /// clipped, anything worse panics (callers validate first).
    pub fn new(value: f64) -> Self {
        assert!(!value.is_nan(), "extended value is NaN");
        assert!(value >= -1e-12, "extended value is negative: {value}");
        ExtendedNonneg(value.max(0.0))
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == 0.0
    }

    /// The finite value, or `None` at `∞`.
    pub fn finite(&self) -> Option<f64> {
        if self.0.is_finite() {
            Some(self.0)
        } else {
            None
        }
    }

    /// Underlying float (`f64::INFINITY` at `∞`).
    pub fn raw(&self) -> f64 {
        self.0
    }

    /// `1/x` with `1/0 = ∞` and `1/∞ = 0`.
    pub fn recip(&self) -> Self {
        if self.0 == 0.0 {
            ExtendedNonneg::INFINITY
        } else if self.0.is_infinite() {
            ExtendedNonneg::ZERO
        } else {
            ExtendedNonneg(1.0 / self.0)
        }
    }

    /// `θ²/c` with the flow conventions: zero flow contributes nothing even
    /// on a dead edge; positive flow through zero conductance is an open
    /// circuit.
    pub fn energy_term(theta: f64, conductance: f64) -> Self {
        if theta == 0.0 {
            ExtendedNonneg::ZERO
        } else if conductance == 0.0 {
            ExtendedNonneg::INFINITY
        } else {
            ExtendedNonneg(theta * theta / conductance)
        }
    }

    /// `x · y` for nonnegative extended values with `0 · ∞ = ∞ · 0 = 0`
    /// never arising here: scaling by a finite positive factor.
    pub fn scale(&self, factor: f64) -> Self {
        assert!(factor.is_finite() && factor >= 0.0);
        if self.0.is_infinite() && factor == 0.0 {
            ExtendedNonneg::ZERO
        } else {
            ExtendedNonneg(self.0 * factor)
        }
    }
}

impl Add for ExtendedNonneg {
    type Output = ExtendedNonneg;
    fn add(self, rhs: ExtendedNonneg) -> ExtendedNonneg {
        ExtendedNonneg(self.0 + rhs.0)
    }
}

impl std::iter::Sum for ExtendedNonneg {
    fn sum<I: Iterator<Item = ExtendedNonneg>>(iter: I) -> Self {
        iter.fold(ExtendedNonneg::ZERO, Add::add)
    }
}

impl fmt::Display for ExtendedNonneg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for ExtendedNonneg {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_conventions() {
        assert_eq!(ExtendedNonneg::ZERO.recip(), ExtendedNonneg::INFINITY);
        assert_eq!(ExtendedNonneg::INFINITY.recip(), ExtendedNonneg::ZERO);
        assert_eq!(ExtendedNonneg::new(4.0).recip(), ExtendedNonneg::new(0.25));
    }

    #[test]
    fn infinity_absorbs_addition() {
        let x = ExtendedNonneg::new(3.0) + ExtendedNonneg::INFINITY;
        assert!(x.is_infinite());
    }

    #[test]
    fn energy_conventions() {
        assert!(ExtendedNonneg::energy_term(0.0, 0.0).is_zero());
        assert!(ExtendedNonneg::energy_term(0.5, 0.0).is_infinite());
        assert_eq!(
            ExtendedNonneg::energy_term(0.5, 0.5),
            ExtendedNonneg::new(0.5)
        );
    }
}

//! Closed real intervals `[lo, hi]`.
//!
//! All risk quantities in this crate are non-negative, so products are taken
//! endpoint-wise (`lo*lo`, `hi*hi`).

use std::fmt;
use std::ops::{Add, Mul};

use serde::de::{self, Deserializer};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    /// Returns `None` unless both endpoints are finite and `lo <= hi`.
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo.is_finite() && hi.is_finite() && lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `self ⊆ [a, b]`.
    pub fn within(&self, a: f64, b: f64) -> bool {
        a <= self.lo && self.hi <= b
    }

    /// Multiply both endpoints by a non-negative scalar.
    pub fn scale(self, k: f64) -> Self {
        debug_assert!(k >= 0.0, "scale factor must be non-negative");
        Interval {
            lo: self.lo * k,
            hi: self.hi * k,
        }
    }

    /// `1 - self`, endpoints swapped so the result stays ordered.
    pub fn complement(self) -> Self {
        Interval {
            lo: 1.0 - self.hi,
            hi: 1.0 - self.lo,
        }
    }

    pub fn clamp_max(self, max: f64) -> Self {
        Interval {
            lo: self.lo.min(max),
            hi: self.hi.min(max),
        }
    }

    /// Clamp both endpoints into `[0, 1]`.
    pub fn clamp_unit(self) -> Self {
        Interval {
            lo: self.lo.clamp(0.0, 1.0),
            hi: self.hi.clamp(0.0, 1.0),
        }
    }

    /// Endpoint-wise minimum; stays ordered because both inputs are.
    pub fn min(self, other: Interval) -> Self {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.min(other.hi),
        }
    }
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: self.lo + rhs.lo,
            hi: self.hi + rhs.hi,
        }
    }
}

/// Endpoint-wise product; only meaningful for non-negative operands.
impl Mul for Interval {
    type Output = Interval;

    fn mul(self, rhs: Interval) -> Interval {
        debug_assert!(self.lo >= 0.0 && rhs.lo >= 0.0, "endpoint-wise product needs non-negative intervals");
        Interval {
            lo: self.lo * rhs.lo,
            hi: self.hi * rhs.hi,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

// Endpoints travel as decimal strings so no client loses bits to a
// float/text round-trip. Plain JSON numbers are accepted on input.
impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Interval", 2)?;
        s.serialize_field("lo", &crate::fmt::decimal(self.lo))?;
        s.serialize_field("hi", &crate::fmt::decimal(self.hi))?;
        s.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Endpoint {
    Number(f64),
    Text(String),
}

impl Endpoint {
    fn value<E: de::Error>(self) -> Result<f64, E> {
        match self {
            Endpoint::Number(x) => Ok(x),
            Endpoint::Text(s) => s
                .trim()
                .parse()
                .map_err(|_| E::custom(format!("invalid interval endpoint '{s}'"))),
        }
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            lo: Endpoint,
            hi: Endpoint,
        }
        let raw = Raw::deserialize(deserializer)?;
        let lo = raw.lo.value()?;
        let hi = raw.hi.value()?;
        Interval::new(lo, hi).ok_or_else(|| de::Error::custom(format!("invalid interval [{lo}, {hi}]")))
    }
}

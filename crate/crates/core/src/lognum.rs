//! Nonnegative magnitudes stored in log-domain.
//!
//! Populations in the very-active-immigration regime reach `e^{n^2}` and beyond,
//! so every count that may leave machine range is carried as a
//! [`LogMagnitude`]: either the exact zero or the natural log of a positive
//! value. Only `log⁺`-type observables are ever read back, so the accuracy
//! notion is absolute error in the log (relative error in the value).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Sentinel used for the zero element in text encodings.
pub const ZERO_SENTINEL: &str = "zero";

/// A value `v >= 0`, held as `Zero` or as `Positive(ln v)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum LogMagnitude {
    #[default]
    Zero,
    Positive(f64),
}

impl LogMagnitude {
    pub const ONE: LogMagnitude = LogMagnitude::Positive(0.0);

    /// Builds from the natural log of the value. `-inf` maps to zero.
    pub fn from_ln(ln: f64) -> Result<Self> {
        if ln.is_nan() || ln == f64::INFINITY {
            return Err(Error::InvalidParameter(format!("log value {ln} is not finite")));
        }
        if ln == f64::NEG_INFINITY {
            return Ok(LogMagnitude::Zero);
        }
        Ok(LogMagnitude::Positive(ln))
    }

    pub fn from_value(v: f64) -> Result<Self> {
        if !(v >= 0.0) || v.is_infinite() {
            return Err(Error::InvalidParameter(format!("value {v} is not a finite nonnegative real")));
        }
        if v == 0.0 {
            Ok(LogMagnitude::Zero)
        } else {
            Ok(LogMagnitude::Positive(v.ln()))
        }
    }

    pub fn from_count(count: u64) -> Self {
        if count == 0 {
            LogMagnitude::Zero
        } else {
            LogMagnitude::Positive((count as f64).ln())
        }
    }

    pub fn is_zero(self) -> bool {
        matches!(self, LogMagnitude::Zero)
    }

    /// Natural log of the value, `None` for zero.
    pub fn ln(self) -> Option<f64> {
        match self {
            LogMagnitude::Zero => None,
            LogMagnitude::Positive(l) => Some(l),
        }
    }

    /// Natural log with `-inf` for zero.
    pub fn ln_or_neg_inf(self) -> f64 {
        self.ln().unwrap_or(f64::NEG_INFINITY)
    }

    /// Decodes to an `f64`; saturates to `inf` outside machine range.
    pub fn value(self) -> f64 {
        match self {
            LogMagnitude::Zero => 0.0,
            LogMagnitude::Positive(l) => l.exp(),
        }
    }

    /// Sum of the represented values: `max + log1p(exp(min - max))`.
    pub fn lse_add(self, other: LogMagnitude) -> LogMagnitude {
        match (self, other) {
            (LogMagnitude::Zero, y) => y,
            (x, LogMagnitude::Zero) => x,
            (LogMagnitude::Positive(a), LogMagnitude::Positive(b)) => {
                let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                LogMagnitude::Positive(hi + (lo - hi).exp().ln_1p())
            }
        }
    }

    /// Multiplies by `mu^m`, a single fused multiply-add on the log.
    pub fn scale_pow(self, mu: f64, m: i64) -> LogMagnitude {
        debug_assert!(mu > 0.0);
        match self {
            LogMagnitude::Zero => LogMagnitude::Zero,
            LogMagnitude::Positive(l) => LogMagnitude::Positive((m as f64).mul_add(mu.ln(), l)),
        }
    }

    /// Multiplies by `e^{shift}`.
    pub fn shift_ln(self, shift: f64) -> LogMagnitude {
        match self {
            LogMagnitude::Zero => LogMagnitude::Zero,
            LogMagnitude::Positive(l) => LogMagnitude::Positive(l + shift),
        }
    }

    /// `log⁺ v = max(log v, 0)`, with `log⁺ 0 = 0`.
    pub fn log_plus(self) -> f64 {
        match self {
            LogMagnitude::Zero => 0.0,
            LogMagnitude::Positive(l) => l.max(0.0),
        }
    }

    /// Pairwise left-to-right sum.
    pub fn sum<I: IntoIterator<Item = LogMagnitude>>(items: I) -> LogMagnitude {
        items.into_iter().fold(LogMagnitude::Zero, LogMagnitude::lse_add)
    }
}

impl PartialOrd for LogMagnitude {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.ln_or_neg_inf().partial_cmp(&other.ln_or_neg_inf())
    }
}

impl fmt::Display for LogMagnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogMagnitude::Zero => f.write_str(ZERO_SENTINEL),
            LogMagnitude::Positive(l) => write!(f, "{l}"),
        }
    }
}

impl FromStr for LogMagnitude {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == ZERO_SENTINEL {
            return Ok(LogMagnitude::Zero);
        }
        let ln: f64 =
            s.parse().map_err(|_| Error::Parse(format!("'{s}' is neither a log value nor '{ZERO_SENTINEL}'")))?;
        if !ln.is_finite() {
            return Err(Error::Parse(format!("log value '{s}' is not finite")));
        }
        Ok(LogMagnitude::Positive(ln))
    }
}

impl Serialize for LogMagnitude {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LogMagnitude {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

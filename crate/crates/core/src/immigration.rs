//! Immigration laws with logarithmically heavy tails.
//!
//! Each law is defined by the exact tail of `V = log J` before flooring, so
//! that both the sampler and the norming sequence can be checked with no
//! modelling slack. Immigrant counts are `J = max(1, floor(e^V))`.
//!
//! An older norming `a_n` in the subcritical case is defined through `1 - E(1 - e^{-a_n})^J ~ (|log μ| n)^{-1}`,
//! and satisfies `b_n ~ |log μ|^{-1/α} a_n`. Only `b_n` is computed here.

use rand::Rng;
use rand_distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lognum::LogMagnitude;

/// Bisection steps used to invert the slowly varying tail.
pub const INVERSE_BISECTION_STEPS: usize = 50;
/// Relative tolerance of the `b_n` solver when no closed form exists.
pub const NORMING_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Above this `V`, `floor(e^V)` and `e^V` agree to far better than `f64` precision in log.
const FLOOR_EXACT_LIMIT: f64 = 36.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ImmigrationConfig", into = "ImmigrationConfig")]
pub enum ImmigrationLaw {
    /// `P{V > x} = min(1, c/x)`.
    Reciprocal { c: f64 },
    /// `P{V > x} = min(1, x^-α)`, `α ∈ (0, 1)`.
    ParetoLog { alpha: f64 },
    /// `P{V > x} = min(1, log(e + x)/x)`: index 1 with `ℓ(x) = log(e + x) -> ∞`.
    ParetoLogSv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    Reciprocal,
    ParetoLog,
    ParetoLogSv,
}

/// Wire form: `{"variant": ..., "c": r}` or `{"variant": ..., "alpha": r}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmigrationConfig {
    pub variant: VariantName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl TryFrom<ImmigrationConfig> for ImmigrationLaw {
    type Error = Error;

    fn try_from(cfg: ImmigrationConfig) -> Result<Self> {
        match cfg.variant {
            VariantName::Reciprocal => {
                ImmigrationLaw::reciprocal(cfg.c.ok_or_else(|| invalid("reciprocal immigration needs 'c'"))?)
            }
            VariantName::ParetoLog => {
                ImmigrationLaw::pareto_log(cfg.alpha.ok_or_else(|| invalid("pareto_log immigration needs 'alpha'"))?)
            }
            VariantName::ParetoLogSv => match cfg.alpha {
                None => Ok(ImmigrationLaw::ParetoLogSv),
                Some(1.0) => Ok(ImmigrationLaw::ParetoLogSv),
                Some(a) => Err(invalid(format!("pareto_log_sv has alpha = 1, got {a}"))),
            },
        }
    }
}

impl From<ImmigrationLaw> for ImmigrationConfig {
    fn from(law: ImmigrationLaw) -> Self {
        match law {
            ImmigrationLaw::Reciprocal { c } => {
                ImmigrationConfig { variant: VariantName::Reciprocal, c: Some(c), alpha: None }
            }
            ImmigrationLaw::ParetoLog { alpha } => {
                ImmigrationConfig { variant: VariantName::ParetoLog, c: None, alpha: Some(alpha) }
            }
            ImmigrationLaw::ParetoLogSv => {
                ImmigrationConfig { variant: VariantName::ParetoLogSv, c: None, alpha: None }
            }
        }
    }
}

fn sv_tail(x: f64) -> f64 {
    (std::f64::consts::E + x).ln() / x
}

/// Solves `sv_tail(x) = level` for `level ∈ (0, 1]` by bisection on a
/// doubling bracket.
fn invert_sv(level: f64, steps: usize) -> f64 {
    let mut hi = 2.0;
    while sv_tail(hi) > level {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    // The tail exceeds one below x ≈ 1.4; clamp the bracket there.
    if sv_tail(lo) <= level {
        lo = 0.0;
    }
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if mid > 0.0 && sv_tail(mid) <= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

impl ImmigrationLaw {
    pub fn reciprocal(c: f64) -> Result<Self> {
        if c.is_finite() && c > 0.0 {
            Ok(ImmigrationLaw::Reciprocal { c })
        } else {
            Err(invalid(format!("reciprocal immigration needs c > 0, got {c}")))
        }
    }

    pub fn pareto_log(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(ImmigrationLaw::ParetoLog { alpha })
        } else {
            Err(invalid(format!("pareto_log immigration needs alpha in (0, 1), got {alpha}")))
        }
    }

    /// Tail index `α` of `P{log J > x}`.
    pub fn index(&self) -> f64 {
        match *self {
            ImmigrationLaw::Reciprocal { .. } | ImmigrationLaw::ParetoLogSv => 1.0,
            ImmigrationLaw::ParetoLog { alpha } => alpha,
        }
    }

    /// `P{V > x}`, exactly.
    pub fn tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let t = match *self {
            ImmigrationLaw::Reciprocal { c } => c / x,
            ImmigrationLaw::ParetoLog { alpha } => x.powf(-alpha),
            ImmigrationLaw::ParetoLogSv => sv_tail(x),
        };
        t.min(1.0)
    }

    /// Generalized inverse of the tail: the smallest `x` with `tail(x) <= u`.
    pub fn inverse_tail(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u <= 1.0);
        match *self {
            ImmigrationLaw::Reciprocal { c } => c / u,
            ImmigrationLaw::ParetoLog { alpha } => u.powf(-1.0 / alpha),
            ImmigrationLaw::ParetoLogSv => invert_sv(u, INVERSE_BISECTION_STEPS),
        }
    }

    /// `log J` for the uniform variate `u ∈ (0, 1]`.
    pub fn log_j_from_uniform(&self, u: f64) -> LogMagnitude {
        log_floor_exp(self.inverse_tail(u))
    }

    pub fn sample_v<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = Open01.sample(rng);
        self.inverse_tail(u)
    }

    pub fn sample_log_j<R: Rng + ?Sized>(&self, rng: &mut R) -> LogMagnitude {
        log_floor_exp(self.sample_v(rng))
    }

    /// Solves `n · tail(b) = 1`.
    pub fn norming_bn(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(invalid("norming index n must be at least 1"));
        }
        let nf = n as f64;
        Ok(match *self {
            ImmigrationLaw::Reciprocal { c } => c * nf,
            ImmigrationLaw::ParetoLog { alpha } => nf.powf(1.0 / alpha),
            ImmigrationLaw::ParetoLogSv => solve_sv_norming(nf),
        })
    }
}

fn solve_sv_norming(n: f64) -> f64 {
    let target = 1.0 / n;
    let mut hi = 2.0;
    while sv_tail(hi) > target {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    if sv_tail(lo) <= target {
        lo = 0.0;
    }
    while hi - lo > NORMING_RELATIVE_TOLERANCE * hi {
        let mid = 0.5 * (lo + hi);
        if mid > 0.0 && sv_tail(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `log max(1, floor(e^v))`.
pub fn log_floor_exp(v: f64) -> LogMagnitude {
    if v < std::f64::consts::LN_2 {
        return LogMagnitude::ONE;
    }
    if v > FLOOR_EXACT_LIMIT {
        return LogMagnitude::Positive(v);
    }
    LogMagnitude::Positive(v.exp().floor().ln())
}

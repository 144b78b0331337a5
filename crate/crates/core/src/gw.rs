//! Cohort simulation across generations with a hybrid exact/fluid kernel.
//!
//! Counts at or below the exactness threshold `M` move by exact convolution
//! draws. Above `M` the cohort follows its mean, `x -> x·μ`, in log-domain.
//! On subcritical descent a fluid value that falls back to `M` or below is
//! rounded and handed back to the exact kernel, so extinction happens at a
//! random time as it does for the true process.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lognum::LogMagnitude;
use crate::offspring::OffspringFamily;
use crate::path::CadlagPath;

pub const DEFAULT_EXACTNESS_THRESHOLD: u64 = 1_000_000;
pub const MIN_EXACTNESS_THRESHOLD: u64 = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FluidConfigRaw", into = "FluidConfigRaw")]
pub struct FluidConfig {
    exactness_threshold: u64,
    refine_on_descent: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluidConfigRaw {
    #[serde(default = "default_threshold")]
    exactness_threshold: u64,
    #[serde(default = "default_refine")]
    refine_on_descent: bool,
}

fn default_threshold() -> u64 {
    DEFAULT_EXACTNESS_THRESHOLD
}

fn default_refine() -> bool {
    true
}

impl TryFrom<FluidConfigRaw> for FluidConfig {
    type Error = crate::Error;

    fn try_from(raw: FluidConfigRaw) -> Result<Self> {
        FluidConfig::new(raw.exactness_threshold, raw.refine_on_descent)
    }
}

impl From<FluidConfig> for FluidConfigRaw {
    fn from(c: FluidConfig) -> Self {
        FluidConfigRaw { exactness_threshold: c.exactness_threshold, refine_on_descent: c.refine_on_descent }
    }
}

impl Default for FluidConfig {
    fn default() -> Self {
        FluidConfig { exactness_threshold: DEFAULT_EXACTNESS_THRESHOLD, refine_on_descent: true }
    }
}

impl FluidConfig {
    pub fn new(exactness_threshold: u64, refine_on_descent: bool) -> Result<Self> {
        if exactness_threshold < MIN_EXACTNESS_THRESHOLD {
            return Err(invalid(format!(
                "exactness threshold must be at least {MIN_EXACTNESS_THRESHOLD}, got {exactness_threshold}"
            )));
        }
        if exactness_threshold > crate::offspring::MAX_EXACT_COHORT {
            return Err(invalid("exactness threshold exceeds the exact sampling limit"));
        }
        Ok(FluidConfig { exactness_threshold, refine_on_descent })
    }

    pub fn exactness_threshold(&self) -> u64 {
        self.exactness_threshold
    }

    pub fn refine_on_descent(&self) -> bool {
        self.refine_on_descent
    }
}

/// How a generation's value is held.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// An exact integer count.
    Exact,
    /// A deterministic mean-flow value in log-domain.
    Fluid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PopulationPath {
    pub values: Vec<LogMagnitude>,
    pub regimes: Vec<Regime>,
}

impl PopulationPath {
    pub fn generations(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

#[derive(Clone, Copy, Debug)]
enum State {
    Exact(u64),
    Fluid(f64),
}

impl State {
    fn magnitude(self) -> LogMagnitude {
        match self {
            State::Exact(c) => LogMagnitude::from_count(c),
            State::Fluid(l) => LogMagnitude::Positive(l),
        }
    }

    fn regime(self) -> Regime {
        match self {
            State::Exact(_) => Regime::Exact,
            State::Fluid(_) => Regime::Fluid,
        }
    }
}

/// Nearest integer to `e^ln`, ties to even.
fn round_count(ln: f64) -> u64 {
    ln.exp().round_ties_even() as u64
}

/// Total population of a cohort started from `initial` individuals, for
/// generations `0..=generations`.
pub fn simulate_cohort<R: Rng + ?Sized>(
    family: &OffspringFamily,
    initial: LogMagnitude,
    generations: usize,
    config: &FluidConfig,
    rng: &mut R,
) -> PopulationPath {
    let mut values = Vec::with_capacity(generations + 1);
    let mut regimes = Vec::with_capacity(generations + 1);
    simulate_cohort_with(family, initial, generations, config, rng, |_, state| {
        values.push(state.magnitude());
        regimes.push(state.regime());
        true
    });
    PopulationPath { values, regimes }
}

/// Streams the cohort's values to `visit(generation, value)` and stops after
/// extinction or when `visit` returns `false`. Generations after extinction
/// are not visited; their value is zero.
pub fn visit_cohort<R: Rng + ?Sized>(
    family: &OffspringFamily,
    initial: LogMagnitude,
    generations: usize,
    config: &FluidConfig,
    rng: &mut R,
    mut visit: impl FnMut(usize, LogMagnitude),
) {
    simulate_cohort_with(family, initial, generations, config, rng, |g, state| {
        let v = state.magnitude();
        if v.is_zero() {
            return false;
        }
        visit(g, v);
        true
    });
}

fn simulate_cohort_with<R: Rng + ?Sized>(
    family: &OffspringFamily,
    initial: LogMagnitude,
    generations: usize,
    config: &FluidConfig,
    rng: &mut R,
    mut emit: impl FnMut(usize, State) -> bool,
) {
    let threshold = config.exactness_threshold;
    let ln_threshold = (threshold as f64).ln();
    let ln_mu = family.mean().ln();

    let mut state = match initial {
        LogMagnitude::Zero => State::Exact(0),
        LogMagnitude::Positive(l) if l <= ln_threshold => State::Exact(round_count(l)),
        LogMagnitude::Positive(l) => State::Fluid(l),
    };

    for g in 0..=generations {
        if !emit(g, state) {
            return;
        }
        if g == generations {
            break;
        }
        state = match state {
            State::Exact(0) => State::Exact(0),
            State::Exact(c) if c <= threshold => {
                State::Exact(family.sample_generation(c, rng).expect("count below exactness threshold"))
            }
            State::Exact(c) => step_fluid((c as f64).ln() + ln_mu, ln_threshold, config),
            State::Fluid(l) => step_fluid(l + ln_mu, ln_threshold, config),
        };
    }
}

fn step_fluid(next_ln: f64, ln_threshold: f64, config: &FluidConfig) -> State {
    if config.refine_on_descent && next_ln <= ln_threshold {
        State::Exact(round_count(next_ln))
    } else {
        State::Fluid(next_ln)
    }
}

/// `t -> log⁺(values[floor(n t)]) / scale` on `[0, G/n]`.
pub fn normalized_log_path(path: &PopulationPath, scale: f64, time_scale: usize) -> Result<CadlagPath> {
    if !(scale > 0.0) {
        return Err(invalid(format!("scale must be positive, got {scale}")));
    }
    if time_scale == 0 {
        return Err(invalid("time scale must be positive"));
    }
    let levels: Vec<f64> = path.values.iter().map(|v| v.log_plus() / scale).collect();
    CadlagPath::step_on_lattice(&levels, time_scale)
}

/// `(a + t log μ)^+`.
pub fn limit_profile(a: f64, mu: f64, t: f64) -> f64 {
    (a + t * mu.ln()).max(0.0)
}

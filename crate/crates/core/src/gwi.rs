//! The immigration process `Y_m = Σ_{k<=m} Σ_{i<=J_k} X_{i,k}(m-k)` on the
//! integer grid `0..=[nT]`, its truncation to cohorts with `log J_k <= γ c_n`,
//! and the conditional mean proxy `Z_m = Σ_{k<=m} μ^{m-k} J_k`.
//!
//! Accumulation is cohort-major. Immigrant sizes come from stream 0 of the run
//! seed and cohort `k` from stream `k + 1`, so the truncated process and `Z`
//! are coupled to `Y` by seed reuse.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gw::{visit_cohort, FluidConfig};
use crate::immigration::ImmigrationLaw;
use crate::lognum::LogMagnitude;
use crate::offspring::OffspringFamily;
use crate::path::CadlagPath;
use crate::rng::{cohort_stream, stream, IMMIGRANT_STREAM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GwiRun {
    pub n: u64,
    pub horizon: f64,
    pub family: OffspringFamily,
    pub law: ImmigrationLaw,
    #[serde(default)]
    pub config: FluidConfig,
    pub seed: u64,
}

impl GwiRun {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        // T = 0 is allowed: the run is the single value Y_0 = J_0.
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!("horizon must be finite and >= 0, got {}", self.horizon)));
        }
        if self.n as f64 * self.horizon > 1e8 {
            return Err(invalid("n·T exceeds 1e8 grid points"));
        }
        Ok(())
    }

    /// `[nT]`, the last grid index.
    pub fn last_index(&self) -> usize {
        (self.n as f64 * self.horizon).floor() as usize
    }

    /// `log J_0, ..., log J_{[nT]}` from the immigrant stream.
    pub fn immigrants(&self) -> Vec<LogMagnitude> {
        let mut rng = stream(self.seed, IMMIGRANT_STREAM);
        (0..=self.last_index()).map(|_| self.law.sample_log_j(&mut rng)).collect()
    }

    fn accumulate(&self, immigrants: &[LogMagnitude], include: impl Fn(LogMagnitude) -> bool) -> Vec<LogMagnitude> {
        let last = immigrants.len() - 1;
        let mut y = vec![LogMagnitude::Zero; last + 1];
        for (k, &j) in immigrants.iter().enumerate() {
            if !include(j) {
                continue;
            }
            let mut rng = cohort_stream(self.seed, k);
            visit_cohort(&self.family, j, last - k, &self.config, &mut rng, |g, v| {
                y[k + g] = y[k + g].lse_add(v);
            });
        }
        y
    }

    /// `Y_0, ..., Y_{[nT]}`.
    pub fn simulate_y_path(&self) -> Result<Vec<LogMagnitude>> {
        self.validate()?;
        Ok(self.accumulate(&self.immigrants(), |_| true))
    }

    /// `Y` driven by the given immigrant sizes instead of the law; the cohort
    /// streams are those of the run seed.
    pub fn y_path_with_immigrants(&self, immigrants: &[LogMagnitude]) -> Result<Vec<LogMagnitude>> {
        self.validate()?;
        if immigrants.len() != self.last_index() + 1 {
            return Err(invalid(format!(
                "expected {} immigrant sizes, got {}",
                self.last_index() + 1,
                immigrants.len()
            )));
        }
        Ok(self.accumulate(immigrants, |_| true))
    }

    /// `Y^{(<=γ)}`: cohorts with `log J_k > γ c_n` are dropped. Uses the same
    /// immigrant and cohort draws as [`GwiRun::simulate_y_path`].
    pub fn truncated_y_path(&self, gamma: f64, c_n: f64) -> Result<Vec<LogMagnitude>> {
        self.validate()?;
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid(format!("gamma must be in (0, 1), got {gamma}")));
        }
        if !(c_n > 0.0) {
            return Err(invalid(format!("c_n must be positive, got {c_n}")));
        }
        let cap = gamma * c_n;
        Ok(self.accumulate(&self.immigrants(), |j| j.ln_or_neg_inf() <= cap))
    }

    /// `Z_m = Σ_{k<=m} μ^{m-k} J_k`.
    pub fn conditional_mean_path(&self, immigrants: &[LogMagnitude]) -> Vec<LogMagnitude> {
        let mu = self.family.mean();
        let mut z = Vec::with_capacity(immigrants.len());
        let mut acc = LogMagnitude::Zero;
        for &j in immigrants {
            acc = acc.scale_pow(mu, 1).lse_add(j);
            z.push(acc);
        }
        z
    }
}

/// Step path `t -> log⁺(values[[nt]] · μ^{-[nt]}) / norm`, the factor applied
/// only when `correction` is given.
pub fn normalized_observable(
    values: &[LogMagnitude],
    norm: f64,
    n: u64,
    correction: Option<f64>,
) -> Result<CadlagPath> {
    if !(norm > 0.0) {
        return Err(invalid(format!("norm must be positive, got {norm}")));
    }
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let levels: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(m, &v)| {
            let v = match correction {
                Some(mu) => v.scale_pow(mu, -(m as i64)),
                None => v,
            };
            v.log_plus() / norm
        })
        .collect();
    CadlagPath::step_on_lattice(&levels, n as usize)
}

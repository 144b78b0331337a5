//! Offspring laws whose `m`-fold convolutions can be drawn in O(1).
//!
//! A cohort of `m` individuals moves one generation forward with a single draw:
//! Poisson(`m·μ`), `2·Binomial(m, p)` or a negative binomial sum of `m`
//! geometrics.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest cohort the exact samplers accept: every count up to here is an
/// exact `f64` integer.
pub const MAX_EXACT_COHORT: u64 = 1 << 53;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OffspringConfig", into = "OffspringConfig")]
pub enum OffspringFamily {
    /// Poisson offspring with the given mean.
    Poisson { mean: f64 },
    /// Zero or two children, two with probability `p`.
    Binary { p: f64 },
    /// `P{X = k} = (1 - q) q^k` with `q = mean / (1 + mean)`.
    Geometric { mean: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Poisson,
    Binary,
    Geometric,
}

/// Wire form: `{"family": "poisson" | "binary" | "geometric", "mean": r}`.
/// Binary is specified by its mean `2p`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffspringConfig {
    pub family: FamilyName,
    pub mean: f64,
}

impl TryFrom<OffspringConfig> for OffspringFamily {
    type Error = Error;

    fn try_from(c: OffspringConfig) -> Result<Self> {
        match c.family {
            FamilyName::Poisson => OffspringFamily::poisson(c.mean),
            FamilyName::Binary => OffspringFamily::binary(c.mean / 2.0),
            FamilyName::Geometric => OffspringFamily::geometric(c.mean),
        }
    }
}

impl From<OffspringFamily> for OffspringConfig {
    fn from(f: OffspringFamily) -> Self {
        let family = match f {
            OffspringFamily::Poisson { .. } => FamilyName::Poisson,
            OffspringFamily::Binary { .. } => FamilyName::Binary,
            OffspringFamily::Geometric { .. } => FamilyName::Geometric,
        };
        OffspringConfig { family, mean: f.mean() }
    }
}

fn check_mean(mean: f64) -> Result<()> {
    if mean.is_finite() && mean > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("offspring mean must be in (0, inf), got {mean}")))
    }
}

impl OffspringFamily {
    pub fn poisson(mean: f64) -> Result<Self> {
        check_mean(mean)?;
        Ok(OffspringFamily::Poisson { mean })
    }

    pub fn binary(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(OffspringFamily::Binary { p })
        } else {
            Err(invalid(format!("binary offspring needs p in (0, 1), got {p}")))
        }
    }

    pub fn geometric(mean: f64) -> Result<Self> {
        check_mean(mean)?;
        Ok(OffspringFamily::Geometric { mean })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            OffspringFamily::Poisson { mean } | OffspringFamily::Geometric { mean } => mean,
            OffspringFamily::Binary { p } => 2.0 * p,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            OffspringFamily::Poisson { mean } => mean,
            OffspringFamily::Binary { p } => 4.0 * p * (1.0 - p),
            OffspringFamily::Geometric { mean } => mean * (1.0 + mean),
        }
    }

    /// `P{X = 0}`.
    pub fn extinction_one_step(&self) -> f64 {
        match *self {
            OffspringFamily::Poisson { mean } => (-mean).exp(),
            OffspringFamily::Binary { p } => 1.0 - p,
            OffspringFamily::Geometric { mean } => 1.0 / (1.0 + mean),
        }
    }

    /// Probability generating function `f(s) = E s^X`.
    pub fn pgf(&self, s: f64) -> f64 {
        match *self {
            OffspringFamily::Poisson { mean } => (mean * (s - 1.0)).exp(),
            OffspringFamily::Binary { p } => 1.0 - p + p * s * s,
            OffspringFamily::Geometric { mean } => {
                let q = mean / (1.0 + mean);
                (1.0 - q) / (1.0 - q * s)
            }
        }
    }

    /// `1 - f(1 - x)`, written so that no cancellation occurs as `x -> 0`.
    fn survival_map(&self, x: f64) -> f64 {
        match *self {
            OffspringFamily::Poisson { mean } => -(-mean * x).exp_m1(),
            OffspringFamily::Binary { p } => p * x * (2.0 - x),
            OffspringFamily::Geometric { mean } => {
                let q = mean / (1.0 + mean);
                q * x / (1.0 - q + q * x)
            }
        }
    }

    /// Total offspring of `m` independent individuals.
    pub fn sample_generation<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> Result<u64> {
        if m > MAX_EXACT_COHORT {
            return Err(Error::CohortTooLarge { m, limit: MAX_EXACT_COHORT });
        }
        if m == 0 {
            return Ok(0);
        }
        let draw = match *self {
            OffspringFamily::Poisson { mean } => poisson(m as f64 * mean, rng),
            OffspringFamily::Binary { p } => {
                let b = Binomial::new(m, p).map_err(|e| invalid(e.to_string()))?;
                2 * b.sample(rng)
            }
            OffspringFamily::Geometric { mean } => {
                // Sum of m geometrics is NB(m, q): a Poisson with Gamma(m, q/(1-q)) rate.
                let gamma = Gamma::new(m as f64, mean).map_err(|e| invalid(e.to_string()))?;
                poisson(gamma.sample(rng), rng)
            }
        };
        Ok(draw)
    }

    /// `p_k = P{X(k) >= 1}` for `k = 1..=n`, from a single ancestor.
    ///
    /// Iterates the pgf at zero, `f_{k+1}(0) = f(f_k(0))`, carried in the
    /// complement `p_k = 1 - f_k(0)` so that values far below machine epsilon
    /// stay accurate.
    pub fn survival_probability(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut p = 1.0;
        for _ in 0..n {
            p = self.survival_map(p);
            out.push(p);
        }
        out
    }
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    // lambda stays far below Poisson::MAX_LAMBDA for exact-regime cohorts.
    Poisson::new(lambda).expect("finite positive rate").sample(rng) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson as PoissonPmf};

    fn families() -> [OffspringFamily; 3] {
        [
            OffspringFamily::poisson(0.9).unwrap(),
            OffspringFamily::geometric(0.9).unwrap(),
            OffspringFamily::binary(0.5).unwrap(),
        ]
    }

    #[test]
    fn means() {
        assert_eq!(OffspringFamily::binary(0.5).unwrap().mean(), 1.0);
        assert_eq!(OffspringFamily::poisson(0.9).unwrap().mean(), 0.9);
        assert_eq!(OffspringFamily::geometric(2.0).unwrap().mean(), 2.0);
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(OffspringFamily::binary(1.0).is_err());
        assert!(OffspringFamily::binary(0.0).is_err());
        assert!(OffspringFamily::poisson(0.0).is_err());
        assert!(OffspringFamily::geometric(f64::INFINITY).is_err());
    }

    #[test]
    fn config_encoding() {
        let f: OffspringFamily = serde_json::from_str(r#"{"family":"binary","mean":1.0}"#).unwrap();
        assert_eq!(f, OffspringFamily::Binary { p: 0.5 });
        let json = serde_json::to_string(&OffspringFamily::geometric(2.0).unwrap()).unwrap();
        assert_eq!(json, r#"{"family":"geometric","mean":2.0}"#);
        assert!(serde_json::from_str::<OffspringFamily>(r#"{"family":"binary","mean":2.0}"#).is_err());
        assert!(serde_json::from_str::<OffspringFamily>(r#"{"family":"zeta","mean":1.0}"#).is_err());
    }

    #[test]
    fn empty_cohort_has_no_offspring() {
        let mut rng = stream(1, 0);
        for f in families() {
            assert_eq!(f.sample_generation(0, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn oversize_cohort_is_rejected() {
        let mut rng = stream(1, 0);
        let f = OffspringFamily::poisson(1.0).unwrap();
        assert!(matches!(f.sample_generation(MAX_EXACT_COHORT + 1, &mut rng), Err(Error::CohortTooLarge { .. })));
    }

    #[test]
    fn binary_large_cohort_mean() {
        let f = OffspringFamily::binary(0.5).unwrap();
        let m = 1_000_000u64;
        let mut rng = stream(11, 0);
        let draws = 1000;
        let total: f64 = (0..draws).map(|_| f.sample_generation(m, &mut rng).unwrap() as f64).sum();
        let sd = (m as f64 * f.variance()).sqrt();
        let band = 3.0 * sd / (draws as f64).sqrt();
        assert!((total / draws as f64 - m as f64).abs() <= band);
    }

    #[test]
    fn poisson_cohort_chi_square() {
        let f = OffspringFamily::poisson(0.9).unwrap();
        let mut rng = stream(12, 0);
        let draws = 100_000usize;
        let mut counts = vec![0usize; 200];
        for _ in 0..draws {
            let k = f.sample_generation(100, &mut rng).unwrap() as usize;
            counts[k.min(199)] += 1;
        }
        let pmf = PoissonPmf::new(90.0).unwrap();
        // Pool tails so every bin has expected count >= 5.
        let (lo, hi) = (62usize, 120usize);
        let mut observed = vec![counts[..=lo].iter().sum::<usize>() as f64];
        let mut expected = vec![(0..=lo as u64).map(|k| pmf.pmf(k)).sum::<f64>()];
        for k in lo + 1..hi {
            observed.push(counts[k] as f64);
            expected.push(pmf.pmf(k as u64));
        }
        observed.push(counts[hi..].iter().sum::<usize>() as f64);
        expected.push(1.0 - expected.iter().sum::<f64>());
        let stat: f64 = observed
            .iter()
            .zip(&expected)
            .map(|(o, e)| {
                let e = e * draws as f64;
                (o - e) * (o - e) / e
            })
            .sum();
        let dof = (observed.len() - 1) as f64;
        let critical = ChiSquared::new(dof).unwrap().inverse_cdf(0.99);
        assert!(stat <= critical, "chi2 {stat} > {critical}");
    }

    #[test]
    fn cohort_means_within_five_standard_errors() {
        let fams = [
            OffspringFamily::poisson(0.9).unwrap(),
            OffspringFamily::geometric(0.9).unwrap(),
            OffspringFamily::binary(0.5).unwrap(),
            OffspringFamily::geometric(2.0).unwrap(),
        ];
        for (i, f) in fams.iter().enumerate() {
            for m in [1u64, 1_000, 1_000_000] {
                let mut rng = stream(100 + i as u64, m);
                let draws = 10_000;
                let total: f64 = (0..draws).map(|_| f.sample_generation(m, &mut rng).unwrap() as f64).sum();
                let se = (m as f64 * f.variance() / draws as f64).sqrt();
                let mean = total / draws as f64;
                assert!((mean - m as f64 * f.mean()).abs() <= 5.0 * se, "{f:?} m={m}: {mean}");
            }
        }
    }

    #[test]
    fn survival_binary_by_hand() {
        // f(s) = (1 + s^2) / 2: f(0) = 1/2, f(1/2) = 5/8.
        let p = OffspringFamily::binary(0.5).unwrap().survival_probability(2);
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn survival_critical_geometric_closed_form() {
        let p = OffspringFamily::geometric(1.0).unwrap().survival_probability(5);
        for (k, pk) in p.iter().enumerate() {
            let n = k + 1;
            assert!((pk - 1.0 / (n as f64 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn survival_matches_direct_pgf_iteration() {
        for f in families() {
            let p = f.survival_probability(20);
            let mut s = 0.0;
            for pk in p {
                s = f.pgf(s);
                assert!((pk - (1.0 - s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn survival_ratio_tends_to_mean() {
        for f in families() {
            let p = f.survival_probability(1001);
            let ratio = p[1000] / p[999];
            assert!((ratio - f.mean()).abs() <= 0.01, "{f:?}: {ratio}");
        }
    }

    #[test]
    fn survival_is_subexponential() {
        let delta = 0.05;
        for f in families() {
            let p = f.survival_probability(1000);
            let log_term = |n: usize| delta * n as f64 - n as f64 * f.mean().ln() + p[n - 1].ln();
            for n in 100..1000 {
                assert!(log_term(n + 1) > log_term(n), "{f:?} at n={n}");
            }
        }
    }
}

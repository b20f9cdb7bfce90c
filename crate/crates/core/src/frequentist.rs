//! Null-hypothesis significance tests and confidence intervals for the
//! accuracy difference of two systems.
//!
//! The z-test treats the two accuracies as independent proportions even when
//! the outcomes are paired on the same items; reports flag this assumption.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Direction, ItemOutcome};
use crate::numerics::{std_normal_cdf, std_normal_quantile, std_normal_sf, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTestResult {
    pub p_hat1: f64,
    pub p_hat2: f64,
    pub pooled_p: f64,
    pub sigma: f64,
    pub z: f64,
    pub p_value: f64,
    pub direction: Direction,
    /// Hypothesized value of `theta1 - theta2` under the null (0 for the
    /// plain test).
    pub null_difference: f64,
}

fn check_counts(s1: u64, n1: u64, s2: u64, n2: u64) -> Result<()> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::domain("sample sizes must be positive"));
    }
    if s1 > n1 || s2 > n2 {
        return Err(Error::domain(format!(
            "successes exceed trials: {s1}/{n1}, {s2}/{n2}"
        )));
    }
    Ok(())
}

/// Pooled standard error of `p1 - p2` under a common accuracy.
fn pooled_sigma(s1: u64, n1: u64, s2: u64, n2: u64) -> Result<(f64, f64)> {
    let pooled = (s1 + s2) as f64 / (n1 + n2) as f64;
    if pooled <= 0.0 || pooled >= 1.0 {
        return Err(Error::DegenerateTest(format!(
            "pooled accuracy is {pooled}; the standard error vanishes"
        )));
    }
    let sigma = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    Ok((pooled, sigma))
}

fn tail_probability(z: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Greater => std_normal_sf(z),
        Direction::Less => std_normal_cdf(z),
        Direction::TwoSided => (2.0 * std_normal_sf(z).min(std_normal_cdf(z))).min(1.0),
    }
}

/// Two-proportion z-test of `theta1 = theta2` with pooled standard error and
/// no continuity correction.
pub fn two_proportion_z_test(
    s1: u64,
    n1: u64,
    s2: u64,
    n2: u64,
    direction: Direction,
) -> Result<ZTestResult> {
    shifted_z_test(s1, n1, s2, n2, 0.0, direction)
}

/// z-test of `theta1 - theta2 = null_difference`, keeping the pooled
/// standard error of the plain test.
pub fn shifted_z_test(
    s1: u64,
    n1: u64,
    s2: u64,
    n2: u64,
    null_difference: f64,
    direction: Direction,
) -> Result<ZTestResult> {
    check_counts(s1, n1, s2, n2)?;
    let (pooled_p, sigma) = pooled_sigma(s1, n1, s2, n2)?;
    let p_hat1 = s1 as f64 / n1 as f64;
    let p_hat2 = s2 as f64 / n2 as f64;
    let z = (p_hat1 - p_hat2 - null_difference) / sigma;
    Ok(ZTestResult {
        p_hat1,
        p_hat2,
        pooled_p,
        sigma,
        z,
        p_value: tail_probability(z, direction),
        direction,
        null_difference,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMode {
    /// `diff +/- z(level) * pooled sigma`: a "95%" interval built from the
    /// one-sided 95% z-score, i.e. a two-sided 90% interval.
    PaperOneSidedZ,
    /// Wald interval `diff +/- z(1 - (1 - level)/2) * unpooled se`.
    StandardTwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub estimate: f64,
    pub level: f64,
    pub mode: CiMode,
    pub z_critical: f64,
    pub standard_error: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

pub fn diff_confidence_interval(
    s1: u64,
    n1: u64,
    s2: u64,
    n2: u64,
    level: f64,
    mode: CiMode,
) -> Result<ConfidenceInterval> {
    check_counts(s1, n1, s2, n2)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("confidence level {level} outside (0, 1)")));
    }
    let p1 = s1 as f64 / n1 as f64;
    let p2 = s2 as f64 / n2 as f64;
    let estimate = p1 - p2;
    let (z_critical, standard_error) = match mode {
        CiMode::PaperOneSidedZ => (std_normal_quantile(level)?, pooled_sigma(s1, n1, s2, n2)?.1),
        CiMode::StandardTwoSided => {
            let se = (p1 * (1.0 - p1) / n1 as f64 + p2 * (1.0 - p2) / n2 as f64).sqrt();
            if se == 0.0 {
                return Err(Error::DegenerateTest(
                    "both observed accuracies are 0 or 1; the standard error vanishes".into(),
                ));
            }
            (std_normal_quantile(1.0 - (1.0 - level) / 2.0)?, se)
        }
    };
    let half = z_critical * standard_error;
    Ok(ConfidenceInterval {
        lower: estimate - half,
        upper: estimate + half,
        estimate,
        level,
        mode,
        z_critical,
        standard_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PermutationMode {
    /// Exact enumeration when at most 20 items differ, otherwise Monte Carlo.
    Auto { resamples: usize },
    Exact,
    MonteCarlo { resamples: usize },
}

/// Largest number of discordant items enumerated exactly.
pub const EXACT_PERMUTATION_LIMIT: usize = 20;
const EXACT_HARD_LIMIT: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub p_value: f64,
    /// Mean of `outcome1 - outcome2` over all items.
    pub observed_statistic: f64,
    /// Items whose outcomes differ; only these vary under sign flips.
    pub discordant: usize,
    pub exact: bool,
    pub resamples: usize,
    pub direction: Direction,
}

fn at_least_as_extreme(stat: i64, observed: i64, direction: Direction) -> bool {
    match direction {
        Direction::Greater => stat >= observed,
        Direction::Less => stat <= observed,
        Direction::TwoSided => stat.abs() >= observed.abs(),
    }
}

/// Paired sign-flip permutation test on the mean outcome difference.
///
/// The observed assignment is counted in the numerator, so p is never 0.
pub fn paired_permutation_test(
    items: &[ItemOutcome],
    mode: PermutationMode,
    direction: Direction,
    rng: &mut RngStream,
) -> Result<PermutationResult> {
    if items.is_empty() {
        return Err(Error::EmptyDataset("permutation test input".into()));
    }
    let diffs: Vec<i64> = items
        .iter()
        .map(|i| i.system1 as i64 - i.system2 as i64)
        .filter(|&d| d != 0)
        .collect();
    let observed: i64 = diffs.iter().sum();
    let m = diffs.len();
    let observed_statistic = observed as f64 / items.len() as f64;

    let exact = match mode {
        PermutationMode::Exact => {
            if m > EXACT_HARD_LIMIT {
                return Err(Error::domain(format!(
                    "exact enumeration over {m} discordant items is infeasible"
                )));
            }
            true
        }
        PermutationMode::Auto { .. } => m <= EXACT_PERMUTATION_LIMIT,
        PermutationMode::MonteCarlo { .. } => false,
    };

    let (p_value, resamples) = if exact {
        let total = 1u64 << m;
        let mut hits = 0u64;
        for mask in 0..total {
            let mut stat = 0i64;
            for (bit, d) in diffs.iter().enumerate() {
                stat += if mask >> bit & 1 == 1 { -d } else { *d };
            }
            if at_least_as_extreme(stat, observed, direction) {
                hits += 1;
            }
        }
        (hits as f64 / total as f64, total as usize)
    } else {
        let resamples = match mode {
            PermutationMode::Auto { resamples } | PermutationMode::MonteCarlo { resamples } => {
                resamples
            }
            PermutationMode::Exact => unreachable!(),
        };
        if resamples == 0 {
            return Err(Error::domain("Monte Carlo permutation test needs resamples > 0"));
        }
        let mut hits = 0usize;
        for _ in 0..resamples {
            let stat: i64 = diffs
                .iter()
                .map(|d| if rng.uniform() < 0.5 { -d } else { *d })
                .sum();
            if at_least_as_extreme(stat, observed, direction) {
                hits += 1;
            }
        }
        ((hits + 1) as f64 / (resamples + 1) as f64, resamples)
    };

    Ok(PermutationResult {
        p_value,
        observed_statistic,
        discordant: m,
        exact,
        resamples,
        direction,
    })
}

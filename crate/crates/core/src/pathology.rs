//! Simulations and exact calculations behind common testing pitfalls:
//! p-values that depend on the stopping rule, optional stopping, and the
//! prior sensitivity of Bayes factors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{BetaParams, HierarchicalModel};
use crate::error::{Error, Result};
use crate::frequentist::two_proportion_z_test;
use crate::model::{Direction, PairCounts};
use crate::numerics::{log_binomial_coefficient, RngStream, StreamDomain};
use crate::posterior::{bayes_factor_interval_null, hdi_from_samples, Hdi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Lower,
    Upper,
}

/// ln of `sum_{k in ks} C(n,k) p^k (1-p)^(n-k)`.
fn ln_binomial_mass(n: u64, p: f64, ks: std::ops::RangeInclusive<u64>) -> Result<f64> {
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    let mut terms = Vec::new();
    for k in ks {
        // 0 * ln(0) counts as 0 so that p = 1 is handled exactly
        let a = if k == 0 { 0.0 } else { k as f64 * ln_p };
        let b = if k == n { 0.0 } else { (n - k) as f64 * ln_q };
        terms.push(log_binomial_coefficient(n, k)? + a + b);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(max);
    }
    Ok(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
}

fn binomial_tail(a: u64, n: u64, theta0: f64, tail: Tail) -> Result<f64> {
    let ks = match tail {
        Tail::Lower => 0..=a,
        Tail::Upper => a..=n,
    };
    Ok(ln_binomial_mass(n, theta0, ks)?.exp().min(1.0))
}

/// Exact binomial p-value of `a` successes when `n` trials were fixed in
/// advance: `P(X <= a)` for the lower tail, `P(X >= a)` for the upper.
pub fn pvalue_fixed_n(a: u64, n: u64, theta0: f64, tail: Tail) -> Result<f64> {
    if a > n {
        return Err(Error::domain(format!("{a} successes out of {n} trials")));
    }
    if !(theta0 > 0.0 && theta0 <= 1.0) {
        return Err(Error::domain(format!("theta0 = {theta0} is outside (0, 1]")));
    }
    binomial_tail(a, n, theta0, tail)
}

/// Exact p-value when sampling stopped at the `a`-th success, which
/// happened on trial `n`. `Tail::Upper` is `P(N >= n)` (few successes make
/// the run long), `Tail::Lower` is `P(N <= n)`.
pub fn pvalue_fixed_successes(a: u64, n: u64, theta0: f64, tail: Tail) -> Result<f64> {
    if a == 0 || n < a {
        return Err(Error::domain(format!(
            "stopping at success {a} on trial {n} is impossible"
        )));
    }
    if !(theta0 > 0.0 && theta0 <= 1.0) {
        return Err(Error::domain(format!("theta0 = {theta0} is outside (0, 1]")));
    }
    match tail {
        // N >= n  <=>  at most a - 1 successes in the first n - 1 trials
        Tail::Upper => binomial_tail(a - 1, n - 1, theta0, Tail::Lower),
        // N <= n  <=>  at least a successes in the first n trials
        Tail::Lower => binomial_tail(a, n, theta0, Tail::Upper),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingComparison {
    pub a: u64,
    pub n: u64,
    pub theta0: f64,
    pub p_fixed_n: f64,
    pub p_fixed_successes: f64,
}

impl StoppingComparison {
    /// One-sided p-values for "too few successes" under both stopping
    /// rules, on the same data.
    pub fn new(a: u64, n: u64, theta0: f64) -> Result<Self> {
        Ok(StoppingComparison {
            a,
            n,
            theta0,
            p_fixed_n: pvalue_fixed_n(a, n, theta0, Tail::Lower)?,
            p_fixed_successes: pvalue_fixed_successes(a, n, theta0, Tail::Upper)?,
        })
    }

    pub fn gap(&self) -> f64 {
        (self.p_fixed_n - self.p_fixed_successes).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionalStoppingReport {
    pub theta: (f64, f64),
    pub looks: Vec<u64>,
    pub nominal_alpha: f64,
    pub direction: Direction,
    pub trials: usize,
    pub false_positives: usize,
    pub false_positive_rate: f64,
    /// Binomial standard error of the rate.
    pub standard_error: f64,
    pub master_seed: u64,
}

/// Looks at `step, 2 step, ..., max_n` (plus `max_n` if it is not a
/// multiple of `step`).
pub fn evenly_spaced_looks(step: u64, max_n: u64) -> Result<Vec<u64>> {
    if step == 0 || max_n == 0 {
        return Err(Error::config("look spacing and maximum sample size must be positive"));
    }
    let mut looks: Vec<u64> = (1..=max_n / step).map(|k| k * step).collect();
    if looks.last() != Some(&max_n) {
        looks.push(max_n);
    }
    Ok(looks)
}

/// Simulates experiments where both systems share accuracy `theta` and a
/// z-test is run on the accumulated data at every look. A trial counts as a
/// false positive if any look rejects at `nominal_alpha`; looks where the
/// test is degenerate (pooled accuracy 0 or 1) do not reject.
///
/// Trial `i` draws its data from stream `(master_seed, trial i)` in the same
/// order regardless of the looks, so nested look schedules give nested sets
/// of rejecting trials.
pub fn optional_stopping_fpr(
    theta: (f64, f64),
    looks: &[u64],
    nominal_alpha: f64,
    trials: usize,
    direction: Direction,
    master_seed: u64,
) -> Result<OptionalStoppingReport> {
    if looks.is_empty() {
        return Err(Error::config("optional stopping needs at least one look"));
    }
    if looks[0] == 0 || looks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("looks must be positive and strictly increasing"));
    }
    if trials == 0 {
        return Err(Error::config("optional stopping needs at least one trial"));
    }
    if !(nominal_alpha > 0.0 && nominal_alpha < 1.0) {
        return Err(Error::config(format!("alpha = {nominal_alpha} is outside (0, 1)")));
    }
    for t in [theta.0, theta.1] {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::config(format!("accuracy {t} is outside [0, 1]")));
        }
    }
    if theta.0 != theta.1 {
        return Err(Error::config(
            "false-positive simulation needs equal accuracies (a true null)",
        ));
    }
    let max_n = *looks.last().unwrap();

    let false_positives = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = RngStream::derive(master_seed, StreamDomain::Trial, i as u64);
            let (mut s1, mut s2) = (0u64, 0u64);
            let mut next_look = looks.iter().peekable();
            let mut rejected = false;
            for n in 1..=max_n {
                s1 += (rng.uniform() < theta.0) as u64;
                s2 += (rng.uniform() < theta.1) as u64;
                if next_look.peek() == Some(&&n) {
                    next_look.next();
                    if let Ok(t) = two_proportion_z_test(s1, n, s2, n, direction) {
                        rejected |= t.p_value < nominal_alpha;
                    }
                }
            }
            rejected
        })
        .count();

    let rate = false_positives as f64 / trials as f64;
    Ok(OptionalStoppingReport {
        theta,
        looks: looks.to_vec(),
        nominal_alpha,
        direction,
        trials,
        false_positives,
        false_positive_rate: rate,
        standard_error: (rate * (1.0 - rate) / trials as f64).sqrt(),
        master_seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSweepRow {
    pub prior: String,
    pub bf01: f64,
    pub bf01_se: f64,
    pub hdi: Hdi,
    pub posterior_mean_diff: f64,
}

/// Full conjugate analysis of `counts` under each prior (shared by both
/// systems). Rows come back sorted by prior label; the row for the `k`-th
/// label uses stream `(master_seed, sweep k)`.
pub fn prior_sensitivity_sweep(
    counts: &PairCounts,
    priors: &[BetaParams],
    epsilon: f64,
    hdi_mass: f64,
    n_mc: usize,
    master_seed: u64,
) -> Result<Vec<PriorSweepRow>> {
    if priors.is_empty() {
        return Err(Error::config("prior sweep needs at least one prior"));
    }
    let mut labelled: Vec<(String, BetaParams)> = priors.iter().map(|p| (p.to_string(), *p)).collect();
    labelled.sort_by(|a, b| a.0.cmp(&b.0));
    labelled.dedup_by(|a, b| a.0 == b.0);

    labelled
        .into_par_iter()
        .enumerate()
        .map(|(k, (label, prior))| {
            let mut rng = RngStream::derive(master_seed, StreamDomain::Sweep, k as u64);
            let posterior = HierarchicalModel::shared(prior).posterior(counts)?;
            let bf = bayes_factor_interval_null((prior, prior), &posterior, 0.0, epsilon, n_mc, &mut rng)?;
            let diffs = posterior.difference_draws(n_mc, &mut rng);
            Ok(PriorSweepRow {
                prior: label,
                bf01: bf.bf01,
                bf01_se: bf.bf01_se,
                hdi: hdi_from_samples(&diffs, hdi_mass)?,
                posterior_mean_diff: posterior.mean_difference().expect("conjugate posterior"),
            })
        })
        .collect()
}

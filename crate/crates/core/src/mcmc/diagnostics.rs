//! Split-R-hat and autocorrelation-based effective sample size.

use crate::error::{Error, Result};

/// Value reported as the ESS of a chain with no variation.
pub const MIN_ESS: f64 = 1.0;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with `n - 1` denominator.
fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn trimmed<'a>(chains: &[&'a [f64]]) -> Vec<&'a [f64]> {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    chains.iter().map(|c| &c[..n]).collect()
}

/// Split potential scale reduction factor.
///
/// Chains are trimmed to the shortest one and split into halves (dropping
/// the middle draw of odd-length chains) before comparing between- and
/// within-chain variance.
pub fn rhat(chains: &[&[f64]]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::domain("R-hat needs at least 2 chains"));
    }
    let chains = trimmed(chains);
    let n = chains[0].len();
    if n < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: n });
    }
    if chains.iter().all(|c| c.iter().all(|v| *v == c[0])) {
        return Err(Error::DegenerateChains);
    }
    let half = n / 2;
    let mut split = Vec::with_capacity(2 * chains.len());
    for c in &chains {
        split.push(&c[..half]);
        split.push(&c[n - half..]);
    }
    let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let within = mean(&split.iter().map(|c| variance(c)).collect::<Vec<_>>());
    if within == 0.0 {
        return Err(Error::DegenerateChains);
    }
    let len = half as f64;
    let between_over_n = variance(&means);
    let var_plus = (len - 1.0) / len * within + between_over_n;
    Ok((var_plus / within).sqrt())
}

/// Effective sample size of a single chain.
pub fn ess(samples: &[f64]) -> Result<f64> {
    ess_chains(&[samples])
}

/// Multi-chain effective sample size, `M N / tau` with the integrated
/// autocorrelation time `tau` truncated by Geyer's initial positive
/// sequence. Clipped to `[MIN_ESS, M N]`.
pub fn ess_chains(chains: &[&[f64]]) -> Result<f64> {
    if chains.is_empty() {
        return Err(Error::domain("ESS needs at least one chain"));
    }
    let chains = trimmed(chains);
    let n = chains[0].len();
    if n < 8 {
        return Err(Error::TooFewSamples { needed: 8, got: n });
    }
    let m = chains.len();
    let total = (m * n) as f64;
    let nf = n as f64;

    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let within = mean(&chains.iter().map(|c| variance(c)).collect::<Vec<_>>());
    let between_over_n = if m > 1 { variance(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * within + between_over_n;
    if !(var_plus > 0.0) || within == 0.0 {
        return Ok(MIN_ESS);
    }

    // mean over chains of the lag-t autocovariance (1/n normalisation)
    let autocov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| {
                c[..n - lag]
                    .iter()
                    .zip(&c[lag..])
                    .map(|(a, b)| (a - mu) * (b - mu))
                    .sum::<f64>()
                    / nf
            })
            .sum::<f64>()
            / m as f64
    };
    let rho = |lag: usize| 1.0 - (within - autocov(lag)) / var_plus;

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let even = if lag == 0 { 1.0 } else { rho(lag) };
        let pair = even + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        // initial monotone sequence
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    Ok((total / tau.max(f64::MIN_POSITIVE)).clamp(MIN_ESS, total))
}

//! Random-walk Metropolis over models of accuracies in `[0, 1]^d`.
//!
//! Each coordinate is updated in turn with a Gaussian proposal in logit
//! space; the target includes the log-Jacobian `ln theta + ln(1 - theta)`.
//! Step sizes adapt during warmup (Robbins–Monro on the log step, aiming at
//! the middle of the acceptance band) and stay frozen afterwards. Chains run
//! in parallel, each on its own `(master_seed, chain)` stream.

mod diagnostics;
mod export;

pub use diagnostics::{ess, ess_chains, rhat, MIN_ESS};
pub use export::{write_trace, TraceDiagnostics};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::LatentModel;
use crate::error::{Error, Result};
use crate::numerics::{RngStream, StreamDomain};

pub const RHAT_THRESHOLD: f64 = 1.01;
pub const MIN_CONVERGED_ESS: f64 = 400.0;

const INITIAL_STEP: f64 = 0.5;
const ADAPT_DECAY: f64 = 0.6;
const JITTER_SD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Start at `(a + 1) / (n + 2)` plus small logit-space noise.
    MleJitter,
    PriorDraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub master_seed: u64,
    pub target_accept_band: (f64, f64),
    pub init: InitStrategy,
}

impl McmcConfig {
    /// 4 chains, 1000 warmup iterations and 5000 kept draws each.
    pub fn new(master_seed: u64) -> Self {
        McmcConfig {
            chains: 4,
            warmup: 1000,
            draws: 5000,
            master_seed,
            target_accept_band: (0.2, 0.5),
            init: InitStrategy::MleJitter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains < 2 {
            return Err(Error::domain("MCMC needs at least 2 chains"));
        }
        if self.draws < 8 {
            return Err(Error::domain("MCMC needs at least 8 draws per chain"));
        }
        let (lo, hi) = self.target_accept_band;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::domain(format!("acceptance band ({lo}, {hi}) is invalid")));
        }
        Ok(())
    }

    fn target_accept(&self) -> f64 {
        0.5 * (self.target_accept_band.0 + self.target_accept_band.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    /// `params[j][t]`: parameter `j` at kept draw `t`.
    pub params: Vec<Vec<f64>>,
    /// Post-warmup acceptance rate over all coordinate updates.
    pub accept_rate: f64,
    /// Frozen per-coordinate proposal scales (logit units).
    pub step_sizes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub param_names: Vec<String>,
    pub chains: Vec<ChainTrace>,
    /// `None` when every chain is constant in the parameter.
    pub rhat: Vec<Option<f64>>,
    pub ess: Vec<f64>,
    pub master_seed: u64,
}

/// Summary statistics of pooled draws, computed from sorted values so they
/// do not depend on chain order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledSummary {
    pub mean: f64,
    pub variance: f64,
    pub draws: usize,
}

impl PooledSummary {
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let mut dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        dev.sort_by(f64::total_cmp);
        let variance = dev.iter().sum::<f64>() / (n - 1.0);
        PooledSummary {
            mean,
            variance,
            draws: values.len(),
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

impl Trace {
    pub fn dim(&self) -> usize {
        self.param_names.len()
    }

    /// Whether every R-hat is at most 1.01 and every ESS at least 400.
    pub fn converged(&self) -> bool {
        self.rhat.iter().all(|r| matches!(r, Some(v) if *v <= RHAT_THRESHOLD))
            && self.ess.iter().all(|&e| e >= MIN_CONVERGED_ESS)
    }

    /// Draws of one parameter, concatenated in chain order.
    pub fn pooled(&self, param: usize) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.params[param].iter().copied())
            .collect()
    }

    pub fn summary(&self, param: usize) -> PooledSummary {
        PooledSummary::from_values(self.pooled(param))
    }

    /// Joint `(theta1, theta2)` draws of a two-parameter trace.
    pub fn joint_pairs(&self) -> Vec<[f64; 2]> {
        assert_eq!(self.dim(), 2, "joint_pairs needs a two-parameter trace");
        self.chains
            .iter()
            .flat_map(|c| c.params[0].iter().zip(&c.params[1]).map(|(a, b)| [*a, *b]))
            .collect()
    }

    pub fn mean_accept_rate(&self) -> f64 {
        self.chains.iter().map(|c| c.accept_rate).sum::<f64>() / self.chains.len() as f64
    }

    fn diagnose(&mut self) {
        self.rhat.clear();
        self.ess.clear();
        for j in 0..self.dim() {
            let cols: Vec<&[f64]> = self.chains.iter().map(|c| c.params[j].as_slice()).collect();
            self.rhat.push(rhat(&cols).ok());
            self.ess.push(ess_chains(&cols).unwrap_or(MIN_ESS));
        }
    }
}

/// Accept a move whose log target ratio is `log_ratio`, given a uniform
/// draw in [0, 1).
pub fn metropolis_accept(log_ratio: f64, uniform: f64) -> bool {
    log_ratio >= 0.0 || uniform.ln() < log_ratio
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Log target in logit coordinates.
fn log_target<M: LatentModel + ?Sized>(model: &M, u: &[f64], theta: &mut [f64]) -> f64 {
    let mut jacobian = 0.0;
    for (t, &x) in theta.iter_mut().zip(u) {
        *t = sigmoid(x);
        // ln theta + ln(1 - theta) = -softplus(-u) - softplus(u)
        jacobian -= softplus(-x) + softplus(x);
    }
    let lp = model.log_density(theta);
    if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp + jacobian
    }
}

fn initial_point<M: LatentModel + ?Sized>(
    model: &M,
    init: InitStrategy,
    rng: &mut RngStream,
) -> Vec<f64> {
    const CLAMP: f64 = 1e-9;
    match init {
        InitStrategy::MleJitter => model
            .mle_start()
            .into_iter()
            .map(|p| {
                let z: f64 = StandardNormal.sample(rng);
                logit(p.clamp(CLAMP, 1.0 - CLAMP)) + JITTER_SD * z
            })
            .collect(),
        InitStrategy::PriorDraw => model
            .prior_draw(rng)
            .into_iter()
            .map(|p| logit(p.clamp(CLAMP, 1.0 - CLAMP)))
            .collect(),
    }
}

fn run_chain<M: LatentModel + ?Sized>(model: &M, config: &McmcConfig, chain: usize) -> ChainTrace {
    let dim = model.dim();
    let mut rng = RngStream::derive(config.master_seed, StreamDomain::Chain, chain as u64);
    let target = config.target_accept();

    let mut theta = vec![0.0; dim];
    let mut u = initial_point(model, config.init, &mut rng);
    let mut lp = log_target(model, &u, &mut theta);
    let mut log_step = vec![INITIAL_STEP.ln(); dim];
    let mut params = vec![Vec::with_capacity(config.draws); dim];
    let mut accepted = 0usize;

    for iter in 0..config.warmup + config.draws {
        let warming = iter < config.warmup;
        for j in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            let old = u[j];
            u[j] = old + log_step[j].exp() * z;
            let proposed = log_target(model, &u, &mut theta);
            let accept = metropolis_accept(proposed - lp, rng.uniform());
            if accept {
                lp = proposed;
            } else {
                u[j] = old;
            }
            if warming {
                let gain = (iter as f64 + 1.0).powf(-ADAPT_DECAY);
                log_step[j] += gain * (accept as u8 as f64 - target);
            } else if accept {
                accepted += 1;
            }
        }
        if !warming {
            for (col, &x) in params.iter_mut().zip(&u) {
                col.push(sigmoid(x));
            }
        }
    }

    ChainTrace {
        params,
        accept_rate: accepted as f64 / (config.draws * dim) as f64,
        step_sizes: log_step.into_iter().map(f64::exp).collect(),
    }
}

/// Runs every chain and computes R-hat and ESS from post-warmup draws.
/// Deterministic in `(model, config)`.
pub fn run_chains<M: LatentModel + ?Sized>(model: &M, config: &McmcConfig) -> Result<Trace> {
    config.validate()?;
    let chains: Vec<ChainTrace> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(model, config, c))
        .collect();
    let param_names = (1..=model.dim()).map(|j| format!("theta{j}")).collect();
    let mut trace = Trace {
        param_names,
        chains,
        rhat: Vec::new(),
        ess: Vec::new(),
        master_seed: config.master_seed,
    };
    trace.diagnose();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{BetaParams, HierarchicalModel};
    use crate::model::{Counts, PairCounts};

    fn easy_target() -> crate::bayes::BinomialTarget {
        HierarchicalModel::shared(BetaParams::uniform()).target(PairCounts::new(
            Counts::new(1721, 2376),
            Counts::new(1637, 2376),
        ))
    }

    #[test]
    fn easy_posterior_means_match_conjugate() {
        let trace = run_chains(&easy_target(), &McmcConfig::new(2019)).unwrap();
        assert!(trace.converged(), "{:?} {:?}", trace.rhat, trace.ess);
        for (j, exact) in [BetaParams::new(1722.0, 656.0).unwrap(), BetaParams::new(1638.0, 740.0).unwrap()]
            .iter()
            .enumerate()
        {
            let s = trace.summary(j);
            let mc_se = exact.sd() / trace.ess[j].sqrt();
            assert!((s.mean - exact.mean()).abs() <= 3.0 * mc_se, "param {j}: {} vs {} (ess {})", s.mean, exact.mean(), trace.ess[j]);
        }
    }

    #[test]
    fn zero_data_recovers_prior() {
        let target = HierarchicalModel::shared(BetaParams::uniform())
            .target(PairCounts::new(Counts::new(0, 0), Counts::new(0, 0)));
        let trace = run_chains(&target, &McmcConfig::new(5)).unwrap();
        for j in 0..2 {
            let s = trace.summary(j);
            let se = (1.0_f64 / 12.0).sqrt() / trace.ess[j].sqrt();
            assert!((s.mean - 0.5).abs() <= 3.0 * se, "{} (se {se})", s.mean);
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let config = McmcConfig {
            draws: 500,
            warmup: 200,
            ..McmcConfig::new(77)
        };
        let a = run_chains(&easy_target(), &config).unwrap();
        let b = run_chains(&easy_target(), &config).unwrap();
        assert_eq!(a, b);
        let c = run_chains(&easy_target(), &McmcConfig { master_seed: 78, ..config }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn prior_draw_init_also_converges() {
        let config = McmcConfig {
            init: InitStrategy::PriorDraw,
            ..McmcConfig::new(3)
        };
        let trace = run_chains(&easy_target(), &config).unwrap();
        assert!(trace.converged(), "{:?}", trace.rhat);
    }

    #[test]
    fn acceptance_in_band_after_adaptation() {
        let trace = run_chains(&easy_target(), &McmcConfig::new(8)).unwrap();
        for c in &trace.chains {
            assert!((0.15..=0.55).contains(&c.accept_rate), "{}", c.accept_rate);
        }
    }

    #[test]
    fn samples_stay_in_support() {
        let trace = run_chains(&easy_target(), &McmcConfig::new(1)).unwrap();
        assert!(trace.chains.iter().all(|c| c.params.iter().flatten().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn chain_order_does_not_change_pooled_summary() {
        let trace = run_chains(&easy_target(), &McmcConfig { draws: 1000, ..McmcConfig::new(4) }).unwrap();
        let mut reversed = trace.clone();
        reversed.chains.reverse();
        let mut rotated = trace.clone();
        rotated.chains.rotate_left(1);
        for j in 0..2 {
            let s = trace.summary(j);
            assert_eq!(s, reversed.summary(j));
            assert_eq!(s, rotated.summary(j));
        }
    }

    #[test]
    fn config_validation() {
        assert!(McmcConfig { chains: 1, ..McmcConfig::new(0) }.validate().is_err());
        assert!(McmcConfig { target_accept_band: (0.5, 0.2), ..McmcConfig::new(0) }.validate().is_err());
        assert!(McmcConfig::new(0).validate().is_ok());
    }

    #[test]
    fn two_state_metropolis_is_stationary() {
        // target (0.3, 0.7), proposal always flips the state
        let target = [0.3_f64, 0.7];
        let mut rng = RngStream::new(123, 0);
        let mut state = 0usize;
        let steps = 100_000;
        let mut visits = [0usize; 2];
        for _ in 0..steps {
            let proposal = 1 - state;
            if metropolis_accept((target[proposal] / target[state]).ln(), rng.uniform()) {
                state = proposal;
            }
            visits[state] += 1;
        }
        let freq = visits[1] as f64 / steps as f64;
        let sigma = (0.7_f64 * 0.3 / steps as f64).sqrt();
        assert!((freq - 0.7).abs() <= 3.0 * sigma, "{freq}");
    }
}

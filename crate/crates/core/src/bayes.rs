//! Beta-binomial model of two systems' inherent accuracies.
//!
//! Each system `i` has `theta_i ~ Beta(alpha_i, beta_i)` independently, and
//! `a_i | theta_i ~ Binomial(n_i, theta_i)`. The posterior is the product of
//! two Beta distributions; event probabilities over `theta1 - theta2` are
//! estimated by Monte Carlo and, for Beta posteriors, by one-dimensional
//! quadrature over the incomplete beta function.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Counts, Direction, Hypothesis, HypothesisKind, LatentParams, PairCounts};
use crate::numerics::{ln_beta_pdf, regularized_incomplete_beta, BetaSampler, RngStream};

/// Minimum Monte Carlo draws accepted by [`event_probability`].
pub const MIN_MC_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::domain(format!("Beta({alpha}, {beta}) needs positive shapes")));
        }
        Ok(BetaParams { alpha, beta })
    }

    /// Beta(1, 1): every accuracy equally credible.
    pub const fn uniform() -> Self {
        BetaParams {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    /// Beta(3, 1.5): broad, centred near 0.67.
    pub const fn moderate() -> Self {
        BetaParams {
            alpha: 3.0,
            beta: 1.5,
        }
    }

    /// Beta(9, 3): peaked around 0.75.
    pub const fn peaked() -> Self {
        BetaParams {
            alpha: 9.0,
            beta: 3.0,
        }
    }

    /// Looks up a named preset (`uniform`, `moderate`, `peaked`).
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "uniform" => Some(Self::uniform()),
            "moderate" => Some(Self::moderate()),
            "peaked" => Some(Self::peaked()),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            regularized_incomplete_beta(self.alpha, self.beta, x).expect("shapes validated")
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        ln_beta_pdf(self.alpha, self.beta, x)
    }

    pub fn sampler(&self) -> BetaSampler {
        BetaSampler::new(self.alpha, self.beta).expect("shapes validated")
    }
}

impl fmt::Display for BetaParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Beta({},{})", self.alpha, self.beta)
    }
}

/// Posterior of `prior` after `a` successes in `n` trials.
pub fn conjugate_update(prior: BetaParams, a: u64, n: u64) -> Result<BetaParams> {
    if a > n {
        return Err(Error::domain(format!("{a} successes out of {n} trials")));
    }
    BetaParams::new(prior.alpha + a as f64, prior.beta + (n - a) as f64)
}

/// A model over accuracies in `[0, 1]^dim`, as seen by the sampler.
pub trait LatentModel: Sync {
    fn dim(&self) -> usize;

    /// Log prior plus log likelihood, up to a constant fixed per instance.
    /// `-inf` outside the support.
    fn log_density(&self, theta: &[f64]) -> f64;

    /// A point near the posterior mode used to start chains.
    fn mle_start(&self) -> Vec<f64>;

    fn prior_draw(&self, rng: &mut RngStream) -> Vec<f64>;
}

/// Independent Beta priors on each system's accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalModel {
    pub prior1: BetaParams,
    pub prior2: BetaParams,
}

impl HierarchicalModel {
    pub fn new(prior1: BetaParams, prior2: BetaParams) -> Self {
        HierarchicalModel { prior1, prior2 }
    }

    pub fn shared(prior: BetaParams) -> Self {
        HierarchicalModel::new(prior, prior)
    }

    pub fn posterior(&self, counts: &PairCounts) -> Result<PosteriorPair> {
        Ok(PosteriorPair::Analytic(
            conjugate_update(self.prior1, counts.system1.correct, counts.system1.total)?,
            conjugate_update(self.prior2, counts.system2.correct, counts.system2.total)?,
        ))
    }

    /// The prior as a posterior with no data, for odds comparisons.
    pub fn prior_pair(&self) -> PosteriorPair {
        PosteriorPair::Analytic(self.prior1, self.prior2)
    }

    /// Binds observations, giving the sampler's target.
    pub fn target(&self, counts: PairCounts) -> BinomialTarget {
        BinomialTarget {
            model: *self,
            counts,
        }
    }
}

/// `a ln(theta) + (n - a) ln(1 - theta)` with `0 * ln 0 = 0`.
fn binomial_log_kernel(c: &Counts, theta: f64) -> f64 {
    let hit = if c.correct == 0 { 0.0 } else { c.correct as f64 * theta.ln() };
    let miss = if c.failures() == 0 {
        0.0
    } else {
        c.failures() as f64 * (1.0 - theta).ln()
    };
    hit + miss
}

/// Log prior plus binomial log likelihood (binomial coefficients dropped).
pub fn model_log_density(model: &HierarchicalModel, theta: &LatentParams, counts: &PairCounts) -> f64 {
    let [t1, t2] = theta.theta;
    let v = model.prior1.ln_pdf(t1)
        + model.prior2.ln_pdf(t2)
        + binomial_log_kernel(&counts.system1, t1)
        + binomial_log_kernel(&counts.system2, t2);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialTarget {
    pub model: HierarchicalModel,
    pub counts: PairCounts,
}

impl LatentModel for BinomialTarget {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        if theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return f64::NEG_INFINITY;
        }
        let params = LatentParams {
            theta: [theta[0], theta[1]],
        };
        model_log_density(&self.model, &params, &self.counts)
    }

    fn mle_start(&self) -> Vec<f64> {
        [self.counts.system1, self.counts.system2]
            .iter()
            .map(|c| (c.correct as f64 + 1.0) / (c.total as f64 + 2.0))
            .collect()
    }

    fn prior_draw(&self, rng: &mut RngStream) -> Vec<f64> {
        vec![
            self.model.prior1.sampler().sample(rng),
            self.model.prior2.sampler().sample(rng),
        ]
    }
}

/// Joint posterior of `(theta1, theta2)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorPair {
    /// Independent Beta marginals from a conjugate update.
    Analytic(BetaParams, BetaParams),
    /// Joint draws, e.g. pooled MCMC output.
    Samples(Vec<[f64; 2]>),
}

impl PosteriorPair {
    pub fn analytic(&self) -> Option<(BetaParams, BetaParams)> {
        match self {
            PosteriorPair::Analytic(a, b) => Some((*a, *b)),
            PosteriorPair::Samples(_) => None,
        }
    }

    /// Joint draws of `(theta1, theta2)`. Sample-based posteriors return
    /// their stored draws and ignore `n`.
    pub fn joint_draws(&self, n: usize, rng: &mut RngStream) -> Vec<[f64; 2]> {
        match self {
            PosteriorPair::Analytic(p1, p2) => {
                let (s1, s2) = (p1.sampler(), p2.sampler());
                (0..n).map(|_| [s1.sample(rng), s2.sample(rng)]).collect()
            }
            PosteriorPair::Samples(s) => s.clone(),
        }
    }

    /// Draws of `theta1 - theta2`.
    pub fn difference_draws(&self, n: usize, rng: &mut RngStream) -> Vec<f64> {
        self.joint_draws(n, rng).into_iter().map(|[a, b]| a - b).collect()
    }

    pub fn mean_difference(&self) -> Option<f64> {
        match self {
            PosteriorPair::Analytic(a, b) => Some(a.mean() - b.mean()),
            PosteriorPair::Samples(s) if !s.is_empty() => {
                let mut diffs: Vec<f64> = s.iter().map(|[a, b]| a - b).collect();
                diffs.sort_by(f64::total_cmp);
                Some(diffs.iter().sum::<f64>() / diffs.len() as f64)
            }
            PosteriorPair::Samples(_) => None,
        }
    }
}

/// A Monte Carlo probability estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McProbability {
    pub estimate: f64,
    /// `sqrt(p (1 - p) / draws)`.
    pub mc_se: f64,
    pub draws: usize,
}

impl McProbability {
    pub fn from_hits(hits: usize, draws: usize) -> Self {
        let p = hits as f64 / draws as f64;
        McProbability {
            estimate: p,
            mc_se: (p * (1.0 - p) / draws as f64).sqrt(),
            draws,
        }
    }

    /// `estimate +/- 1.96 * mc_se`.
    pub fn interval(&self) -> (f64, f64) {
        (self.estimate - 1.96 * self.mc_se, self.estimate + 1.96 * self.mc_se)
    }

    pub fn complement(&self) -> Self {
        McProbability {
            estimate: 1.0 - self.estimate,
            ..*self
        }
    }
}

/// Open interval of `theta1 - theta2` on which a hypothesis holds, or `None`
/// for events of probability zero under a continuous posterior.
fn difference_interval(event: &Hypothesis) -> Option<(f64, f64)> {
    let x = event.margin_x;
    match event.kind {
        HypothesisKind::IntervalNull => {
            Some((x - event.rope_radius_eps, x + event.rope_radius_eps))
        }
        HypothesisKind::PointNull | HypothesisKind::DirectionalMargin => match event.direction {
            Direction::Greater => Some((x, f64::INFINITY)),
            Direction::Less => Some((f64::NEG_INFINITY, x)),
            Direction::TwoSided => None,
        },
    }
}

/// Monte Carlo estimate of `P(event | y)` from paired independent draws.
pub fn event_probability(
    posterior: &PosteriorPair,
    event: &Hypothesis,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<McProbability> {
    if matches!(posterior, PosteriorPair::Analytic(..)) && n_mc < MIN_MC_DRAWS {
        return Err(Error::domain(format!(
            "n_mc = {n_mc} is below the minimum of {MIN_MC_DRAWS}"
        )));
    }
    let diffs = posterior.difference_draws(n_mc, rng);
    if diffs.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let hits = diffs.iter().filter(|&&d| event.holds(d)).count();
    Ok(McProbability::from_hits(hits, diffs.len()))
}

/// `P(lo < theta1 - theta2 < hi)` for independent Beta marginals, by
/// tanh-sinh quadrature of `f1(t) [F2(t - lo) - F2(t - hi)]`.
pub fn difference_interval_probability(p1: BetaParams, p2: BetaParams, lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    let (start, end) = effective_support(p1);
    // the integrand has kinks wherever t - lo or t - hi crosses 0 or 1
    let mut edges = vec![start, end];
    for shift in [lo, hi] {
        for k in [shift, 1.0 + shift] {
            if k.is_finite() && k > start && k < end {
                edges.push(k);
            }
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    const PIECES: f64 = 48.0;
    let span = end - start;
    let integrand = |t: f64| {
        let upper = if hi.is_finite() { p2.cdf(t - hi) } else { 0.0 };
        let lower = if lo.is_finite() { p2.cdf(t - lo) } else { 1.0 };
        p1.ln_pdf(t).exp() * (lower - upper)
    };
    let mut total = 0.0;
    for seg in edges.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let pieces = ((PIECES * (b - a) / span).ceil() as usize).max(1);
        let h = (b - a) / pieces as f64;
        for p in 0..pieces {
            let left = a + p as f64 * h;
            let right = if p + 1 == pieces { b } else { left + h };
            total += tanh_sinh(&integrand, left, right);
        }
    }
    total.clamp(0.0, 1.0)
}

/// Double-exponential quadrature on `[a, b]`; tolerates integrable
/// power-law singularities at the endpoints.
fn tanh_sinh(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const STEP: f64 = 1.0 / 32.0;
    const LEVELS: i32 = 104;
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for k in -LEVELS..=LEVELS {
        let t = k as f64 * STEP;
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let cosh_u = u.cosh();
        let weight = std::f64::consts::FRAC_PI_2 * t.cosh() / (cosh_u * cosh_u);
        // distance from the nearer endpoint, without cancellation
        let gap = half * 2.0 / ((2.0 * u.abs()).exp() + 1.0);
        let x = if u >= 0.0 { b - gap } else { a + gap };
        if x <= a || x >= b {
            continue;
        }
        let fx = f(x);
        if fx.is_finite() {
            sum += weight * fx;
        }
    }
    sum * half * STEP
}

/// Quadrature counterpart of [`event_probability`] for Beta posteriors.
pub fn analytic_event_probability(p1: BetaParams, p2: BetaParams, event: &Hypothesis) -> f64 {
    match difference_interval(event) {
        Some((lo, hi)) => difference_interval_probability(p1, p2, lo, hi),
        None => 1.0,
    }
}

/// Interval outside of which Beta(a, b) has negligible mass.
fn effective_support(p: BetaParams) -> (f64, f64) {
    const TAIL: f64 = 1e-15;
    let lower = if p.cdf(1e-12) > TAIL { 0.0 } else { bisect(|x| p.cdf(x) - TAIL) };
    let upper = if 1.0 - p.cdf(1.0 - 1e-12) > TAIL {
        1.0
    } else {
        bisect(|x| p.cdf(x) - (1.0 - TAIL))
    };
    (lower, upper)
}

fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

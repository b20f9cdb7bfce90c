//! Highest-density intervals, the ROPE decision rule and interval-null
//! Bayes factors over `theta1 - theta2`.

use serde::{Deserialize, Serialize};

use crate::bayes::{
    analytic_event_probability, event_probability, BetaParams, McProbability, PosteriorPair,
};
use crate::error::{Error, Result};
use crate::model::{DecisionValue, Direction, Hypothesis};
use crate::numerics::RngStream;

/// Default ROPE radius: one accuracy point.
pub const DEFAULT_ROPE_RADIUS: f64 = 0.01;
pub const MIN_HDI_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HdiSource {
    Samples,
    /// Computed from draws of a conjugate Beta posterior.
    AnalyticBeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hdi {
    pub lower: f64,
    pub upper: f64,
    pub mass: f64,
    pub source: HdiSource,
}

impl Hdi {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn overlaps(&self, other: &Hdi) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

/// Number of order statistics in a `mass` window over `n` samples.
fn window_len(mass: f64, n: usize) -> usize {
    // guard against 0.95 * 100000 = 95000.00000000001
    (((mass * n as f64) - 1e-9).ceil() as usize).clamp(1, n)
}

/// Shortest window of `ceil(mass * N)` consecutive order statistics; ties go
/// to the window with the smallest lower endpoint.
pub fn hdi_from_samples(samples: &[f64], mass: f64) -> Result<Hdi> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    hdi_from_sorted(&sorted, mass)
}

pub fn hdi_from_sorted(sorted: &[f64], mass: f64) -> Result<Hdi> {
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::domain(format!("HDI mass {mass} outside (0, 1]")));
    }
    let n = sorted.len();
    if n < MIN_HDI_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_HDI_SAMPLES,
            got: n,
        });
    }
    if sorted.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("NaN in HDI samples"));
    }
    let k = window_len(mass, n);
    let mut best = 0;
    let mut best_width = f64::INFINITY;
    for i in 0..=n - k {
        let width = sorted[i + k - 1] - sorted[i];
        if width < best_width {
            best = i;
            best_width = width;
        }
    }
    Ok(Hdi {
        lower: sorted[best],
        upper: sorted[best + k - 1],
        mass,
        source: HdiSource::Samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RopeRelation {
    HdiInsideRope,
    HdiOutsideRope,
    Overlap,
}

impl RopeRelation {
    pub fn decision(self) -> DecisionValue {
        match self {
            RopeRelation::HdiInsideRope => DecisionValue::AcceptNull,
            RopeRelation::HdiOutsideRope => DecisionValue::RejectNull,
            RopeRelation::Overlap => DecisionValue::Undecided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RopeVerdict {
    pub relation: RopeRelation,
    pub decision: DecisionValue,
    pub hdi: Hdi,
    pub rope: (f64, f64),
}

/// Compares a closed HDI with the closed ROPE `[center - eps, center + eps]`.
/// Touching endpoints count as overlap.
pub fn rope_decision(hdi: Hdi, rope_center: f64, epsilon: f64) -> Result<RopeVerdict> {
    if !(epsilon > 0.0) {
        return Err(Error::domain(format!("ROPE radius {epsilon} must be positive")));
    }
    let rope = (rope_center - epsilon, rope_center + epsilon);
    let relation = if hdi.lower > rope.1 || hdi.upper < rope.0 {
        RopeRelation::HdiOutsideRope
    } else if hdi.lower > rope.0 && hdi.upper < rope.1 {
        RopeRelation::HdiInsideRope
    } else {
        RopeRelation::Overlap
    };
    Ok(RopeVerdict {
        relation,
        decision: relation.decision(),
        hdi,
        rope,
    })
}

/// Quadrature values of the interval-null probabilities, available when
/// both prior and posterior are Beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticBayesFactor {
    pub prior_p0: f64,
    pub post_p0: f64,
    pub bf01: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesFactorResult {
    /// Monte Carlo `(post_p0 / post_p1) / (prior_p0 / prior_p1)`.
    pub bf01: f64,
    /// Delta-method standard error of `bf01`.
    pub bf01_se: f64,
    pub prior_p0: McProbability,
    pub prior_p1: McProbability,
    pub post_p0: McProbability,
    pub post_p1: McProbability,
    pub epsilon: f64,
    pub center: f64,
    pub analytic: Option<AnalyticBayesFactor>,
}

impl BayesFactorResult {
    /// Bayes factor of H1 against H0.
    pub fn bf10(&self) -> f64 {
        (self.post_p1.estimate / self.post_p0.estimate)
            / (self.prior_p1.estimate / self.prior_p0.estimate)
    }
}

fn odds_ratio(post_p0: f64, prior_p0: f64) -> f64 {
    (post_p0 / (1.0 - post_p0)) / (prior_p0 / (1.0 - prior_p0))
}

/// Bayes factor of `H0: |theta1 - theta2 - center| < eps` against its
/// complement.
///
/// Prior and posterior are estimated from the same random stream, so a
/// posterior identical to the prior gives exactly 1.
pub fn bayes_factor_interval_null(
    prior: (BetaParams, BetaParams),
    posterior: &PosteriorPair,
    center: f64,
    epsilon: f64,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<BayesFactorResult> {
    let h0 = Hypothesis::interval_null(center, epsilon)?;
    let prior_pair = PosteriorPair::Analytic(prior.0, prior.1);
    let mut prior_rng = rng.clone();
    let prior_p0 = event_probability(&prior_pair, &h0, n_mc, &mut prior_rng)?;
    let post_p0 = event_probability(posterior, &h0, n_mc, rng)?;

    for (component, p) in [("prior P(H0)", prior_p0), ("posterior P(H0)", post_p0)] {
        let floor = 10.0 / p.draws as f64;
        if p.estimate < floor || 1.0 - p.estimate < floor {
            return Err(Error::UnstableEstimate {
                component,
                value: p.estimate.min(1.0 - p.estimate),
                n_mc: p.draws,
            });
        }
    }

    let bf01 = odds_ratio(post_p0.estimate, prior_p0.estimate);
    // Var(log odds) = 1 / (n p (1 - p)) for a binomial proportion
    let var_log = |p: &McProbability| 1.0 / (p.draws as f64 * p.estimate * (1.0 - p.estimate));
    let bf01_se = bf01 * (var_log(&post_p0) + var_log(&prior_p0)).sqrt();

    let analytic = posterior.analytic().map(|(q1, q2)| {
        let prior_p0 = analytic_event_probability(prior.0, prior.1, &h0);
        let post_p0 = analytic_event_probability(q1, q2, &h0);
        AnalyticBayesFactor {
            prior_p0,
            post_p0,
            bf01: odds_ratio(post_p0, prior_p0),
        }
    });

    Ok(BayesFactorResult {
        bf01,
        bf01_se,
        prior_p0,
        prior_p1: prior_p0.complement(),
        post_p0,
        post_p1: post_p0.complement(),
        epsilon,
        center,
        analytic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginAssessment {
    pub margin: f64,
    /// Monte Carlo `P(theta1 - theta2 > margin | y)`.
    pub probability: McProbability,
    /// Quadrature value for Beta posteriors.
    pub analytic: Option<f64>,
}

/// Posterior probability that system 1 beats system 2 by more than `margin`.
pub fn assess_margin_hypothesis(
    posterior: &PosteriorPair,
    margin: f64,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<MarginAssessment> {
    let event = Hypothesis::margin(margin, Direction::Greater)?;
    let probability = event_probability(posterior, &event, n_mc, rng)?;
    let analytic = posterior
        .analytic()
        .map(|(a, b)| analytic_event_probability(a, b, &event));
    Ok(MarginAssessment {
        margin,
        probability,
        analytic,
    })
}

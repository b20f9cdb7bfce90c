//! End-to-end analysis of one dataset and the JSON report it produces.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{render, AnalysisConfig, Method};
use super::ingest::{load_observations, select_dataset};
use super::plot::{emit_plot_data, EventAnnotation, PlotAnnotations};
use super::write_atomic;
use crate::bayes::{event_probability, HierarchicalModel, McProbability, PosteriorPair};
use crate::error::{Error, Result};
use crate::frequentist::{
    diff_confidence_interval, paired_permutation_test, shifted_z_test, CiMode, ConfidenceInterval,
    PermutationMode, PermutationResult, ZTestResult,
};
use crate::mcmc::{run_chains, write_trace, Trace, TraceDiagnostics};
use crate::model::{Decision, DecisionValue, Direction, Hypothesis, PairCounts};
use crate::numerics::{RngStream, StreamDomain};
use crate::posterior::{
    assess_margin_hypothesis, bayes_factor_interval_null, hdi_from_samples, rope_decision,
    BayesFactorResult, HdiSource, MarginAssessment, RopeRelation, RopeVerdict,
};

/// JSON schema of [`AssessmentReport`].
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

/// Minimum of `n p` and `n (1 - p)` for the normal approximation.
const MIN_EXPECTED_COUNT: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSummary {
    pub direction: Direction,
    pub margin: f64,
    pub rope_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdiRopeResult {
    pub verdict: RopeVerdict,
    pub posterior_mean_diff: f64,
    /// `P(theta1 > theta2 | y)`.
    pub p_superior: McProbability,
    pub margin: MarginAssessment,
}

/// Absolute differences between the conjugate and MCMC summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub hdi_lower: f64,
    pub hdi_upper: f64,
    pub probability: f64,
    pub same_decision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodResult {
    Pvalue {
        /// Absent when the pooled accuracy is 0 or 1.
        z_test: Option<ZTestResult>,
        alpha: f64,
        /// Paired sign-flip test, when per-item outcomes are available.
        permutation: Option<PermutationResult>,
        decision: Decision,
    },
    Ci {
        interval: Option<ConfidenceInterval>,
        null_difference: f64,
        decision: Decision,
    },
    HdiRope {
        conjugate: HdiRopeResult,
        mcmc: Option<HdiRopeResult>,
        disagreement: Option<Disagreement>,
        decision: Decision,
    },
    BayesFactor {
        conjugate: BayesFactorResult,
        mcmc: Option<BayesFactorResult>,
        disagreement: Option<Disagreement>,
        threshold: f64,
        decision: Decision,
    },
}

impl MethodResult {
    pub fn method(&self) -> Method {
        match self {
            MethodResult::Pvalue { .. } => Method::Pvalue,
            MethodResult::Ci { .. } => Method::Ci,
            MethodResult::HdiRope { .. } => Method::HdiRope,
            MethodResult::BayesFactor { .. } => Method::BayesFactor,
        }
    }

    pub fn decision(&self) -> &Decision {
        match self {
            MethodResult::Pvalue { decision, .. }
            | MethodResult::Ci { decision, .. }
            | MethodResult::HdiRope { decision, .. }
            | MethodResult::BayesFactor { decision, .. } => decision,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionStatus {
    Satisfied,
    Violated,
    /// Not checkable from the data; stated so readers can judge it.
    Assumed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption {
    pub name: String,
    pub status: AssumptionStatus,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcSummary {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub diagnostics: TraceDiagnostics,
    pub posterior_means: Vec<f64>,
    pub conjugate_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub n_mc: usize,
    /// SHA-256 of the canonical rendering of the effective config.
    pub config_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub dataset: String,
    pub system_names: (String, String),
    pub counts: PairCounts,
    pub hypothesis: HypothesisSummary,
    pub results: Vec<MethodResult>,
    pub assumptions: Vec<Assumption>,
    pub phrasing: Vec<String>,
    pub mcmc: Option<McmcSummary>,
    pub provenance: Provenance,
}

impl AssessmentReport {
    pub fn result(&self, method: Method) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.method() == method)
    }

    /// False only when MCMC ran and missed the R-hat or ESS targets.
    pub fn converged(&self) -> bool {
        self.mcmc.as_ref().is_none_or(|m| m.diagnostics.converged)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

const QUALIFIERS: [&str; 4] = ["statistical", "statistically", "practical", "practically"];

/// Offending sentences: those using a form of "significant" that is not
/// directly preceded by "statistical(ly)" or "practical(ly)".
pub fn lint_phrasing(sentences: &[String]) -> Vec<String> {
    sentences
        .iter()
        .filter(|s| {
            let lower = s.to_lowercase();
            lower.match_indices("significan").any(|(pos, _)| {
                let before = lower[..pos].trim_end();
                let prev = before
                    .rsplit(|c: char| !c.is_alphanumeric())
                    .next()
                    .unwrap_or("");
                // "insignificant" and friends have no room for a qualifier
                before.len() == lower[..pos].len() || !QUALIFIERS.contains(&prev)
            })
        })
        .cloned()
        .collect()
}

/// Everything one analysis produced, before anything is written.
#[derive(Debug, Clone)]
pub struct AnalysisOutcome {
    pub report: AssessmentReport,
    pub trace: Option<Trace>,
    plot: PlotData,
}

#[derive(Debug, Clone)]
struct PlotData {
    theta1: Vec<f64>,
    theta2: Vec<f64>,
    diff: Vec<f64>,
    annotations: PlotAnnotations,
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn direction_word(d: Direction) -> &'static str {
    match d {
        Direction::Greater | Direction::Less => "one-sided",
        Direction::TwoSided => "two-sided",
    }
}

fn pct(level: f64) -> String {
    format!("{}%", (level * 1000.0).round() / 10.0)
}

fn assumptions(counts: &PairCounts, has_items: bool, names: &(String, String)) -> Vec<Assumption> {
    let mut independence = "Outcomes of distinct items are treated as independent, and the z-test treats \
                            the two accuracies as independent proportions although both systems answer the same items."
        .to_string();
    if has_items {
        independence.push_str(" A paired permutation test is reported alongside.");
    }
    let small: Vec<String> = [(&names.0, counts.system1), (&names.1, counts.system2)]
        .iter()
        .filter(|(_, c)| {
            let n = c.total as f64;
            let p = c.accuracy();
            n * p < MIN_EXPECTED_COUNT || n * (1.0 - p) < MIN_EXPECTED_COUNT
        })
        .map(|(name, _)| (*name).clone())
        .collect();
    let (size_status, size_note) = if small.is_empty() {
        (
            AssumptionStatus::Satisfied,
            format!("Both systems have at least {MIN_EXPECTED_COUNT} correct and incorrect answers, so the normal approximation behind the z-test and confidence interval is reasonable."),
        )
    } else {
        (
            AssumptionStatus::Violated,
            format!(
                "Fewer than {MIN_EXPECTED_COUNT} correct or incorrect answers for {}; normal-approximation results are unreliable.",
                small.join(", ")
            ),
        )
    };
    vec![
        Assumption {
            name: "independence".into(),
            status: AssumptionStatus::Assumed,
            note: independence,
        },
        Assumption {
            name: "identical_distribution".into(),
            status: AssumptionStatus::Assumed,
            note: "Each system answers every item correctly with the same probability (its inherent accuracy); \
                   item difficulty is not modeled."
                .into(),
        },
        Assumption {
            name: "sample_size".into(),
            status: size_status,
            note: size_note,
        },
    ]
}

fn hdi_rope_block(
    posterior: &PosteriorPair,
    diffs: &[f64],
    config: &AnalysisConfig,
    rng: &mut RngStream,
) -> Result<HdiRopeResult> {
    let a = &config.analysis;
    let mut hdi = hdi_from_samples(diffs, a.hdi_mass)?;
    if posterior.analytic().is_some() {
        hdi.source = HdiSource::AnalyticBeta;
    }
    let verdict = rope_decision(hdi, a.margin, a.rope_radius)?;
    let p_superior = event_probability(posterior, &Hypothesis::point_null(Direction::Greater), a.n_mc, rng)?;
    let margin = assess_margin_hypothesis(posterior, a.margin, a.n_mc, rng)?;
    let mut sorted = diffs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(HdiRopeResult {
        verdict,
        posterior_mean_diff: sorted.iter().sum::<f64>() / sorted.len() as f64,
        p_superior,
        margin,
    })
}

fn bf_decision(bf: &BayesFactorResult, threshold: f64) -> Decision {
    let value = if bf.bf01 >= threshold {
        DecisionValue::AcceptNull
    } else if bf.bf10() >= threshold {
        DecisionValue::RejectNull
    } else {
        DecisionValue::Undecided
    };
    Decision::new(value, format!("BF01 = {:.4} against threshold {threshold}", bf.bf01))
}

fn rope_basis(v: &RopeVerdict) -> String {
    format!(
        "{} HDI [{:.4}, {:.4}] vs ROPE [{:.4}, {:.4}]",
        pct(v.hdi.mass),
        v.hdi.lower,
        v.hdi.upper,
        v.rope.0,
        v.rope.1
    )
}

/// Runs every configured method on the selected dataset. Nothing is
/// written; see [`write_outputs`].
pub fn run_analysis(config: &AnalysisConfig, base_dir: &Path) -> Result<AnalysisOutcome> {
    let seed = config.seed()?;
    let data = config.data()?;
    let set = load_observations(config, base_dir)?;
    let dataset = select_dataset(&set, data)?;
    let counts = dataset.counts()?;
    let names = set.system_names.clone();
    let a = &config.analysis;
    let (c1, c2) = (counts.system1, counts.system2);

    let model = HierarchicalModel::new(config.model.prior1, config.model.prior2);
    let conjugate = model.posterior(&counts)?;
    let (q1, q2) = conjugate.analytic().expect("conjugate posterior");

    let wants_bayes = a.methods.iter().any(|m| matches!(m, Method::HdiRope | Method::BayesFactor));
    let trace = if wants_bayes && a.use_mcmc {
        Some(run_chains(&model.target(counts), &config.mcmc_config()?)?)
    } else {
        None
    };
    let sampled = trace.as_ref().map(|t| PosteriorPair::Samples(t.joint_pairs()));

    let mut draw_rng = RngStream::derive(seed, StreamDomain::Posterior, 0);
    let conj_pairs = conjugate.joint_draws(a.n_mc, &mut draw_rng);
    let conj_diffs: Vec<f64> = conj_pairs.iter().map(|[x, y]| x - y).collect();
    let mcmc_diffs: Option<Vec<f64>> = trace
        .as_ref()
        .map(|t| t.joint_pairs().iter().map(|[x, y]| x - y).collect());

    let mut results = Vec::new();
    let mut phrasing = Vec::new();
    let mut hdi_for_plot = None;
    let intro = format!("{} vs {} on {}", names.0, names.1, dataset.name);

    for method in &a.methods {
        match method {
            Method::Pvalue => {
                let z_test = match shifted_z_test(c1.correct, c1.total, c2.correct, c2.total, a.margin, a.direction) {
                    Ok(t) => Some(t),
                    Err(Error::DegenerateTest(_)) => None,
                    Err(e) => return Err(e),
                };
                let permutation = match &dataset.per_item {
                    Some(items) if a.margin == 0.0 => {
                        let mut rng = RngStream::derive(seed, StreamDomain::Permutation, 0);
                        Some(paired_permutation_test(
                            items,
                            PermutationMode::Auto { resamples: a.n_mc },
                            a.direction,
                            &mut rng,
                        )?)
                    }
                    _ => None,
                };
                let decision = match &z_test {
                    Some(t) => {
                        let reject = t.p_value < a.alpha;
                        phrasing.push(format!(
                            "{intro}: the observed accuracy difference of {:.4} is {}statistically significant at level {} \
                             (z = {:.3}, {} p = {:.4}).",
                            t.p_hat1 - t.p_hat2,
                            if reject { "" } else { "not " },
                            a.alpha,
                            t.z,
                            direction_word(a.direction),
                            t.p_value
                        ));
                        phrasing.push(if reject {
                            "Statistical significance alone does not show that the difference is large enough to matter (practical significance).".to_string()
                        } else {
                            "Failing to reject the null is not evidence that the two systems are equally accurate.".to_string()
                        });
                        Decision::frequentist(reject, format!("p = {:.6} vs alpha = {}", t.p_value, a.alpha))
                    }
                    None => {
                        phrasing.push(format!("{intro}: the z-test is undefined because the pooled accuracy is 0 or 1."));
                        Decision::new(DecisionValue::Undecided, "pooled accuracy is 0 or 1")
                    }
                };
                results.push(MethodResult::Pvalue {
                    z_test,
                    alpha: a.alpha,
                    permutation,
                    decision,
                });
            }
            Method::Ci => {
                let interval = match diff_confidence_interval(c1.correct, c1.total, c2.correct, c2.total, a.ci_level, a.ci_mode) {
                    Ok(ci) => Some(ci),
                    Err(Error::DegenerateTest(_)) => None,
                    Err(e) => return Err(e),
                };
                let decision = match &interval {
                    Some(ci) => {
                        let reject = match a.direction {
                            Direction::Greater => ci.lower > a.margin,
                            Direction::Less => ci.upper < a.margin,
                            Direction::TwoSided => !ci.contains(a.margin),
                        };
                        let mode = match a.ci_mode {
                            CiMode::StandardTwoSided => "two-sided Wald interval",
                            CiMode::PaperOneSidedZ => "pooled-sigma interval with the one-sided z quantile",
                        };
                        phrasing.push(format!(
                            "The {} confidence interval for the accuracy difference is [{:.4}, {:.4}] ({mode}); \
                             a difference of {} is {} by it.",
                            pct(a.ci_level),
                            ci.lower,
                            ci.upper,
                            a.margin,
                            if reject { "rejected" } else { "not rejected" }
                        ));
                        Decision::frequentist(reject, format!("CI [{:.6}, {:.6}] vs null difference {}", ci.lower, ci.upper, a.margin))
                    }
                    None => Decision::new(DecisionValue::Undecided, "standard error is zero"),
                };
                results.push(MethodResult::Ci {
                    interval,
                    null_difference: a.margin,
                    decision,
                });
            }
            Method::HdiRope => {
                let mut rng = RngStream::derive(seed, StreamDomain::Posterior, 1);
                let conj = hdi_rope_block(&conjugate, &conj_diffs, config, &mut rng)?;
                let mc = match (&sampled, &mcmc_diffs) {
                    (Some(s), Some(d)) => Some(hdi_rope_block(s, d, config, &mut rng)?),
                    _ => None,
                };
                let disagreement = mc.as_ref().map(|m| Disagreement {
                    hdi_lower: (m.verdict.hdi.lower - conj.verdict.hdi.lower).abs(),
                    hdi_upper: (m.verdict.hdi.upper - conj.verdict.hdi.upper).abs(),
                    probability: (m.margin.probability.estimate - conj.margin.probability.estimate).abs(),
                    same_decision: m.verdict.relation == conj.verdict.relation,
                });
                let v = &conj.verdict;
                let outcome = match v.relation {
                    RopeRelation::HdiInsideRope => "the difference is practically equivalent to the null value",
                    RopeRelation::HdiOutsideRope => "the difference is practically significant",
                    RopeRelation::Overlap => "practical significance is undecided",
                };
                phrasing.push(format!(
                    "The {} highest-density interval of the accuracy difference is [{:.4}, {:.4}] and the region of \
                     practical equivalence is [{:.4}, {:.4}], so {outcome}.",
                    pct(v.hdi.mass),
                    v.hdi.lower,
                    v.hdi.upper,
                    v.rope.0,
                    v.rope.1
                ));
                phrasing.push(format!(
                    "Posterior probability that {} is more accurate than {}: {:.4}; that it leads by more than {}: {:.4}.",
                    names.0, names.1, conj.p_superior.estimate, a.margin, conj.margin.probability.estimate
                ));
                let decision = Decision::new(v.decision, rope_basis(v));
                let shown = mc.as_ref().unwrap_or(&conj);
                hdi_for_plot = Some((shown.verdict, shown.p_superior, shown.margin.probability));
                results.push(MethodResult::HdiRope {
                    conjugate: conj,
                    mcmc: mc,
                    disagreement,
                    decision,
                });
            }
            Method::BayesFactor => {
                let prior = (config.model.prior1, config.model.prior2);
                let rng = RngStream::derive(seed, StreamDomain::Posterior, 2);
                let conj = bayes_factor_interval_null(prior, &conjugate, a.margin, a.rope_radius, a.n_mc, &mut rng.clone())?;
                let mc = match &sampled {
                    Some(s) => Some(bayes_factor_interval_null(prior, s, a.margin, a.rope_radius, a.n_mc, &mut rng.clone())?),
                    None => None,
                };
                let decision = bf_decision(&conj, a.bf_threshold);
                let disagreement = mc.as_ref().map(|m| Disagreement {
                    hdi_lower: 0.0,
                    hdi_upper: 0.0,
                    probability: (m.post_p0.estimate - conj.post_p0.estimate).abs(),
                    same_decision: bf_decision(m, a.bf_threshold).value == decision.value,
                });
                let reading = match decision.value {
                    DecisionValue::AcceptNull => "the data favour the interval null",
                    DecisionValue::RejectNull => "the data favour the alternative",
                    DecisionValue::Undecided => "the evidence is inconclusive",
                };
                phrasing.push(format!(
                    "Bayes factor for |difference - {}| < {} against its complement: BF01 = {:.3} (BF10 = {:.3}); \
                     at threshold {} {reading}.",
                    a.margin,
                    a.rope_radius,
                    conj.bf01,
                    conj.bf10(),
                    a.bf_threshold
                ));
                results.push(MethodResult::BayesFactor {
                    conjugate: conj,
                    mcmc: mc,
                    disagreement,
                    threshold: a.bf_threshold,
                    decision,
                });
            }
        }
    }

    let mcmc = trace.as_ref().map(|t| {
        let diagnostics = TraceDiagnostics::from(t);
        if !diagnostics.converged {
            phrasing.push(
                "The sampler did not reach the convergence targets (R-hat at most 1.01, effective sample size at least 400); \
                 sampled summaries are unreliable."
                    .to_string(),
            );
        }
        McmcSummary {
            chains: config.mcmc.chains,
            warmup: config.mcmc.warmup,
            draws: config.mcmc.draws,
            diagnostics,
            posterior_means: (0..t.dim()).map(|j| t.summary(j).mean).collect(),
            conjugate_means: vec![q1.mean(), q2.mean()],
        }
    });

    let bad = lint_phrasing(&phrasing);
    assert!(bad.is_empty(), "unqualified significance wording: {bad:?}");

    // plot data: MCMC draws when available, conjugate draws otherwise
    let (theta1, theta2, diff, source) = match (&trace, mcmc_diffs) {
        (Some(t), Some(d)) => (t.pooled(0), t.pooled(1), d, "mcmc"),
        _ => (
            conj_pairs.iter().map(|p| p[0]).collect(),
            conj_pairs.iter().map(|p| p[1]).collect(),
            conj_diffs,
            "conjugate",
        ),
    };
    let (verdict, p_superior, p_margin) = match hdi_for_plot {
        Some(x) => x,
        None => {
            let mut rng = RngStream::derive(seed, StreamDomain::Posterior, 1);
            let posterior = sampled.as_ref().unwrap_or(&conjugate);
            let block = hdi_rope_block(posterior, &diff, config, &mut rng)?;
            (block.verdict, block.p_superior, block.margin.probability)
        }
    };
    let annotations = PlotAnnotations {
        source: source.into(),
        samples: diff.len(),
        system_names: names.clone(),
        hdi: verdict.hdi,
        rope: verdict.rope,
        rope_relation: verdict.relation,
        events: vec![
            EventAnnotation {
                event: "theta1 > theta2".into(),
                probability: p_superior,
            },
            EventAnnotation {
                event: format!("theta1 - theta2 > {}", a.margin),
                probability: p_margin,
            },
        ],
    };

    let report = AssessmentReport {
        dataset: dataset.name.clone(),
        system_names: names.clone(),
        counts,
        hypothesis: HypothesisSummary {
            direction: a.direction,
            margin: a.margin,
            rope_radius: a.rope_radius,
        },
        results,
        assumptions: assumptions(&counts, dataset.per_item.is_some(), &names),
        phrasing,
        mcmc,
        provenance: Provenance {
            tool: "assess".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            n_mc: a.n_mc,
            config_sha256: sha256_hex(&render(config)),
        },
    };
    Ok(AnalysisOutcome {
        report,
        trace,
        plot: PlotData {
            theta1,
            theta2,
            diff,
            annotations,
        },
    })
}

fn resolve(base_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Writes traces, plot data and finally the report, each atomically.
/// Relative output paths are taken from `base_dir`. Returns the report path
/// if one was configured.
pub fn write_outputs(outcome: &AnalysisOutcome, config: &AnalysisConfig, base_dir: &Path) -> Result<Option<PathBuf>> {
    let out = &config.output;
    if let (Some(dir), Some(trace)) = (&out.trace_dir, &outcome.trace) {
        write_trace(trace, &resolve(base_dir, dir))?;
    }
    if let Some(dir) = &out.plot_dir {
        let p = &outcome.plot;
        emit_plot_data(&p.theta1, &p.theta2, &p.diff, &p.annotations, &resolve(base_dir, dir))?;
    }
    match &out.report {
        Some(path) => {
            let path = resolve(base_dir, path);
            write_atomic(&path, outcome.report.to_json()?.as_bytes())?;
            Ok(Some(path))
        }
        None => Ok(None),
    }
}

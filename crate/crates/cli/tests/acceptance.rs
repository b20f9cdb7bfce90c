//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p assess-cli --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use assess_core::bayes::{conjugate_update, event_probability, BetaParams, HierarchicalModel};
use assess_core::frequentist::{diff_confidence_interval, two_proportion_z_test, CiMode};
use assess_core::io::{parse_config_with_overrides, run_analysis, Method, MethodResult};
use assess_core::mcmc::{run_chains, McmcConfig};
use assess_core::numerics::StreamDomain;
use assess_core::pathology::{
    evenly_spaced_looks, optional_stopping_fpr, prior_sensitivity_sweep, StoppingComparison,
};
use assess_core::posterior::{bayes_factor_interval_null, hdi_from_samples, rope_decision, RopeRelation};
use assess_core::{Counts, Direction, Hypothesis, PairCounts, RngStream};

const SEED: u64 = 2019;
const N_MC: usize = 100_000;

type Outcome = Result<String, String>;

fn easy() -> PairCounts {
    PairCounts::new(Counts::new(1721, 2376), Counts::new(1637, 2376))
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn z_test() -> Outcome {
    let t = two_proportion_z_test(1721, 2376, 1637, 2376, Direction::Greater).map_err(|e| e.to_string())?;
    check(
        within(t.z, 2.676, 0.001) && within(t.p_value, 0.0037, 0.0002),
        format!("z = {:.6}, p = {:.6}", t.z, t.p_value),
    )
}

fn one_sided_z_ci() -> Outcome {
    let ci = diff_confidence_interval(1721, 2376, 1637, 2376, 0.95, CiMode::PaperOneSidedZ)
        .map_err(|e| e.to_string())?;
    check(
        within(ci.lower, 0.0136, 5e-4) && within(ci.upper, 0.057, 5e-4),
        format!("[{:.6}, {:.6}]", ci.lower, ci.upper),
    )
}

fn superiority_probability() -> Outcome {
    let model = HierarchicalModel::shared(BetaParams::uniform());
    let posterior = model.posterior(&easy()).map_err(|e| e.to_string())?;
    let mut rng = RngStream::derive(SEED, StreamDomain::Posterior, 1);
    let event = Hypothesis::point_null(Direction::Greater);
    let mc = event_probability(&posterior, &event, N_MC, &mut rng).map_err(|e| e.to_string())?;

    let trace = run_chains(&model.target(easy()), &McmcConfig::new(SEED)).map_err(|e| e.to_string())?;
    let pairs = trace.joint_pairs();
    let p_mcmc = pairs.iter().filter(|[a, b]| a > b).count() as f64 / pairs.len() as f64;
    let rhat_ok = trace.rhat.iter().all(|r| matches!(r, Some(r) if *r < 1.01));
    let max_rhat = trace.rhat.iter().flatten().cloned().fold(f64::NAN, f64::max);
    check(
        within(mc.estimate, 0.996, 0.003) && within(p_mcmc, 0.996, 0.003) && rhat_ok,
        format!(
            "conjugate MC {:.5}, MCMC {:.5} over {} draws, max R-hat {max_rhat:.4}",
            mc.estimate,
            p_mcmc,
            pairs.len()
        ),
    )
}

fn hdi_and_rope() -> Outcome {
    let posterior = HierarchicalModel::shared(BetaParams::uniform())
        .posterior(&easy())
        .map_err(|e| e.to_string())?;
    let mut rng = RngStream::derive(SEED, StreamDomain::Posterior, 1);
    let diff = posterior.difference_draws(N_MC, &mut rng);
    let hdi = hdi_from_samples(&diff, 0.95).map_err(|e| e.to_string())?;
    let verdict = rope_decision(hdi, 0.0, 0.01).map_err(|e| e.to_string())?;
    check(
        within(hdi.lower, 0.00939, 0.003)
            && within(hdi.upper, 0.0612, 0.003)
            && verdict.relation == RopeRelation::Overlap,
        format!("HDI ({:.5}, {:.5}), ROPE {:?}", hdi.lower, hdi.upper, verdict.relation),
    )
}

fn bayes_factor() -> Outcome {
    let prior = BetaParams::uniform();
    let posterior = HierarchicalModel::shared(prior).posterior(&easy()).map_err(|e| e.to_string())?;
    let mut rng = RngStream::derive(SEED, StreamDomain::Posterior, 2);
    let bf = bayes_factor_interval_null((prior, prior), &posterior, 0.0, 0.01, N_MC, &mut rng)
        .map_err(|e| e.to_string())?;
    let eps: f64 = 0.01;
    let prior_target = 2.0 * eps - eps * eps;
    let analytic = bf.analytic.map(|a| a.bf01).unwrap_or(f64::NAN);
    check(
        (1.25..=1.55).contains(&bf.bf01)
            && (bf.prior_p0.estimate - prior_target).abs() <= 2.0 * bf.prior_p0.mc_se,
        format!(
            "bf01 = {:.4} (analytic {:.4}), prior P0 = {:.5} +/- {:.5} vs {prior_target:.4}",
            bf.bf01, analytic, bf.prior_p0.estimate, bf.prior_p0.mc_se
        ),
    )
}

fn pooled_hdi() -> Outcome {
    let text = std::fs::read_to_string(fixtures_dir().join("arc_pooled.cfg")).map_err(|e| e.to_string())?;
    let config = parse_config_with_overrides(&text, &["analysis.use_mcmc=false".into()])
        .map_err(|e| e.to_string())?;
    let outcome = run_analysis(&config, &fixtures_dir()).map_err(|e| e.to_string())?;
    let Some(MethodResult::HdiRope { conjugate, .. }) = outcome.report.result(Method::HdiRope) else {
        return Err("no hdi_rope result".into());
    };
    let hdi = conjugate.verdict.hdi;
    let c = outcome.report.counts;
    check(
        hdi.lower > 0.02,
        format!(
            "pooled {}/{} vs {}/{}, HDI ({:.5}, {:.5})",
            c.system1.correct, c.system1.total, c.system2.correct, c.system2.total, hdi.lower, hdi.upper
        ),
    )
}

fn conjugacy() -> Outcome {
    let priors = [
        BetaParams::uniform(),
        BetaParams::moderate(),
        BetaParams::peaked(),
        BetaParams::new(0.7, 2.5).map_err(|e| e.to_string())?,
    ];
    let data = [
        ((0, 0), (0, 0)),
        ((3, 5), (1, 5)),
        ((40, 50), (45, 50)),
        ((120, 400), (150, 400)),
        ((1721, 2376), (1637, 2376)),
    ];
    let mut failures = Vec::new();
    let mut worst_z: f64 = 0.0;
    let mut ratio_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut k = 0u64;
    for prior in priors {
        for ((a1, n1), (a2, n2)) in data {
            let counts = PairCounts::new(Counts::new(a1, n1), Counts::new(a2, n2));
            let trace = run_chains(
                &HierarchicalModel::shared(prior).target(counts),
                &McmcConfig::new(1000 + k),
            )
            .map_err(|e| e.to_string())?;
            for (j, (a, n)) in [(a1, n1), (a2, n2)].into_iter().enumerate() {
                let exact = conjugate_update(prior, a, n).map_err(|e| e.to_string())?;
                let s = trace.summary(j);
                let z = (s.mean - exact.mean()).abs() / (exact.sd() / trace.ess[j].sqrt());
                let ratio = s.variance / exact.variance();
                worst_z = worst_z.max(z);
                ratio_range = (ratio_range.0.min(ratio), ratio_range.1.max(ratio));
                if z > 3.0 || !(0.8..=1.25).contains(&ratio) {
                    failures.push(format!("fixture {k} param {j}: z {z:.2}, ratio {ratio:.3}"));
                }
            }
            k += 1;
        }
    }
    let detail = format!(
        "{k} fixtures, max |mean error| {worst_z:.2} sd/sqrt(ess), variance ratio in [{:.3}, {:.3}]",
        ratio_range.0, ratio_range.1
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

fn binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

fn stopping_intention() -> Outcome {
    let s = StoppingComparison::new(7, 24, 0.5).map_err(|e| e.to_string())?;
    // P(X <= 7), X ~ Bin(24, 1/2)
    let fixed_n: f64 = (0..=7).map(|k| binomial_pmf(k, 24, 0.5)).sum();
    // P(N >= 24) for the trial N of the 7th success: at most 6 in the first 23
    let fixed_successes: f64 = (0..=6).map(|k| binomial_pmf(k, 23, 0.5)).sum();
    check(
        within(s.p_fixed_n, 0.03196, 5e-6)
            && within(s.p_fixed_n, fixed_n, 1e-12)
            && within(s.p_fixed_successes, fixed_successes, 1e-12)
            && within(s.p_fixed_successes, 0.017, 5e-4)
            && s.gap() > 0.01,
        format!(
            "fixed-n {:.6}, fixed-successes {:.6}, gap {:.6}",
            s.p_fixed_n,
            s.p_fixed_successes,
            s.gap()
        ),
    )
}

fn optional_stopping() -> Outcome {
    let looks = evenly_spaced_looks(10, 500).map_err(|e| e.to_string())?;
    let r = optional_stopping_fpr((0.5, 0.5), &looks, 0.05, 10_000, Direction::TwoSided, SEED)
        .map_err(|e| e.to_string())?;
    check(
        r.false_positive_rate > 0.10,
        format!(
            "{} looks, false-positive rate {:.4} +/- {:.4}",
            looks.len(),
            r.false_positive_rate,
            r.standard_error
        ),
    )
}

fn prior_sensitivity() -> Outcome {
    let priors = [BetaParams::uniform(), BetaParams::moderate(), BetaParams::peaked()];
    let rows = prior_sensitivity_sweep(&easy(), &priors, 0.01, 0.95, N_MC, SEED).map_err(|e| e.to_string())?;
    let ratio = |xs: Vec<f64>| {
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    };
    let bf_ratio = ratio(rows.iter().map(|r| r.bf01).collect());
    let width_ratio = ratio(rows.iter().map(|r| r.hdi.width()).collect());
    let overlap = rows
        .iter()
        .enumerate()
        .all(|(i, a)| rows[i + 1..].iter().all(|b| a.hdi.overlaps(&b.hdi)));
    let bfs: Vec<String> = rows.iter().map(|r| format!("{} {:.3}", r.prior, r.bf01)).collect();
    check(
        rows.len() == 3 && bf_ratio > width_ratio && overlap,
        format!(
            "bf01 [{}], bf ratio {bf_ratio:.3} vs HDI width ratio {width_ratio:.3}, overlap {overlap}",
            bfs.join(", ")
        ),
    )
}

fn outputs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = vec!["out/report.json".to_string()];
    let mut traces: Vec<String> = std::fs::read_dir(dir.join("out/traces"))
        .map_err(|e| e.to_string())?
        .map(|e| format!("out/traces/{}", e.unwrap().file_name().to_string_lossy()))
        .collect();
    traces.sort();
    files.extend(traces);
    files
        .into_iter()
        .map(|f| std::fs::read(dir.join(&f)).map(|b| (f, b)).map_err(|e| e.to_string()))
        .collect()
}

fn determinism() -> Outcome {
    let config = std::fs::read_to_string(fixtures_dir().join("arc_easy.cfg")).map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        std::fs::write(dir.path().join("run.cfg"), &config).map_err(|e| e.to_string())?;
        let status = Command::new(env!("CARGO_BIN_EXE_assess"))
            .args(["analyze", "--config", "run.cfg"])
            .args(["--set", "output.report=out/report.json"])
            .args(["--set", "output.trace_dir=out/traces"])
            .args(["--set", "output.plot_dir=out/plots"])
            .current_dir(dir.path())
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "analyze exited with {}: {}",
                status.status,
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        runs.push(outputs(dir.path())?);
    }
    let files = runs[0].len();
    let bytes: usize = runs[0].iter().map(|(_, b)| b.len()).sum();
    check(
        files > 1 && runs[0] == runs[1],
        format!("{files} files, {bytes} bytes compared"),
    )
}

fn null_calibration() -> Outcome {
    let r = optional_stopping_fpr((0.5, 0.5), &[500], 0.05, 10_000, Direction::TwoSided, SEED)
        .map_err(|e| e.to_string())?;
    check(
        within(r.false_positive_rate, 0.05, 0.01),
        format!("rejection rate {:.4} +/- {:.4}", r.false_positive_rate, r.standard_error),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("z-test reproduction", z_test),
        ("confidence interval, one-sided z", one_sided_z_ci),
        ("P(theta1 > theta2), conjugate and MCMC", superiority_probability),
        ("95% HDI and ROPE verdict", hdi_and_rope),
        ("interval-null Bayes factor", bayes_factor),
        ("pooled HDI lower bound", pooled_hdi),
        ("MCMC vs conjugate moments", conjugacy),
        ("stopping-intention p-values", stopping_intention),
        ("optional-stopping inflation", optional_stopping),
        ("prior sensitivity", prior_sensitivity),
        ("determinism of analyze", determinism),
        ("null calibration", null_calibration),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.2}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

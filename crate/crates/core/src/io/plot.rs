//! Histogram data for posterior plots.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::bayes::McProbability;
use crate::error::{Error, Result};
use crate::posterior::{Hdi, RopeRelation};

pub const PLOT_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub density: f64,
}

/// Equal-width histogram over `[min, max]` normalized to integrate to one.
/// Constant samples get the single range `[v - 0.5, v + 0.5]`.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Vec<Bin>> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if bins == 0 || samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("histogram needs finite samples and at least one bin"));
    }
    let (mut lo, mut hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in samples {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = samples.len() as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let left = lo + i as f64 * width;
            let right = if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width };
            Bin {
                left,
                right,
                density: c as f64 / (n * width),
            }
        })
        .collect())
}

fn bins_csv(bins: &[Bin]) -> String {
    let mut out = String::from("bin_left,bin_right,density\n");
    for b in bins {
        writeln!(out, "{:?},{:?},{:?}", b.left, b.right, b.density).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAnnotation {
    pub event: String,
    pub probability: McProbability,
}

/// Contents of `annotations.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotAnnotations {
    /// `conjugate` or `mcmc`.
    pub source: String,
    pub samples: usize,
    pub system_names: (String, String),
    pub hdi: Hdi,
    pub rope: (f64, f64),
    pub rope_relation: RopeRelation,
    pub events: Vec<EventAnnotation>,
}

/// Writes `posterior_theta1.csv`, `posterior_theta2.csv`,
/// `posterior_diff.csv` and `annotations.json` into `out_dir`.
pub fn emit_plot_data(
    theta1: &[f64],
    theta2: &[f64],
    diff: &[f64],
    annotations: &PlotAnnotations,
    out_dir: &Path,
) -> Result<()> {
    let files = [
        ("posterior_theta1.csv", histogram(theta1, PLOT_BINS)?),
        ("posterior_theta2.csv", histogram(theta2, PLOT_BINS)?),
        ("posterior_diff.csv", histogram(diff, PLOT_BINS)?),
    ];
    for (name, bins) in &files {
        write_atomic(&out_dir.join(name), bins_csv(bins).as_bytes())?;
    }
    let json = serde_json::to_string_pretty(annotations)?;
    write_atomic(&out_dir.join("annotations.json"), json.as_bytes())
}

//! Sectioned `key = value` configuration.
//!
//! ```text
//! # comment
//! [data]
//! format = inline
//! counts.arc_easy = 1721/2376, 1637/2376
//!
//! [analysis]
//! methods = pvalue, ci, hdi_rope, bayes_factor
//! ```
//!
//! Keys are case-sensitive, lists are comma-separated and unknown sections
//! or keys are rejected.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayes::BetaParams;
use crate::error::{Error, Result};
use crate::frequentist::CiMode;
use crate::mcmc::{InitStrategy, McmcConfig};
use crate::model::{Counts, Direction, PairCounts};
use crate::pathology::evenly_spaced_looks;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// Counts written directly in the config as `counts.<name>` keys.
    Inline,
    /// CSV files with `system,correct,total` rows.
    Aggregate,
    /// CSV files with `item_id,system1,system2` rows, one dataset per file.
    PerItem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pvalue,
    Ci,
    HdiRope,
    BayesFactor,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pvalue, Method::Ci, Method::HdiRope, Method::BayesFactor];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pvalue => "pvalue",
            Method::Ci => "ci",
            Method::HdiRope => "hdi_rope",
            Method::BayesFactor => "bayes_factor",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub format: DataFormat,
    /// Display names; aggregate CSVs carry their own labels, which must
    /// match these when both are given.
    pub system_names: Option<(String, String)>,
    /// Inline datasets in the order they were written.
    pub inline: Vec<(String, PairCounts)>,
    pub files: Vec<PathBuf>,
    /// Dataset to analyze when several are loaded and `pool` is off.
    pub dataset: Option<String>,
    pub pool: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub prior1: BetaParams,
    pub prior2: BetaParams,
    pub sweep_priors: Vec<BetaParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSection {
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub direction: Direction,
    pub margin: f64,
    pub rope_radius: f64,
    pub ci_level: f64,
    pub ci_mode: CiMode,
    pub hdi_mass: f64,
    pub n_mc: usize,
    pub use_mcmc: bool,
    /// A Bayes factor at least this large in either direction is decisive.
    pub bf_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcSection {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub seed: Option<u64>,
    pub init: InitStrategy,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputConfig {
    pub report: Option<PathBuf>,
    pub plot_dir: Option<PathBuf>,
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingConfig {
    pub successes: u64,
    pub trials: u64,
    pub theta0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionalStoppingConfig {
    pub theta: f64,
    pub looks: Vec<u64>,
    pub alpha: f64,
    pub trials: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub data: Option<DataConfig>,
    pub model: ModelConfig,
    pub analysis: AnalysisSection,
    pub mcmc: McmcSection,
    pub output: OutputConfig,
    pub stopping: Option<StoppingConfig>,
    pub optional_stopping: Option<OptionalStoppingConfig>,
}

/// Reported runs need at least this many simulated experiments.
pub const MIN_REPORTED_TRIALS: usize = 1000;

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            prior1: BetaParams::uniform(),
            prior2: BetaParams::uniform(),
            sweep_priors: vec![BetaParams::uniform(), BetaParams::moderate(), BetaParams::peaked()],
        }
    }
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            methods: Method::ALL.to_vec(),
            alpha: 0.05,
            direction: Direction::Greater,
            margin: 0.0,
            rope_radius: 0.01,
            ci_level: 0.95,
            ci_mode: CiMode::StandardTwoSided,
            hdi_mass: 0.95,
            n_mc: 100_000,
            use_mcmc: true,
            bf_threshold: 3.0,
        }
    }
}

impl Default for McmcSection {
    fn default() -> Self {
        McmcSection {
            chains: 4,
            warmup: 1000,
            draws: 5000,
            seed: None,
            init: InitStrategy::MleJitter,
        }
    }
}

impl AnalysisConfig {
    /// The master seed, which every analysis requires.
    pub fn seed(&self) -> Result<u64> {
        self.mcmc
            .seed
            .ok_or_else(|| Error::config_at("mcmc", "seed", None, "a seed is required"))
    }

    pub fn mcmc_config(&self) -> Result<McmcConfig> {
        Ok(McmcConfig {
            chains: self.mcmc.chains,
            warmup: self.mcmc.warmup,
            draws: self.mcmc.draws,
            init: self.mcmc.init,
            ..McmcConfig::new(self.seed()?)
        })
    }

    pub fn data(&self) -> Result<&DataConfig> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::config("missing [data] section"))
    }
}

// ---------------------------------------------------------------------------
// raw layer

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: Option<usize>,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    entries: Vec<Entry>,
}

fn parse_raw(text: &str) -> Result<Vec<Section>> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                section: None,
                key: None,
                line: Some(line_no),
                message: format!("unterminated section header `{line}`"),
            })?;
            let name = name.trim().to_string();
            if sections.iter().any(|s| s.name == name) {
                return Err(Error::Config {
                    section: Some(name),
                    key: None,
                    line: Some(line_no),
                    message: "section appears twice".into(),
                });
            }
            sections.push(Section {
                name,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            section: sections.last().map(|s| s.name.clone()),
            key: None,
            line: Some(line_no),
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        let key = key.trim().to_string();
        let section = sections.last_mut().ok_or_else(|| Error::Config {
            section: None,
            key: Some(key.clone()),
            line: Some(line_no),
            message: "key outside of any section".into(),
        })?;
        if section.entries.iter().any(|e| e.key == key) {
            return Err(Error::config_at(&section.name, &key, Some(line_no), "duplicate key"));
        }
        section.entries.push(Entry {
            key,
            value: value.trim().to_string(),
            line: Some(line_no),
        });
    }
    Ok(sections)
}

/// A `section.key=value` override as passed on the command line.
pub fn parse_override(spec: &str) -> Result<(String, String, String)> {
    let (path, value) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{spec}` is not `section.key=value`")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| Error::config(format!("override `{spec}` is not `section.key=value`")))?;
    Ok((section.to_string(), key.to_string(), value.trim().to_string()))
}

fn apply_overrides(sections: &mut Vec<Section>, overrides: &[(String, String, String)]) {
    for (section, key, value) in overrides {
        let idx = match sections.iter().position(|s| &s.name == section) {
            Some(i) => i,
            None => {
                sections.push(Section {
                    name: section.clone(),
                    entries: Vec::new(),
                });
                sections.len() - 1
            }
        };
        let entries = &mut sections[idx].entries;
        let entry = Entry {
            key: key.clone(),
            value: value.clone(),
            line: None,
        };
        match entries.iter_mut().find(|e| &e.key == key) {
            Some(e) => *e = entry,
            None => entries.push(entry),
        }
    }
}

// ---------------------------------------------------------------------------
// typed layer

struct Reader<'a> {
    section: &'a Section,
}

impl<'a> Reader<'a> {
    fn check_keys(&self, known: &[&str], prefixes: &[&str]) -> Result<()> {
        for e in &self.section.entries {
            let ok = known.contains(&e.key.as_str()) || prefixes.iter().any(|p| e.key.starts_with(p));
            if !ok {
                return Err(Error::config_at(&self.section.name, &e.key, e.line, "unknown key"));
            }
        }
        Ok(())
    }

    fn entry(&self, key: &str) -> Option<&'a Entry> {
        self.section.entries.iter().find(|e| e.key == key)
    }

    fn err(&self, e: &Entry, message: impl Into<String>) -> Error {
        Error::config_at(&self.section.name, &e.key, e.line, message)
    }

    fn parse<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| self.err(e, format!("expected {what}, found `{}`", e.value))),
        }
    }

    fn with<T>(&self, key: &str, f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => f(&e.value).map(Some).map_err(|m| self.err(e, m)),
        }
    }

    fn probability(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.parse::<f64>(key, "a number")?.unwrap_or(default);
        if !(v > 0.0 && v < 1.0) {
            let e = self.entry(key).expect("defaults are valid");
            return Err(self.err(e, format!("{v} is not in (0, 1)")));
        }
        Ok(v)
    }

    fn require<T>(&self, key: &str, value: Option<T>) -> Result<T> {
        value.ok_or_else(|| Error::config_at(&self.section.name, key, None, "missing required key"))
    }
}

fn list(value: &str) -> Vec<&str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, found `{v}`")),
    }
}

fn parse_direction(v: &str) -> std::result::Result<Direction, String> {
    match v {
        "greater" => Ok(Direction::Greater),
        "less" => Ok(Direction::Less),
        "two_sided" => Ok(Direction::TwoSided),
        _ => Err(format!("expected greater, less or two_sided, found `{v}`")),
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Greater => "greater",
        Direction::Less => "less",
        Direction::TwoSided => "two_sided",
    }
}

/// A preset name (`uniform`, `moderate`, `peaked`) or `alpha, beta`.
fn parse_prior(v: &str) -> std::result::Result<BetaParams, String> {
    if let Some(p) = BetaParams::preset(v) {
        return Ok(p);
    }
    let parts = list(v);
    if parts.len() != 2 {
        return Err(format!("expected a preset name or `alpha, beta`, found `{v}`"));
    }
    let a: f64 = parts[0].parse().map_err(|_| format!("bad alpha `{}`", parts[0]))?;
    let b: f64 = parts[1].parse().map_err(|_| format!("bad beta `{}`", parts[1]))?;
    BetaParams::new(a, b).map_err(|e| e.to_string())
}

/// `s1/n1, s2/n2`
fn parse_pair_counts(v: &str) -> std::result::Result<PairCounts, String> {
    let parts = list(v);
    if parts.len() != 2 {
        return Err(format!("expected `s1/n1, s2/n2`, found `{v}`"));
    }
    let one = |p: &str| -> std::result::Result<Counts, String> {
        let (s, n) = p.split_once('/').ok_or_else(|| format!("expected `correct/total`, found `{p}`"))?;
        let s: u64 = s.trim().parse().map_err(|_| format!("bad count `{s}`"))?;
        let n: u64 = n.trim().parse().map_err(|_| format!("bad total `{n}`"))?;
        if s > n {
            return Err(format!("{s} correct out of {n}"));
        }
        Ok(Counts::new(s, n))
    };
    Ok(PairCounts::new(one(parts[0])?, one(parts[1])?))
}

fn parse_data(r: &Reader) -> Result<DataConfig> {
    r.check_keys(&["format", "system_names", "files", "dataset", "pool"], &["counts."])?;
    let format = r
        .with("format", |v| match v {
            "inline" => Ok(DataFormat::Inline),
            "aggregate" => Ok(DataFormat::Aggregate),
            "per_item" => Ok(DataFormat::PerItem),
            _ => Err(format!("expected inline, aggregate or per_item, found `{v}`")),
        })?
        .unwrap_or(DataFormat::Inline);
    let system_names = r
        .with("system_names", |v| match list(v).as_slice() {
            [a, b] if a != b => Ok((a.to_string(), b.to_string())),
            _ => Err(format!("expected two distinct names, found `{v}`")),
        })?;
    let mut inline = Vec::new();
    for e in &r.section.entries {
        if let Some(name) = e.key.strip_prefix("counts.") {
            if name.is_empty() {
                return Err(r.err(e, "dataset name is empty"));
            }
            inline.push((name.to_string(), parse_pair_counts(&e.value).map_err(|m| r.err(e, m))?));
        }
    }
    let files: Vec<PathBuf> = r
        .with("files", |v| {
            let files: Vec<PathBuf> = list(v).into_iter().map(PathBuf::from).collect();
            if files.is_empty() {
                Err("file list is empty".to_string())
            } else {
                Ok(files)
            }
        })?
        .unwrap_or_default();
    match format {
        DataFormat::Inline if inline.is_empty() => {
            return Err(Error::config_at("data", "counts", None, "inline format needs at least one `counts.<name>` key"))
        }
        DataFormat::Inline if !files.is_empty() => {
            return Err(Error::config_at("data", "files", None, "inline format takes no files"))
        }
        DataFormat::Aggregate | DataFormat::PerItem if files.is_empty() => {
            return Err(Error::config_at("data", "files", None, "missing required key"))
        }
        DataFormat::Aggregate | DataFormat::PerItem if !inline.is_empty() => {
            return Err(Error::config_at("data", "counts", None, "inline counts need `format = inline`"))
        }
        _ => {}
    }
    Ok(DataConfig {
        format,
        system_names,
        inline,
        files,
        dataset: r.with("dataset", |v| Ok(v.to_string()))?,
        pool: r.with("pool", parse_bool)?.unwrap_or(false),
    })
}

fn parse_model(r: &Reader) -> Result<ModelConfig> {
    r.check_keys(&["family", "prior", "prior1", "prior2", "sweep_priors"], &[])?;
    r.with("family", |v| {
        if v == "binomial" {
            Ok(())
        } else {
            Err(format!("only the binomial family is supported, found `{v}`"))
        }
    })?;
    let mut m = ModelConfig::default();
    if let Some(p) = r.with("prior", parse_prior)? {
        m.prior1 = p;
        m.prior2 = p;
    }
    if let Some(p) = r.with("prior1", parse_prior)? {
        m.prior1 = p;
    }
    if let Some(p) = r.with("prior2", parse_prior)? {
        m.prior2 = p;
    }
    if let Some(s) = r.with("sweep_priors", |v| {
        // each item is a preset name or a parenthesised `(alpha, beta)`
        let mut out = Vec::new();
        let mut rest = v.trim();
        while !rest.is_empty() {
            if let Some(inner) = rest.strip_prefix('(') {
                let close = inner.find(')').ok_or("unbalanced parenthesis")?;
                out.push(parse_prior(&inner[..close])?);
                rest = inner[close + 1..].trim_start().trim_start_matches(',').trim_start();
            } else {
                let (item, tail) = rest.split_once(',').unwrap_or((rest, ""));
                out.push(parse_prior(item.trim())?);
                rest = tail.trim_start();
            }
        }
        if out.is_empty() {
            Err("prior list is empty".to_string())
        } else {
            Ok(out)
        }
    })? {
        m.sweep_priors = s;
    }
    Ok(m)
}

fn parse_analysis(r: &Reader) -> Result<AnalysisSection> {
    r.check_keys(
        &[
            "methods", "alpha", "direction", "margin", "rope_radius", "ci_level", "ci_mode",
            "hdi_mass", "n_mc", "use_mcmc", "bf_threshold",
        ],
        &[],
    )?;
    let d = AnalysisSection::default();
    let methods = r
        .with("methods", |v| {
            let mut out = Vec::new();
            for name in list(v) {
                let m = Method::ALL
                    .into_iter()
                    .find(|m| m.name() == name)
                    .ok_or_else(|| format!("unknown method `{name}`"))?;
                if out.contains(&m) {
                    return Err(format!("method `{name}` listed twice"));
                }
                out.push(m);
            }
            if out.is_empty() {
                return Err("no methods listed".into());
            }
            Ok(out)
        })?
        .unwrap_or(d.methods);
    let margin = r.parse::<f64>("margin", "a number")?.unwrap_or(d.margin);
    if !(margin > -1.0 && margin < 1.0) {
        return Err(Error::config_at("analysis", "margin", r.entry("margin").and_then(|e| e.line), "margin must lie in (-1, 1)"));
    }
    let rope_radius = r.parse::<f64>("rope_radius", "a number")?.unwrap_or(d.rope_radius);
    if !(rope_radius > 0.0 && rope_radius < 1.0) {
        return Err(Error::config_at(
            "analysis",
            "rope_radius",
            r.entry("rope_radius").and_then(|e| e.line),
            format!("{rope_radius} is not in (0, 1)"),
        ));
    }
    let n_mc = r.parse::<usize>("n_mc", "a positive integer")?.unwrap_or(d.n_mc);
    if n_mc < crate::bayes::MIN_MC_DRAWS {
        return Err(Error::config_at(
            "analysis",
            "n_mc",
            r.entry("n_mc").and_then(|e| e.line),
            format!("at least {} draws are needed", crate::bayes::MIN_MC_DRAWS),
        ));
    }
    let bf_threshold = r.parse::<f64>("bf_threshold", "a number")?.unwrap_or(d.bf_threshold);
    if !(bf_threshold >= 1.0 && bf_threshold.is_finite()) {
        return Err(Error::config_at("analysis", "bf_threshold", None, "threshold must be a finite number >= 1"));
    }
    Ok(AnalysisSection {
        methods,
        alpha: r.probability("alpha", d.alpha)?,
        direction: r.with("direction", parse_direction)?.unwrap_or(d.direction),
        margin,
        rope_radius,
        ci_level: r.probability("ci_level", d.ci_level)?,
        ci_mode: r
            .with("ci_mode", |v| match v {
                "standard_two_sided" => Ok(CiMode::StandardTwoSided),
                "paper_one_sided_z" => Ok(CiMode::PaperOneSidedZ),
                _ => Err(format!("expected standard_two_sided or paper_one_sided_z, found `{v}`")),
            })?
            .unwrap_or(d.ci_mode),
        hdi_mass: r.probability("hdi_mass", d.hdi_mass)?,
        n_mc,
        use_mcmc: r.with("use_mcmc", parse_bool)?.unwrap_or(d.use_mcmc),
        bf_threshold,
    })
}

fn parse_mcmc(r: &Reader) -> Result<McmcSection> {
    r.check_keys(&["chains", "warmup", "draws", "seed", "init"], &[])?;
    let d = McmcSection::default();
    let m = McmcSection {
        chains: r.parse("chains", "a positive integer")?.unwrap_or(d.chains),
        warmup: r.parse("warmup", "a nonnegative integer")?.unwrap_or(d.warmup),
        draws: r.parse("draws", "a positive integer")?.unwrap_or(d.draws),
        seed: r.parse("seed", "an unsigned integer")?,
        init: r
            .with("init", |v| match v {
                "mle_jitter" => Ok(InitStrategy::MleJitter),
                "prior_draw" => Ok(InitStrategy::PriorDraw),
                _ => Err(format!("expected mle_jitter or prior_draw, found `{v}`")),
            })?
            .unwrap_or(d.init),
    };
    if m.chains < 2 {
        return Err(Error::config_at("mcmc", "chains", None, "at least 2 chains are needed for R-hat"));
    }
    if m.draws < 100 {
        return Err(Error::config_at("mcmc", "draws", None, "at least 100 draws per chain are needed"));
    }
    Ok(m)
}

fn parse_output(r: &Reader) -> Result<OutputConfig> {
    r.check_keys(&["report", "plot_dir", "trace_dir"], &[])?;
    let path = |key: &str| {
        r.with(key, |v| {
            if v.is_empty() {
                Err("path is empty".to_string())
            } else {
                Ok(PathBuf::from(v))
            }
        })
    };
    Ok(OutputConfig {
        report: path("report")?,
        plot_dir: path("plot_dir")?,
        trace_dir: path("trace_dir")?,
    })
}

fn parse_stopping(r: &Reader) -> Result<StoppingConfig> {
    r.check_keys(&["successes", "trials", "theta0"], &[])?;
    let successes: u64 = r.require("successes", r.parse("successes", "a positive integer")?)?;
    let trials: u64 = r.require("trials", r.parse("trials", "a positive integer")?)?;
    let theta0 = r.parse::<f64>("theta0", "a number")?.unwrap_or(0.5);
    if successes == 0 || trials < successes {
        return Err(Error::config_at("stopping", "successes", None, "need 1 <= successes <= trials"));
    }
    if !(theta0 > 0.0 && theta0 <= 1.0) {
        return Err(Error::config_at("stopping", "theta0", None, "theta0 must lie in (0, 1]"));
    }
    Ok(StoppingConfig {
        successes,
        trials,
        theta0,
    })
}

fn parse_optional_stopping(r: &Reader) -> Result<OptionalStoppingConfig> {
    r.check_keys(&["theta", "looks", "look_every", "max_n", "alpha", "trials", "direction"], &[])?;
    let theta = r.parse::<f64>("theta", "a number")?.unwrap_or(0.5);
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::config_at("optional_stopping", "theta", None, "theta must lie in [0, 1]"));
    }
    let explicit = r.with("looks", |v| {
        list(v)
            .into_iter()
            .map(|s| s.parse::<u64>().map_err(|_| format!("bad look `{s}`")))
            .collect::<std::result::Result<Vec<_>, _>>()
    })?;
    let every: Option<u64> = r.parse("look_every", "a positive integer")?;
    let max_n: Option<u64> = r.parse("max_n", "a positive integer")?;
    let looks = match (explicit, every, max_n) {
        (Some(l), None, None) => l,
        (None, Some(e), Some(m)) => evenly_spaced_looks(e, m)
            .map_err(|_| Error::config_at("optional_stopping", "look_every", None, "look_every and max_n must be positive"))?,
        _ => {
            return Err(Error::config_at(
                "optional_stopping",
                "looks",
                None,
                "give either `looks` or both `look_every` and `max_n`",
            ))
        }
    };
    if looks.is_empty() || looks[0] == 0 || looks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config_at("optional_stopping", "looks", None, "looks must be positive and strictly increasing"));
    }
    let trials = r.parse::<usize>("trials", "a positive integer")?.unwrap_or(10_000);
    if trials < MIN_REPORTED_TRIALS {
        return Err(Error::config_at(
            "optional_stopping",
            "trials",
            None,
            format!("at least {MIN_REPORTED_TRIALS} trials are needed"),
        ));
    }
    Ok(OptionalStoppingConfig {
        theta,
        looks,
        alpha: r.probability("alpha", 0.05)?,
        trials,
        direction: r.with("direction", parse_direction)?.unwrap_or(Direction::TwoSided),
    })
}

const SECTIONS: [&str; 7] = ["data", "model", "analysis", "mcmc", "output", "stopping", "optional_stopping"];

fn build(sections: &[Section]) -> Result<AnalysisConfig> {
    for s in sections {
        if !SECTIONS.contains(&s.name.as_str()) {
            return Err(Error::Config {
                section: Some(s.name.clone()),
                key: None,
                line: None,
                message: "unknown section".into(),
            });
        }
    }
    let find = |name: &str| sections.iter().find(|s| s.name == name).map(|section| Reader { section });
    let data = find("data").map(|r| parse_data(&r)).transpose()?;
    let stopping = find("stopping").map(|r| parse_stopping(&r)).transpose()?;
    let optional_stopping = find("optional_stopping").map(|r| parse_optional_stopping(&r)).transpose()?;
    if data.is_none() && stopping.is_none() && optional_stopping.is_none() {
        return Err(Error::config("missing [data] section"));
    }
    Ok(AnalysisConfig {
        data,
        model: find("model").map(|r| parse_model(&r)).transpose()?.unwrap_or_default(),
        analysis: find("analysis").map(|r| parse_analysis(&r)).transpose()?.unwrap_or_default(),
        mcmc: find("mcmc").map(|r| parse_mcmc(&r)).transpose()?.unwrap_or_default(),
        output: find("output").map(|r| parse_output(&r)).transpose()?.unwrap_or_default(),
        stopping,
        optional_stopping,
    })
}

pub fn parse_config(text: &str) -> Result<AnalysisConfig> {
    build(&parse_raw(text)?)
}

/// Parses `text` after applying `section.key=value` overrides.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<AnalysisConfig> {
    let mut sections = parse_raw(text)?;
    let parsed = overrides.iter().map(|o| parse_override(o)).collect::<Result<Vec<_>>>()?;
    apply_overrides(&mut sections, &parsed);
    build(&sections)
}

fn fmt_prior(p: &BetaParams) -> String {
    format!("{:?}, {:?}", p.alpha, p.beta)
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

/// Canonical text form; `parse_config(&render(c))` reproduces `c`.
pub fn render(config: &AnalysisConfig) -> String {
    let mut out = String::new();
    if let Some(d) = &config.data {
        out.push_str("[data]\n");
        let format = match d.format {
            DataFormat::Inline => "inline",
            DataFormat::Aggregate => "aggregate",
            DataFormat::PerItem => "per_item",
        };
        writeln!(out, "format = {format}").unwrap();
        if let Some((a, b)) = &d.system_names {
            writeln!(out, "system_names = {a}, {b}").unwrap();
        }
        for (name, c) in &d.inline {
            writeln!(
                out,
                "counts.{name} = {}/{}, {}/{}",
                c.system1.correct, c.system1.total, c.system2.correct, c.system2.total
            )
            .unwrap();
        }
        if !d.files.is_empty() {
            writeln!(out, "files = {}", join(&d.files, |p| p.display().to_string())).unwrap();
        }
        if let Some(ds) = &d.dataset {
            writeln!(out, "dataset = {ds}").unwrap();
        }
        writeln!(out, "pool = {}", d.pool).unwrap();
    }

    let m = &config.model;
    writeln!(out, "\n[model]\nfamily = binomial").unwrap();
    writeln!(out, "prior1 = {}", fmt_prior(&m.prior1)).unwrap();
    writeln!(out, "prior2 = {}", fmt_prior(&m.prior2)).unwrap();
    writeln!(out, "sweep_priors = {}", join(&m.sweep_priors, |p| format!("({})", fmt_prior(p)))).unwrap();

    let a = &config.analysis;
    writeln!(out, "\n[analysis]").unwrap();
    writeln!(out, "methods = {}", join(&a.methods, |m| m.name().to_string())).unwrap();
    writeln!(out, "alpha = {:?}", a.alpha).unwrap();
    writeln!(out, "direction = {}", direction_name(a.direction)).unwrap();
    writeln!(out, "margin = {:?}", a.margin).unwrap();
    writeln!(out, "rope_radius = {:?}", a.rope_radius).unwrap();
    writeln!(out, "ci_level = {:?}", a.ci_level).unwrap();
    let ci_mode = match a.ci_mode {
        CiMode::StandardTwoSided => "standard_two_sided",
        CiMode::PaperOneSidedZ => "paper_one_sided_z",
    };
    writeln!(out, "ci_mode = {ci_mode}").unwrap();
    writeln!(out, "hdi_mass = {:?}", a.hdi_mass).unwrap();
    writeln!(out, "n_mc = {}", a.n_mc).unwrap();
    writeln!(out, "use_mcmc = {}", a.use_mcmc).unwrap();
    writeln!(out, "bf_threshold = {:?}", a.bf_threshold).unwrap();

    let mc = &config.mcmc;
    writeln!(out, "\n[mcmc]").unwrap();
    writeln!(out, "chains = {}\nwarmup = {}\ndraws = {}", mc.chains, mc.warmup, mc.draws).unwrap();
    if let Some(seed) = mc.seed {
        writeln!(out, "seed = {seed}").unwrap();
    }
    let init = match mc.init {
        InitStrategy::MleJitter => "mle_jitter",
        InitStrategy::PriorDraw => "prior_draw",
    };
    writeln!(out, "init = {init}").unwrap();

    let o = &config.output;
    if o.report.is_some() || o.plot_dir.is_some() || o.trace_dir.is_some() {
        writeln!(out, "\n[output]").unwrap();
        for (key, path) in [("report", &o.report), ("plot_dir", &o.plot_dir), ("trace_dir", &o.trace_dir)] {
            if let Some(p) = path {
                writeln!(out, "{key} = {}", p.display()).unwrap();
            }
        }
    }

    if let Some(s) = &config.stopping {
        writeln!(out, "\n[stopping]").unwrap();
        writeln!(out, "successes = {}\ntrials = {}\ntheta0 = {:?}", s.successes, s.trials, s.theta0).unwrap();
    }
    if let Some(s) = &config.optional_stopping {
        writeln!(out, "\n[optional_stopping]").unwrap();
        writeln!(out, "theta = {:?}", s.theta).unwrap();
        writeln!(out, "looks = {}", join(&s.looks, |l| l.to_string())).unwrap();
        writeln!(out, "alpha = {:?}\ntrials = {}", s.alpha, s.trials).unwrap();
        writeln!(out, "direction = {}", direction_name(s.direction)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EASY: &str = "\
# two systems on the easy split
[data]
format = inline
system_names = BERT, Human
counts.arc_easy = 1721/2376, 1637/2376

[mcmc]
seed = 2019
";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(EASY).unwrap();
        let d = c.data.as_ref().unwrap();
        assert_eq!(d.inline[0].0, "arc_easy");
        assert_eq!(d.inline[0].1, PairCounts::new(Counts::new(1721, 2376), Counts::new(1637, 2376)));
        assert_eq!(d.system_names, Some(("BERT".to_string(), "Human".to_string())));
        assert_eq!(c.analysis, AnalysisSection::default());
        assert_eq!(c.analysis.ci_mode, CiMode::StandardTwoSided);
        assert_eq!(c.mcmc.seed, Some(2019));
        assert_eq!((c.mcmc.chains, c.mcmc.warmup, c.mcmc.draws), (4, 1000, 5000));
    }

    #[test]
    fn empty_text_is_missing_data() {
        let err = parse_config("").unwrap_err().to_string();
        assert!(err.contains("[data]"), "{err}");
        assert!(parse_config("# only a comment\n").is_err());
    }

    #[test]
    fn negative_rope_radius_is_rejected_with_location() {
        let text = format!("{EASY}[analysis]\nrope_radius = -0.01\n");
        match parse_config(&text).unwrap_err() {
            Error::Config { section, key, line, .. } => {
                assert_eq!(section.as_deref(), Some("analysis"));
                assert_eq!(key.as_deref(), Some("rope_radius"));
                assert_eq!(line, Some(10));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn structural_errors() {
        assert!(parse_config("key = 1\n").is_err());
        assert!(parse_config("[data\n").is_err());
        assert!(parse_config(&format!("{EASY}[mcmc]\n")).is_err());
        assert!(parse_config(&format!("{EASY}[bogus]\n")).is_err());
        assert!(parse_config(&format!("{EASY}[analysis]\nmethod = ci\n")).is_err());
        assert!(parse_config(&format!("{EASY}[analysis]\nmethods = ci, ci\n")).is_err());
        assert!(parse_config(&format!("{EASY}[analysis]\nmethods = anova\n")).is_err());
        assert!(parse_config(&format!("{EASY}[analysis]\nalpha = 1.5\n")).is_err());
        assert!(parse_config("[data]\nformat = inline\ncounts.x = 5/4, 1/4\n").is_err());
        assert!(parse_config("[data]\nformat = aggregate\n").is_err());
        assert!(parse_config("[data]\nformat = inline\ncounts.a = 1/2, 1/2\ncounts.a = 1/2, 1/2\n").is_err());
    }

    #[test]
    fn keys_are_case_sensitive() {
        assert!(parse_config(&format!("{EASY}[analysis]\nAlpha = 0.1\n")).is_err());
    }

    #[test]
    fn priors_parse_from_presets_and_pairs() {
        let c = parse_config(&format!("{EASY}[model]\nprior = moderate\nprior2 = 2, 5\n")).unwrap();
        assert_eq!(c.model.prior1, BetaParams::moderate());
        assert_eq!(c.model.prior2, BetaParams::new(2.0, 5.0).unwrap());
        let c = parse_config(&format!("{EASY}[model]\nsweep_priors = uniform, (2, 2), peaked\n")).unwrap();
        assert_eq!(
            c.model.sweep_priors,
            vec![BetaParams::uniform(), BetaParams::new(2.0, 2.0).unwrap(), BetaParams::peaked()]
        );
        assert!(parse_config(&format!("{EASY}[model]\nprior = 0, 1\n")).is_err());
        assert!(parse_config(&format!("{EASY}[model]\nfamily = poisson\n")).is_err());
    }

    #[test]
    fn overrides_replace_and_add() {
        let c = parse_config_with_overrides(
            EASY,
            &["mcmc.seed=7".into(), "analysis.ci_mode = paper_one_sided_z".into()],
        )
        .unwrap();
        assert_eq!(c.mcmc.seed, Some(7));
        assert_eq!(c.analysis.ci_mode, CiMode::PaperOneSidedZ);
        let c = parse_config_with_overrides(EASY, &["data.counts.other=1/2, 2/2".into()]).unwrap();
        assert_eq!(c.data.unwrap().inline.len(), 2);
        assert!(parse_config_with_overrides(EASY, &["seed=1".into()]).is_err());
    }

    #[test]
    fn optional_stopping_looks() {
        let c = parse_config("[optional_stopping]\nlook_every = 10\nmax_n = 500\n").unwrap();
        let o = c.optional_stopping.unwrap();
        assert_eq!(o.looks.len(), 50);
        assert_eq!((o.trials, o.alpha, o.direction), (10_000, 0.05, Direction::TwoSided));
        assert!(parse_config("[optional_stopping]\nlooks = 10, 5\n").is_err());
        assert!(parse_config("[optional_stopping]\nlooks = 10\ntrials = 50\n").is_err());
        assert!(parse_config("[optional_stopping]\nlooks = 10\nlook_every = 5\nmax_n = 10\n").is_err());
    }

    #[test]
    fn crlf_and_comments() {
        let text = EASY.replace('\n', "\r\n").replace("seed = 2019", "seed = 2019 # fixed");
        assert_eq!(parse_config(&text).unwrap(), parse_config(EASY).unwrap());
    }

    #[test]
    fn missing_seed_is_reported_on_use() {
        let c = parse_config("[data]\ncounts.a = 1/2, 1/2\n").unwrap();
        assert!(matches!(c.seed(), Err(Error::Config { .. })));
    }

    fn arb_prior() -> impl Strategy<Value = BetaParams> {
        (0.1f64..50.0, 0.1f64..50.0).prop_map(|(a, b)| BetaParams::new(a, b).unwrap())
    }

    fn arb_direction() -> impl Strategy<Value = Direction> {
        prop_oneof![Just(Direction::Greater), Just(Direction::Less), Just(Direction::TwoSided)]
    }

    fn arb_config() -> impl Strategy<Value = AnalysisConfig> {
        let data = (
            prop::collection::vec(("[a-z][a-z0-9_]{0,6}", 0u64..50, 0u64..50, 1u64..50), 1..4),
            any::<bool>(),
            prop::option::of("[a-z]{1,5}"),
        )
            .prop_map(|(sets, pool, dataset)| {
                let mut inline: Vec<(String, PairCounts)> = Vec::new();
                for (name, s1, s2, extra) in sets {
                    if inline.iter().any(|(n, _)| *n == name) {
                        continue;
                    }
                    let n = s1.max(s2) + extra;
                    inline.push((name, PairCounts::new(Counts::new(s1, n), Counts::new(s2, n))));
                }
                DataConfig {
                    format: DataFormat::Inline,
                    system_names: Some(("A".into(), "B".into())),
                    inline,
                    files: vec![],
                    dataset,
                    pool,
                }
            });
        let analysis = (
            prop::sample::subsequence(Method::ALL.to_vec(), 1..=4),
            0.001f64..0.5,
            arb_direction(),
            -0.5f64..0.5,
            0.001f64..0.5,
            0.5f64..0.999,
            any::<bool>(),
            1000usize..1_000_000,
            any::<bool>(),
            1.0f64..100.0,
        )
            .prop_map(|(methods, alpha, direction, margin, rope_radius, ci_level, one_sided, n_mc, use_mcmc, bf_threshold)| {
                AnalysisSection {
                    methods,
                    alpha,
                    direction,
                    margin,
                    rope_radius,
                    ci_level,
                    ci_mode: if one_sided { CiMode::PaperOneSidedZ } else { CiMode::StandardTwoSided },
                    hdi_mass: ci_level,
                    n_mc,
                    use_mcmc,
                    bf_threshold,
                }
            });
        let mcmc = (2usize..8, 0usize..3000, 100usize..9000, prop::option::of(any::<u64>()), any::<bool>()).prop_map(
            |(chains, warmup, draws, seed, prior)| McmcSection {
                chains,
                warmup,
                draws,
                seed,
                init: if prior { InitStrategy::PriorDraw } else { InitStrategy::MleJitter },
            },
        );
        let stopping = prop::option::of((1u64..30, 0u64..30, 0.01f64..1.0).prop_map(|(a, extra, theta0)| StoppingConfig {
            successes: a,
            trials: a + extra,
            theta0,
        }));
        let optional = prop::option::of(
            (0.0f64..1.0, prop::collection::btree_set(1u64..1000, 1..10), 0.01f64..0.2, 1000usize..20000, arb_direction())
                .prop_map(|(theta, looks, alpha, trials, direction)| OptionalStoppingConfig {
                    theta,
                    looks: looks.into_iter().collect(),
                    alpha,
                    trials,
                    direction,
                }),
        );
        let model = (arb_prior(), arb_prior(), prop::collection::vec(arb_prior(), 1..4))
            .prop_map(|(prior1, prior2, sweep_priors)| ModelConfig { prior1, prior2, sweep_priors });
        let output = (prop::option::of("[a-z/]{1,12}\\.json"), prop::option::of("[a-z]{1,8}"))
            .prop_map(|(report, plot)| OutputConfig {
                report: report.map(PathBuf::from),
                plot_dir: plot.clone().map(PathBuf::from),
                trace_dir: plot.map(|p| PathBuf::from(format!("{p}/traces"))),
            });
        (data, model, analysis, mcmc, output, stopping, optional).prop_map(
            |(data, model, analysis, mcmc, output, stopping, optional_stopping)| AnalysisConfig {
                data: Some(data),
                model,
                analysis,
                mcmc,
                output,
                stopping,
                optional_stopping,
            },
        )
    }

    proptest! {
        #[test]
        fn render_round_trips(config in arb_config()) {
            let text = render(&config);
            let parsed = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(parsed, config);
        }
    }
}

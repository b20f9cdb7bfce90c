use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed observations: {0}")]
    MalformedObservations(String),

    #[error("dataset `{0}` is empty")]
    EmptyDataset(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    /// The pooled accuracy is 0 or 1, so the pooled standard error vanishes.
    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    /// Every chain has zero within-chain variance.
    #[error("degenerate chains: within-chain variance is zero")]
    DegenerateChains,

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("unstable estimate: {component} = {value} is below 10/n_mc ({n_mc} draws)")]
    UnstableEstimate {
        component: &'static str,
        value: f64,
        n_mc: usize,
    },

    #[error("config error{}: {message}", location(.section, .key, .line))]
    Config {
        section: Option<String>,
        key: Option<String>,
        line: Option<usize>,
        message: String,
    },

    #[error("ingest error in {}{}: {message}", .path.display(), .row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    Ingest {
        path: PathBuf,
        row: Option<usize>,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn location(section: &Option<String>, key: &Option<String>, line: &Option<usize>) -> String {
    let mut out = String::new();
    if let Some(s) = section {
        out.push_str(&format!(" [{s}]"));
    }
    if let Some(k) = key {
        out.push_str(&format!(" key `{k}`"));
    }
    if let Some(l) = line {
        out.push_str(&format!(" at line {l}"));
    }
    out
}

impl Error {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config {
            section: None,
            key: None,
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn config_at(
        section: &str,
        key: &str,
        line: Option<usize>,
        message: impl Into<String>,
    ) -> Self {
        Error::Config {
            section: Some(section.to_string()),
            key: Some(key.to_string()),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }
}

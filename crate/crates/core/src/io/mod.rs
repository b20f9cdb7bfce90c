//! Config parsing, data ingestion, reports and plot data.

mod config;
mod ingest;
mod plot;
mod report;

pub use config::{
    parse_config, parse_config_with_overrides, parse_override, render, AnalysisConfig,
    AnalysisSection, DataConfig, DataFormat, McmcSection, Method, ModelConfig,
    OptionalStoppingConfig, OutputConfig, StoppingConfig, MIN_REPORTED_TRIALS,
};
pub use ingest::{load_observations, parse_aggregate_csv, parse_per_item_csv, select_dataset};
pub use plot::{emit_plot_data, histogram, Bin, EventAnnotation, PlotAnnotations, PLOT_BINS};
pub use report::{
    lint_phrasing, run_analysis, write_outputs, AnalysisOutcome, AssessmentReport, Assumption,
    AssumptionStatus, Disagreement, HdiRopeResult, HypothesisSummary, McmcSummary, MethodResult,
    Provenance, REPORT_SCHEMA,
};

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

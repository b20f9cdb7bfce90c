use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Trace;
use crate::error::Result;
use crate::io::write_atomic;

/// Contents of `diagnostics.json` next to the per-chain CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDiagnostics {
    pub param_names: Vec<String>,
    pub rhat: Vec<Option<f64>>,
    pub ess: Vec<f64>,
    pub accept_rates: Vec<f64>,
    pub step_sizes: Vec<Vec<f64>>,
    pub master_seed: u64,
    pub converged: bool,
}

impl From<&Trace> for TraceDiagnostics {
    fn from(trace: &Trace) -> Self {
        TraceDiagnostics {
            param_names: trace.param_names.clone(),
            rhat: trace.rhat.clone(),
            ess: trace.ess.clone(),
            accept_rates: trace.chains.iter().map(|c| c.accept_rate).collect(),
            step_sizes: trace.chains.iter().map(|c| c.step_sizes.clone()).collect(),
            master_seed: trace.master_seed,
            converged: trace.converged(),
        }
    }
}

/// Writes `chain_{i}.csv` (header `draw,theta1,theta2,...`) for every chain
/// and `diagnostics.json` into `dir`.
pub fn write_trace(trace: &Trace, dir: &Path) -> Result<()> {
    for (i, chain) in trace.chains.iter().enumerate() {
        let mut out = String::from("draw");
        for name in &trace.param_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        let draws = chain.params.first().map_or(0, Vec::len);
        for t in 0..draws {
            write!(out, "{t}").unwrap();
            for col in &chain.params {
                write!(out, ",{:?}", col[t]).unwrap();
            }
            out.push('\n');
        }
        write_atomic(&dir.join(format!("chain_{i}.csv")), out.as_bytes())?;
    }
    let diag = serde_json::to_string_pretty(&TraceDiagnostics::from(trace))?;
    write_atomic(&dir.join("diagnostics.json"), diag.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{BetaParams, HierarchicalModel};
    use crate::mcmc::{run_chains, McmcConfig};
    use crate::model::{Counts, PairCounts};

    #[test]
    fn writes_chains_and_diagnostics() {
        let target = HierarchicalModel::shared(BetaParams::uniform())
            .target(PairCounts::new(Counts::new(30, 40), Counts::new(20, 40)));
        let config = McmcConfig { chains: 2, warmup: 50, draws: 20, ..McmcConfig::new(9) };
        let trace = run_chains(&target, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_trace(&trace, dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("chain_1.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("draw,theta1,theta2"));
        let first: Vec<f64> = lines.next().unwrap().split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert_eq!(first, vec![trace.chains[1].params[0][0], trace.chains[1].params[1][0]]);
        assert_eq!(csv.lines().count(), 21);
        let diag: TraceDiagnostics =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("diagnostics.json")).unwrap()).unwrap();
        assert_eq!(diag.master_seed, 9);
        assert_eq!(diag.accept_rates.len(), 2);
    }
}

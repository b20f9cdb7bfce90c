//! CSV ingestion.
//!
//! Aggregate files have rows `system,correct,total`; a label that was
//! already seen in the current dataset starts the next dataset, so Table-style
//! files list one system pair per dataset. An optional fourth column
//! `dataset` names the datasets explicitly. Per-item files have rows
//! `item_id,system1,system2` with 0/1 outcomes and hold one dataset each.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::config::{AnalysisConfig, DataConfig, DataFormat};
use crate::error::{Error, Result};
use crate::model::{Counts, DatasetObs, ItemOutcome, ObservationMode, ObservationSet, PairCounts};

fn ingest_err(path: &Path, row: Option<usize>, message: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        row,
        message: message.into(),
    }
}

fn reader(path: &Path, bytes: &[u8]) -> Result<(csv::Reader<std::io::Cursor<Vec<u8>>>, Vec<String>)> {
    let bytes = bytes.strip_prefix(b"\xef\xbb\xbf").unwrap_or(bytes).to_vec();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(std::io::Cursor::new(bytes));
    let header = rdr
        .headers()
        .map_err(|e| ingest_err(path, Some(1), e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    Ok((rdr, header))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into())
}

/// Parsed aggregate file: system labels and one entry per dataset.
pub fn parse_aggregate_csv(path: &Path, bytes: &[u8]) -> Result<((String, String), Vec<DatasetObs>)> {
    let (mut rdr, header) = reader(path, bytes)?;
    let named = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["system", "correct", "total"] => false,
        ["system", "correct", "total", "dataset"] => true,
        _ => {
            return Err(ingest_err(
                path,
                Some(1),
                format!("expected header `system,correct,total[,dataset]`, found `{}`", header.join(",")),
            ))
        }
    };

    struct Pending {
        name: Option<String>,
        rows: Vec<(String, Counts, usize)>,
    }
    let mut groups: Vec<Pending> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| ingest_err(path, Some(row), e.to_string()))?;
        let label = record[0].to_string();
        if label.is_empty() {
            return Err(ingest_err(path, Some(row), "empty system label"));
        }
        let num = |j: usize, what: &str| -> Result<u64> {
            record[j]
                .parse()
                .map_err(|_| ingest_err(path, Some(row), format!("bad {what} `{}`", &record[j])))
        };
        let (correct, total) = (num(1, "correct count")?, num(2, "total")?);
        if correct > total {
            return Err(ingest_err(path, Some(row), format!("{correct} correct out of {total}")));
        }
        if total == 0 {
            return Err(ingest_err(path, Some(row), "total is zero"));
        }
        let dataset = named.then(|| record[3].to_string());
        let start_new = match groups.last() {
            None => true,
            Some(g) if named => g.name != dataset,
            Some(g) => g.rows.iter().any(|(l, _, _)| *l == label),
        };
        if start_new {
            if named && groups.iter().any(|g| g.name == dataset) {
                return Err(ingest_err(path, Some(row), "rows of a dataset must be contiguous"));
            }
            groups.push(Pending {
                name: dataset,
                rows: Vec::new(),
            });
        }
        let group = groups.last_mut().unwrap();
        if group.rows.iter().any(|(l, _, _)| *l == label) {
            return Err(ingest_err(path, Some(row), format!("system `{label}` repeated in one dataset")));
        }
        group.rows.push((label, Counts::new(correct, total), row));
    }
    if groups.is_empty() {
        return Err(ingest_err(path, None, "no data rows"));
    }

    let mut labels: Option<(String, String)> = None;
    let mut datasets = Vec::with_capacity(groups.len());
    let many = groups.len() > 1;
    for (k, g) in groups.into_iter().enumerate() {
        let last_row = g.rows.last().map(|r| r.2);
        let [(l1, c1, _), (l2, c2, _)] = <[_; 2]>::try_from(g.rows).map_err(|rows: Vec<_>| {
            ingest_err(path, last_row, format!("a dataset needs exactly two systems, found {}", rows.len()))
        })?;
        if c1.total != c2.total {
            return Err(ingest_err(path, last_row, "both systems must be scored on the same items"));
        }
        match &labels {
            None => labels = Some((l1, l2)),
            Some((a, b)) if *a == l1 && *b == l2 => {}
            Some((a, b)) => {
                return Err(ingest_err(
                    path,
                    last_row,
                    format!("systems `{l1}`, `{l2}` do not match earlier `{a}`, `{b}`"),
                ))
            }
        }
        let name = g.name.unwrap_or_else(|| {
            if many {
                format!("{}_{}", stem(path), k + 1)
            } else {
                stem(path)
            }
        });
        datasets.push(DatasetObs::aggregate(name, PairCounts::new(c1, c2)));
    }
    Ok((labels.unwrap(), datasets))
}

pub fn parse_per_item_csv(path: &Path, bytes: &[u8]) -> Result<DatasetObs> {
    let (mut rdr, header) = reader(path, bytes)?;
    if header != ["item_id", "system1", "system2"] {
        return Err(ingest_err(
            path,
            Some(1),
            format!("expected header `item_id,system1,system2`, found `{}`", header.join(",")),
        ));
    }
    let mut seen = HashSet::new();
    let mut items = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| ingest_err(path, Some(row), e.to_string()))?;
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(ingest_err(path, Some(row), "empty item id"));
        }
        if !seen.insert(id.clone()) {
            return Err(ingest_err(path, Some(row), format!("duplicate item id `{id}`")));
        }
        let outcome = |j: usize| -> Result<bool> {
            match &record[j] {
                "0" => Ok(false),
                "1" => Ok(true),
                v => Err(ingest_err(path, Some(row), format!("outcome must be 0 or 1, found `{v}`"))),
            }
        };
        items.push(ItemOutcome::new(id, outcome(1)?, outcome(2)?));
    }
    if items.is_empty() {
        return Err(ingest_err(path, None, "no data rows"));
    }
    Ok(DatasetObs::per_item(stem(path), items))
}

fn resolve(base_dir: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        base_dir.join(file)
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| ingest_err(path, None, e.to_string()))
}

/// Loads every dataset named by `[data]`; relative paths are taken from
/// `base_dir` (normally the config file's directory).
pub fn load_observations(config: &AnalysisConfig, base_dir: &Path) -> Result<ObservationSet> {
    let data = config.data()?;
    let default_names = || ("system1".to_string(), "system2".to_string());
    let set = match data.format {
        DataFormat::Inline => ObservationSet::new(
            ObservationMode::Aggregate,
            data.inline
                .iter()
                .map(|(name, c)| DatasetObs::aggregate(name.clone(), *c))
                .collect(),
            data.system_names.clone().unwrap_or_else(default_names),
        ),
        DataFormat::Aggregate => {
            let mut labels: Option<(String, String)> = None;
            let mut datasets = Vec::new();
            for file in &data.files {
                let path = resolve(base_dir, file);
                let (l, ds) = parse_aggregate_csv(&path, &read(&path)?)?;
                if let Some(expected) = labels.as_ref().or(data.system_names.as_ref()) {
                    if *expected != l {
                        return Err(ingest_err(
                            &path,
                            None,
                            format!("systems `{}`, `{}` differ from expected `{}`, `{}`", l.0, l.1, expected.0, expected.1),
                        ));
                    }
                }
                labels = Some(l);
                datasets.extend(ds);
            }
            ObservationSet::new(ObservationMode::Aggregate, datasets, labels.unwrap())
        }
        DataFormat::PerItem => {
            let datasets = data
                .files
                .iter()
                .map(|f| {
                    let path = resolve(base_dir, f);
                    parse_per_item_csv(&path, &read(&path)?)
                })
                .collect::<Result<Vec<_>>>()?;
            ObservationSet::new(
                ObservationMode::PerItem,
                datasets,
                data.system_names.clone().unwrap_or_else(default_names),
            )
        }
    };
    let mut names = HashSet::new();
    for ds in &set.datasets {
        if !names.insert(ds.name.as_str()) {
            return Err(Error::config_at("data", "files", None, format!("dataset name `{}` occurs twice", ds.name)));
        }
    }
    set.validate()
}

/// The single dataset an analysis runs on: all datasets pooled, the one
/// named by `dataset`, or the only one loaded.
pub fn select_dataset(set: &ObservationSet, data: &DataConfig) -> Result<DatasetObs> {
    if data.pool {
        return Ok(set.pooled()?.datasets.remove(0));
    }
    match &data.dataset {
        Some(name) => set
            .datasets
            .iter()
            .find(|d| d.name == *name)
            .cloned()
            .ok_or_else(|| {
                let known: Vec<&str> = set.datasets.iter().map(|d| d.name.as_str()).collect();
                Error::config_at("data", "dataset", None, format!("no dataset `{name}` (have {})", known.join(", ")))
            }),
        None if set.datasets.len() == 1 => Ok(set.datasets[0].clone()),
        None => Err(Error::config_at(
            "data",
            "dataset",
            None,
            "several datasets loaded; name one with `dataset` or set `pool = true`",
        )),
    }
}

//! Result rows and their on-disk formats: CSV for rows, JSON mirrors for
//! machine reading.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One measured outcome. Parameters identify the cell; metrics carry the
/// measured quantities as canonical strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub trial: u64,
    pub params: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, String>,
}

impl ResultRow {
    pub fn new(experiment: &str, trial: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            trial,
            params: BTreeMap::new(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn metric(mut self, key: &str, value: impl ToString) -> Self {
        self.metrics.insert(key.to_string(), value.to_string());
        self
    }

    pub fn metric_f64(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).and_then(|v| v.parse().ok())
    }
}

fn header_for(rows: &[ResultRow]) -> (Vec<String>, Vec<String>) {
    let mut params: Vec<String> = rows.iter().flat_map(|r| r.params.keys().cloned()).collect();
    params.sort();
    params.dedup();
    let mut metrics: Vec<String> = rows.iter().flat_map(|r| r.metrics.keys().cloned()).collect();
    metrics.sort();
    metrics.dedup();
    (params, metrics)
}

pub fn write_rows_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let (params, metrics) = header_for(rows);
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let mut header = vec!["experiment".to_string(), "trial".to_string()];
    header.extend(params.iter().map(|p| format!("p:{p}")));
    header.extend(metrics.iter().map(|m| format!("m:{m}")));
    writer
        .write_record(&header)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for row in rows {
        let mut record = vec![row.experiment.clone(), row.trial.to_string()];
        record.extend(params.iter().map(|p| row.params.get(p).cloned().unwrap_or_default()));
        record.extend(metrics.iter().map(|m| row.metrics.get(m).cloned().unwrap_or_default()));
        writer
            .write_record(&record)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::MissingResults(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let mut row = ResultRow::new("", 0);
        for (key, value) in header.iter().zip(record.iter()) {
            match key.as_str() {
                "experiment" => row.experiment = value.to_string(),
                "trial" => {
                    row.trial = value
                        .parse()
                        .map_err(|_| Error::ConfigInvalid(format!("bad trial {value:?}")))?
                }
                _ if value.is_empty() => {}
                _ => {
                    if let Some(name) = key.strip_prefix("p:") {
                        row.params.insert(name.to_string(), value.to_string());
                    } else if let Some(name) = key.strip_prefix("m:") {
                        row.metrics.insert(name.to_string(), value.to_string());
                    }
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_rows_json(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let text =
        serde_json::to_string_pretty(rows).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_rows_json(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::MissingResults(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_preserves_rows() {
        let rows = vec![
            ResultRow::new("demo", 0).param("eps", "1/10").metric("rounds", 3),
            ResultRow::new("demo", 1).param("eps", "1/10").metric("rounds", 5).metric("agreed", true),
        ];
        let dir = std::env::temp_dir().join("agreelab_rows_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rows.csv");
        write_rows_csv(&path, &rows).unwrap();
        let back = read_rows_csv(&path).unwrap();
        assert_eq!(rows, back);
    }
}

//! Read-only aggregation of stored result rows into tables and plot-ready
//! series.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::rows::{read_rows_csv, read_rows_json, ResultRow};

/// Aggregated view of one (experiment, parameter-tuple, metric) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub experiment: String,
    pub params: BTreeMap<String, String>,
    pub metric: String,
    pub count: u64,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub rows_read: usize,
    pub series: Vec<SeriesPoint>,
    pub table: String,
}

/// Loads rows from `rows.csv` or `rows.json` under the results directory
/// and aggregates numeric metrics per parameter tuple. Never writes into
/// the results directory.
pub fn report(results_dir: &Path) -> Result<Report> {
    let rows = load_rows(results_dir)?;
    if rows.is_empty() {
        return Err(Error::MissingResults(format!(
            "no rows found under {}",
            results_dir.display()
        )));
    }
    let mut groups: BTreeMap<(String, Vec<(String, String)>), Vec<&ResultRow>> = BTreeMap::new();
    for row in &rows {
        let key = (
            row.experiment.clone(),
            row.params.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        );
        groups.entry(key).or_default().push(row);
    }
    let mut series = Vec::new();
    for ((experiment, params), members) in &groups {
        let mut metric_names: Vec<String> =
            members.iter().flat_map(|r| r.metrics.keys().cloned()).collect();
        metric_names.sort();
        metric_names.dedup();
        for metric in metric_names {
            let mut values: Vec<f64> = members
                .iter()
                .filter_map(|r| parse_metric(r.metrics.get(&metric)?))
                .collect();
            if values.is_empty() {
                continue;
            }
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite metric"));
            let count = values.len() as u64;
            let mean = values.iter().sum::<f64>() / count as f64;
            series.push(SeriesPoint {
                experiment: experiment.clone(),
                params: params.iter().cloned().collect(),
                metric,
                count,
                mean,
                median: values[values.len() / 2],
                min: values[0],
                max: values[values.len() - 1],
            });
        }
    }

    let mut table = String::new();
    let _ = writeln!(table, "{:<14} {:<34} {:<26} {:>7} {:>12} {:>12}",
        "experiment", "params", "metric", "count", "mean", "median");
    for point in &series {
        let params: Vec<String> =
            point.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(
            table,
            "{:<14} {:<34} {:<26} {:>7} {:>12.6} {:>12.6}",
            point.experiment,
            params.join(","),
            point.metric,
            point.count,
            point.mean,
            point.median
        );
    }
    Ok(Report { rows_read: rows.len(), series, table })
}

/// Long-format series rows suitable for external plotting.
pub fn series_rows(report: &Report) -> Vec<ResultRow> {
    report
        .series
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row = ResultRow::new(&p.experiment, i as u64);
            row.params = p.params.clone();
            row.params.insert("metric".into(), p.metric.clone());
            row.metrics.insert("count".into(), p.count.to_string());
            row.metrics.insert("mean".into(), p.mean.to_string());
            row.metrics.insert("median".into(), p.median.to_string());
            row.metrics.insert("min".into(), p.min.to_string());
            row.metrics.insert("max".into(), p.max.to_string());
            row
        })
        .collect()
}

fn parse_metric(text: &str) -> Option<f64> {
    match text {
        "true" => Some(1.0),
        "false" => Some(0.0),
        _ => {
            if let Ok(v) = text.parse::<f64>() {
                return v.is_finite().then_some(v);
            }
            // Exact rationals like "9/14".
            let (n, d) = text.split_once('/')?;
            let n: f64 = n.parse().ok()?;
            let d: f64 = d.parse().ok()?;
            (d != 0.0).then_some(n / d)
        }
    }
}

fn load_rows(dir: &Path) -> Result<Vec<ResultRow>> {
    let csv_path = dir.join("rows.csv");
    let json_path = dir.join("rows.json");
    if csv_path.exists() {
        read_rows_csv(&csv_path)
    } else if json_path.exists() {
        read_rows_json(&json_path)
    } else {
        Err(Error::MissingResults(format!(
            "expected rows.csv or rows.json under {}",
            dir.display()
        )))
    }
}

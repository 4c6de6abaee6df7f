//! Experiment harness: config ingestion, seeded batch execution, result
//! persistence, and report emission.

mod config;
mod report;
mod rows;
mod runner;

pub use config::{
    AgreementParams, BoundedParams, ChannelConfig, ConstructPriorParams, ExperimentConfig,
    ExperimentKind, GraphConfig, InstanceConfig, LowerBoundParams, NeedleParams, OutputFormat,
    ScopeConfig, SweepParams, TailRiskParams,
};
pub use report::{report, series_rows, Report, SeriesPoint};
pub use rows::{read_rows_csv, read_rows_json, write_rows_csv, write_rows_json, ResultRow};
pub use runner::{
    build_instance, frequency_summary, grid_partitions, random_distribution, random_objective,
    random_partition, random_profile, run_experiment, size_condition_profile, sweep,
    wannabe_table, RunArtifacts,
};

use std::path::Path;

use crate::error::Result;

/// Persists rows, the config echo, and any summary under `out`.
/// Rows land in `rows.csv` or `rows.json` per the configured format.
pub fn persist(out: &Path, config: &ExperimentConfig, artifacts: &RunArtifacts) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.json"), config.to_json())?;
    match config.format {
        OutputFormat::Csv => write_rows_csv(&out.join("rows.csv"), &artifacts.rows)?,
        OutputFormat::Json => write_rows_json(&out.join("rows.json"), &artifacts.rows)?,
    }
    if let Some(summary) = &artifacts.summary {
        std::fs::write(
            out.join("summary.json"),
            serde_json::to_string_pretty(summary).expect("summary serializes"),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agreement_config(seed: u64, trials: u64) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{
                "kind": {{"agreement": {{
                    "instance": {{"family": "shared_prior", "agents": 2, "states": 8,
                                  "epsilon": "1/10", "delta": "1/10", "partitions": "grid"}}
                }}}},
                "seed": {seed},
                "trials": {trials}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn rerunning_a_config_reproduces_identical_rows() {
        let config = agreement_config(7, 12);
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 12);
        assert!(a.rows.iter().all(|r| r.metrics["agreed"] == "true"));
    }

    #[test]
    fn tail_risk_closed_form_row() {
        let config = ExperimentConfig::from_json(
            r#"{"kind": {"tail_risk": {"p": "1/10", "tau": "1/5"}}, "seed": 1}"#,
        )
        .unwrap();
        let arts = run_experiment(&config).unwrap();
        assert_eq!(arts.rows[0].metrics["expected_shortfall"], "1/2");
    }

    #[test]
    fn needle_summary_tracks_closed_form() {
        let config = ExperimentConfig::from_json(
            r#"{"kind": {"needle": {"states": 6, "nu": "1/2", "leaves": 3}},
                "seed": 11, "trials": 4000}"#,
        )
        .unwrap();
        let arts = run_experiment(&config).unwrap();
        let summary = arts.summary.unwrap();
        let freq = summary["miss_frequency"].as_f64().unwrap();
        assert!((freq - 0.421875).abs() < 0.03, "freq {freq}");
        assert_eq!(summary["closed_form_exact"], "27/64");
    }

    #[test]
    fn sweep_produces_cells_and_summary() {
        let config = ExperimentConfig::from_json(
            r#"{
                "kind": {"sweep": {
                    "base": {"instance": {"family": "shared_prior", "agents": 2, "states": 8,
                                           "epsilon": "1/5", "delta": "1/10", "partitions": "grid"}},
                    "epsilons": ["1/5", "1/10", "1/20"]
                }},
                "seed": 5,
                "trials": 10
            }"#,
        )
        .unwrap();
        let arts = run_experiment(&config).unwrap();
        assert_eq!(arts.rows.len(), 30);
        let summary = arts.summary.unwrap();
        assert_eq!(summary["cells"].as_array().unwrap().len(), 3);
        assert!(summary["median_rounds_monotone_in_shrinking_epsilon"].as_bool().unwrap());
    }

    #[test]
    fn single_cell_sweep_degenerates_to_a_plain_run() {
        let sweep_config = ExperimentConfig::from_json(
            r#"{
                "kind": {"sweep": {
                    "base": {"instance": {"family": "shared_prior", "agents": 2, "states": 8,
                                           "epsilon": "1/10", "delta": "1/10",
                                           "partitions": "grid"}},
                    "epsilons": ["1/10"]
                }},
                "seed": 21,
                "trials": 6
            }"#,
        )
        .unwrap();
        let swept = run_experiment(&sweep_config).unwrap();
        // The single cell runs the agreement experiment under its derived
        // cell seed; rebuilding that config reproduces the same metrics.
        let cell_seed = crate::seeding::derive_seed(21, 0x73776565, 0);
        let direct = run_experiment(
            &ExperimentConfig::from_json(&format!(
                r#"{{
                    "kind": {{"agreement": {{
                        "instance": {{"family": "shared_prior", "agents": 2, "states": 8,
                                      "epsilon": "1/10", "delta": "1/10",
                                      "partitions": "grid"}}
                    }}}},
                    "seed": {cell_seed},
                    "trials": 6
                }}"#
            ))
            .unwrap(),
        )
        .unwrap();
        assert_eq!(swept.rows.len(), direct.rows.len());
        for (a, b) in swept.rows.iter().zip(&direct.rows) {
            assert_eq!(a.metrics, b.metrics);
        }
    }

    #[test]
    fn size_condition_profiles_always_satisfy_it() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let parts = size_condition_profile(3, 5, &mut rng);
            assert!(crate::common_prior::size_condition_holds(&parts).unwrap());
        }
    }

    #[test]
    fn persist_and_report_round_trip() {
        let dir = std::env::temp_dir().join("agreelab_persist_test");
        let _ = std::fs::remove_dir_all(&dir);
        let config = agreement_config(3, 5);
        let arts = run_experiment(&config).unwrap();
        persist(&dir, &config, &arts).unwrap();
        let rep = report(&dir).unwrap();
        assert_eq!(rep.rows_read, 5);
        assert!(!series_rows(&rep).is_empty());
    }
}

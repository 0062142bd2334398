//! Tune on a simulated epoch and run every scenario in one pass.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::{
    run_experiment_suite, tune_on_epoch, Environment, ExperimentReport, Scenario, SimConfig,
    SuiteInputs, TuningSummary, EVAL_TAG, TUNE_TAG,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub tuning: TuningSummary,
    pub scenarios: Vec<ExperimentReport>,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        self.scenarios
            .iter()
            .map(ExperimentReport::to_text)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Generates the evaluation and tuning epochs, tunes `v_a` on the latter and
/// runs every scenario on the former with that virtual bid. The result
/// depends only on `config`.
pub fn end_to_end_pipeline(config: &SimConfig) -> Result<PipelineReport> {
    let env = Environment::new(config)?;
    let tuning = tune_on_epoch(&env, "T1", TUNE_TAG)?;
    let log = env.epoch(EVAL_TAG, config.n_impressions);
    let scenarios = Scenario::ALL
        .iter()
        .map(|&s| {
            run_experiment_suite(
                config,
                s,
                SuiteInputs {
                    log: Some(&log),
                    tuning: Some(tuning.clone()),
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineReport {
        seed: config.seed,
        tuning,
        scenarios,
    })
}

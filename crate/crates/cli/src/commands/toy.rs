use paretoreid::descent::{loss_normalize, step_weights, train, write_partial_jsonl, RunTrace, StopReason, WeightingMode};
use paretoreid::preference::constraint_values;
use paretoreid::{MultiObjectiveProblem, OptimizerConfig};
use serde::Serialize;

use super::OutDir;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::setup;

#[derive(Debug, Serialize)]
pub struct ToyResult {
    pub problem: String,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pref: Option<usize>,
    pub reason: StopReason,
    pub iterations: usize,
    pub final_objectives: Vec<f64>,
    pub final_parameters: Vec<f64>,
    /// Stationarity measure of the mode recomputed at the final parameters.
    pub certificate_norm_sq: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_constraint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub front_distance: Option<f64>,
}

/// Recomputes the stationarity measure at the end of a run, with the same
/// loss normalization the run used.
pub fn certificate<P: MultiObjectiveProblem + ?Sized>(
    problem: &mut P,
    mode: &WeightingMode,
    config: &OptimizerConfig,
    theta0: &[f64],
    trace: &RunTrace,
) -> CliResult<f64> {
    let baseline = if config.loss_normalization {
        problem.begin_iteration(0)?;
        Some(problem.evaluate(theta0)?)
    } else {
        None
    };
    let last = trace.records.last().map_or(0, |r| r.iter);
    problem.begin_iteration(last)?;
    let (f, g) = problem.evaluate_with_gradients(trace.final_parameters())?;
    let (f, g) = match baseline {
        Some(b) => loss_normalize(&f, &g, &b)?,
        None => (f.0, g),
    };
    Ok(step_weights(&g, &f, mode)?.stationarity_norm_sq)
}

pub fn run(cfg: &RunConfig, out: &OutDir) -> CliResult<serde_json::Value> {
    let (mut problem, theta0) = setup::problem(cfg)?;
    let mode = setup::mode(cfg, problem.num_objectives())?;
    cfg.optimizer.validate()?;
    out.write("toy_config.toml", cfg.to_toml()?.as_bytes())?;
    let trace = match train(&mut *problem, &mode, &cfg.optimizer, &theta0) {
        Ok(t) => t,
        Err(failure) => {
            let mut buf = Vec::new();
            write_partial_jsonl(&failure.records, &mut buf)?;
            out.write("toy_trace.jsonl", &buf)?;
            return Err(CliError::Core(failure.error));
        }
    };
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf)?;
    out.write("toy_trace.jsonl", &buf)?;

    let certificate_norm_sq = certificate(&mut *problem, &mode, &cfg.optimizer, &theta0, &trace)?;
    let (weights, pref, max_constraint) = match &mode {
        WeightingMode::FixedLs(w) => (Some(w.clone()), None, None),
        WeightingMode::Gbo => (None, None, None),
        WeightingMode::GboPreference(p) => {
            let c = constraint_values(p, &trace.summary.final_objectives)?;
            (None, p.chosen(), Some(c.max()))
        }
    };
    let front_distance = match problem.front() {
        Some(f) => Some(f.distance(trace.final_parameters())?),
        None => None,
    };
    let result = ToyResult {
        problem: problem.name().to_string(),
        mode: mode.label().to_string(),
        weights,
        pref,
        reason: trace.summary.reason,
        iterations: trace.summary.iterations,
        final_objectives: trace.summary.final_objectives.clone(),
        final_parameters: trace.summary.final_parameters.clone(),
        certificate_norm_sq,
        max_constraint,
        front_distance,
    };
    out.write_json("toy_result.json", &result)?;
    Ok(serde_json::to_value(&result)?)
}

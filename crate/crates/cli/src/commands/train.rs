use paretoreid::descent::{train, write_partial_jsonl, StopReason};
use paretoreid::metrics::{ccsr, write_features};
use paretoreid::simulator::{evaluate_model, query_gallery_split, synthesis_triples};
use paretoreid::{EvalResult, MultiObjectiveProblem};
use serde::Serialize;

use super::OutDir;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::setup;

#[derive(Debug, Serialize)]
pub struct TrainResult {
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pref: Option<usize>,
    pub seed: u64,
    pub synthesis: usize,
    pub batch_k: usize,
    pub reason: StopReason,
    pub iterations: usize,
    /// (L_id, L_sc, L_cc) on the last training batches.
    pub final_objectives: Vec<f64>,
    /// Fraction of synthetic training instances closer to their donor
    /// clothing than to their source image.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ccsr: Option<f64>,
    pub general: EvalResult,
    pub cc: EvalResult,
    pub sc: EvalResult,
}

pub fn run(cfg: &RunConfig, out: &OutDir) -> CliResult<serde_json::Value> {
    let mut s = setup::simulator(cfg)?;
    let mode = setup::mode(cfg, s.problem.num_objectives())?;
    cfg.optimizer.validate()?;
    out.write("train_config.toml", cfg.to_toml()?.as_bytes())?;
    let theta0 = s.problem.initial_parameters();
    let trace = match train(&mut s.problem, &mode, &cfg.optimizer, &theta0) {
        Ok(t) => t,
        Err(failure) => {
            let mut buf = Vec::new();
            write_partial_jsonl(&failure.records, &mut buf)?;
            out.write("train_trace.jsonl", &buf)?;
            return Err(CliError::Core(failure.error));
        }
    };
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf)?;
    out.write("train_trace.jsonl", &buf)?;

    let model = s.problem.model_with(trace.final_parameters())?;
    let report = evaluate_model(&model, &s.test)?;
    let (queries, gallery) = query_gallery_split(&model, &s.test)?;
    let mut buf = Vec::new();
    write_features(&mut buf, &queries)?;
    out.write("train_query_features.csv", &buf)?;
    let mut buf = Vec::new();
    write_features(&mut buf, &gallery)?;
    out.write("train_gallery_features.csv", &buf)?;

    let ccsr = if cfg.train.synthesis > 0 {
        Some(ccsr(&synthesis_triples(&model, &s.table)?)?)
    } else {
        None
    };
    let (weights, pref) = match &mode {
        paretoreid::WeightingMode::FixedLs(w) => (Some(w.clone()), None),
        paretoreid::WeightingMode::GboPreference(p) => (None, p.chosen()),
        paretoreid::WeightingMode::Gbo => (None, None),
    };
    let result = TrainResult {
        mode: mode.label().to_string(),
        weights,
        pref,
        seed: cfg.seed,
        synthesis: cfg.train.synthesis,
        batch_k: s.batch_k,
        reason: trace.summary.reason,
        iterations: trace.summary.iterations,
        final_objectives: trace.summary.final_objectives.clone(),
        ccsr,
        general: report.general,
        cc: report.cc,
        sc: report.sc,
    };
    out.write_json("train_result.json", &result)?;
    // the per-query lists stay in the file; stdout gets the headline numbers
    Ok(serde_json::json!({
        "mode": result.mode,
        "seed": result.seed,
        "synthesis": result.synthesis,
        "reason": result.reason,
        "iterations": result.iterations,
        "ccsr": result.ccsr,
        "general": {"map": result.general.map, "top1": result.general.top1},
        "cc": {"map": result.cc.map, "top1": result.cc.top1},
        "sc": {"map": result.sc.map, "top1": result.sc.top1},
    }))
}

use paretoreid::descent::{train, StopReason, WeightingMode};
use paretoreid::metrics::{dominates, dominates_or_equal_within};
use paretoreid::preference::constraint_values;
use paretoreid::MultiObjectiveProblem;
use rayon::prelude::*;
use serde::Serialize;

use super::OutDir;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::setup;

#[derive(Debug, Clone)]
enum RunSpec {
    Ls(Vec<f64>),
    Pref(usize),
}

impl RunSpec {
    fn label(&self) -> String {
        match self {
            RunSpec::Ls(w) => join(w),
            RunSpec::Pref(k) => k.to_string(),
        }
    }

    fn file_name(&self) -> String {
        match self {
            RunSpec::Ls(w) => format!("ls_{}.jsonl", join(w).replace(';', "_")),
            RunSpec::Pref(k) => format!("gbo-pref_{k}.jsonl"),
        }
    }
}

fn join(w: &[f64]) -> String {
    // grid arithmetic leaves digits like 0.30000000000000004
    w.iter().map(|v| ((v * 1e10).round() / 1e10).to_string()).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub mode: String,
    pub k_or_weights: String,
    pub objectives: Vec<f64>,
    pub stationary: bool,
    pub reason: StopReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_constraint: Option<f64>,
}

/// Linear weights of the sweep: `(w, 1 - w)` per grid value for two
/// objectives, every tenth-step interior point of the simplex for three.
pub fn ls_weight_grid(m: usize, grid: &[f64]) -> CliResult<Vec<Vec<f64>>> {
    match m {
        2 => Ok(grid.iter().map(|&w| vec![w, 1.0 - w]).collect()),
        3 => {
            let mut out = Vec::new();
            for i in 1..=8usize {
                for j in 1..=(9 - i) {
                    let k = 10 - i - j;
                    out.push(vec![i as f64 / 10.0, j as f64 / 10.0, k as f64 / 10.0]);
                }
            }
            Ok(out)
        }
        _ => Err(CliError::config(format!("sweeps need 2 or 3 objectives, got {m}"))),
    }
}

fn one_run(cfg: &RunConfig, spec: &RunSpec, out: &OutDir) -> CliResult<SweepRow> {
    let (mut problem, theta0) = setup::problem(cfg)?;
    let mode = match spec {
        RunSpec::Ls(w) => WeightingMode::fixed_ls(w.clone())?,
        RunSpec::Pref(k) => setup::preference_mode(cfg.mode.prefs, *k)?,
    };
    let trace = train(&mut *problem, &mode, &cfg.optimizer, &theta0).map_err(|f| CliError::Core(f.error))?;
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf)?;
    out.write(&format!("sweep_traces/{}", spec.file_name()), &buf)?;
    let max_constraint = match &mode {
        WeightingMode::GboPreference(p) => Some(constraint_values(p, &trace.summary.final_objectives)?.max()),
        _ => None,
    };
    Ok(SweepRow {
        mode: mode.label().to_string(),
        k_or_weights: spec.label(),
        objectives: trace.summary.final_objectives,
        stationary: trace.summary.reason == StopReason::Stationary,
        reason: trace.summary.reason,
        max_constraint,
    })
}

#[derive(Debug, Serialize)]
struct LsEntry<'a> {
    weights: &'a str,
    objectives: &'a [f64],
    /// Preference indices whose result is no worse in every objective, up to
    /// the tolerance.
    dominated_or_equal_by: Vec<usize>,
    strictly_dominated_by: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct DominanceReport<'a> {
    tolerance: f64,
    all_ls_covered: bool,
    ls: Vec<LsEntry<'a>>,
    gbo_pref: Vec<&'a SweepRow>,
}

pub fn run(cfg: &RunConfig, out: &OutDir) -> CliResult<serde_json::Value> {
    cfg.optimizer.validate()?;
    if cfg.mode.prefs < 2 {
        return Err(CliError::config("a sweep needs at least 2 preferences"));
    }
    let m = setup::problem(cfg)?.0.num_objectives();
    let mut specs: Vec<RunSpec> = ls_weight_grid(m, &cfg.sweep.ls_grid)?
        .into_iter()
        .map(RunSpec::Ls)
        .collect();
    specs.extend((0..cfg.mode.prefs).map(RunSpec::Pref));
    out.write("sweep_config.toml", cfg.to_toml()?.as_bytes())?;
    std::fs::create_dir_all(out.path("sweep_traces"))?;

    // one isolated run per task; collection keeps the spec order
    let rows: Vec<SweepRow> = specs
        .par_iter()
        .map(|s| one_run(cfg, s, out))
        .collect::<CliResult<_>>()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mode", "k_or_weights", "L_id", "L_sc", "L_cc", "stationary"])?;
    for r in &rows {
        // two-objective problems fill the (L_sc, L_cc) plane
        let (id, sc, cc) = match r.objectives.as_slice() {
            [a, b] => (String::new(), a.to_string(), b.to_string()),
            [a, b, c] => (a.to_string(), b.to_string(), c.to_string()),
            _ => unreachable!("objective count checked above"),
        };
        w.write_record([&r.mode, &r.k_or_weights, &id, &sc, &cc, &r.stationary.to_string()])?;
    }
    let csv = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
    out.write("sweep_runs.csv", &csv)?;

    let tol = cfg.sweep.tolerance;
    let (ls, pref): (Vec<&SweepRow>, Vec<&SweepRow>) = rows.iter().partition(|r| r.mode == "ls");
    let mut entries = Vec::new();
    for l in &ls {
        let mut covered = Vec::new();
        let mut strict = Vec::new();
        for (k, g) in pref.iter().enumerate() {
            if dominates_or_equal_within(&g.objectives, &l.objectives, tol)? {
                covered.push(k);
            }
            if dominates(&g.objectives, &l.objectives)? {
                strict.push(k);
            }
        }
        entries.push(LsEntry {
            weights: &l.k_or_weights,
            objectives: &l.objectives,
            dominated_or_equal_by: covered,
            strictly_dominated_by: strict,
        });
    }
    let report = DominanceReport {
        tolerance: tol,
        all_ls_covered: entries.iter().all(|e| !e.dominated_or_equal_by.is_empty()),
        ls: entries,
        gbo_pref: pref,
    };
    out.write_json("sweep_dominance.json", &report)?;
    Ok(serde_json::to_value(&report)?)
}

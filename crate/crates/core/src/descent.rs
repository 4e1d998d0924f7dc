//! The optimization loop.
//!
//! Each iteration evaluates every objective and its gradient, turns the
//! gradients into simplex weights according to a [`WeightingMode`], and
//! steps along the negative weighted gradient. With a preference, an initial
//! projection phase first drives the objectives into the chosen sub-region.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minnorm::{gram, min_norm_simplex, GradientSet, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::preference::{
    combined_weights, constraint_values, in_subregion, projection_weights, Adjustment, PreferenceSet,
};
use crate::problems::{MultiObjectiveProblem, ObjectiveVector};

#[derive(Debug, Clone, PartialEq)]
pub enum WeightingMode {
    /// Fixed linear scalarization.
    FixedLs(Vec<f64>),
    /// Min-norm common descent direction.
    Gbo,
    /// Min-norm direction with the chosen preference's sub-region
    /// constraints folded in.
    GboPreference(PreferenceSet),
}

impl WeightingMode {
    pub fn fixed_ls(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::input("linear weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("linear weights sum to {sum}, not 1")));
        }
        Ok(WeightingMode::FixedLs(weights))
    }

    pub fn gbo_preference(prefs: PreferenceSet) -> Result<Self> {
        if prefs.chosen().is_none() {
            return Err(Error::input("preference mode needs a chosen preference"));
        }
        Ok(WeightingMode::GboPreference(prefs))
    }

    pub fn label(&self) -> &'static str {
        match self {
            WeightingMode::FixedLs(_) => "ls",
            WeightingMode::Gbo => "gbo",
            WeightingMode::GboPreference(_) => "gbo-pref",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_iters: usize,
    pub stationarity_eps: f64,
    pub loss_normalization: bool,
    pub seed: u64,
    pub schedule: LrSchedule,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.0,
            max_iters: 5000,
            stationarity_eps: 1e-8,
            loss_normalization: false,
            seed: 0,
            schedule: LrSchedule::Constant,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::input("momentum must be in [0, 1)"));
        }
        if !(self.stationarity_eps > 0.0) {
            return Err(Error::input("stationarity_eps must be positive"));
        }
        Ok(())
    }

    fn rate(&self, t: usize) -> f64 {
        match self.schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Cosine => {
                let frac = t as f64 / self.max_iters.max(1) as f64;
                0.5 * self.learning_rate * (1.0 + (std::f64::consts::PI * frac.min(1.0)).cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Projection,
    Descent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Stationary,
    MaxIters,
    InSubregion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub phase: Phase,
    /// Objective values, divided by the baseline when loss normalization is on.
    pub objectives: Vec<f64>,
    /// Weights over the objective gradients. During projection these are the
    /// coefficients of the constraint direction and need not be on the
    /// simplex.
    pub weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint_values: Option<Vec<f64>>,
    pub stationarity_norm_sq: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjustment: Option<Adjustment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub reason: StopReason,
    pub iterations: usize,
    pub final_objectives: Vec<f64>,
    pub final_parameters: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceLine {
    Iteration(IterationRecord),
    Summary(RunSummary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub summary: RunSummary,
}

impl RunTrace {
    /// One JSON object per line, iterations first, the summary last.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, &TraceLine::Iteration(r.clone()))?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &TraceLine::Summary(self.summary.clone()))?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn final_parameters(&self) -> &[f64] {
        &self.summary.final_parameters
    }
}

/// Writes the records of an aborted run; no summary line.
pub fn write_partial_jsonl<W: Write>(records: &[IterationRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, &TraceLine::Iteration(r.clone()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// A run that stopped on an error, with everything recorded before it.
#[derive(Debug, thiserror::Error)]
#[error("{error} (after {} recorded iterations)", records.len())]
pub struct TrainFailure {
    #[source]
    pub error: Error,
    pub records: Vec<IterationRecord>,
    pub last_parameters: Vec<f64>,
}

/// Weights for one descent step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepWeights {
    pub weights: Vec<f64>,
    /// `|sum_i w_i g_i|^2` for linear scalarization, the min-norm value for
    /// the Pareto modes (joint with active constraints for preferences).
    pub stationarity_norm_sq: f64,
    pub constraint_values: Option<Vec<f64>>,
    pub adjustment: Option<Adjustment>,
}

pub fn step_weights(grads: &GradientSet, losses: &[f64], mode: &WeightingMode) -> Result<StepWeights> {
    let m = grads.rows();
    if losses.len() != m {
        return Err(Error::input(format!(
            "{} losses for {m} gradient rows",
            losses.len()
        )));
    }
    let g = gram(grads)?;
    match mode {
        WeightingMode::FixedLs(w) => {
            if w.len() != m {
                return Err(Error::input(format!("{} linear weights for {m} objectives", w.len())));
            }
            Ok(StepWeights {
                weights: w.clone(),
                stationarity_norm_sq: g.quadratic_form(w).max(0.0),
                constraint_values: None,
                adjustment: None,
            })
        }
        WeightingMode::Gbo => {
            let s = min_norm_simplex(&g, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            Ok(StepWeights {
                weights: s.alpha,
                stationarity_norm_sq: s.norm_sq,
                constraint_values: None,
                adjustment: None,
            })
        }
        WeightingMode::GboPreference(prefs) => {
            let c = constraint_values(prefs, losses)?;
            if (0..m).all(|i| g.get(i, i) == 0.0) {
                // nothing moves; the point is trivially stationary
                return Ok(StepWeights {
                    weights: vec![1.0 / m as f64; m],
                    stationarity_norm_sq: 0.0,
                    constraint_values: Some(c.0),
                    adjustment: Some(Adjustment::None),
                });
            }
            let w = combined_weights(&g, prefs, &c, DEFAULT_TOL)?;
            Ok(StepWeights {
                weights: w.gamma,
                stationarity_norm_sq: w.norm_sq,
                constraint_values: Some(c.0),
                adjustment: Some(w.adjustment),
            })
        }
    }
}

/// Divides each loss and gradient row by its baseline.
pub fn loss_normalize(
    losses: &[f64],
    grads: &GradientSet,
    baseline: &[f64],
) -> Result<(Vec<f64>, GradientSet)> {
    if baseline.len() != losses.len() || grads.rows() != losses.len() {
        return Err(Error::input("baseline, losses and gradients disagree in length"));
    }
    if let Some((i, b)) = baseline.iter().enumerate().find(|(_, b)| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::input(format!(
            "cannot normalize objective {i}: its baseline loss is {b}, not a positive finite number"
        )));
    }
    let scaled: Vec<f64> = losses.iter().zip(baseline).map(|(l, b)| l / b).collect();
    let mut g = grads.clone();
    for (i, b) in baseline.iter().enumerate() {
        g.row_mut(i).iter_mut().for_each(|v| *v /= b);
    }
    Ok((scaled, g))
}

// Evaluation shared by both phases: begin the iteration, evaluate, check
// finiteness, normalize.
struct Evaluator<'a, P: ?Sized> {
    problem: &'a mut P,
    config: &'a OptimizerConfig,
    baseline: Option<Vec<f64>>,
}

impl<P: MultiObjectiveProblem + ?Sized> Evaluator<'_, P> {
    fn eval(&mut self, iter: usize, theta: &[f64]) -> Result<(Vec<f64>, GradientSet)> {
        self.problem.begin_iteration(iter)?;
        let (f, g) = self.problem.evaluate_with_gradients(theta)?;
        if !f.is_finite() || g.as_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite objectives at iteration {iter}")));
        }
        if !self.config.loss_normalization {
            return Ok((f.0, g));
        }
        let baseline = self.baseline.get_or_insert_with(|| f.0.clone());
        loss_normalize(&f.0, &g, baseline)
    }
}

fn fail(error: Error, records: Vec<IterationRecord>, theta: &[f64]) -> TrainFailure {
    TrainFailure {
        error,
        records,
        last_parameters: theta.to_vec(),
    }
}

fn check_start<P: MultiObjectiveProblem + ?Sized>(problem: &P, config: &OptimizerConfig, theta0: &[f64]) -> Result<()> {
    config.validate()?;
    if theta0.len() != problem.dim() {
        return Err(Error::input(format!(
            "start point has dimension {}, problem has {}",
            theta0.len(),
            problem.dim()
        )));
    }
    Ok(())
}

/// Result of the projection phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub theta: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub reason: StopReason,
}

/// Steps along the min-norm combination of the violated constraint
/// gradients until every constraint holds or the iteration budget runs out.
pub fn project_to_subregion<P: MultiObjectiveProblem + ?Sized>(
    problem: &mut P,
    prefs: &PreferenceSet,
    config: &OptimizerConfig,
    theta0: &[f64],
) -> std::result::Result<Projection, TrainFailure> {
    let mut ev = Evaluator {
        problem,
        config,
        baseline: None,
    };
    project(&mut ev, prefs, theta0, 0).map(|(p, _)| p)
}

fn project<P: MultiObjectiveProblem + ?Sized>(
    ev: &mut Evaluator<'_, P>,
    prefs: &PreferenceSet,
    theta0: &[f64],
    first_iter: usize,
) -> std::result::Result<(Projection, usize), TrainFailure> {
    let mut theta = theta0.to_vec();
    let mut records = Vec::new();
    if let Err(e) = check_start(&*ev.problem, ev.config, theta0) {
        return Err(fail(e, records, &theta));
    }
    let mut iter = first_iter;
    for step in 0..=ev.config.max_iters {
        let (f, g) = match ev.eval(iter, &theta) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, records, &theta)),
        };
        let c = match constraint_values(prefs, &f) {
            Ok(c) => c,
            Err(e) => return Err(fail(e, records, &theta)),
        };
        if in_subregion(&c, 0.0) {
            return Ok((
                Projection {
                    theta,
                    records,
                    reason: StopReason::InSubregion,
                },
                iter,
            ));
        }
        if step == ev.config.max_iters {
            break;
        }
        let pw = gram(&g).and_then(|gm| projection_weights(&gm, prefs, &c, DEFAULT_TOL));
        let pw = match pw {
            Ok(p) => p,
            Err(e) => return Err(fail(e, records, &theta)),
        };
        let direction = g.combine(&pw.objective_coefficients);
        let lr = ev.config.learning_rate;
        theta.iter_mut().zip(&direction).for_each(|(t, d)| *t -= lr * d);
        records.push(IterationRecord {
            iter,
            phase: Phase::Projection,
            objectives: f,
            weights: pw.objective_coefficients,
            constraint_values: Some(c.0),
            stationarity_norm_sq: pw.norm_sq,
            adjustment: None,
        });
        iter += 1;
    }
    Ok((
        Projection {
            theta,
            records,
            reason: StopReason::MaxIters,
        },
        iter,
    ))
}

/// Runs the full optimization: projection (preference mode only), then
/// descent until the stationarity measure drops to `stationarity_eps` or the
/// iteration budget is spent.
pub fn train<P: MultiObjectiveProblem + ?Sized>(
    problem: &mut P,
    mode: &WeightingMode,
    config: &OptimizerConfig,
    theta0: &[f64],
) -> std::result::Result<RunTrace, TrainFailure> {
    if let Err(e) = check_start(&*problem, config, theta0) {
        return Err(fail(e, Vec::new(), theta0));
    }
    if let WeightingMode::FixedLs(w) = mode {
        if w.len() != problem.num_objectives() {
            let e = Error::input(format!("{} linear weights for {} objectives", w.len(), problem.num_objectives()));
            return Err(fail(e, Vec::new(), theta0));
        }
    }
    let mut ev = Evaluator {
        problem,
        config,
        baseline: None,
    };
    let mut records = Vec::new();
    let mut theta = theta0.to_vec();
    let mut iter = 0;
    if let WeightingMode::GboPreference(prefs) = mode {
        let (p, next) = project(&mut ev, prefs, theta0, 0)?;
        records = p.records;
        theta = p.theta;
        iter = next;
    }

    let mut velocity = vec![0.0; theta.len()];
    let mut reason = StopReason::MaxIters;
    for t in 0..=config.max_iters {
        let (f, g) = match ev.eval(iter, &theta) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, records, &theta)),
        };
        let w = match step_weights(&g, &f, mode) {
            Ok(w) => w,
            Err(e) => return Err(fail(e, records, &theta)),
        };
        let stationary = w.stationarity_norm_sq <= config.stationarity_eps;
        if t == config.max_iters && !stationary {
            break;
        }
        records.push(IterationRecord {
            iter,
            phase: Phase::Descent,
            objectives: f,
            weights: w.weights.clone(),
            constraint_values: w.constraint_values,
            stationarity_norm_sq: w.stationarity_norm_sq,
            adjustment: w.adjustment,
        });
        if stationary {
            reason = StopReason::Stationary;
            break;
        }
        let direction = g.combine(&w.weights);
        let lr = config.rate(t);
        for ((th, v), d) in theta.iter_mut().zip(velocity.iter_mut()).zip(&direction) {
            *v = config.momentum * *v + d;
            *th -= lr * *v;
        }
        iter += 1;
    }

    let final_objectives: ObjectiveVector = match ev.problem.evaluate(&theta) {
        Ok(f) if f.is_finite() => f,
        Ok(_) => return Err(fail(Error::numeric("non-finite objectives at the final point"), records, &theta)),
        Err(e) => return Err(fail(e, records, &theta)),
    };
    let iterations = records.len();
    Ok(RunTrace {
        records,
        summary: RunSummary {
            reason,
            iterations,
            final_objectives: final_objectives.0,
            final_parameters: theta,
        },
    })
}

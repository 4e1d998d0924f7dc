use paretoreid::problems::{finite_difference_check, nonconvex_biobjective, quadratic_biobjective, triobjective_quadratic};
use paretoreid::sampler::{SamplerConfig, SamplerMode};
use paretoreid::simulator::{as_problem, augment_with_synthesis, generate_world, EmbeddingModel, EPOCH_LENGTH};
use paretoreid::{MultiObjectiveProblem, WorldConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::OutDir;
use crate::args::GradcheckArgs;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::setup::{axis_pair, triangle};

pub const THRESHOLD: f64 = 1e-5;
const BENCH_STEP: f64 = 1e-5;
// hinge kinks make long steps unreliable on the simulator
const SIM_STEP: f64 = 1e-6;

#[derive(Debug, Serialize)]
struct Row {
    problem: String,
    point: usize,
    max_rel_error: f64,
    pass: bool,
}

fn check<P: MultiObjectiveProblem + ?Sized>(
    name: &str,
    p: &P,
    points: &[Vec<f64>],
    h: f64,
    rows: &mut Vec<Row>,
) -> CliResult<()> {
    for (i, t) in points.iter().enumerate() {
        let e = finite_difference_check(p, t, h)?;
        rows.push(Row {
            problem: name.to_string(),
            point: i,
            max_rel_error: e,
            pass: e < THRESHOLD,
        });
    }
    Ok(())
}

/// Benchmarks at uniform points of their domain; the simulator on a small
/// world with synthesis, at random models and a fresh batch epoch per point.
pub fn run(args: &GradcheckArgs, cfg: &RunConfig, out: &OutDir) -> CliResult<serde_json::Value> {
    if args.points == 0 {
        return Err(CliError::config("--points must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let (a1, b1) = axis_pair(1);
    let (a2, b2) = axis_pair(2);
    let [c1, c2, c3] = triangle(3);
    let benches: Vec<(String, Box<dyn MultiObjectiveProblem>)> = vec![
        ("quadratic-d1".into(), Box::new(quadratic_biobjective(&a1, &b1)?)),
        ("quadratic-d2".into(), Box::new(quadratic_biobjective(&a2, &b2)?)),
        ("nonconvex-d2".into(), Box::new(nonconvex_biobjective(2)?)),
        ("nonconvex-d5".into(), Box::new(nonconvex_biobjective(5)?)),
        ("triobjective-d3".into(), Box::new(triobjective_quadratic(&c1, &c2, &c3)?)),
    ];
    for (name, p) in &benches {
        let (lo, hi) = p.domain();
        let pts: Vec<Vec<f64>> = (0..args.points)
            .map(|_| (0..p.dim()).map(|_| rng.random_range(lo..hi)).collect())
            .collect();
        check(name, p.as_ref(), &pts, BENCH_STEP, &mut rows)?;
    }

    let world = WorldConfig {
        num_identities: 4,
        clothes_per_identity: 2,
        images_per_clothing: 2,
        d_latent: 6,
        identity_dims: 3,
        seed: cfg.seed,
        ..WorldConfig::default()
    };
    let table = augment_with_synthesis(&generate_world(&world)?, 2, cfg.seed)?;
    let model = EmbeddingModel::random(3, world.d_latent, world.num_identities, &mut rng)?;
    let sampler = SamplerConfig::new(3, 2, SamplerMode::Pk, cfg.seed)?;
    let mut sim = as_problem(&model, &table, &sampler, cfg.train.margin, cfg.seed)?;
    for i in 0..args.points {
        sim.begin_iteration(i * EPOCH_LENGTH)?;
        let t: Vec<f64> = (0..sim.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let before = rows.len();
        check("simulator", &sim, &[t], SIM_STEP, &mut rows)?;
        rows[before].point = i;
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["problem", "point", "max_rel_error", "pass"])?;
    for r in &rows {
        w.write_record([r.problem.clone(), r.point.to_string(), format!("{:e}", r.max_rel_error), r.pass.to_string()])?;
    }
    let csv = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
    out.write("gradcheck.csv", &csv)?;
    let worst = rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let failures = rows.iter().filter(|r| !r.pass).count();
    if failures > 0 {
        return Err(CliError::Failed(format!(
            "{failures} of {} gradient checks reached {THRESHOLD:e} (worst {worst:e})",
            rows.len()
        )));
    }
    Ok(serde_json::json!({ "checks": rows.len(), "worst": worst, "threshold": THRESHOLD }))
}

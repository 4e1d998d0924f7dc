//! Problems, modes and simulator pipelines built from a [`RunConfig`].

use paretoreid::descent::WeightingMode;
use paretoreid::preference::make_uniform_preferences;
use paretoreid::problems::{nonconvex_biobjective, quadratic_biobjective, triobjective_quadratic};
use paretoreid::sampler::{SamplerConfig, SamplerMode};
use paretoreid::simulator::{
    as_problem, augment_with_synthesis, generate_world, DatasetTable, EmbeddingModel, SimulatorProblem,
    WorldConfig,
};
use paretoreid::MultiObjectiveProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::{ModeKind, ProblemKind};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub type BoxedProblem = Box<dyn MultiObjectiveProblem + Send>;

// independent random streams derived from the run seed
const STREAM_START: u64 = 1;
const STREAM_MODEL: u64 = 2;
const SYNTHESIS_OFFSET: u64 = 7;
const TEST_WORLD_OFFSET: u64 = 1000;

/// A simulator run: the training problem plus the held-out world it is
/// evaluated on.
pub struct SimSetup {
    pub problem: SimulatorProblem,
    pub table: DatasetTable,
    pub test: DatasetTable,
    pub batch_k: usize,
}

pub fn simulator(cfg: &RunConfig) -> CliResult<SimSetup> {
    let world = WorldConfig {
        seed: cfg.seed,
        ..cfg.world.clone()
    };
    world.validate()?;
    let base = generate_world(&world)?;
    let donors = cfg.train.synthesis;
    let table = if donors > 0 {
        augment_with_synthesis(&base, donors, cfg.seed.wrapping_add(SYNTHESIS_OFFSET))?
    } else {
        base
    };
    let test = generate_world(&WorldConfig {
        seed: cfg.seed.wrapping_add(TEST_WORLD_OFFSET),
        ..world.clone()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(STREAM_MODEL);
    let model = EmbeddingModel::random(cfg.train.d_feat, world.d_latent, world.num_identities, &mut rng)?;
    let labels = world.clothes_per_identity * (1 + donors);
    let batch_k = cfg.sampler.k.unwrap_or_else(|| labels.clamp(2, 4));
    let sampler = SamplerConfig::new(cfg.sampler.p, batch_k, SamplerMode::Pk, cfg.seed)?;
    let problem = as_problem(&model, &table, &sampler, cfg.train.margin, cfg.seed)?;
    Ok(SimSetup {
        problem,
        table,
        test,
        batch_k,
    })
}

/// The configured problem and its start point.
pub fn problem(cfg: &RunConfig) -> CliResult<(BoxedProblem, Vec<f64>)> {
    let d = cfg.problem.dim;
    if d == 0 {
        return Err(CliError::config("problem dimension must be at least 1"));
    }
    let p: BoxedProblem = match cfg.problem.name {
        ProblemKind::Quadratic => {
            let (a, b) = axis_pair(d);
            Box::new(quadratic_biobjective(&a, &b)?)
        }
        ProblemKind::Nonconvex => Box::new(nonconvex_biobjective(d)?),
        ProblemKind::Triobjective => {
            if d < 2 {
                return Err(CliError::config("the triobjective problem needs dim >= 2"));
            }
            let [c1, c2, c3] = triangle(d);
            Box::new(triobjective_quadratic(&c1, &c2, &c3)?)
        }
        ProblemKind::Simulator => {
            let s = simulator(cfg)?;
            let theta0 = match &cfg.problem.theta0 {
                Some(t) => t.clone(),
                None => s.problem.initial_parameters(),
            };
            check_len(&theta0, s.problem.dim())?;
            return Ok((Box::new(s.problem), theta0));
        }
    };
    let theta0 = match &cfg.problem.theta0 {
        Some(t) => t.clone(),
        None => {
            let (lo, hi) = p.domain();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(STREAM_START);
            (0..p.dim()).map(|_| rng.random_range(lo..hi)).collect()
        }
    };
    check_len(&theta0, p.dim())?;
    Ok((p, theta0))
}

fn check_len(theta0: &[f64], dim: usize) -> CliResult<()> {
    if theta0.len() != dim {
        return Err(CliError::config(format!(
            "theta0 has {} entries, the problem has {dim} parameters",
            theta0.len()
        )));
    }
    Ok(())
}

/// `(1, 0, ..)` and `(-1, 0, ..)`.
pub fn axis_pair(d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; d];
    a[0] = 1.0;
    let b = a.iter().map(|v| -v).collect();
    (a, b)
}

/// Equilateral triangle on the unit circle of the first two coordinates.
pub fn triangle(d: usize) -> [Vec<f64>; 3] {
    let h = 3f64.sqrt() / 2.0;
    let vertex = |x: f64, y: f64| {
        let mut v = vec![0.0; d];
        v[0] = x;
        v[1] = y;
        v
    };
    [vertex(1.0, 0.0), vertex(-0.5, h), vertex(-0.5, -h)]
}

/// The weighting mode for a single run on an `m`-objective problem.
pub fn mode(cfg: &RunConfig, m: usize) -> CliResult<WeightingMode> {
    match cfg.mode.kind {
        ModeKind::Ls => {
            let w = match &cfg.mode.weights {
                Some(w) => w.clone(),
                None => default_weights(m),
            };
            if w.len() != m {
                return Err(CliError::config(format!("{} linear weights for {m} objectives", w.len())));
            }
            Ok(WeightingMode::fixed_ls(w)?)
        }
        ModeKind::Gbo => Ok(WeightingMode::Gbo),
        ModeKind::GboPref => {
            let k = cfg
                .mode
                .pref
                .ok_or_else(|| CliError::config("gbo-pref needs --pref (the chosen preference index)"))?;
            preference_mode(cfg.mode.prefs, k)
        }
    }
}

pub fn preference_mode(n: usize, k: usize) -> CliResult<WeightingMode> {
    let prefs = make_uniform_preferences(n)?.with_chosen(k)?;
    Ok(WeightingMode::gbo_preference(prefs)?)
}

/// (0.5, 0.1, 0.4) for the three-loss layout, uniform otherwise.
pub fn default_weights(m: usize) -> Vec<f64> {
    if m == 3 {
        vec![0.5, 0.1, 0.4]
    } else {
        vec![1.0 / m as f64; m]
    }
}

//! Fixtures shared by the benchmarks.

use paretoreid::minnorm::GradientSet;
use paretoreid::sampler::{SamplerConfig, SamplerMode};
use paretoreid::simulator::{as_problem, augment_with_synthesis, generate_world, EmbeddingModel, SimulatorProblem, DEFAULT_MARGIN};
use paretoreid::WorldConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `m` gradient rows of dimension `d` with entries uniform in [-1, 1).
pub fn random_gradients(m: usize, d: usize, seed: u64) -> GradientSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..m * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    GradientSet::from_flat(m, d, values).expect("fixture dimensions are valid")
}

/// The default world with five donors per clothing, and its start point.
pub fn default_simulator(seed: u64) -> (SimulatorProblem, Vec<f64>) {
    let world = WorldConfig { seed, ..WorldConfig::default() };
    let table = augment_with_synthesis(&generate_world(&world).unwrap(), 5, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = EmbeddingModel::random(16, world.d_latent, world.num_identities, &mut rng).unwrap();
    let sampler = SamplerConfig::new(16, 4, SamplerMode::Pk, seed).unwrap();
    let p = as_problem(&model, &table, &sampler, DEFAULT_MARGIN, seed).unwrap();
    let theta = p.initial_parameters();
    (p, theta)
}

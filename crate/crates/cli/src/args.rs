use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::Overrides;

/// Preference-guided multi-objective optimization experiments.
///
/// Flags override values from `--config`; unset values fall back to
/// per-subcommand defaults. Output goes to `--out`, else the `out` key of
/// the config file, else `$PARETOREID_OUT`, else `./paretoreid-out`.
#[derive(Debug, Parser)]
#[command(name = "paretoreid", version)]
pub struct Cli {
    /// TOML run configuration with sections [problem], [mode], [optimizer],
    /// [world], [sampler], [train] and [sweep].
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one optimizer on a benchmark problem; writes a JSON-lines trace.
    Toy(ToyArgs),
    /// Train the simulator embedding and evaluate it under every protocol.
    Train(TrainArgs),
    /// Linear-weight grid versus every preference, with a dominance report.
    Sweep(SweepArgs),
    /// Probability that a K-instance draw contains a clothes-changing pair.
    SamplerProb(SamplerProbArgs),
    /// Evaluate stored query and gallery feature CSVs.
    Eval(EvalArgs),
    /// Non-dominated subset of the points in trace or CSV files.
    Front(FrontArgs),
    /// Finite-difference validation of every analytic gradient.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// Squared distances to (1,0,..) and (-1,0,..).
    Quadratic,
    /// Exponential bi-objective with a concave front.
    Nonconvex,
    /// Squared distances to the vertices of a triangle.
    Triobjective,
    /// The clothes-changing simulator (id, same-clothes, clothes-changing).
    Simulator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Ls,
    Gbo,
    GboPref,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Schedule {
    Constant,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    General,
    Cc,
    Sc,
}

#[derive(Debug, Default, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum)]
    pub problem: Option<ProblemKind>,
    /// Parameter dimension of a benchmark problem.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Start point, comma separated. Drawn from the problem domain with the
    /// seed when absent (the simulator starts from its random model).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta0: Option<Vec<f64>>,
}

#[derive(Debug, Default, Args)]
pub struct ModeArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ModeKind>,
    /// Linear weights for `--mode ls`, comma separated, summing to 1.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Number of uniform preference vectors.
    #[arg(long)]
    pub prefs: Option<usize>,
    /// Index of the chosen preference for `--mode gbo-pref`.
    #[arg(long)]
    pub pref: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct OptimizerArgs {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Stationarity threshold on the squared norm of the descent direction.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Divide every loss and gradient by its value at the start point.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,
    #[arg(long, value_enum)]
    pub schedule: Option<Schedule>,
}

#[derive(Debug, Default, Args)]
pub struct WorldArgs {
    #[arg(long)]
    pub identities: Option<usize>,
    #[arg(long)]
    pub clothes_per_identity: Option<usize>,
    #[arg(long)]
    pub images_per_clothing: Option<usize>,
    #[arg(long)]
    pub d_latent: Option<usize>,
    #[arg(long)]
    pub identity_dims: Option<usize>,
    #[arg(long)]
    pub id_weight: Option<f64>,
    #[arg(long)]
    pub clothes_weight: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct SimArgs {
    /// Donor clothes per real clothing for the latent clothes swap; 0 = off.
    #[arg(long)]
    pub synthesis: Option<usize>,
    /// Identities per batch.
    #[arg(long)]
    pub batch_p: Option<usize>,
    /// Instances per identity; defaults to min(4, clothing labels per identity).
    #[arg(long)]
    pub batch_k: Option<usize>,
    #[arg(long)]
    pub d_feat: Option<usize>,
    /// Triplet margin.
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[command(flatten)]
    pub world: WorldArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub mode: ModeArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[command(flatten)]
    pub world: WorldArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[command(flatten)]
    pub world: WorldArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Number of uniform preference vectors; every one is run.
    #[arg(long)]
    pub prefs: Option<usize>,
    /// First linear weight of each two-objective grid point, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ls_grid: Option<Vec<f64>>,
    /// Componentwise slack of the dominated-or-equal test.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SamplerProbArgs {
    /// Clothes per identity, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub nc: Vec<usize>,
    /// Instances drawn per identity, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
    pub k: Vec<usize>,
    /// Images per clothing, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    pub m: Vec<usize>,
    /// Exact values only, no Monte Carlo column.
    #[arg(long)]
    pub exact: bool,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Query features (person_id, clothes_id, source, f0..).
    #[arg(long)]
    pub query: PathBuf,
    /// Gallery features, same layout.
    #[arg(long)]
    pub gallery: PathBuf,
    #[arg(long, value_enum, default_value = "general")]
    pub protocol: Protocol,
}

#[derive(Debug, Args)]
pub struct FrontArgs {
    /// JSON-lines traces (summary objectives) or CSV files (L_* or f<i>
    /// columns, else every column).
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Random points per problem.
    #[arg(long, default_value_t = 10)]
    pub points: usize,
}

impl ProblemArgs {
    pub fn overrides(&self, o: &mut Overrides) {
        o.set("problem", "name", self.problem.map(|p| enum_name(&p)));
        o.set("problem", "dim", self.dim);
        o.set("problem", "theta0", self.theta0.clone());
    }
}

impl ModeArgs {
    pub fn overrides(&self, o: &mut Overrides) {
        o.set("mode", "kind", self.mode.map(|m| enum_name(&m)));
        o.set("mode", "weights", self.weights.clone());
        o.set("mode", "prefs", self.prefs);
        o.set("mode", "pref", self.pref);
    }
}

impl OptimizerArgs {
    pub fn overrides(&self, o: &mut Overrides) {
        o.set("optimizer", "learning_rate", self.lr);
        o.set("optimizer", "momentum", self.momentum);
        o.set("optimizer", "max_iters", self.max_iters);
        o.set("optimizer", "stationarity_eps", self.eps);
        o.set("optimizer", "loss_normalization", self.normalize);
        o.set("optimizer", "schedule", self.schedule.map(|s| enum_name(&s)));
    }
}

impl WorldArgs {
    pub fn overrides(&self, o: &mut Overrides) {
        o.set("world", "num_identities", self.identities);
        o.set("world", "clothes_per_identity", self.clothes_per_identity);
        o.set("world", "images_per_clothing", self.images_per_clothing);
        o.set("world", "d_latent", self.d_latent);
        o.set("world", "identity_dims", self.identity_dims);
        o.set("world", "id_weight", self.id_weight);
        o.set("world", "clothes_weight", self.clothes_weight);
        o.set("world", "noise_sigma", self.noise);
    }
}

impl SimArgs {
    pub fn overrides(&self, o: &mut Overrides) {
        o.set("train", "synthesis", self.synthesis);
        o.set("train", "d_feat", self.d_feat);
        o.set("train", "margin", self.margin);
        o.set("sampler", "p", self.batch_p);
        o.set("sampler", "k", self.batch_k);
    }
}

fn enum_name<E: ValueEnum>(e: &E) -> String {
    e.to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default()
}

mod front;
mod gradcheck;
mod sampler_prob;
mod sweep;
mod toy;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

use paretoreid::metrics::{evaluate, read_features, RetrievalProtocol};
use serde::Serialize;

use crate::args::{Cli, Command, EvalArgs, Protocol};
use crate::config::{resolve, Overrides, RunConfig};
use crate::error::CliResult;

pub use front::front_points;
pub use sweep::{ls_weight_grid, SweepRow};

/// Where a subcommand writes its files.
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&path)?;
        Ok(OutDir(path))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let p = self.path(name);
        fs::write(&p, bytes)?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

fn defaults(command: &Command) -> Overrides {
    let mut d = Overrides::default();
    match command {
        Command::Train(_) => {
            d.set("mode", "kind", Some("ls"));
            d.set("optimizer", "learning_rate", Some(0.1));
            d.set("optimizer", "momentum", Some(0.9));
            d.set("optimizer", "max_iters", Some(300usize));
        }
        Command::Sweep(_) => {
            d.set("problem", "name", Some("nonconvex"));
            d.set("optimizer", "learning_rate", Some(0.1));
        }
        _ => {}
    }
    d
}

fn flags(cli: &Cli) -> Overrides {
    let mut o = Overrides::default();
    o.set("", "seed", cli.seed);
    o.set("", "out", cli.out.as_ref().map(|p| p.display().to_string()));
    match &cli.command {
        Command::Toy(a) => {
            a.problem.overrides(&mut o);
            a.mode.overrides(&mut o);
            a.optimizer.overrides(&mut o);
            a.world.overrides(&mut o);
            a.sim.overrides(&mut o);
        }
        Command::Train(a) => {
            a.mode.overrides(&mut o);
            a.optimizer.overrides(&mut o);
            a.world.overrides(&mut o);
            a.sim.overrides(&mut o);
        }
        Command::Sweep(a) => {
            a.problem.overrides(&mut o);
            a.optimizer.overrides(&mut o);
            a.world.overrides(&mut o);
            a.sim.overrides(&mut o);
            o.set("mode", "prefs", a.prefs);
            o.set("sweep", "ls_grid", a.ls_grid.clone());
            o.set("sweep", "tolerance", a.tolerance);
        }
        _ => {}
    }
    o
}

pub fn config_for(cli: &Cli) -> CliResult<RunConfig> {
    resolve(defaults(&cli.command), cli.config.as_deref(), flags(cli))
}

/// Runs the parsed command line; returns the JSON summary printed on stdout.
pub fn run(cli: &Cli) -> CliResult<serde_json::Value> {
    let cfg = config_for(cli)?;
    let out = OutDir::create(cfg.out_dir())?;
    match &cli.command {
        Command::Toy(_) => toy::run(&cfg, &out),
        Command::Train(_) => train::run(&cfg, &out),
        Command::Sweep(_) => sweep::run(&cfg, &out),
        Command::SamplerProb(a) => sampler_prob::run(a, cfg.seed, &out),
        Command::Eval(a) => eval(a, &out),
        Command::Front(a) => front::run(a, &out),
        Command::Gradcheck(a) => gradcheck::run(a, &cfg, &out),
    }
}

fn read_feature_file(path: &Path) -> CliResult<Vec<paretoreid::LabeledFeature>> {
    let f = fs::File::open(path)?;
    Ok(read_features(f)?)
}

fn eval(args: &EvalArgs, out: &OutDir) -> CliResult<serde_json::Value> {
    let protocol = match args.protocol {
        Protocol::General => RetrievalProtocol::General,
        Protocol::Cc => RetrievalProtocol::ClothesChanging,
        Protocol::Sc => RetrievalProtocol::SameClothes,
    };
    let q = read_feature_file(&args.query)?;
    let g = read_feature_file(&args.gallery)?;
    let result = evaluate(&q, &g, protocol)?;
    out.write_json("eval_result.json", &result)?;
    Ok(serde_json::to_value(&result)?)
}

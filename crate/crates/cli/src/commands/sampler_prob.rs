use paretoreid::sampler::{cc_pair_probability, ProbabilityMethod};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::OutDir;
use crate::args::SamplerProbArgs;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
struct Row {
    nc: usize,
    k: usize,
    m: usize,
    p_exact: f64,
    p_mc: Option<f64>,
    stderr: Option<f64>,
}

/// Cells where `K` exceeds the `N_c * m` instances of an identity are
/// skipped.
pub fn run(args: &SamplerProbArgs, seed: u64, out: &OutDir) -> CliResult<serde_json::Value> {
    let mut cells = Vec::new();
    for &nc in &args.nc {
        for &k in &args.k {
            for &m in &args.m {
                if k <= nc * m {
                    cells.push((nc, k, m));
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(CliError::config("no (N_c, K, m) cell with K <= N_c * m"));
    }
    let rows: Vec<Row> = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(nc, k, m))| {
            // one stream per cell, so rows do not depend on scheduling
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let exact = cc_pair_probability(nc, k, m, ProbabilityMethod::Exact, &mut rng)?;
            let mc = if args.exact {
                None
            } else {
                Some(cc_pair_probability(
                    nc,
                    k,
                    m,
                    ProbabilityMethod::MonteCarlo { trials: args.trials },
                    &mut rng,
                )?)
            };
            Ok(Row {
                nc,
                k,
                m,
                p_exact: exact.probability,
                p_mc: mc.map(|e| e.probability),
                stderr: mc.and_then(|e| e.stderr),
            })
        })
        .collect::<CliResult<_>>()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["N_c", "K", "m", "p_exact", "p_mc", "stderr"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &rows {
        w.write_record([
            r.nc.to_string(),
            r.k.to_string(),
            r.m.to_string(),
            r.p_exact.to_string(),
            opt(r.p_mc),
            opt(r.stderr),
        ])?;
    }
    let csv = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
    out.write("sampler_prob.csv", &csv)?;
    Ok(serde_json::to_value(&rows)?)
}

//! Identity-balanced batch samplers and the clothes-changing pair
//! probability.
//!
//! All three samplers draw `P` identities without replacement and `K`
//! instances per identity. They differ in how the `K` instances relate:
//! unconstrained (PK), all in one clothing (SC), or all in different clothes
//! (CC).

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::DatasetTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    Pk,
    Sc,
    Cc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub p: usize,
    pub k: usize,
    pub mode: SamplerMode,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(p: usize, k: usize, mode: SamplerMode, seed: u64) -> Result<Self> {
        let cfg = Self { p, k, mode, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.k < 2 {
            return Err(Error::input(format!(
                "sampler needs P >= 2 and K >= 2, got P = {}, K = {}",
                self.p, self.k
            )));
        }
        Ok(())
    }
}

/// Instance indices into the sampled table, grouped by identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub groups: Vec<Vec<usize>>,
    pub person_ids: Vec<usize>,
    pub mode: SamplerMode,
    /// Set when some identity had too few instances and was drawn with
    /// replacement.
    pub replacement_fallback: bool,
}

impl Batch {
    /// All instance indices, group by group.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn choose_identities<R: Rng + ?Sized>(
    table: &DatasetTable,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    let persons = table.person_ids();
    if persons.len() < cfg.p {
        return Err(Error::input(format!(
            "table has {} identities, batch needs P = {}",
            persons.len(),
            cfg.p
        )));
    }
    Ok(index::sample(rng, persons.len(), cfg.p)
        .into_iter()
        .map(|i| persons[i])
        .collect())
}

// K picks from `pool`; with replacement when the pool is too small.
fn pick<R: Rng + ?Sized>(pool: &[usize], k: usize, rng: &mut R) -> (Vec<usize>, bool) {
    if pool.len() >= k {
        (index::sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect(), false)
    } else {
        ((0..k).map(|_| pool[rng.random_range(0..pool.len())]).collect(), true)
    }
}

pub fn pk_sample<R: Rng + ?Sized>(table: &DatasetTable, cfg: &SamplerConfig, rng: &mut R) -> Result<Batch> {
    let persons = choose_identities(table, cfg, rng)?;
    let mut fallback = false;
    let groups = persons
        .iter()
        .map(|&p| {
            let (g, f) = pick(table.instances_of(p), cfg.k, rng);
            fallback |= f;
            g
        })
        .collect();
    Ok(Batch {
        groups,
        person_ids: persons,
        mode: SamplerMode::Pk,
        replacement_fallback: fallback,
    })
}

pub fn sc_sample<R: Rng + ?Sized>(table: &DatasetTable, cfg: &SamplerConfig, rng: &mut R) -> Result<Batch> {
    let persons = choose_identities(table, cfg, rng)?;
    let mut fallback = false;
    let groups = persons
        .iter()
        .map(|&p| {
            let wardrobe = table.wardrobe(p);
            let c = wardrobe[rng.random_range(0..wardrobe.len())];
            let (g, f) = pick(table.instances_of_clothing(p, c), cfg.k, rng);
            fallback |= f;
            g
        })
        .collect();
    Ok(Batch {
        groups,
        person_ids: persons,
        mode: SamplerMode::Sc,
        replacement_fallback: fallback,
    })
}

pub fn cc_sample<R: Rng + ?Sized>(table: &DatasetTable, cfg: &SamplerConfig, rng: &mut R) -> Result<Batch> {
    let persons = choose_identities(table, cfg, rng)?;
    let mut groups = Vec::with_capacity(persons.len());
    for &p in &persons {
        let wardrobe = table.wardrobe(p);
        if wardrobe.len() < cfg.k {
            return Err(Error::input(format!(
                "identity {p} has {} clothing labels, the clothes-changing sampler needs K = {}; add synthesis",
                wardrobe.len(),
                cfg.k
            )));
        }
        let group = index::sample(rng, wardrobe.len(), cfg.k)
            .into_iter()
            .map(|i| {
                let pool = table.instances_of_clothing(p, wardrobe[i]);
                pool[rng.random_range(0..pool.len())]
            })
            .collect();
        groups.push(group);
    }
    Ok(Batch {
        groups,
        person_ids: persons,
        mode: SamplerMode::Cc,
        replacement_fallback: false,
    })
}

/// Dispatches on `cfg.mode`.
pub fn sample<R: Rng + ?Sized>(table: &DatasetTable, cfg: &SamplerConfig, rng: &mut R) -> Result<Batch> {
    match cfg.mode {
        SamplerMode::Pk => pk_sample(table, cfg, rng),
        SamplerMode::Sc => sc_sample(table, cfg, rng),
        SamplerMode::Cc => cc_sample(table, cfg, rng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbabilityMethod {
    Exact,
    MonteCarlo { trials: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub probability: f64,
    /// Standard error of the Monte Carlo mean; `None` for the exact method.
    pub stderr: Option<f64>,
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// Probability that `K` instances drawn without replacement from one
/// identity with `N_c` clothes of `m` images each contain at least one pair
/// in different clothes.
pub fn cc_pair_probability<R: Rng + ?Sized>(
    nc: usize,
    k: usize,
    m: usize,
    method: ProbabilityMethod,
    rng: &mut R,
) -> Result<ProbabilityEstimate> {
    if nc == 0 || k == 0 || m == 0 {
        return Err(Error::input("N_c, K and m must all be at least 1"));
    }
    let total = nc * m;
    if k > total {
        return Err(Error::input(format!(
            "cannot draw K = {k} instances from {total}"
        )));
    }
    match method {
        ProbabilityMethod::Exact => {
            let all = binomial(total as u64, k as u64);
            let same = nc as u128 * binomial(m as u64, k as u64);
            Ok(ProbabilityEstimate {
                probability: (all - same) as f64 / all as f64,
                stderr: None,
            })
        }
        ProbabilityMethod::MonteCarlo { trials } => {
            if trials < 2 {
                return Err(Error::input("Monte Carlo needs at least 2 trials"));
            }
            let mut hits = 0usize;
            for _ in 0..trials {
                let draw = index::sample(rng, total, k);
                let first = draw.index(0) / m;
                if draw.iter().any(|i| i / m != first) {
                    hits += 1;
                }
            }
            let p = hits as f64 / trials as f64;
            Ok(ProbabilityEstimate {
                probability: p,
                stderr: Some((p * (1.0 - p) / trials as f64).sqrt()),
            })
        }
    }
}

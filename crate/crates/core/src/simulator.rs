//! Desk-scale clothes-changing re-identification world.
//!
//! Every instance is `w_id * u_p + w_cl * v_c + noise`: an identity cue shared
//! by all images of a person and a clothing cue shared by all images of one
//! outfit. A linear embedding `f = W x / |W x|` is trained against three
//! losses: identity cross-entropy, a same-clothes triplet and a
//! clothes-changing triplet. The two triplets pull the model in opposite
//! directions on the clothing cue.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalResult, LabeledFeature, RetrievalProtocol, SynthesisTriple};
use crate::minnorm::GradientSet;
use crate::problems::{MultiObjectiveProblem, ObjectiveVector};
use crate::sampler::{cc_sample, sc_sample, Batch, SamplerConfig, SamplerMode};

/// Iterations between batch resamples in [`SimulatorProblem`].
pub const EPOCH_LENGTH: usize = 10;
pub const DEFAULT_MARGIN: f64 = 0.3;
const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Synthetic,
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Source::Real => "real",
            Source::Synthetic => "synthetic",
        })
    }
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Source::Real),
            "synthetic" => Ok(Source::Synthetic),
            other => Err(Error::input(format!("unknown source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub num_identities: usize,
    pub clothes_per_identity: usize,
    pub images_per_clothing: usize,
    pub d_latent: usize,
    /// Identity cues live in the first `identity_dims` latent coordinates and
    /// clothing cues in the rest. Equal to `d_latent` means both span the
    /// whole space.
    pub identity_dims: usize,
    pub id_weight: f64,
    pub clothes_weight: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            num_identities: 20,
            clothes_per_identity: 2,
            images_per_clothing: 4,
            d_latent: 32,
            identity_dims: 4,
            id_weight: 1.0,
            clothes_weight: 1.5,
            noise_sigma: 0.1,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_identities == 0 || self.clothes_per_identity == 0 || self.images_per_clothing == 0 {
            return Err(Error::input("world counts must all be at least 1"));
        }
        if self.d_latent == 0 || self.identity_dims == 0 || self.identity_dims > self.d_latent {
            return Err(Error::input(format!(
                "identity_dims must be in 1..={} (d_latent), got {}",
                self.d_latent, self.identity_dims
            )));
        }
        if !(self.id_weight > 0.0 && self.clothes_weight > 0.0) {
            return Err(Error::input("cue weights must be positive"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::input("noise_sigma must be finite and non-negative"));
        }
        Ok(())
    }

    fn clothing_span(&self) -> std::ops::Range<usize> {
        if self.identity_dims == self.d_latent {
            0..self.d_latent
        } else {
            self.identity_dims..self.d_latent
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub person_id: usize,
    pub clothes_id: usize,
    pub source: Source,
    pub vector: Vec<f64>,
    /// For synthetic instances, the index of the real instance it was made
    /// from.
    #[serde(skip)]
    pub origin: Option<usize>,
}

/// Instances plus lookup indices and the latent cues they were built from.
#[derive(Debug, Clone)]
pub struct DatasetTable {
    instances: Vec<Instance>,
    persons: Vec<usize>,
    by_person: BTreeMap<usize, Vec<usize>>,
    wardrobes: BTreeMap<usize, Vec<usize>>,
    by_clothing: BTreeMap<(usize, usize), Vec<usize>>,
    identity_cues: BTreeMap<usize, Vec<f64>>,
    clothing_cues: BTreeMap<usize, Vec<f64>>,
    config: Option<WorldConfig>,
}

impl DatasetTable {
    /// Builds the indices over `instances`. Every clothing label must belong
    /// to a single person among real instances.
    pub fn from_instances(instances: Vec<Instance>) -> Result<Self> {
        let mut table = DatasetTable {
            instances: Vec::new(),
            persons: Vec::new(),
            by_person: BTreeMap::new(),
            wardrobes: BTreeMap::new(),
            by_clothing: BTreeMap::new(),
            identity_cues: BTreeMap::new(),
            clothing_cues: BTreeMap::new(),
            config: None,
        };
        let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
        let dim = instances.first().map(|i| i.vector.len());
        for inst in &instances {
            if Some(inst.vector.len()) != dim || inst.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::input("instance vectors must be finite and of one dimension"));
            }
            if inst.source == Source::Real {
                if let Some(&p) = owner.get(&inst.clothes_id) {
                    if p != inst.person_id {
                        return Err(Error::input(format!(
                            "clothing {} is worn by persons {p} and {}",
                            inst.clothes_id, inst.person_id
                        )));
                    }
                }
                owner.insert(inst.clothes_id, inst.person_id);
            }
        }
        for inst in instances {
            table.push(inst);
        }
        Ok(table)
    }

    fn push(&mut self, inst: Instance) {
        let i = self.instances.len();
        let (p, c) = (inst.person_id, inst.clothes_id);
        self.by_person.entry(p).or_default().push(i);
        let slot = self.by_clothing.entry((p, c)).or_default();
        if slot.is_empty() {
            let w = self.wardrobes.entry(p).or_default();
            let at = w.partition_point(|&x| x < c);
            w.insert(at, c);
        }
        slot.push(i);
        if let Err(at) = self.persons.binary_search(&p) {
            self.persons.insert(at, p);
        }
        self.instances.push(inst);
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instances.first().map_or(0, |i| i.vector.len())
    }

    /// Sorted person ids.
    pub fn person_ids(&self) -> &[usize] {
        &self.persons
    }

    pub fn instances_of(&self, person: usize) -> &[usize] {
        self.by_person.get(&person).map_or(&[], Vec::as_slice)
    }

    /// Sorted clothing labels worn by `person` (real and synthetic).
    pub fn wardrobe(&self, person: usize) -> &[usize] {
        self.wardrobes.get(&person).map_or(&[], Vec::as_slice)
    }

    pub fn instances_of_clothing(&self, person: usize, clothes: usize) -> &[usize] {
        self.by_clothing.get(&(person, clothes)).map_or(&[], Vec::as_slice)
    }

    pub fn identity_cue(&self, person: usize) -> Option<&[f64]> {
        self.identity_cues.get(&person).map(Vec::as_slice)
    }

    pub fn clothing_cue(&self, clothes: usize) -> Option<&[f64]> {
        self.clothing_cues.get(&clothes).map(Vec::as_slice)
    }

    /// Person who wears `clothes` among real instances.
    pub fn clothing_owner(&self, clothes: usize) -> Option<usize> {
        self.instances
            .iter()
            .find(|i| i.source == Source::Real && i.clothes_id == clothes)
            .map(|i| i.person_id)
    }

    /// The sub-table of one source. Synthetic origins are dropped.
    pub fn filter_source(&self, source: Source) -> DatasetTable {
        self.subtable(source).0
    }

    // Also returns, per sub-table instance, its index in `self`.
    fn subtable(&self, source: Source) -> (DatasetTable, Vec<usize>) {
        let mut t = DatasetTable {
            identity_cues: self.identity_cues.clone(),
            clothing_cues: self.clothing_cues.clone(),
            config: self.config.clone(),
            ..DatasetTable::from_instances(Vec::new()).expect("empty table")
        };
        let mut map = Vec::new();
        for (i, inst) in self.instances.iter().enumerate().filter(|(_, i)| i.source == source) {
            t.push(Instance {
                origin: None,
                ..inst.clone()
            });
            map.push(i);
        }
        (t, map)
    }
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize, span: std::ops::Range<usize>) -> Vec<f64> {
    let mut v = vec![0.0; d];
    loop {
        for x in &mut v[span.clone()] {
            *x = StandardNormal.sample(rng);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

fn compose<R: Rng + ?Sized>(cfg: &WorldConfig, u: &[f64], v: &[f64], rng: &mut R) -> Vec<f64> {
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("validated sigma");
    u.iter()
        .zip(v)
        .map(|(a, b)| {
            let e = if cfg.noise_sigma > 0.0 { noise.sample(rng) } else { 0.0 };
            cfg.id_weight * a + cfg.clothes_weight * b + e
        })
        .collect()
}

/// Draws identity and clothing cues and composes every instance. Persons are
/// `0..P`; clothing `c` of person `p` has label `p * N_c + c`.
pub fn generate_world(cfg: &WorldConfig) -> Result<DatasetTable> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.d_latent;
    let mut table = DatasetTable::from_instances(Vec::new())?;
    table.config = Some(cfg.clone());
    for p in 0..cfg.num_identities {
        let u = unit_vector(&mut rng, d, 0..cfg.identity_dims);
        for c in 0..cfg.clothes_per_identity {
            let cid = p * cfg.clothes_per_identity + c;
            let v = unit_vector(&mut rng, d, cfg.clothing_span());
            for _ in 0..cfg.images_per_clothing {
                let vector = compose(cfg, &u, &v, &mut rng);
                table.push(Instance {
                    person_id: p,
                    clothes_id: cid,
                    source: Source::Real,
                    vector,
                    origin: None,
                });
            }
            table.clothing_cues.insert(cid, v);
        }
        table.identity_cues.insert(p, u);
    }
    Ok(table)
}

fn require_cues(table: &DatasetTable) -> Result<&WorldConfig> {
    table
        .config
        .as_ref()
        .ok_or_else(|| Error::contract("table has no latent cues (imported from CSV?)"))
}

/// Re-dresses a real instance in each donor clothing, keeping its identity
/// cue. Returns the synthetic instances without adding them to the table.
pub fn latent_clothes_swap<R: Rng + ?Sized>(
    table: &DatasetTable,
    instance: usize,
    donor_clothes: &[usize],
    rng: &mut R,
) -> Result<Vec<Instance>> {
    let cfg = require_cues(table)?;
    let inst = table
        .instances
        .get(instance)
        .ok_or_else(|| Error::input(format!("no instance {instance}")))?;
    if inst.source != Source::Real {
        return Err(Error::input("only real instances can be re-dressed"));
    }
    let u = table.identity_cues[&inst.person_id].clone();
    donor_clothes
        .iter()
        .map(|&c| {
            match table.clothing_owner(c) {
                None => return Err(Error::input(format!("unknown donor clothing {c}"))),
                Some(p) if p == inst.person_id => {
                    return Err(Error::input(format!(
                        "donor clothing {c} belongs to person {p} itself"
                    )))
                }
                Some(_) => {}
            }
            Ok(Instance {
                person_id: inst.person_id,
                clothes_id: c,
                source: Source::Synthetic,
                vector: compose(cfg, &u, &table.clothing_cues[&c], rng),
                origin: Some(instance),
            })
        })
        .collect()
}

/// Adds `donors` synthetic outfits per real clothing. Donor clothes are drawn
/// from other persons and never repeat within one person's wardrobe; every
/// real image of the clothing is re-dressed in each of them.
pub fn augment_with_synthesis(table: &DatasetTable, donors: usize, seed: u64) -> Result<DatasetTable> {
    require_cues(table)?;
    let mut out = table.clone();
    if donors == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real: Vec<(usize, usize)> = table
        .by_clothing
        .keys()
        .copied()
        .filter(|&(p, c)| table.clothing_owner(c) == Some(p))
        .collect();
    let all_clothes: Vec<usize> = table.clothing_cues.keys().copied().collect();
    for p in table.person_ids().to_vec() {
        let mut used: Vec<usize> = table.wardrobe(p).to_vec();
        for &(_, c) in real.iter().filter(|(q, _)| *q == p) {
            let pool: Vec<usize> = all_clothes
                .iter()
                .copied()
                .filter(|x| !used.contains(x) && table.clothing_owner(*x) != Some(p))
                .collect();
            if pool.len() < donors {
                return Err(Error::input(format!(
                    "only {} donor clothes available for person {p}, need {donors}",
                    pool.len()
                )));
            }
            let chosen: Vec<usize> = index::sample(&mut rng, pool.len(), donors)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            used.extend(&chosen);
            for &i in table.instances_of_clothing(p, c) {
                for s in latent_clothes_swap(table, i, &chosen, &mut rng)? {
                    out.push(s);
                }
            }
        }
    }
    Ok(out)
}

/// Fraction of same-person instance pairs that differ in clothing.
pub fn cc_pair_fraction(table: &DatasetTable) -> f64 {
    let (mut all, mut cc) = (0u64, 0u64);
    for &p in table.person_ids() {
        let n = table.instances_of(p).len() as u64;
        let same: u64 = table
            .wardrobe(p)
            .iter()
            .map(|&c| {
                let k = table.instances_of_clothing(p, c).len() as u64;
                k * k.saturating_sub(1) / 2
            })
            .sum();
        let pairs = n * n.saturating_sub(1) / 2;
        all += pairs;
        cc += pairs - same;
    }
    if all == 0 {
        0.0
    } else {
        cc as f64 / all as f64
    }
}

/// Linear embedding followed by L2 normalization, plus an identity
/// classifier on the normalized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    d_feat: usize,
    d_latent: usize,
    num_classes: usize,
    /// `d_feat x d_latent`, row-major.
    w: Vec<f64>,
    /// `num_classes x d_feat`, row-major.
    classifier: Vec<f64>,
}

impl EmbeddingModel {
    pub fn new(
        d_feat: usize,
        d_latent: usize,
        num_classes: usize,
        w: Vec<f64>,
        classifier: Vec<f64>,
    ) -> Result<Self> {
        if d_feat < 2 || d_latent == 0 || num_classes == 0 {
            return Err(Error::input("need d_feat >= 2, d_latent >= 1 and at least one class"));
        }
        if w.len() != d_feat * d_latent || classifier.len() != num_classes * d_feat {
            return Err(Error::input("parameter block sizes do not match the dimensions"));
        }
        if w.iter().chain(&classifier).any(|v| !v.is_finite()) {
            return Err(Error::input("model parameters must be finite"));
        }
        Ok(Self {
            d_feat,
            d_latent,
            num_classes,
            w,
            classifier,
        })
    }

    /// Gaussian initialization: `W ~ N(0, 1/d_latent)`, classifier
    /// `~ N(0, 0.01)`.
    pub fn random<R: Rng + ?Sized>(d_feat: usize, d_latent: usize, num_classes: usize, rng: &mut R) -> Result<Self> {
        let sw = Normal::new(0.0, 1.0 / (d_latent.max(1) as f64).sqrt()).expect("positive sd");
        let sc = Normal::new(0.0, 0.1).expect("positive sd");
        let w = (0..d_feat * d_latent).map(|_| sw.sample(rng)).collect();
        let c = (0..num_classes * d_feat).map(|_| sc.sample(rng)).collect();
        Self::new(d_feat, d_latent, num_classes, w, c)
    }

    pub fn d_feat(&self) -> usize {
        self.d_feat
    }

    pub fn d_latent(&self) -> usize {
        self.d_latent
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_parameters(&self) -> usize {
        self.w.len() + self.classifier.len()
    }

    /// `W` then the classifier, both row-major.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = self.w.clone();
        p.extend(&self.classifier);
        p
    }

    pub fn set_parameters(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_parameters() {
            return Err(Error::input(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                theta.len()
            )));
        }
        let (w, c) = theta.split_at(self.w.len());
        self.w.copy_from_slice(w);
        self.classifier.copy_from_slice(c);
        Ok(())
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .chunks_exact(self.d_latent)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn embed_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_latent {
            return Err(Error::input(format!(
                "instance has dimension {}, model expects {}",
                x.len(),
                self.d_latent
            )));
        }
        let z = self.project(x);
        let n = norm(&z) + NORM_FLOOR;
        Ok(z.into_iter().map(|v| v / n).collect())
    }

    pub fn embed(&self, instance: &Instance) -> Result<Vec<f64>> {
        self.embed_vector(&instance.vector)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

// Forward cache for one instance.
struct Embedded {
    z: Vec<f64>,
    f: Vec<f64>,
}

fn forward(model: &EmbeddingModel, x: &[f64]) -> Embedded {
    let z = model.project(x);
    let n = norm(&z) + NORM_FLOOR;
    let f = z.iter().map(|v| v / n).collect();
    Embedded { z, f }
}

// Pulls dL/df back through the normalization and accumulates dL/dW.
fn backward(model: &EmbeddingModel, e: &Embedded, x: &[f64], gf: &[f64], gw: &mut [f64]) {
    let r = norm(&e.z);
    let n = r + NORM_FLOOR;
    let mut gz: Vec<f64> = gf.iter().map(|g| g / n).collect();
    if r > 0.0 {
        let s = e.z.iter().zip(gf).map(|(a, b)| a * b).sum::<f64>() / (r * n * n);
        axpy(&mut gz, -s, &e.z);
    }
    for (row, g) in gw.chunks_exact_mut(model.d_latent).zip(&gz) {
        if *g != 0.0 {
            axpy(row, *g, x);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Positives {
    SameClothes,
    OtherClothes,
}

// Batch-hard triplet loss on features; returns the mean hinge and dL/df.
fn batch_hard_triplet(
    feats: &[Vec<f64>],
    persons: &[usize],
    clothes: &[usize],
    positives: Positives,
    margin: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = feats.len();
    let mut distinct = persons.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::contract("triplet loss needs at least 2 identities in the batch"));
    }
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| norm(&sub(&feats[i], &feats[j]))).collect())
        .collect();
    let mut grads = vec![vec![0.0; feats[0].len()]; n];
    let mut total = 0.0;
    let mut anchors = 0usize;
    for a in 0..n {
        let is_pos = |j: usize| {
            j != a
                && persons[j] == persons[a]
                && match positives {
                    Positives::SameClothes => clothes[j] == clothes[a],
                    Positives::OtherClothes => clothes[j] != clothes[a],
                }
        };
        let mut hp: Option<usize> = None;
        let mut hn: Option<usize> = None;
        for j in 0..n {
            if is_pos(j) && hp.is_none_or(|p| dist[a][j] > dist[a][p]) {
                hp = Some(j);
            }
            if persons[j] != persons[a] && hn.is_none_or(|q| dist[a][j] < dist[a][q]) {
                hn = Some(j);
            }
        }
        let (Some(p), Some(q)) = (hp, hn) else { continue };
        anchors += 1;
        let h = dist[a][p] - dist[a][q] + margin;
        if h <= 0.0 {
            continue;
        }
        total += h;
        // d|fa - fp| = (fa - fp) / |fa - fp|, zero subgradient at 0
        if dist[a][p] > 0.0 {
            let u = sub(&feats[a], &feats[p]);
            let s = 1.0 / dist[a][p];
            axpy(&mut grads[a], s, &u);
            axpy(&mut grads[p], -s, &u);
        }
        if dist[a][q] > 0.0 {
            let u = sub(&feats[a], &feats[q]);
            let s = 1.0 / dist[a][q];
            axpy(&mut grads[a], -s, &u);
            axpy(&mut grads[q], s, &u);
        }
    }
    if anchors == 0 {
        return Err(Error::contract("no anchor in the batch has both a positive and a negative"));
    }
    let scale = 1.0 / anchors as f64;
    grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v *= scale));
    Ok((total * scale, grads))
}

/// Maps person ids to classifier rows.
pub type ClassIndex = BTreeMap<usize, usize>;

pub fn class_index(table: &DatasetTable) -> ClassIndex {
    table.person_ids().iter().enumerate().map(|(i, &p)| (p, i)).collect()
}

/// Identity cross-entropy over the union of both batches, and batch-hard
/// triplet losses over the same-clothes and clothes-changing batches.
/// Gradients are over [`EmbeddingModel::parameters`].
pub fn objectives_and_gradients(
    model: &EmbeddingModel,
    table: &DatasetTable,
    classes: &ClassIndex,
    sc_batch: &Batch,
    cc_batch: &Batch,
    margin: f64,
) -> Result<(ObjectiveVector, GradientSet)> {
    if !(margin > 0.0) {
        return Err(Error::input("margin must be positive"));
    }
    let n_w = model.w.len();
    let mut rows = vec![vec![0.0; model.num_parameters()]; 3];

    let sc_idx: Vec<usize> = sc_batch.indices().collect();
    let cc_idx: Vec<usize> = cc_batch.indices().collect();
    let sc_emb: Vec<Embedded> = sc_idx.iter().map(|&i| forward(model, &table.instances[i].vector)).collect();
    let cc_emb: Vec<Embedded> = cc_idx.iter().map(|&i| forward(model, &table.instances[i].vector)).collect();

    // identity loss over the union
    let union: Vec<(usize, &Embedded)> = sc_idx.iter().copied().zip(&sc_emb).chain(cc_idx.iter().copied().zip(&cc_emb)).collect();
    let mut l_id = 0.0;
    let inv = 1.0 / union.len() as f64;
    for (i, e) in &union {
        let inst = &table.instances[*i];
        let label = *classes
            .get(&inst.person_id)
            .ok_or_else(|| Error::input(format!("person {} has no classifier row", inst.person_id)))?;
        if label >= model.num_classes {
            return Err(Error::input("class index exceeds classifier rows"));
        }
        let logits: Vec<f64> = model
            .classifier
            .chunks_exact(model.d_feat)
            .map(|row| row.iter().zip(&e.f).map(|(a, b)| a * b).sum())
            .collect();
        let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + logits.iter().map(|s| (s - mx).exp()).sum::<f64>().ln();
        l_id += (lse - logits[label]) * inv;
        let mut gf = vec![0.0; model.d_feat];
        for (c, (row, s)) in model.classifier.chunks_exact(model.d_feat).zip(&logits).enumerate() {
            let ds = ((s - lse).exp() - if c == label { 1.0 } else { 0.0 }) * inv;
            axpy(&mut gf, ds, row);
            axpy(&mut rows[0][n_w + c * model.d_feat..n_w + (c + 1) * model.d_feat], ds, &e.f);
        }
        backward(model, e, &inst.vector, &gf, &mut rows[0][..n_w]);
    }

    let triplet = |idx: &[usize], emb: &[Embedded], pos: Positives, row: &mut Vec<f64>| -> Result<f64> {
        let feats: Vec<Vec<f64>> = emb.iter().map(|e| e.f.clone()).collect();
        let persons: Vec<usize> = idx.iter().map(|&i| table.instances[i].person_id).collect();
        let clothes: Vec<usize> = idx.iter().map(|&i| table.instances[i].clothes_id).collect();
        let (loss, gfs) = batch_hard_triplet(&feats, &persons, &clothes, pos, margin)?;
        for ((&i, e), gf) in idx.iter().zip(emb).zip(&gfs) {
            if gf.iter().any(|v| *v != 0.0) {
                backward(model, e, &table.instances[i].vector, gf, &mut row[..n_w]);
            }
        }
        Ok(loss)
    };
    let (head, tail) = rows.split_at_mut(2);
    let l_sc = triplet(&sc_idx, &sc_emb, Positives::SameClothes, &mut head[1])?;
    let l_cc = triplet(&cc_idx, &cc_emb, Positives::OtherClothes, &mut tail[0])?;

    let values = ObjectiveVector(vec![l_id, l_sc, l_cc]);
    if !values.is_finite() {
        return Err(Error::numeric("simulator losses are not finite"));
    }
    Ok((values, GradientSet::from_rows(&rows)?))
}

/// The simulator as a three-objective problem over the model parameters.
/// Batches are redrawn every [`EPOCH_LENGTH`] iterations from a stream
/// derived from the seed and the epoch number.
#[derive(Debug, Clone)]
pub struct SimulatorProblem {
    template: EmbeddingModel,
    table: DatasetTable,
    real: DatasetTable,
    real_index: Vec<usize>,
    classes: ClassIndex,
    sc_config: SamplerConfig,
    cc_config: SamplerConfig,
    margin: f64,
    seed: u64,
    epoch: usize,
    sc_batch: Batch,
    cc_batch: Batch,
}

/// Same-clothes batches come from real instances only; clothes-changing
/// batches draw from the whole table.
pub fn as_problem(
    model: &EmbeddingModel,
    table: &DatasetTable,
    sampler: &SamplerConfig,
    margin: f64,
    seed: u64,
) -> Result<SimulatorProblem> {
    sampler.validate()?;
    if !(margin > 0.0) {
        return Err(Error::input("margin must be positive"));
    }
    if table.dim() != model.d_latent {
        return Err(Error::input("table and model latent dimensions differ"));
    }
    if table.person_ids().iter().all(|&p| table.wardrobe(p).len() < 2) {
        return Err(Error::contract(
            "no identity wears two clothes, so no clothes-changing pair exists",
        ));
    }
    let classes = class_index(table);
    if classes.len() > model.num_classes {
        return Err(Error::input(format!(
            "table has {} identities, classifier has {} rows",
            classes.len(),
            model.num_classes
        )));
    }
    let (real, real_index) = table.subtable(Source::Real);
    let sc_config = SamplerConfig { mode: SamplerMode::Sc, ..*sampler };
    let cc_config = SamplerConfig { mode: SamplerMode::Cc, ..*sampler };
    let (sc_batch, cc_batch) = draw_batches(&real, &real_index, table, &sc_config, &cc_config, seed, 0)?;
    Ok(SimulatorProblem {
        template: model.clone(),
        table: table.clone(),
        real,
        real_index,
        classes,
        sc_config,
        cc_config,
        margin,
        seed,
        epoch: 0,
        sc_batch,
        cc_batch,
    })
}

fn draw_batches(
    real: &DatasetTable,
    real_index: &[usize],
    table: &DatasetTable,
    sc: &SamplerConfig,
    cc: &SamplerConfig,
    seed: u64,
    epoch: usize,
) -> Result<(Batch, Batch)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let sc_batch = sc_sample(real, sc, &mut rng)?;
    // same-clothes batches index the real sub-table; map back to the table
    let sc_batch = Batch {
        groups: sc_batch
            .groups
            .iter()
            .map(|g| g.iter().map(|&i| real_index[i]).collect())
            .collect(),
        ..sc_batch
    };
    let cc_batch = cc_sample(table, cc, &mut rng)?;
    Ok((sc_batch, cc_batch))
}

impl SimulatorProblem {
    pub fn model_with(&self, theta: &[f64]) -> Result<EmbeddingModel> {
        let mut m = self.template.clone();
        m.set_parameters(theta)?;
        Ok(m)
    }

    pub fn initial_parameters(&self) -> Vec<f64> {
        self.template.parameters()
    }

    pub fn batches(&self) -> (&Batch, &Batch) {
        (&self.sc_batch, &self.cc_batch)
    }
}

impl MultiObjectiveProblem for SimulatorProblem {
    fn name(&self) -> &str {
        "simulator"
    }

    fn num_objectives(&self) -> usize {
        3
    }

    fn dim(&self) -> usize {
        self.template.num_parameters()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<ObjectiveVector> {
        Ok(self.evaluate_with_gradients(theta)?.0)
    }

    fn gradients(&self, theta: &[f64]) -> Result<GradientSet> {
        Ok(self.evaluate_with_gradients(theta)?.1)
    }

    fn evaluate_with_gradients(&self, theta: &[f64]) -> Result<(ObjectiveVector, GradientSet)> {
        let model = self.model_with(theta)?;
        objectives_and_gradients(&model, &self.table, &self.classes, &self.sc_batch, &self.cc_batch, self.margin)
    }

    fn begin_iteration(&mut self, iter: usize) -> Result<()> {
        let epoch = iter / EPOCH_LENGTH;
        if epoch != self.epoch {
            let (sc, cc) = draw_batches(&self.real, &self.real_index, &self.table, &self.sc_config, &self.cc_config, self.seed, epoch)?;
            self.sc_batch = sc;
            self.cc_batch = cc;
            self.epoch = epoch;
        }
        Ok(())
    }
}

/// Query/gallery split of a table: the first instance of every clothing is a
/// query, the rest form the gallery.
pub fn query_gallery_split(
    model: &EmbeddingModel,
    table: &DatasetTable,
) -> Result<(Vec<LabeledFeature>, Vec<LabeledFeature>)> {
    let mut queries = Vec::new();
    let mut gallery = Vec::new();
    for (&(p, c), idx) in &table.by_clothing {
        for (n, &i) in idx.iter().enumerate() {
            let inst = &table.instances[i];
            let f = LabeledFeature {
                person_id: p,
                clothes_id: c,
                source: inst.source,
                feature: model.embed(inst)?,
            };
            if n == 0 {
                queries.push(f);
            } else {
                gallery.push(f);
            }
        }
    }
    Ok((queries, gallery))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub general: EvalResult,
    pub cc: EvalResult,
    pub sc: EvalResult,
}

pub fn evaluate_model(model: &EmbeddingModel, table: &DatasetTable) -> Result<ProtocolReport> {
    let (q, g) = query_gallery_split(model, table)?;
    Ok(ProtocolReport {
        general: evaluate(&q, &g, RetrievalProtocol::General)?,
        cc: evaluate(&q, &g, RetrievalProtocol::ClothesChanging)?,
        sc: evaluate(&q, &g, RetrievalProtocol::SameClothes)?,
    })
}

/// Synthesis triples for every synthetic instance: its feature, the feature
/// of the real instance it came from, and of a real image of the donor
/// clothing.
pub fn synthesis_triples(model: &EmbeddingModel, table: &DatasetTable) -> Result<Vec<SynthesisTriple>> {
    table
        .instances
        .iter()
        .filter(|i| i.source == Source::Synthetic)
        .map(|s| {
            let origin = s.origin.ok_or_else(|| Error::input("synthetic instance without origin"))?;
            let owner = table
                .clothing_owner(s.clothes_id)
                .ok_or_else(|| Error::input(format!("no real wearer of clothing {}", s.clothes_id)))?;
            let donor = table.instances_of_clothing(owner, s.clothes_id)[0];
            Ok(SynthesisTriple {
                synthetic: model.embed(s)?,
                original: model.embed(&table.instances[origin])?,
                clothing_source: model.embed(&table.instances[donor])?,
            })
        })
        .collect()
}

/// Cosine between two gradient rows; zero if either vanishes.
pub fn gradient_cosine(g: &GradientSet, i: usize, j: usize) -> f64 {
    let (a, b) = (g.row(i), g.row(j));
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

pub(crate) fn write_labeled_rows<W: Write>(
    writer: W,
    prefix: char,
    rows: &[(usize, usize, Source, &[f64])],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = rows.first().map_or(0, |r| r.3.len());
    let mut header = vec!["person_id".to_string(), "clothes_id".into(), "source".into()];
    header.extend((0..d).map(|i| format!("{prefix}{i}")));
    w.write_record(&header)?;
    for (p, c, s, v) in rows {
        if v.len() != d {
            return Err(Error::input("rows have different vector lengths"));
        }
        let mut rec = vec![p.to_string(), c.to_string(), s.to_string()];
        // shortest representation that round-trips
        rec.extend(v.iter().map(|x| format!("{x:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// person, clothing, source, vector
pub(crate) type LabeledRow = (usize, usize, Source, Vec<f64>);

pub(crate) fn read_labeled_rows<R: Read>(reader: R, prefix: char) -> Result<Vec<LabeledRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let fixed = ["person_id", "clothes_id", "source"];
    if header.len() < 4 || header.iter().take(3).ne(fixed) {
        return Err(Error::input(format!(
            "expected header person_id,clothes_id,source,{prefix}0,..."
        )));
    }
    for (i, h) in header.iter().skip(3).enumerate() {
        if h != format!("{prefix}{i}") {
            return Err(Error::input(format!("unexpected column {h:?}")));
        }
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::input(format!("row {}: bad {what}", line + 1));
        let p = rec[0].parse().map_err(|_| bad("person_id"))?;
        let c = rec[1].parse().map_err(|_| bad("clothes_id"))?;
        let s = rec[2].parse()?;
        let v = rec
            .iter()
            .skip(3)
            .map(|x| x.parse::<f64>().map_err(|_| bad("value")))
            .collect::<Result<Vec<_>>>()?;
        out.push((p, c, s, v));
    }
    Ok(out)
}

/// Writes the table as CSV with header `person_id, clothes_id, source, v0..`.
pub fn write_table<W: Write>(writer: W, table: &DatasetTable) -> Result<()> {
    let rows: Vec<(usize, usize, Source, &[f64])> = table
        .instances
        .iter()
        .map(|i| (i.person_id, i.clothes_id, i.source, i.vector.as_slice()))
        .collect();
    write_labeled_rows(writer, 'v', &rows)
}

/// Reads a table CSV. Latent cues and synthetic origins are not stored, so
/// the result cannot be augmented further.
pub fn read_table<R: Read>(reader: R) -> Result<DatasetTable> {
    DatasetTable::from_instances(
        read_labeled_rows(reader, 'v')?
            .into_iter()
            .map(|(person_id, clothes_id, source, vector)| Instance {
                person_id,
                clothes_id,
                source,
                vector,
                origin: None,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::finite_difference_check;
    use approx::assert_abs_diff_eq;

    fn small(noise: f64) -> WorldConfig {
        WorldConfig {
            num_identities: 4,
            clothes_per_identity: 2,
            images_per_clothing: 2,
            d_latent: 6,
            identity_dims: 3,
            noise_sigma: noise,
            ..WorldConfig::default()
        }
    }

    #[test]
    fn world_examples() {
        let t = generate_world(&WorldConfig::default()).unwrap();
        assert_eq!(t.len(), 160);
        let mut clothes: Vec<usize> = t.instances().iter().map(|i| i.clothes_id).collect();
        clothes.dedup();
        assert_eq!(clothes.len(), 40);

        let cfg = small(0.0);
        let t = generate_world(&cfg).unwrap();
        let same = t.instances_of_clothing(0, 0);
        assert_eq!(t.instances()[same[0]].vector, t.instances()[same[1]].vector);
        let (a, b) = (&t.instances()[same[0]].vector, &t.instances()[t.instances_of_clothing(0, 1)[0]].vector);
        let (v0, v1) = (t.clothing_cue(0).unwrap(), t.clothing_cue(1).unwrap());
        for i in 0..6 {
            assert_abs_diff_eq!(a[i] - b[i], 1.5 * (v0[i] - v1[i]), epsilon = 1e-12);
        }
        for p in t.person_ids() {
            assert_eq!(t.wardrobe(*p).len(), 2);
            assert_abs_diff_eq!(norm(t.identity_cue(*p).unwrap()), 1.0, epsilon = 1e-12);
        }
        // cue supports are disjoint
        assert!(t.identity_cue(0).unwrap()[3..].iter().all(|&v| v == 0.0));
        assert!(t.clothing_cue(0).unwrap()[..3].iter().all(|&v| v == 0.0));
        assert_eq!(generate_world(&cfg).unwrap().instances(), t.instances());
        assert!(generate_world(&WorldConfig { identity_dims: 7, ..cfg }).is_err());
    }

    #[test]
    fn swap_examples() {
        let t = generate_world(&small(0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let donors = [2, 4, 5, 6, 7];
        let out = latent_clothes_swap(&t, 0, &donors, &mut rng).unwrap();
        assert_eq!(out.len(), 5);
        for (s, &c) in out.iter().zip(&donors) {
            assert_eq!(s.person_id, 0);
            assert_eq!(s.clothes_id, c);
            assert_eq!(s.source, Source::Synthetic);
            let owner = t.clothing_owner(c).unwrap();
            let wearer = &t.instances()[t.instances_of_clothing(owner, c)[0]].vector;
            let (u, u2) = (t.identity_cue(0).unwrap(), t.identity_cue(owner).unwrap());
            for i in 0..6 {
                assert_abs_diff_eq!(s.vector[i] - wearer[i], u[i] - u2[i], epsilon = 1e-12);
            }
        }
        assert!(matches!(latent_clothes_swap(&t, 0, &[1], &mut rng), Err(Error::Input(_))));
    }

    #[test]
    fn augmentation_counts() {
        let t = generate_world(&WorldConfig::default()).unwrap();
        let a = augment_with_synthesis(&t, 5, 1).unwrap();
        for &p in a.person_ids() {
            assert_eq!(a.wardrobe(p).len(), 12);
            assert_eq!(a.instances_of(p).len(), 8 + 2 * 5 * 4);
        }
        let syn = a.instances().iter().filter(|i| i.source == Source::Synthetic).count();
        assert_eq!(syn, 20 * 2 * 4 * 5);
        // real part is untouched
        assert_eq!(&a.instances()[..160], t.instances());
    }

    #[test]
    fn cc_pair_fraction_matches_formula() {
        let mut prev = 0.0;
        for donors in 0..=5 {
            let t = generate_world(&WorldConfig::default()).unwrap();
            let a = augment_with_synthesis(&t, donors, 2).unwrap();
            let labels = (2 * (1 + donors)) as f64;
            let m = 4.0;
            let expected = 1.0 - (m - 1.0) / (labels * m - 1.0);
            let got = cc_pair_fraction(&a);
            assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
            assert!(got > prev);
            prev = got;
        }
    }

    #[test]
    fn embed_examples() {
        let mut w = vec![0.0; 9];
        w[0] = 1.0;
        w[4] = 1.0;
        w[8] = 1.0;
        let m = EmbeddingModel::new(3, 3, 1, w.clone(), vec![0.0; 3]).unwrap();
        let e1 = m.embed_vector(&[1.0, 0.0, 0.0]).unwrap();
        for (a, b) in e1.iter().zip([1.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-11);
        }
        let scaled = EmbeddingModel::new(3, 3, 1, w.iter().map(|v| v * 4.0).collect(), vec![0.0; 3]).unwrap();
        let x = [0.3, -0.2, 0.7];
        for (a, b) in m.embed_vector(&x).unwrap().iter().zip(scaled.embed_vector(&x).unwrap()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-11);
        }
        assert_eq!(m.embed_vector(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(m.embed_vector(&[1.0]).is_err());
        assert!(EmbeddingModel::new(1, 3, 1, vec![0.0; 3], vec![0.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = EmbeddingModel::random(4, 5, 2, &mut rng).unwrap();
        let x: Vec<f64> = (0..5).map(|i| i as f64 - 1.5).collect();
        let mut z = [0.0; 4];
        for (r, zr) in z.iter_mut().enumerate() {
            for (c, xc) in x.iter().enumerate() {
                *zr += m.parameters()[r * 5 + c] * xc;
            }
        }
        let n = (z.iter().map(|v| v * v).sum::<f64>()).sqrt();
        for (a, b) in m.embed_vector(&x).unwrap().iter().zip(z) {
            assert_abs_diff_eq!(*a, b / n, epsilon = 1e-11);
        }
    }

    #[test]
    fn triplet_hinge_examples() {
        let f = vec![vec![1.0, 0.0]; 4];
        let (l, g) = batch_hard_triplet(&f, &[0, 0, 1, 1], &[0, 0, 1, 1], Positives::SameClothes, 0.3).unwrap();
        assert_abs_diff_eq!(l, 0.3, epsilon = 1e-15);
        assert!(g.iter().flatten().all(|v| *v == 0.0));
        let (l, _) = batch_hard_triplet(&f, &[0, 0, 1, 1], &[0, 1, 2, 3], Positives::OtherClothes, 0.3).unwrap();
        assert_abs_diff_eq!(l, 0.3, epsilon = 1e-15);

        let f = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let (l, g) = batch_hard_triplet(&f, &[0, 0, 1, 1], &[0, 0, 1, 1], Positives::SameClothes, 0.3).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().flatten().all(|v| *v == 0.0));

        assert!(matches!(
            batch_hard_triplet(&f, &[0, 0, 0, 0], &[0, 0, 1, 1], Positives::SameClothes, 0.3),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let t = augment_with_synthesis(&generate_world(&small(0.1)).unwrap(), 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = EmbeddingModel::random(3, 6, 4, &mut rng).unwrap();
        let cfg = SamplerConfig::new(3, 2, SamplerMode::Pk, 0).unwrap();
        let mut p = as_problem(&model, &t, &cfg, DEFAULT_MARGIN, 5).unwrap();
        let n = p.dim();
        for trial in 0..10 {
            p.begin_iteration(trial * EPOCH_LENGTH).unwrap();
            let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let err = finite_difference_check(&p, &theta, 1e-6).unwrap();
            assert!(err < 1e-5, "trial {trial}: {err:e}");
        }
    }

    #[test]
    fn problem_examples() {
        let t = generate_world(&small(0.1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = EmbeddingModel::random(3, 6, 4, &mut rng).unwrap();
        let cfg = SamplerConfig::new(2, 2, SamplerMode::Pk, 0).unwrap();
        let p = as_problem(&model, &t, &cfg, DEFAULT_MARGIN, 1).unwrap();
        let f = p.evaluate(&p.initial_parameters()).unwrap();
        assert_eq!(f.len(), 3);
        assert!(f.iter().all(|v| v.is_finite() && *v >= 0.0));

        let single = generate_world(&WorldConfig { clothes_per_identity: 1, ..small(0.1) }).unwrap();
        assert!(matches!(as_problem(&model, &single, &cfg, DEFAULT_MARGIN, 1), Err(Error::Contract(_))));

        let run = |seed| {
            let mut p = as_problem(&model, &t, &cfg, DEFAULT_MARGIN, seed).unwrap();
            let theta = p.initial_parameters();
            (0..30)
                .map(|i| {
                    p.begin_iteration(i).unwrap();
                    p.evaluate(&theta).unwrap().0
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn sc_batches_are_real_and_map_back() {
        let t = augment_with_synthesis(&generate_world(&small(0.1)).unwrap(), 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = EmbeddingModel::random(3, 6, 4, &mut rng).unwrap();
        let cfg = SamplerConfig::new(4, 2, SamplerMode::Pk, 0).unwrap();
        let mut p = as_problem(&model, &t, &cfg, DEFAULT_MARGIN, 9).unwrap();
        for it in (0..50).step_by(EPOCH_LENGTH) {
            p.begin_iteration(it).unwrap();
            let (sc, _) = p.batches();
            for (g, &pid) in sc.groups.iter().zip(&sc.person_ids) {
                for &i in g {
                    assert_eq!(t.instances()[i].source, Source::Real);
                    assert_eq!(t.instances()[i].person_id, pid);
                }
            }
        }
    }

    #[test]
    fn table_csv_round_trip() {
        let t = augment_with_synthesis(&generate_world(&small(0.1)).unwrap(), 1, 3).unwrap();
        let mut buf = Vec::new();
        write_table(&mut buf, &t).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("person_id,clothes_id,source,v0,v1,v2,v3,v4,v5\n"));
        let back = read_table(buf.as_slice()).unwrap();
        assert_eq!(back.len(), t.len());
        for (a, b) in back.instances().iter().zip(t.instances()) {
            assert_eq!((a.person_id, a.clothes_id, a.source, &a.vector), (b.person_id, b.clothes_id, b.source, &b.vector));
        }
        assert!(read_table("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn split_puts_first_image_in_queries() {
        let t = generate_world(&small(0.1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = EmbeddingModel::random(3, 6, 4, &mut rng).unwrap();
        let (q, g) = query_gallery_split(&model, &t).unwrap();
        assert_eq!(q.len(), 8);
        assert_eq!(g.len(), 8);
        let r = evaluate_model(&model, &t).unwrap();
        assert_eq!(r.general.num_queries, 8);
    }
}

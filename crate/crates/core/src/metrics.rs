//! Retrieval metrics under the general, clothes-changing and same-clothes
//! protocols, the clothes-changing success rate, and Pareto dominance.

use std::cmp::Ordering;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::Source;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalProtocol {
    General,
    #[serde(rename = "cc")]
    ClothesChanging,
    #[serde(rename = "sc")]
    SameClothes,
}

impl std::str::FromStr for RetrievalProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "general" => Ok(RetrievalProtocol::General),
            "cc" => Ok(RetrievalProtocol::ClothesChanging),
            "sc" => Ok(RetrievalProtocol::SameClothes),
            other => Err(Error::input(format!(
                "unknown protocol {other:?} (expected general, cc or sc)"
            ))),
        }
    }
}

/// A unit-norm feature with its labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFeature {
    pub person_id: usize,
    pub clothes_id: usize,
    pub source: Source,
    pub feature: Vec<f64>,
}

impl LabeledFeature {
    pub fn new(person_id: usize, clothes_id: usize, source: Source, feature: Vec<f64>) -> Result<Self> {
        check_unit(&feature)?;
        Ok(Self {
            person_id,
            clothes_id,
            source,
            feature,
        })
    }

    // Gallery entries carry no instance ids, so "the query itself" is an entry
    // with the same labels and a bit-identical feature.
    fn is_same_instance(&self, other: &LabeledFeature) -> bool {
        self.person_id == other.person_id
            && self.clothes_id == other.clothes_id
            && self.source == other.source
            && self.feature == other.feature
    }
}

fn check_unit(f: &[f64]) -> Result<()> {
    if f.is_empty() || f.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("feature must be non-empty and finite"));
    }
    let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::input(format!("feature norm {norm} is not 1")));
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Gallery indices by ascending distance to the query; ties keep gallery
/// order.
pub fn rank_gallery(query: &LabeledFeature, gallery: &[LabeledFeature]) -> Result<Vec<usize>> {
    if gallery.is_empty() {
        return Err(Error::input("gallery is empty"));
    }
    let d = query.feature.len();
    let dist = gallery
        .iter()
        .map(|g| {
            if g.feature.len() != d {
                Err(Error::input(format!(
                    "feature dimension {} does not match query dimension {d}",
                    g.feature.len()
                )))
            } else {
                Ok(sq_dist(&query.feature, &g.feature))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..gallery.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    Ok(order)
}

/// `(valid, positive)` flags for every gallery entry.
pub fn protocol_mask(
    query: &LabeledFeature,
    gallery: &[LabeledFeature],
    protocol: RetrievalProtocol,
) -> (Vec<bool>, Vec<bool>) {
    gallery
        .iter()
        .map(|g| {
            let itself = query.is_same_instance(g);
            let same_person = g.person_id == query.person_id;
            let same_clothes = g.clothes_id == query.clothes_id;
            match protocol {
                RetrievalProtocol::General => (!itself, !itself && same_person),
                RetrievalProtocol::ClothesChanging => {
                    let valid = !(same_person && same_clothes);
                    (valid, valid && same_person)
                }
                RetrievalProtocol::SameClothes => {
                    let valid = !itself && !(same_person && !same_clothes);
                    (valid, valid && same_person && same_clothes)
                }
            }
        })
        .unzip()
}

/// Average precision of a ranked list of relevance flags. Zero when the list
/// has no positive.
pub fn average_precision(ranked_positive: &[bool]) -> f64 {
    let mut hits = 0usize;
    let mut total = 0.0;
    for (r, &p) in ranked_positive.iter().enumerate() {
        if p {
            hits += 1;
            total += hits as f64 / (r + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        total / hits as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub map: f64,
    pub top1: f64,
    /// One entry per query; `None` for queries without any valid positive.
    pub per_query_ap: Vec<Option<f64>>,
    pub num_valid_queries: usize,
    pub num_queries: usize,
}

pub fn evaluate(
    queries: &[LabeledFeature],
    gallery: &[LabeledFeature],
    protocol: RetrievalProtocol,
) -> Result<EvalResult> {
    if queries.is_empty() {
        return Err(Error::input("query set is empty"));
    }
    let mut per_query_ap = Vec::with_capacity(queries.len());
    let mut ap_sum = 0.0;
    let mut top1_hits = 0usize;
    let mut valid_queries = 0usize;
    for q in queries {
        let order = rank_gallery(q, gallery)?;
        let (valid, positive) = protocol_mask(q, gallery, protocol);
        let ranked: Vec<bool> = order
            .iter()
            .filter(|&&i| valid[i])
            .map(|&i| positive[i])
            .collect();
        if !ranked.iter().any(|&p| p) {
            per_query_ap.push(None);
            continue;
        }
        let ap = average_precision(&ranked);
        valid_queries += 1;
        ap_sum += ap;
        if ranked[0] {
            top1_hits += 1;
        }
        per_query_ap.push(Some(ap));
    }
    let (map, top1) = if valid_queries == 0 {
        (0.0, 0.0)
    } else {
        (
            ap_sum / valid_queries as f64,
            top1_hits as f64 / valid_queries as f64,
        )
    };
    Ok(EvalResult {
        map,
        top1,
        per_query_ap,
        num_valid_queries: valid_queries,
        num_queries: queries.len(),
    })
}

/// One synthesized sample: its feature, the feature of the original subject
/// image, and the feature of the clothing source image.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisTriple {
    pub synthetic: Vec<f64>,
    pub original: Vec<f64>,
    pub clothing_source: Vec<f64>,
}

/// Fraction of synthesized samples closer to their clothing source than to
/// the original subject. Ties count as failures.
pub fn ccsr(triples: &[SynthesisTriple]) -> Result<f64> {
    if triples.is_empty() {
        return Err(Error::input("no synthetic samples to score"));
    }
    let mut successes = 0usize;
    for t in triples {
        check_unit(&t.synthetic)?;
        check_unit(&t.original)?;
        check_unit(&t.clothing_source)?;
        if t.original.len() != t.synthetic.len() || t.clothing_source.len() != t.synthetic.len() {
            return Err(Error::input("feature dimensions differ within a triple"));
        }
        if euclidean(&t.synthetic, &t.clothing_source) < euclidean(&t.synthetic, &t.original) {
            successes += 1;
        }
    }
    Ok(successes as f64 / triples.len() as f64)
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "objective vectors have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Pareto dominance for minimization.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    check_lengths(a, b)?;
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Greater) | None => return Ok(false),
            Some(Ordering::Less) => strict = true,
            Some(Ordering::Equal) => {}
        }
    }
    Ok(strict)
}

/// `a <= b + tol` in every component: `a` dominates or equals `b` up to `tol`.
pub fn dominates_or_equal_within(a: &[f64], b: &[f64], tol: f64) -> Result<bool> {
    check_lengths(a, b)?;
    Ok(a.iter().zip(b).all(|(x, y)| *x <= y + tol))
}

/// Indices of the non-dominated points, in input order. Duplicates are all
/// kept.
pub fn pareto_front(points: &[Vec<f64>]) -> Result<Vec<usize>> {
    if let Some(first) = points.first() {
        for p in points {
            check_lengths(first, p)?;
        }
    }
    let mut front = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            if i != j && dominates(q, p)? {
                continue 'outer;
            }
        }
        front.push(i);
    }
    Ok(front)
}

/// Writes features as CSV with header `person_id, clothes_id, source, f0..`.
pub fn write_features<W: Write>(writer: W, features: &[LabeledFeature]) -> Result<()> {
    let rows: Vec<(usize, usize, Source, &[f64])> = features
        .iter()
        .map(|f| (f.person_id, f.clothes_id, f.source, f.feature.as_slice()))
        .collect();
    crate::simulator::write_labeled_rows(writer, 'f', &rows)
}

/// Reads a feature CSV; every feature must be unit-norm.
pub fn read_features<R: Read>(reader: R) -> Result<Vec<LabeledFeature>> {
    crate::simulator::read_labeled_rows(reader, 'f')?
        .into_iter()
        .map(|(p, c, s, v)| LabeledFeature::new(p, c, s, v))
        .collect()
}

//! Preference vectors in the (same-clothes, clothes-changing) loss plane and
//! the sub-region constraints they induce.
//!
//! A set of `n` unit vectors partitions the non-negative quadrant of the
//! `(L_sc, L_cc)` plane into cones; the cone of the chosen vector `p_k`
//! holds the loss vectors whose projection on `p_k` is largest. Membership is
//! the linear test `c_j = (p_j - p_k) . L <= 0` for every `j`. Because each
//! constraint is linear in the losses, its gradient is a fixed combination of
//! the objective gradients and everything below runs on Gram matrices.
//!
//! The identity loss never enters a constraint: for three objectives the
//! preference plane is spanned by objectives 1 and 2, for two objectives by 0
//! and 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minnorm::{min_norm_simplex, GramMatrix, DEFAULT_MAX_ITER};

const UNIT_TOL: f64 = 1e-9;
const MIN_ANGLE_GAP: f64 = 1e-6;

/// Unit direction `(p_sc, p_cc)` with non-negative components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceVector {
    sc: f64,
    cc: f64,
}

impl PreferenceVector {
    pub fn new(sc: f64, cc: f64) -> Result<Self> {
        if !(sc >= 0.0 && cc >= 0.0) {
            return Err(Error::input(format!(
                "preference components must be non-negative, got ({sc}, {cc})"
            )));
        }
        if ((sc * sc + cc * cc).sqrt() - 1.0).abs() > UNIT_TOL {
            return Err(Error::input(format!("preference ({sc}, {cc}) is not unit length")));
        }
        Ok(Self { sc, cc })
    }

    /// Vector at `degrees` from the `L_sc` axis toward the `L_cc` axis.
    pub fn from_degrees(degrees: f64) -> Result<Self> {
        if !(0.0..=90.0).contains(&degrees) {
            return Err(Error::input(format!("preference angle {degrees} outside [0, 90]")));
        }
        let rad = degrees.to_radians();
        // cos(90 deg) evaluates to 6e-17; pin the axis endpoints exactly
        let (sc, cc) = if degrees == 90.0 {
            (0.0, 1.0)
        } else if degrees == 0.0 {
            (1.0, 0.0)
        } else {
            (rad.cos(), rad.sin())
        };
        Ok(Self { sc, cc })
    }

    pub fn sc(&self) -> f64 {
        self.sc
    }

    pub fn cc(&self) -> f64 {
        self.cc
    }

    /// Angle from the `L_sc` axis in radians.
    pub fn angle(&self) -> f64 {
        self.cc.atan2(self.sc)
    }
}

/// Ordered preference vectors plus the index of the one selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSet {
    vectors: Vec<PreferenceVector>,
    chosen: Option<usize>,
}

impl PreferenceSet {
    /// Vectors must be sorted by ascending angle, pairwise separated by at
    /// least 1e-6 rad, and at least two in number.
    pub fn new(vectors: Vec<PreferenceVector>, chosen: Option<usize>) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::input("a preference set needs at least two vectors"));
        }
        for w in vectors.windows(2) {
            if w[1].angle() - w[0].angle() < MIN_ANGLE_GAP {
                return Err(Error::input(
                    "preference vectors must be strictly sorted by angle and pairwise distinct",
                ));
            }
        }
        let set = Self {
            vectors,
            chosen: None,
        };
        match chosen {
            Some(k) => set.with_chosen(k),
            None => Ok(set),
        }
    }

    pub fn with_chosen(mut self, k: usize) -> Result<Self> {
        if k >= self.vectors.len() {
            return Err(Error::input(format!(
                "preference index {k} out of range for {} vectors",
                self.vectors.len()
            )));
        }
        self.chosen = Some(k);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[PreferenceVector] {
        &self.vectors
    }

    pub fn chosen(&self) -> Option<usize> {
        self.chosen
    }

    fn require_chosen(&self) -> Result<usize> {
        self.chosen
            .ok_or_else(|| Error::contract("no preference vector has been chosen"))
    }
}

/// `n` vectors at evenly spaced angles `j * 90 / (n - 1)` degrees.
pub fn make_uniform_preferences(n: usize) -> Result<PreferenceSet> {
    if n < 2 {
        return Err(Error::input(format!("need at least 2 preference vectors, got {n}")));
    }
    let vectors = (0..n)
        .map(|j| PreferenceVector::from_degrees(j as f64 * 90.0 / (n - 1) as f64))
        .collect::<Result<Vec<_>>>()?;
    PreferenceSet::new(vectors, None)
}

/// Indices of the `(L_sc, L_cc)` pair inside an objective vector of length `m`.
pub fn plane_axes(m: usize) -> Result<(usize, usize)> {
    match m {
        2 => Ok((0, 1)),
        3 => Ok((1, 2)),
        _ => Err(Error::input(format!(
            "preferences need 2 or 3 objectives, got {m}"
        ))),
    }
}

/// Constraint values `c_j = (p_j - p_k) . L` for every preference `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintValues(pub Vec<f64>);

impl ConstraintValues {
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn constraint_values(prefs: &PreferenceSet, losses: &[f64]) -> Result<ConstraintValues> {
    let k = prefs.require_chosen()?;
    let (isc, icc) = plane_axes(losses.len())?;
    let pk = prefs.vectors[k];
    let c = prefs
        .vectors
        .iter()
        .enumerate()
        .map(|(j, pj)| {
            if j == k {
                0.0
            } else {
                (pj.sc - pk.sc) * losses[isc] + (pj.cc - pk.cc) * losses[icc]
            }
        })
        .collect();
    Ok(ConstraintValues(c))
}

/// True when every constraint is at most `tol`.
pub fn in_subregion(c: &ConstraintValues, tol: f64) -> bool {
    c.0.iter().all(|&v| v <= tol)
}

/// Coefficients expressing the gradient of constraint `j` as a combination
/// of the `m` objective gradients.
pub fn constraint_gradient_coefficients(
    prefs: &PreferenceSet,
    j: usize,
    m: usize,
) -> Result<Vec<f64>> {
    let k = prefs.require_chosen()?;
    if j >= prefs.len() {
        return Err(Error::input(format!(
            "constraint index {j} out of range for {} preferences",
            prefs.len()
        )));
    }
    let (isc, icc) = plane_axes(m)?;
    let mut coef = vec![0.0; m];
    if j != k {
        coef[isc] = prefs.vectors[j].sc - prefs.vectors[k].sc;
        coef[icc] = prefs.vectors[j].cc - prefs.vectors[k].cc;
    }
    Ok(coef)
}

/// Constraints that are violated or tight, excluding the chosen one.
pub fn active_set(prefs: &PreferenceSet, c: &ConstraintValues) -> Result<Vec<usize>> {
    let k = prefs.require_chosen()?;
    Ok(c.0
        .iter()
        .enumerate()
        .filter(|&(j, &v)| j != k && v >= 0.0)
        .map(|(j, _)| j)
        .collect())
}

/// Weights over the active constraint gradients for the projection stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionWeights {
    /// One entry per preference; zero outside the active set.
    pub beta: Vec<f64>,
    pub norm_sq: f64,
    /// The direction `sum_j beta_j grad C_j` expressed over objective gradients.
    pub objective_coefficients: Vec<f64>,
}

/// Min-norm combination of the active constraint gradients.
pub fn projection_weights(
    g: &GramMatrix,
    prefs: &PreferenceSet,
    c: &ConstraintValues,
    tol: f64,
) -> Result<ProjectionWeights> {
    let m = g.size();
    if c.0.len() != prefs.len() {
        return Err(Error::input("constraint values do not match the preference set"));
    }
    let active = active_set(prefs, c)?;
    if active.is_empty() {
        return Err(Error::contract(
            "projection requested with no violated constraint; check in_subregion first",
        ));
    }
    let coefs = active
        .iter()
        .map(|&j| constraint_gradient_coefficients(prefs, j, m))
        .collect::<Result<Vec<_>>>()?;
    let cg = g.transform(&coefs);
    let (weights, norm_sq) = if active.len() == 1 {
        (vec![1.0], cg.get(0, 0))
    } else {
        let w = min_norm_simplex(&cg, tol, DEFAULT_MAX_ITER)?;
        (w.alpha, w.norm_sq)
    };
    let mut beta = vec![0.0; prefs.len()];
    let mut objective_coefficients = vec![0.0; m];
    for ((&j, &b), coef) in active.iter().zip(&weights).zip(&coefs) {
        beta[j] = b;
        for (o, a) in objective_coefficients.iter_mut().zip(coef) {
            *o += b * a;
        }
    }
    Ok(ProjectionWeights {
        beta,
        norm_sq,
        objective_coefficients,
    })
}

/// How the raw combined weights were brought back onto the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjustment {
    None,
    /// Non-negative weights divided by their sum; the direction is unchanged.
    Rescaled,
    /// Euclidean projection onto the simplex (some weight was negative).
    Projected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedWeights {
    /// Final weights over the objective gradients, on the simplex.
    pub gamma: Vec<f64>,
    /// Objective part of the joint solution.
    pub alpha: Vec<f64>,
    /// Constraint part of the joint solution, one entry per preference.
    pub beta: Vec<f64>,
    pub active_set: Vec<usize>,
    /// Squared norm of the joint min-norm direction.
    pub norm_sq: f64,
    pub adjustment: Adjustment,
}

/// Joint min-norm over the objective gradients and the active constraint
/// gradients, folded back into weights over the objectives:
/// `gamma_i = alpha_i + sum_j beta_j (p_j - p_k)_i`.
///
/// With no active constraint this is exactly [`min_norm_simplex`].
pub fn combined_weights(
    g: &GramMatrix,
    prefs: &PreferenceSet,
    c: &ConstraintValues,
    tol: f64,
) -> Result<CombinedWeights> {
    let m = g.size();
    if c.0.len() != prefs.len() {
        return Err(Error::input("constraint values do not match the preference set"));
    }
    if (0..m).all(|i| g.get(i, i) == 0.0) {
        return Err(Error::numeric("all objective gradients are zero"));
    }
    let active = active_set(prefs, c)?;
    let mut rows: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            e
        })
        .collect();
    for &j in &active {
        rows.push(constraint_gradient_coefficients(prefs, j, m)?);
    }

    let joint = if active.is_empty() {
        min_norm_simplex(g, tol, DEFAULT_MAX_ITER)?
    } else {
        min_norm_simplex(&g.transform(&rows), tol, DEFAULT_MAX_ITER)?
    };

    let alpha = joint.alpha[..m].to_vec();
    let mut beta = vec![0.0; prefs.len()];
    let mut raw = alpha.clone();
    for (r, &j) in active.iter().enumerate() {
        let b = joint.alpha[m + r];
        beta[j] = b;
        for (gi, a) in raw.iter_mut().zip(&rows[m + r]) {
            *gi += b * a;
        }
    }
    let (gamma, adjustment) = finalize(raw);
    Ok(CombinedWeights {
        gamma,
        alpha,
        beta,
        active_set: active,
        norm_sq: joint.norm_sq,
        adjustment,
    })
}

fn finalize(raw: Vec<f64>) -> (Vec<f64>, Adjustment) {
    let sum: f64 = raw.iter().sum();
    let non_negative = raw.iter().all(|&v| v >= 0.0);
    if non_negative && (sum - 1.0).abs() <= 1e-12 {
        (raw, Adjustment::None)
    } else if non_negative && sum > 0.0 {
        (raw.iter().map(|v| v / sum).collect(), Adjustment::Rescaled)
    } else {
        (project_to_simplex(&raw), Adjustment::Projected)
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

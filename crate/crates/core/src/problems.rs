//! Analytic multi-objective benchmark problems.
//!
//! Each problem has hand-derived gradients and a known Pareto set, so claims
//! about the descent directions and the preference constraints can be checked
//! against closed-form answers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minnorm::{dot, gram, min_norm_simplex, GradientSet, DEFAULT_MAX_ITER};

/// Objective values, one per objective. For the three-objective ReID layout
/// index 0 is the identity loss, 1 the same-clothes loss and 2 the
/// clothes-changing loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(pub Vec<f64>);

impl ObjectiveVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Deref for ObjectiveVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A differentiable vector-valued objective over `R^d`.
pub trait MultiObjectiveProblem {
    fn name(&self) -> &str;

    fn num_objectives(&self) -> usize;

    fn dim(&self) -> usize;

    fn evaluate(&self, theta: &[f64]) -> Result<ObjectiveVector>;

    fn gradients(&self, theta: &[f64]) -> Result<GradientSet>;

    fn evaluate_with_gradients(&self, theta: &[f64]) -> Result<(ObjectiveVector, GradientSet)> {
        Ok((self.evaluate(theta)?, self.gradients(theta)?))
    }

    /// Description of the Pareto set, when known in closed form.
    fn front(&self) -> Option<&FrontDescriptor> {
        None
    }

    /// Per-coordinate box `[lo, hi]` on which values and gradients are finite
    /// and from which start points are drawn.
    fn domain(&self) -> (f64, f64) {
        (-2.0, 2.0)
    }

    /// Called by the optimizer before evaluating iteration `iter`. Problems
    /// with resampled data switch batches here; analytic problems ignore it.
    fn begin_iteration(&mut self, _iter: usize) -> Result<()> {
        Ok(())
    }
}

impl<P: MultiObjectiveProblem + ?Sized> MultiObjectiveProblem for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn num_objectives(&self) -> usize {
        (**self).num_objectives()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn evaluate(&self, theta: &[f64]) -> Result<ObjectiveVector> {
        (**self).evaluate(theta)
    }
    fn gradients(&self, theta: &[f64]) -> Result<GradientSet> {
        (**self).gradients(theta)
    }
    fn evaluate_with_gradients(&self, theta: &[f64]) -> Result<(ObjectiveVector, GradientSet)> {
        (**self).evaluate_with_gradients(theta)
    }
    fn front(&self) -> Option<&FrontDescriptor> {
        (**self).front()
    }
    fn domain(&self) -> (f64, f64) {
        (**self).domain()
    }
    fn begin_iteration(&mut self, iter: usize) -> Result<()> {
        (**self).begin_iteration(iter)
    }
}

/// Pareto set of a benchmark in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrontDescriptor {
    /// Straight segment between two parameter vectors. `convex_front` tells
    /// whether its image in objective space is a convex curve.
    Segment {
        from: Vec<f64>,
        to: Vec<f64>,
        convex_front: bool,
    },
    /// Convex hull of three parameter vectors.
    Triangle { vertices: [Vec<f64>; 3] },
}

impl FrontDescriptor {
    /// Uniform samples from the Pareto set.
    pub fn sample_parameters<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| match self {
                FrontDescriptor::Segment { from, to, .. } => {
                    let t: f64 = rng.random();
                    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
                }
                FrontDescriptor::Triangle { vertices } => {
                    let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
                    if u + v > 1.0 {
                        u = 1.0 - u;
                        v = 1.0 - v;
                    }
                    let w = 1.0 - u - v;
                    (0..vertices[0].len())
                        .map(|i| u * vertices[0][i] + v * vertices[1][i] + w * vertices[2][i])
                        .collect()
                }
            })
            .collect()
    }

    /// Euclidean distance from `theta` to the Pareto set.
    pub fn distance(&self, theta: &[f64]) -> Result<f64> {
        let points: Vec<&Vec<f64>> = match self {
            FrontDescriptor::Segment { from, to, .. } => vec![from, to],
            FrontDescriptor::Triangle { vertices } => vertices.iter().collect(),
        };
        // nearest point of a convex hull = min-norm point of the shifted vertices
        let shifted: Vec<Vec<f64>> = points
            .iter()
            .map(|p| p.iter().zip(theta).map(|(a, t)| a - t).collect())
            .collect();
        let w = min_norm_simplex(&gram(&GradientSet::from_rows(&shifted)?)?, 1e-14, DEFAULT_MAX_ITER)?;
        Ok(w.norm_sq.sqrt())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_theta(theta: &[f64], d: usize) -> Result<()> {
    if theta.len() != d {
        return Err(Error::input(format!(
            "parameter vector has length {} (expected {d})",
            theta.len()
        )));
    }
    Ok(())
}

/// `f_i(theta) = |theta - c_i|^2` for a list of centers.
#[derive(Debug, Clone)]
pub struct SquaredDistances {
    name: String,
    centers: Vec<Vec<f64>>,
    front: FrontDescriptor,
}

impl SquaredDistances {
    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }
}

impl MultiObjectiveProblem for SquaredDistances {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_objectives(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<ObjectiveVector> {
        check_theta(theta, self.dim())?;
        Ok(ObjectiveVector(
            self.centers.iter().map(|c| sq_dist(theta, c)).collect(),
        ))
    }

    fn gradients(&self, theta: &[f64]) -> Result<GradientSet> {
        check_theta(theta, self.dim())?;
        let rows: Vec<Vec<f64>> = self
            .centers
            .iter()
            .map(|c| theta.iter().zip(c).map(|(t, ci)| 2.0 * (t - ci)).collect())
            .collect();
        GradientSet::from_rows(&rows)
    }

    fn front(&self) -> Option<&FrontDescriptor> {
        Some(&self.front)
    }
}

/// Two squared distances to distinct points `a` and `b`; the Pareto set is
/// the segment `[a, b]` and the front is convex.
pub fn quadratic_biobjective(a: &[f64], b: &[f64]) -> Result<SquaredDistances> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::input("centers must be non-empty and of equal length"));
    }
    if a == b {
        return Err(Error::input("centers of the quadratic bi-objective must differ"));
    }
    Ok(SquaredDistances {
        name: "quadratic".into(),
        centers: vec![a.to_vec(), b.to_vec()],
        front: FrontDescriptor::Segment {
            from: a.to_vec(),
            to: b.to_vec(),
            convex_front: true,
        },
    })
}

/// Three squared distances to affinely independent centers; the Pareto set
/// is their triangle.
pub fn triobjective_quadratic(c1: &[f64], c2: &[f64], c3: &[f64]) -> Result<SquaredDistances> {
    let d = c1.len();
    if d < 2 || c2.len() != d || c3.len() != d {
        return Err(Error::input("centers must share a dimension of at least 2"));
    }
    let e1: Vec<f64> = c2.iter().zip(c1).map(|(a, b)| a - b).collect();
    let e2: Vec<f64> = c3.iter().zip(c1).map(|(a, b)| a - b).collect();
    let area_sq = dot(&e1, &e1) * dot(&e2, &e2) - dot(&e1, &e2).powi(2);
    if area_sq <= 1e-12 * (dot(&e1, &e1) * dot(&e2, &e2)).max(1e-300) {
        return Err(Error::input("centers are collinear"));
    }
    Ok(SquaredDistances {
        name: "triobjective".into(),
        centers: vec![c1.to_vec(), c2.to_vec(), c3.to_vec()],
        front: FrontDescriptor::Triangle {
            vertices: [c1.to_vec(), c2.to_vec(), c3.to_vec()],
        },
    })
}

/// `f1 = 1 - exp(-|theta - o|^2)`, `f2 = 1 - exp(-|theta + o|^2)` with
/// `o = (1/sqrt(d), ..., 1/sqrt(d))`. The Pareto set is the segment from `o`
/// to `-o`, and its image is concave, so linear scalarization only reaches
/// the two ends of the front.
#[derive(Debug, Clone)]
pub struct NonconvexBiobjective {
    offset: Vec<f64>,
    front: FrontDescriptor,
}

pub fn nonconvex_biobjective(d: usize) -> Result<NonconvexBiobjective> {
    if d == 0 {
        return Err(Error::input("dimension must be at least 1"));
    }
    let offset = vec![1.0 / (d as f64).sqrt(); d];
    let neg: Vec<f64> = offset.iter().map(|v| -v).collect();
    Ok(NonconvexBiobjective {
        front: FrontDescriptor::Segment {
            from: offset.clone(),
            to: neg,
            convex_front: false,
        },
        offset,
    })
}

impl NonconvexBiobjective {
    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// Parameter on the Pareto set at position `t in [-1, 1]` (`t = 1` is the
    /// minimizer of `f1`).
    pub fn pareto_point(&self, t: f64) -> Vec<f64> {
        self.offset.iter().map(|o| t * o).collect()
    }

    fn sq_dists(&self, theta: &[f64]) -> (f64, f64) {
        let mut r1 = 0.0;
        let mut r2 = 0.0;
        for (t, o) in theta.iter().zip(&self.offset) {
            r1 += (t - o) * (t - o);
            r2 += (t + o) * (t + o);
        }
        (r1, r2)
    }
}

impl MultiObjectiveProblem for NonconvexBiobjective {
    fn name(&self) -> &str {
        "nonconvex"
    }

    fn num_objectives(&self) -> usize {
        2
    }

    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<ObjectiveVector> {
        check_theta(theta, self.dim())?;
        let (r1, r2) = self.sq_dists(theta);
        Ok(ObjectiveVector(vec![-(-r1).exp_m1(), -(-r2).exp_m1()]))
    }

    fn gradients(&self, theta: &[f64]) -> Result<GradientSet> {
        check_theta(theta, self.dim())?;
        let (r1, r2) = self.sq_dists(theta);
        let (e1, e2) = ((-r1).exp(), (-r2).exp());
        let g1 = theta
            .iter()
            .zip(&self.offset)
            .map(|(t, o)| 2.0 * (t - o) * e1)
            .collect();
        let g2 = theta
            .iter()
            .zip(&self.offset)
            .map(|(t, o)| 2.0 * (t + o) * e2)
            .collect();
        GradientSet::from_rows(&[g1, g2])
    }

    fn front(&self) -> Option<&FrontDescriptor> {
        Some(&self.front)
    }
}

/// Largest relative deviation between analytic gradients and central
/// differences with step `h`, over every objective and coordinate. The
/// denominator is `max(|analytic|, 1e-8)`.
pub fn finite_difference_check<P: MultiObjectiveProblem + ?Sized>(
    problem: &P,
    theta: &[f64],
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::input("finite-difference step must be positive"));
    }
    let analytic = problem.gradients(theta)?;
    let mut worst: f64 = 0.0;
    let mut probe = theta.to_vec();
    for k in 0..theta.len() {
        probe[k] = theta[k] + h;
        let plus = problem.evaluate(&probe)?;
        probe[k] = theta[k] - h;
        let minus = problem.evaluate(&probe)?;
        probe[k] = theta[k];
        for i in 0..analytic.rows() {
            let numeric = (plus[i] - minus[i]) / (2.0 * h);
            let exact = analytic.row(i)[k];
            worst = worst.max((numeric - exact).abs() / exact.abs().max(1e-8));
        }
    }
    Ok(worst)
}

//! Coresets of clustering features for k-clustering under `m`-similar
//! Bregman divergences.
//!
//! The input is split recursively along optimal k-clusterings until every
//! part is pseudo-random (its 1-clustering is at most `1 + f₁` times the
//! summed 1-clusterings of its parts) or the depth limit `ν` is reached.
//! Each final part is replaced by its clustering feature.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coreset::{ceil_tol, derive_seed};
use crate::error::{invalid_argument, invalid_input, Error, Result};
use crate::linalg::{CenterSet, PointSet};

/// Largest depth limit used; larger formula values are clamped with a warning.
pub const NU_CAP: usize = 12;
/// Largest part solved exhaustively inside the recursion.
pub const EXACT_PART_MAX: usize = 12;

type Evaluator = Arc<dyn Fn(ArrayView1<'_, f64>, ArrayView1<'_, f64>) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum DivergenceKind {
    SquaredEuclidean,
    /// `‖B(p - q)‖²`.
    Mahalanobis(Array2<f64>),
    /// A user-supplied Bregman divergence with a declared Mahalanobis sandwich.
    Custom(Evaluator),
}

impl fmt::Debug for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivergenceKind::SquaredEuclidean => write!(f, "SquaredEuclidean"),
            DivergenceKind::Mahalanobis(b) => write!(f, "Mahalanobis({b:?})"),
            DivergenceKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// `d_φ` with `m · d_B(p, q) <= d_φ(p, q) <= d_B(p, q)`.
#[derive(Clone, Debug)]
pub struct Divergence {
    kind: DivergenceKind,
    bound: Option<Array2<f64>>,
    similarity: f64,
}

impl Divergence {
    pub fn squared_euclidean() -> Self {
        Divergence {
            kind: DivergenceKind::SquaredEuclidean,
            bound: None,
            similarity: 1.0,
        }
    }

    pub fn mahalanobis(b: Array2<f64>) -> Result<Self> {
        check_matrix(&b)?;
        Ok(Divergence {
            kind: DivergenceKind::Mahalanobis(b.clone()),
            bound: Some(b),
            similarity: 1.0,
        })
    }

    /// A custom divergence declaring its sandwich `m · ‖B(p-q)‖² <= d_φ <= ‖B(p-q)‖²`.
    pub fn custom<F>(f: F, b: Array2<f64>, similarity: f64) -> Result<Self>
    where
        F: Fn(ArrayView1<'_, f64>, ArrayView1<'_, f64>) -> f64 + Send + Sync + 'static,
    {
        check_matrix(&b)?;
        if !(similarity > 0.0 && similarity <= 1.0) {
            return invalid_argument(format!("similarity must lie in (0, 1], got {similarity}"));
        }
        Ok(Divergence {
            kind: DivergenceKind::Custom(Arc::new(f)),
            bound: Some(b),
            similarity,
        })
    }

    pub fn kind(&self) -> &DivergenceKind {
        &self.kind
    }

    pub fn similarity(&self) -> f64 {
        self.similarity
    }

    #[inline]
    pub fn eval(&self, p: ArrayView1<'_, f64>, q: ArrayView1<'_, f64>) -> f64 {
        match &self.kind {
            DivergenceKind::SquaredEuclidean => crate::linalg::sq_dist(p, q),
            DivergenceKind::Mahalanobis(b) => mahalanobis(b, p, q),
            DivergenceKind::Custom(f) => f(p, q),
        }
    }

    /// The declared upper bound `d_B(p, q)`.
    pub fn bound(&self, p: ArrayView1<'_, f64>, q: ArrayView1<'_, f64>) -> f64 {
        match &self.bound {
            Some(b) => mahalanobis(b, p, q),
            None => crate::linalg::sq_dist(p, q),
        }
    }

    /// Checks the declared sandwich on `samples` random pairs of rows and
    /// returns the number of violations (logged, not treated as an error).
    pub fn verify_similarity(&self, points: &PointSet, samples: usize, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bad = 0;
        for _ in 0..samples {
            let p = points.row(rng.random_range(0..points.n()));
            let q = points.row(rng.random_range(0..points.n()));
            let v = self.eval(p, q);
            let ub = self.bound(p, q);
            let tol = 1e-9 * ub.abs() + 1e-12;
            if v < self.similarity * ub - tol || v > ub + tol {
                bad += 1;
            }
        }
        if bad > 0 {
            log::warn!("divergence violates its declared similarity on {bad} of {samples} sampled pairs");
        }
        bad
    }

    /// `min_c d_φ(x, c)` and the minimizing index (lowest index on ties).
    pub fn nearest(&self, x: ArrayView1<'_, f64>, centers: &CenterSet) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (c, center) in centers.centers().outer_iter().enumerate() {
            let v = self.eval(x, center);
            if v < best.1 {
                best = (c, v);
            }
        }
        best
    }

    /// `Σ w_x min_c d_φ(x, c)`.
    pub fn cost(&self, points: &PointSet, centers: &CenterSet) -> Result<f64> {
        if centers.d() != points.d() {
            return invalid_argument("centers and points differ in dimension");
        }
        Ok((0..points.n())
            .map(|i| points.weight(i) * self.nearest(points.row(i), centers).1)
            .sum())
    }

    /// `Σ w_x d_φ(x, μ)` with the weighted mean `μ`, the optimal 1-clustering cost.
    pub fn opt1(&self, points: &PointSet) -> f64 {
        let mu = points.mean();
        (0..points.n())
            .map(|i| points.weight(i) * self.eval(points.row(i), mu.view()))
            .sum()
    }
}

fn check_matrix(b: &Array2<f64>) -> Result<()> {
    if b.nrows() != b.ncols() || b.nrows() == 0 {
        return invalid_argument("Mahalanobis matrix must be square and non-empty");
    }
    if b.iter().any(|x| !x.is_finite()) {
        return invalid_input("Mahalanobis matrix has non-finite entries");
    }
    let f = crate::linalg::svd(b.view())?;
    if f.sigma[f.sigma.len() - 1] <= 1e-12 * f.sigma[0] {
        return invalid_argument("Mahalanobis matrix is singular");
    }
    Ok(())
}

fn mahalanobis(b: &Array2<f64>, p: ArrayView1<'_, f64>, q: ArrayView1<'_, f64>) -> f64 {
    let diff = &p - &q;
    let y = b.dot(&diff);
    y.dot(&y)
}

/// `(centroid, weight, internal cost)` of a point set.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusteringFeature {
    pub centroid: Array1<f64>,
    pub weight: f64,
    pub internal_cost: f64,
}

impl ClusteringFeature {
    pub fn new(centroid: Array1<f64>, weight: f64, internal_cost: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return invalid_input(format!("feature weight must be positive, got {weight}"));
        }
        if !(internal_cost >= 0.0 && internal_cost.is_finite()) {
            return invalid_input(format!("internal cost must be non-negative, got {internal_cost}"));
        }
        Ok(ClusteringFeature {
            centroid,
            weight,
            internal_cost,
        })
    }

    pub fn of(points: &PointSet, div: &Divergence) -> Result<Self> {
        ClusteringFeature::new(points.mean(), points.total_weight(), div.opt1(points).max(0.0))
    }
}

/// `Δ + w · min_c d_φ(μ, c)`.
pub fn cf_cost(cf: &ClusteringFeature, centers: &CenterSet, div: &Divergence) -> Result<f64> {
    if centers.d() != cf.centroid.len() {
        return invalid_argument("centers and feature differ in dimension");
    }
    Ok(cf.internal_cost + cf.weight * div.nearest(cf.centroid.view(), centers).1)
}

pub fn cf_total_cost(cfs: &[ClusteringFeature], centers: &CenterSet, div: &Divergence) -> Result<f64> {
    cfs.iter().map(|cf| cf_cost(cf, centers, div)).sum()
}

/// `f₁(ε) = 1 / (1 + 4/(m·ε))²`.
pub fn f1(eps: f64, m: f64) -> f64 {
    1.0 / (1.0 + 4.0 / (m * eps)).powi(2)
}

/// `(f₁(ε), ν)` with `ν = ⌈log(1/f₃(ε/2)) / log(1 + f₁(ε/2))⌉` and `f₃ = f₁`.
/// `ν` is not capped here.
pub fn niceness_thresholds(eps: f64, m: f64) -> Result<(f64, usize)> {
    if !(eps > 0.0 && eps < 1.0) && eps != 1.0 {
        return invalid_argument(format!("epsilon must lie in (0, 1], got {eps}"));
    }
    if !(m > 0.0 && m <= 1.0) {
        return invalid_argument(format!("similarity must lie in (0, 1], got {m}"));
    }
    let half = f1(eps / 2.0, m);
    let nu = ceil_tol((1.0 / half).ln() / (1.0 + half).ln());
    Ok((f1(eps, m), nu))
}

/// How the recursion ended for a part.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafKind {
    PseudoRandom,
    DepthLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    /// Rows of the input belonging to this part.
    pub indices: Vec<usize>,
    pub depth: usize,
    pub kind: LeafKind,
}

/// k-clustering solver used inside the recursion: exhaustive for parts of at
/// most [`EXACT_PART_MAX`] points, Lloyd iteration under the divergence with
/// restarts otherwise.
#[derive(Clone, Copy, Debug)]
pub struct PartitionSolver {
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for PartitionSolver {
    fn default() -> Self {
        PartitionSolver {
            seed: 0,
            restarts: 5,
            max_iters: 50,
        }
    }
}

impl PartitionSolver {
    /// Labels of a (near) optimal k-clustering.
    pub fn partition(&self, points: &PointSet, k: usize, div: &Divergence) -> Result<Vec<usize>> {
        if k == 0 {
            return invalid_argument("k must be at least 1");
        }
        if k >= points.n() {
            return Ok((0..points.n()).collect());
        }
        if points.n() <= EXACT_PART_MAX {
            return Ok(exact_partition(points, k, div));
        }
        let mut best: Option<(f64, Vec<usize>)> = None;
        for r in 0..self.restarts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, r as u64));
            let labels = self.lloyd(points, k, div, &mut rng)?;
            let cost = partition_cost(points, &labels, k, div);
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, labels));
            }
        }
        Ok(best.expect("at least one restart").1)
    }

    fn lloyd(&self, points: &PointSet, k: usize, div: &Divergence, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        let n = points.n();
        let w = points.weight_vec();
        let first = match WeightedIndex::new(w.iter().copied()) {
            Ok(d) => d.sample(rng),
            Err(_) => rng.random_range(0..n),
        };
        let mut chosen = vec![first];
        let mut score: Vec<f64> = (0..n).map(|i| div.eval(points.row(i), points.row(first))).collect();
        while chosen.len() < k {
            let Ok(dist) = WeightedIndex::new(score.iter().zip(w.iter()).map(|(s, w)| s * w)) else {
                break;
            };
            let next = dist.sample(rng);
            chosen.push(next);
            for (i, s) in score.iter_mut().enumerate() {
                *s = s.min(div.eval(points.row(i), points.row(next)));
            }
        }
        let mut centers = CenterSet::new(points.rows().select(ndarray::Axis(0), &chosen))?;
        let mut labels: Vec<usize> = (0..n).map(|i| div.nearest(points.row(i), &centers).0).collect();
        for _ in 0..self.max_iters {
            let kk = centers.k();
            let mut c = crate::clustering::centroids_of(points, &labels, kk);
            for (b, mut row) in c.outer_iter_mut().enumerate() {
                if !labels.contains(&b) {
                    row.assign(&centers.centers().row(b));
                }
            }
            centers = CenterSet::new(c)?;
            let next: Vec<usize> = (0..n).map(|i| div.nearest(points.row(i), &centers).0).collect();
            if next == labels {
                break;
            }
            labels = next;
        }
        Ok(labels)
    }
}

fn partition_cost(points: &PointSet, labels: &[usize], k: usize, div: &Divergence) -> f64 {
    (0..k)
        .map(|b| {
            let idx: Vec<usize> = (0..points.n()).filter(|&i| labels[i] == b).collect();
            if idx.is_empty() {
                0.0
            } else {
                div.opt1(&points.select(&idx))
            }
        })
        .sum()
}

fn exact_partition(points: &PointSet, k: usize, div: &Divergence) -> Vec<usize> {
    fn rec(
        i: usize,
        used: usize,
        k: usize,
        labels: &mut Vec<usize>,
        best: &mut (f64, Vec<usize>),
        points: &PointSet,
        div: &Divergence,
    ) {
        if i == labels.len() {
            let cost = partition_cost(points, labels, used, div);
            if cost < best.0 {
                *best = (cost, labels.clone());
            }
            return;
        }
        for b in 0..(used + 1).min(k) {
            labels[i] = b;
            rec(i + 1, used.max(b + 1), k, labels, best, points, div);
        }
    }
    let mut labels = vec![0; points.n()];
    let mut best = (f64::INFINITY, vec![0; points.n()]);
    rec(0, 0, k, &mut labels, &mut best, points, div);
    best.1
}

/// Recursive splitting. A part becomes a leaf when `t >= ν` or when
/// `opt₁(A) <= (1 + f₁) · Σ opt₁(A_i)` for its k-clustering `A_1..A_k`.
/// Leaves partition the rows of `points`.
pub fn partition_helper(
    points: &PointSet,
    k: usize,
    t: usize,
    nu: usize,
    f1: f64,
    solver: &PartitionSolver,
    div: &Divergence,
) -> Result<Vec<Leaf>> {
    if t > nu {
        return invalid_argument(format!("level {t} exceeds the depth limit {nu}"));
    }
    let all: Vec<usize> = (0..points.n()).collect();
    let mut leaves = Vec::new();
    split(points, &all, k, t, nu, f1, solver, div, &mut leaves)?;
    Ok(leaves)
}

#[allow(clippy::too_many_arguments)]
fn split(
    points: &PointSet,
    idx: &[usize],
    k: usize,
    t: usize,
    nu: usize,
    f1: f64,
    solver: &PartitionSolver,
    div: &Divergence,
    out: &mut Vec<Leaf>,
) -> Result<()> {
    if t >= nu {
        out.push(Leaf {
            indices: idx.to_vec(),
            depth: t,
            kind: LeafKind::DepthLimit,
        });
        return Ok(());
    }
    let part = points.select(idx);
    let whole = div.opt1(&part);
    let labels = if part.n() <= 1 || whole <= 0.0 {
        vec![0; part.n()]
    } else {
        solver.partition(&part, k, div)?
    };
    let groups: Vec<Vec<usize>> = (0..k.max(1))
        .map(|b| (0..part.n()).filter(|&i| labels[i] == b).map(|i| idx[i]).collect::<Vec<_>>())
        .filter(|g| !g.is_empty())
        .collect();
    let children: f64 = groups.iter().map(|g| div.opt1(&points.select(g))).sum();
    if groups.len() <= 1 || whole <= (1.0 + f1) * children {
        out.push(Leaf {
            indices: idx.to_vec(),
            depth: t,
            kind: LeafKind::PseudoRandom,
        });
        return Ok(());
    }
    for g in &groups {
        split(points, g, k, t + 1, nu, f1, solver, div, out)?;
    }
    Ok(())
}

/// Depth limit actually used for `(ε, m)`: the formula value capped at [`NU_CAP`].
pub fn depth_limit(eps: f64, m: f64) -> Result<usize> {
    let (_, nu) = niceness_thresholds(eps, m)?;
    if nu > NU_CAP {
        log::warn!("depth limit {nu} exceeds {NU_CAP}; using {NU_CAP}");
    }
    Ok(nu.min(NU_CAP))
}

/// One clustering feature per leaf of the recursion run with `f₁(ε/2)`.
pub fn bregman_coreset(
    points: &PointSet,
    k: usize,
    eps: f64,
    div: &Divergence,
    solver: &PartitionSolver,
) -> Result<Vec<ClusteringFeature>> {
    if k == 0 {
        return invalid_argument("k must be at least 1");
    }
    if !(eps > 0.0 && eps < 1.0) {
        return invalid_argument(format!("epsilon must lie in (0, 1), got {eps}"));
    }
    if let Some(b) = &div.bound {
        if b.nrows() != points.d() {
            return invalid_argument("divergence and points differ in dimension");
        }
    }
    if matches!(div.kind, DivergenceKind::Custom(_)) {
        div.verify_similarity(points, 256, solver.seed);
    }
    let positive: Vec<usize> = (0..points.n()).filter(|&i| points.weight(i) > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::InvalidInput("total weight is zero".into()));
    }
    let points = points.select(&positive);
    if points.n() <= k {
        return (0..points.n())
            .map(|i| ClusteringFeature::new(points.row(i).to_owned(), points.weight(i), 0.0))
            .collect();
    }
    let m = div.similarity();
    let nu = depth_limit(eps, m)?;
    let leaves = partition_helper(&points, k, 0, nu, f1(eps / 2.0, m), solver, div)?;
    leaves
        .iter()
        .map(|leaf| ClusteringFeature::of(&points.select(&leaf.indices), div))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn f1_at_unit_similarity() {
        let (f, _) = niceness_thresholds(1.0, 1.0).unwrap();
        assert!((f - 0.04).abs() < 1e-15);
    }

    #[test]
    fn nu_example() {
        let (_, nu) = niceness_thresholds(1.0, 1.0).unwrap();
        let want = ((81f64).ln() / (82.0f64 / 81.0).ln()).ceil() as usize;
        assert_eq!(nu, want);
        assert_eq!(nu, 359);
    }

    #[test]
    fn cf_at_centroid_is_internal_cost() {
        let p = PointSet::new(array![[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]]).unwrap();
        let div = Divergence::squared_euclidean();
        let cf = ClusteringFeature::of(&p, &div).unwrap();
        let c = CenterSet::new(cf.centroid.clone().insert_axis(ndarray::Axis(0))).unwrap();
        assert!((cf_cost(&cf, &c, &div).unwrap() - cf.internal_cost).abs() < 1e-12);
    }

    #[test]
    fn singular_mahalanobis_rejected() {
        assert!(Divergence::mahalanobis(array![[1.0, 1.0], [1.0, 1.0]]).is_err());
    }
}

//! Rank-`m` reduction `A ↦ (A^(m), Δ)`, lifting of low-dimensional coresets,
//! and the reduce-summarize-solve approximation pipeline.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::clustering::{brute_force_kmeans, centroids_of, lloyd_restarts, pad_rows, BRUTE_FORCE_MAX_N};
use crate::coreset::{ceil_tol, derive_seed, Coreset};
use crate::error::{invalid_argument, Error, Result};
use crate::exec::Exec;
use crate::linalg::{
    dist2, leading_columns, orthonormalize, right_svd, weighted_fold, CenterSet, PointSet, QueryShape, Subspace,
};
use crate::sensitivity::SensitivityConfig;

/// Which target dimension formula to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceMode {
    /// `⌈8j/ε²⌉ - 1`: cost of every shape inside a `j`-subspace is kept within `ε`.
    General,
    /// `j + ⌈32j/ε²⌉ - 1`: safe to build an `ε/8` coreset on the result and lift it.
    CoresetLift,
    /// `k + ⌈72k/ε²⌉ - 1` (pass `j = k`).
    KMeans,
}

/// Target dimension before capping at `min(n, d)`.
pub fn target_dim(mode: ReduceMode, j: usize, eps: f64) -> usize {
    let j_f = j as f64;
    let e2 = eps * eps;
    let m = match mode {
        ReduceMode::General => ceil_tol(8.0 * j_f / e2).saturating_sub(1),
        ReduceMode::CoresetLift => j + ceil_tol(32.0 * j_f / e2) - 1,
        ReduceMode::KMeans => j + ceil_tol(72.0 * j_f / e2) - 1,
    };
    m.max(1)
}

/// `A^(m)` in coordinates of its top-`m` right singular vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedInstance {
    reduced_points: Array2<f64>,
    basis: Array2<f64>,
    delta: f64,
    weights: Option<Array1<f64>>,
}

impl ReducedInstance {
    /// `n x m` coordinates `A V^(m)`.
    pub fn reduced_points(&self) -> ArrayView2<'_, f64> {
        self.reduced_points.view()
    }

    /// `d x m` orthonormal basis `V^(m)`.
    pub fn basis(&self) -> ArrayView2<'_, f64> {
        self.basis.view()
    }

    /// `‖A - A^(m)‖²_F` (weighted).
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn m(&self) -> usize {
        self.basis.ncols()
    }

    pub fn d(&self) -> usize {
        self.basis.nrows()
    }

    /// The reduced coordinates with the input weights.
    pub fn reduced_point_set(&self) -> PointSet {
        make_set(self.reduced_points.clone(), self.weights.clone())
    }

    /// Rows of `A^(m)` in the ambient space.
    pub fn low_rank_rows(&self) -> Array2<f64> {
        self.reduced_points.dot(&self.basis.t())
    }

    pub fn low_rank_point_set(&self) -> PointSet {
        make_set(self.low_rank_rows(), self.weights.clone())
    }

    /// `dist²(A^(m), C) + Δ`.
    pub fn cost(&self, shape: &QueryShape) -> Result<f64> {
        Ok(dist2(&self.low_rank_point_set(), shape)? + self.delta)
    }

    /// Maps a shape expressed in reduced coordinates back to `R^d`.
    pub fn lift_shape(&self, shape: &QueryShape) -> Result<QueryShape> {
        if shape.ambient_dim() != self.m() {
            return invalid_argument("shape does not live in the reduced space");
        }
        let lift_flat = |s: &Subspace| {
            let basis = self.basis.dot(&s.basis());
            let offset = s.offset().map(|p| self.basis.dot(p));
            Subspace::new(basis, offset)
        };
        Ok(match shape {
            QueryShape::Centers(c) => QueryShape::Centers(CenterSet::new(c.centers().dot(&self.basis.t()))?),
            QueryShape::Subspace(s) => QueryShape::Subspace(lift_flat(s)?),
            QueryShape::Flats(f) => QueryShape::Flats(f.iter().map(lift_flat).collect::<Result<_>>()?),
        })
    }
}

fn make_set(rows: Array2<f64>, weights: Option<Array1<f64>>) -> PointSet {
    match weights {
        Some(w) => PointSet::with_weights(rows, w),
        None => PointSet::new(rows),
    }
    .expect("rows derived from a valid point set")
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid_argument(format!("epsilon must lie in (0, 1], got {eps}"));
    }
    Ok(())
}

/// Projects onto the top `m` right singular vectors, `m` from `mode` capped
/// at `min(n, d)`. Weighted inputs use the SVD of the folded matrix, which is
/// the SVD of the input with every point repeated by its weight.
pub fn reduce(points: &PointSet, j: usize, eps: f64, mode: ReduceMode) -> Result<ReducedInstance> {
    reduce_with(points, j, eps, mode, None)
}

/// Like [`reduce`], with an optional fixed target dimension replacing the formula.
pub fn reduce_with(
    points: &PointSet,
    j: usize,
    eps: f64,
    mode: ReduceMode,
    fixed_dim: Option<usize>,
) -> Result<ReducedInstance> {
    if j == 0 {
        return invalid_argument("j must be at least 1");
    }
    check_eps(eps)?;
    let m = fixed_dim.unwrap_or_else(|| target_dim(mode, j, eps)).max(1);
    reduce_to_rank(points, m.min(points.n()).min(points.d()))
}

/// Rank-`m` reduction for an explicit `1 <= m <= min(n, d)`.
pub fn reduce_to_rank(points: &PointSet, m: usize) -> Result<ReducedInstance> {
    let r = points.n().min(points.d());
    if m == 0 || m > r {
        return invalid_argument(format!("rank {m} outside [1, {r}]"));
    }
    let f = right_svd(weighted_fold(points).view())?;
    let basis = leading_columns(&f.v, m);
    Ok(ReducedInstance {
        reduced_points: points.rows().dot(&basis),
        basis,
        delta: f.tail_energy(m),
        weights: points.weights().cloned(),
    })
}

/// `ε · dist²(A, C) + (1 + 1/ε) · ‖A - B‖²_F`, which bounds
/// `|dist²(A, C) - dist²(B, C)|` for every shape `C`.
pub fn weak_triangle_gap(a: &PointSet, b: &PointSet, shape: &QueryShape, eps: f64) -> Result<f64> {
    if a.n() != b.n() || a.d() != b.d() {
        return invalid_argument("point sets must have the same shape");
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid_argument(format!("epsilon must be positive, got {eps}"));
    }
    let moved: f64 = (0..a.n())
        .map(|i| a.weight(i) * crate::linalg::sq_dist(a.row(i), b.row(i)))
        .sum();
    Ok(eps * dist2(a, shape)? + (1.0 + 1.0 / eps) * moved)
}

/// `(S V^(m)ᵀ, w, Δ′ + Δ)`: a coreset of the reduced points, mapped back.
pub fn lift_coreset(low: &Coreset, reduced: &ReducedInstance) -> Result<Coreset> {
    if low.d() != reduced.m() {
        return invalid_argument(format!(
            "coreset lives in R^{} but the reduction has m = {}",
            low.d(),
            reduced.m()
        ));
    }
    Coreset::new(
        low.points().dot(&reduced.basis.t()),
        low.weights().to_owned(),
        low.delta() + reduced.delta,
    )
}

/// Clustering problems solved by [`approx_solution`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    KMeans { k: usize },
    /// `k` affine flats of dimension `j`.
    AffineFlats { j: usize, k: usize },
}

impl Problem {
    /// Dimension of a linear subspace containing any solution.
    pub fn shape_dim(&self) -> usize {
        match *self {
            Problem::KMeans { k } => k,
            Problem::AffineFlats { j, k } => k * (j + 1),
        }
    }

    fn k(&self) -> usize {
        match *self {
            Problem::KMeans { k } | Problem::AffineFlats { k, .. } => k,
        }
    }
}

/// Solver for weighted instances of a [`Problem`].
pub trait Solver: Sync {
    fn solve(&self, points: &PointSet, problem: &Problem) -> Result<QueryShape>;
}

/// Exhaustive search over partitions; inputs of at most 14 points.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactSolver;

/// Lloyd-style alternation with restarts (k-means, or k affine flats).
#[derive(Clone, Copy, Debug)]
pub struct LloydSolver {
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for LloydSolver {
    fn default() -> Self {
        LloydSolver {
            seed: 0,
            restarts: 8,
            max_iters: 100,
        }
    }
}

fn check_problem(points: &PointSet, problem: &Problem) -> Result<()> {
    if problem.k() == 0 {
        return invalid_argument("k must be at least 1");
    }
    if let Problem::AffineFlats { j, .. } = *problem {
        if j == 0 || j >= points.d() {
            return invalid_argument(format!("flat dimension {j} must lie in [1, {}]", points.d() - 1));
        }
    }
    Ok(())
}

impl Solver for ExactSolver {
    fn solve(&self, points: &PointSet, problem: &Problem) -> Result<QueryShape> {
        check_problem(points, problem)?;
        match *problem {
            Problem::KMeans { k } => Ok(QueryShape::Centers(brute_force_kmeans(points, k)?)),
            Problem::AffineFlats { j, k } => {
                if points.n() > BRUTE_FORCE_MAX_N {
                    return Err(Error::ResourceLimit(format!(
                        "exhaustive flat clustering is limited to {BRUTE_FORCE_MAX_N} points"
                    )));
                }
                exact_flats(points, j, k)
            }
        }
    }
}

impl Solver for LloydSolver {
    fn solve(&self, points: &PointSet, problem: &Problem) -> Result<QueryShape> {
        check_problem(points, problem)?;
        match *problem {
            Problem::KMeans { k } => {
                let k_eff = k.min(points.n());
                let run = lloyd_restarts(points, k_eff, self.seed, self.max_iters, self.restarts, Exec::default())?;
                let centers = pad_rows(run.centers.into_inner(), k);
                Ok(QueryShape::Centers(CenterSet::new(centers)?))
            }
            Problem::AffineFlats { j, k } => self.flats(points, j, k),
        }
    }
}

/// Best affine `j`-flat of a weighted set and its cost.
pub fn best_affine_flat(points: &PointSet, j: usize) -> Result<(Subspace, f64)> {
    let mu = points.mean();
    let mut b = points.rows().to_owned();
    for (i, mut row) in b.outer_iter_mut().enumerate() {
        row -= &mu;
        row *= points.weight(i).sqrt();
    }
    let f = right_svd(b.view())?;
    let basis = complete_columns(&f.v, j, points.d());
    Ok((Subspace::new(basis, Some(mu))?, f.tail_energy(j)))
}

/// First `j` columns of `v`, completed with coordinate directions if `v` has fewer.
fn complete_columns(v: &Array2<f64>, j: usize, d: usize) -> Array2<f64> {
    let have = v.ncols().min(j);
    let mut cols = leading_columns(v, have);
    let mut e = 0;
    while cols.ncols() < j && e < d {
        let mut unit = Array2::zeros((d, 1));
        unit[[e, 0]] = 1.0;
        e += 1;
        let candidate = ndarray::concatenate(Axis(1), &[cols.view(), unit.view()]).expect("same rows");
        if let Ok(q) = orthonormalize(candidate.view()) {
            cols = q;
        }
    }
    cols
}

fn flats_cost(points: &PointSet, labels: &[usize], j: usize, k: usize) -> Result<(Vec<Subspace>, f64)> {
    let mut flats = Vec::with_capacity(k);
    let mut cost = 0.0;
    for b in 0..k {
        let idx: Vec<usize> = (0..points.n()).filter(|&i| labels[i] == b).collect();
        if idx.is_empty() {
            continue;
        }
        let (flat, c) = best_affine_flat(&points.select(&idx), j)?;
        flats.push(flat);
        cost += c;
    }
    while flats.len() < k {
        flats.push(flats[0].clone());
    }
    Ok((flats, cost))
}

fn exact_flats(points: &PointSet, j: usize, k: usize) -> Result<QueryShape> {
    let n = points.n();
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Vec<Subspace>)> = None;
    // Restricted growth strings: label[i] <= max(label[..i]) + 1, at most k labels.
    fn rec(
        i: usize,
        used: usize,
        labels: &mut Vec<usize>,
        k: usize,
        visit: &mut dyn FnMut(&[usize], usize) -> Result<()>,
    ) -> Result<()> {
        if i == labels.len() {
            return visit(labels, used);
        }
        for b in 0..(used + 1).min(k) {
            labels[i] = b;
            rec(i + 1, used.max(b + 1), labels, k, visit)?;
        }
        Ok(())
    }
    let mut visit = |labels: &[usize], used: usize| -> Result<()> {
        let (flats, cost) = flats_cost(points, labels, j, used)?;
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, flats));
        }
        Ok(())
    };
    rec(0, 0, &mut labels, k.max(1), &mut visit)?;
    let (_, mut flats) = best.expect("at least one partition");
    while flats.len() < k {
        flats.push(flats[0].clone());
    }
    Ok(QueryShape::Flats(flats))
}

impl LloydSolver {
    fn flats(&self, points: &PointSet, j: usize, k: usize) -> Result<QueryShape> {
        let k_eff = k.min(points.n());
        let runs = Exec::default().map(self.restarts.max(1), |r| -> Result<(f64, Vec<Subspace>)> {
            let seed = derive_seed(self.seed, r as u64);
            let init = lloyd_restarts(points, k_eff, seed, 5, 1, Exec::Sequential)?;
            let mut labels: Vec<usize> = (0..points.n()).map(|i| init.centers.nearest(points.row(i)).0).collect();
            let (mut flats, mut cost) = flats_cost(points, &labels, j, k_eff)?;
            for _ in 0..self.max_iters {
                let next: Vec<usize> = (0..points.n())
                    .map(|i| {
                        let x = points.row(i);
                        let mut best = (0, f64::INFINITY);
                        for (c, f) in flats.iter().enumerate() {
                            let d = f.dist2(x);
                            if d < best.1 {
                                best = (c, d);
                            }
                        }
                        best.0
                    })
                    .collect();
                let (next_flats, next_cost) = flats_cost(points, &next, j, k_eff)?;
                if next_cost >= cost || next == labels {
                    break;
                }
                labels = next;
                flats = next_flats;
                cost = next_cost;
            }
            Ok((cost, flats))
        });
        let mut best: Option<(f64, Vec<Subspace>)> = None;
        for run in runs {
            let run = run?;
            if best.as_ref().is_none_or(|b| run.0 < b.0) {
                best = Some(run);
            }
        }
        let (_, mut flats) = best.expect("at least one restart");
        while flats.len() < k {
            flats.push(flats[0].clone());
        }
        Ok(QueryShape::Flats(flats))
    }
}

/// Parameters of the randomized summary step in [`approx_solution_with`].
#[derive(Clone, Debug)]
pub struct ApproxOptions {
    pub seed: u64,
    pub delta: f64,
    pub sensitivity: SensitivityConfig,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            seed: 0,
            delta: 0.1,
            sensitivity: SensitivityConfig::default(),
        }
    }
}

/// Reduce to rank `m`, summarize the reduced points by an `ε/8` coreset,
/// solve on the summary, and map the solution back to `R^d`.
pub fn approx_solution(points: &PointSet, problem: Problem, eps: f64, solver: &dyn Solver) -> Result<QueryShape> {
    approx_solution_with(points, problem, eps, solver, &ApproxOptions::default())
}

pub fn approx_solution_with(
    points: &PointSet,
    problem: Problem,
    eps: f64,
    solver: &dyn Solver,
    options: &ApproxOptions,
) -> Result<QueryShape> {
    check_problem(points, &problem)?;
    if !(eps > 0.0 && eps < 1.0) {
        return invalid_argument(format!("epsilon must lie in (0, 1), got {eps}"));
    }
    let reduced = reduce_with(
        points,
        problem.shape_dim(),
        eps,
        ReduceMode::CoresetLift,
        options.sensitivity.reduced_dim,
    )?;
    let m = reduced.m();
    let low = reduced.reduced_point_set();
    let summary = match problem {
        Problem::KMeans { k } => crate::clustering::kmeans_coreset_with(
            &low,
            k,
            eps / 8.0,
            options.delta,
            options.seed,
            &options.sensitivity,
        )?,
        Problem::AffineFlats { j, k } => {
            if m <= j {
                // No room for a j-flat in the reduced space; the input is
                // covered by a flat through its span.
                return solver.solve(points, &problem);
            }
            if k == 1 {
                crate::subspace_coreset::affine_subspace_coreset_weighted(&low, j, eps / 8.0)?
            } else {
                Coreset::exact(&low)
            }
        }
    };
    let shape = solver.solve(&summary.to_point_set(), &problem)?;
    reduced.lift_shape(&shape)
}

/// Weighted centroids per label, padded to `k` rows (helper for callers that
/// post-process partitions).
pub fn partition_centers(points: &PointSet, labels: &[usize], k: usize) -> Result<CenterSet> {
    CenterSet::new(centroids_of(points, labels, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn target_dims() {
        assert_eq!(target_dim(ReduceMode::KMeans, 3, 0.6), 602);
        assert_eq!(target_dim(ReduceMode::General, 2, 1.0), 15);
        assert_eq!(target_dim(ReduceMode::CoresetLift, 1, 1.0), 32);
    }

    #[test]
    fn eps_range() {
        let p = PointSet::new(array![[1.0, 2.0], [3.0, 5.0]]).unwrap();
        assert!(reduce(&p, 1, 1.5, ReduceMode::General).is_err());
        assert!(reduce(&p, 1, 0.0, ReduceMode::General).is_err());
    }

    #[test]
    fn lift_checks_dimension() {
        let p = PointSet::new(array![[1.0, 2.0, 0.0], [3.0, 5.0, 1.0]]).unwrap();
        let r = reduce_to_rank(&p, 1).unwrap();
        let c = Coreset::new(array![[1.0, 1.0]], array![1.0], 0.0).unwrap();
        assert!(matches!(lift_coreset(&c, &r), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn flat_completion() {
        let p = PointSet::new(array![[1.0, 0.0, 0.0, 0.0]]).unwrap();
        let (flat, cost) = best_affine_flat(&p, 2).unwrap();
        assert_eq!(flat.dim(), 2);
        assert_eq!(cost, 0.0);
    }
}

//! Weighted k-means: D²-seeded Lloyd iteration, an exhaustive solver for tiny
//! inputs, and the sampling-based k-means coresets.

use ndarray::{Array1, Array2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coreset::{derive_seed, Coreset};
use crate::dimred::{lift_coreset, reduce_with, ReduceMode};
use crate::error::{invalid_argument, invalid_input, Error, Result};
use crate::exec::Exec;
use crate::linalg::{sq_dist, CenterSet, PointSet};
use crate::sensitivity::{
    bicriteria_kmeans_with, kmeans_dim_bound, kmeans_sensitivities_with, sensitivity_sample,
    vc_sample_size_with, SensitivityConfig,
};

/// Largest input accepted by [`brute_force_kmeans`].
pub const BRUTE_FORCE_MAX_N: usize = 14;

/// Result of a Lloyd run. `history[t]` is the cost after `t` updates.
#[derive(Clone, Debug)]
pub struct LloydRun {
    pub centers: CenterSet,
    pub cost: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Nearest-center assignment and squared distance of every row.
pub(crate) fn assign(points: &PointSet, centers: &CenterSet, exec: Exec) -> Vec<(usize, f64)> {
    exec.map(points.n(), |i| centers.nearest(points.row(i)))
}

fn weighted_cost(points: &PointSet, assigned: &[(usize, f64)]) -> f64 {
    // Same chunking as `Exec::sum` so the value does not depend on the strategy.
    Exec::Sequential.sum(points.n(), |i| points.weight(i) * assigned[i].1)
}

pub fn kmeans_cost(points: &PointSet, centers: &CenterSet) -> f64 {
    weighted_cost(points, &assign(points, centers, Exec::default()))
}

/// D² (k-means++) seeding: the first center is drawn proportionally to the
/// weights, every further one proportionally to `w_i · dist²(p_i, chosen)`.
/// Stops early once every point coincides with a chosen center.
pub fn d2_seeding<R: Rng + ?Sized>(points: &PointSet, k: usize, rng: &mut R) -> Result<Array2<f64>> {
    if k == 0 {
        return invalid_argument("k must be at least 1");
    }
    let w = points.weight_vec();
    let first = match WeightedIndex::new(w.iter().copied()) {
        Ok(dist) => dist.sample(rng),
        Err(_) => rng.random_range(0..points.n()),
    };
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = (0..points.n())
        .map(|i| sq_dist(points.row(i), points.row(first)))
        .collect();
    while chosen.len() < k {
        let scores = d2.iter().zip(w.iter()).map(|(d, w)| d * w);
        let Ok(dist) = WeightedIndex::new(scores) else {
            break;
        };
        let next = dist.sample(rng);
        chosen.push(next);
        for (i, di) in d2.iter_mut().enumerate() {
            *di = di.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    Ok(points.rows().select(ndarray::Axis(0), &chosen))
}

/// Weighted centroids of the given assignment. Clusters without weight are
/// reseeded at the point with the largest weighted distance to its center.
fn update_centers(points: &PointSet, old: &CenterSet, assigned: &[(usize, f64)]) -> Array2<f64> {
    let (k, d) = (old.k(), old.d());
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut mass = vec![0.0; k];
    for (i, &(c, _)) in assigned.iter().enumerate() {
        let w = points.weight(i);
        if w > 0.0 {
            sums.row_mut(c).scaled_add(w, &points.row(i));
            mass[c] += w;
        }
    }
    let mut taken = vec![false; points.n()];
    for (c, &m) in mass.iter().enumerate() {
        if m > 0.0 {
            sums.row_mut(c).mapv_inplace(|x| x / m);
            continue;
        }
        let far = (0..points.n())
            .filter(|&i| !taken[i])
            .map(|i| (i, points.weight(i) * assigned[i].1))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        match far {
            Some((i, score)) if score > 0.0 => {
                taken[i] = true;
                sums.row_mut(c).assign(&points.row(i));
            }
            _ => sums.row_mut(c).assign(&old.centers().row(c)),
        }
    }
    sums
}

/// Lloyd iterations from the given initial centers until the assignment is
/// stable or `max_iters` updates were made. The cost never increases.
pub fn lloyd_refine(points: &PointSet, init: Array2<f64>, max_iters: usize, exec: Exec) -> Result<LloydRun> {
    if init.ncols() != points.d() {
        return invalid_argument("initial centers have the wrong dimension");
    }
    let mut centers = CenterSet::new(init)?;
    let mut assigned = assign(points, &centers, exec);
    let mut cost = weighted_cost(points, &assigned);
    let mut history = vec![cost];
    let mut iterations = 0;
    while iterations < max_iters {
        let next = CenterSet::new(update_centers(points, &centers, &assigned))?;
        let next_assigned = assign(points, &next, exec);
        let next_cost = weighted_cost(points, &next_assigned);
        if next_cost > cost {
            break;
        }
        iterations += 1;
        let stable = next_assigned.iter().zip(&assigned).all(|(a, b)| a.0 == b.0);
        centers = next;
        assigned = next_assigned;
        cost = next_cost;
        history.push(cost);
        if stable {
            break;
        }
    }
    Ok(LloydRun {
        centers,
        cost,
        iterations,
        history,
    })
}

/// D²-seeded Lloyd iteration for weighted k-means.
pub fn lloyd_solve(points: &PointSet, k: usize, seed: u64, max_iters: usize) -> Result<CenterSet> {
    Ok(lloyd_run(points, k, seed, max_iters, Exec::default())?.centers)
}

pub fn lloyd_run(points: &PointSet, k: usize, seed: u64, max_iters: usize, exec: Exec) -> Result<LloydRun> {
    if k == 0 || k > points.n() {
        return invalid_argument(format!("k = {k} must lie in [1, n = {}]", points.n()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = d2_seeding(points, k, &mut rng)?;
    if init.nrows() < k {
        init = pad_rows(init, k);
    }
    lloyd_refine(points, init, max_iters, exec)
}

/// Best of `restarts` independently seeded Lloyd runs; ties keep the lowest restart.
pub fn lloyd_restarts(
    points: &PointSet,
    k: usize,
    seed: u64,
    max_iters: usize,
    restarts: usize,
    exec: Exec,
) -> Result<LloydRun> {
    let runs = exec.map(restarts.max(1), |r| {
        lloyd_run(points, k, derive_seed(seed, r as u64), max_iters, Exec::Sequential)
    });
    let mut best: Option<LloydRun> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Repeats the last row until there are `k` rows.
pub(crate) fn pad_rows(a: Array2<f64>, k: usize) -> Array2<f64> {
    let d = a.ncols();
    let last = a.nrows() - 1;
    Array2::from_shape_fn((k, d), |(i, j)| a[[i.min(last), j]])
}

#[derive(Clone)]
struct Block {
    weight: f64,
    mean: Vec<f64>,
    cost: f64,
}

/// Exact weighted k-means optimum by enumerating every partition into at
/// most `k` parts, with branch-and-bound on the partial cost.
pub fn brute_force_kmeans(points: &PointSet, k: usize) -> Result<CenterSet> {
    if k == 0 {
        return invalid_argument("k must be at least 1");
    }
    let n = points.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::ResourceLimit(format!(
            "exhaustive k-means is limited to {BRUTE_FORCE_MAX_N} points, got {n}"
        )));
    }
    if k >= n {
        return CenterSet::new(pad_rows(points.rows().to_owned(), k));
    }
    let labels = best_partition(points, k);
    let blocks = labels.iter().max().map_or(0, |m| m + 1);
    let mut centers = Array2::zeros((blocks, points.d()));
    for b in 0..blocks {
        let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == b).collect();
        centers.row_mut(b).assign(&points.select(&idx).mean());
    }
    CenterSet::new(pad_rows(centers, k))
}

fn best_partition(points: &PointSet, k: usize) -> Vec<usize> {
    struct Search<'a> {
        points: &'a PointSet,
        k: usize,
        labels: Vec<usize>,
        blocks: Vec<Block>,
        best_cost: f64,
        best: Vec<usize>,
    }

    impl Search<'_> {
        fn run(&mut self, i: usize, partial: f64) {
            if partial >= self.best_cost {
                return;
            }
            if i == self.points.n() {
                self.best_cost = partial;
                self.best = self.labels.clone();
                return;
            }
            let x = self.points.row(i);
            let wx = self.points.weight(i);
            let open = self.blocks.len();
            for b in 0..open {
                let saved = self.blocks[b].clone();
                let inc = {
                    let blk = &mut self.blocks[b];
                    let total = blk.weight + wx;
                    let mut dist = 0.0;
                    for (m, xv) in blk.mean.iter_mut().zip(x.iter()) {
                        let diff = xv - *m;
                        dist += diff * diff;
                        if total > 0.0 {
                            *m += wx / total * diff;
                        }
                    }
                    let inc = if total > 0.0 { wx * blk.weight / total * dist } else { 0.0 };
                    blk.weight = total;
                    blk.cost += inc;
                    inc
                };
                self.labels[i] = b;
                self.run(i + 1, partial + inc);
                self.blocks[b] = saved;
            }
            if open < self.k {
                self.blocks.push(Block {
                    weight: wx,
                    mean: x.to_vec(),
                    cost: 0.0,
                });
                self.labels[i] = open;
                self.run(i + 1, partial);
                self.blocks.pop();
            }
        }
    }

    let mut s = Search {
        points,
        k,
        labels: vec![0; points.n()],
        blocks: Vec::with_capacity(k),
        best_cost: f64::INFINITY,
        best: vec![0; points.n()],
    };
    s.run(0, 0.0);
    s.best
}

fn check_coreset_args(k: usize, eps: f64, delta: f64) -> Result<()> {
    if k == 0 {
        return invalid_argument("k must be at least 1");
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid_argument(format!("epsilon must lie in (0, 1], got {eps}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return invalid_argument(format!("delta must lie in (0, 1), got {delta}"));
    }
    Ok(())
}

fn positive_part(points: &PointSet) -> Result<PointSet> {
    if !points.is_weighted() {
        return Ok(points.clone());
    }
    let keep: Vec<usize> = (0..points.n()).filter(|&i| points.weight(i) > 0.0).collect();
    if keep.is_empty() {
        return invalid_input("total weight is zero");
    }
    Ok(points.select(&keep))
}

/// k-means coreset `(S, w, 0)` by sensitivity sampling with default constants.
pub fn kmeans_coreset(points: &PointSet, k: usize, eps: f64, delta: f64, seed: u64) -> Result<Coreset> {
    kmeans_coreset_with(points, k, eps, delta, seed, &SensitivityConfig::default())
}

/// Bicriteria solution, sensitivity bounds, sample size, sampling. When the
/// sample would be at least as large as the input, the input is returned.
pub fn kmeans_coreset_with(
    points: &PointSet,
    k: usize,
    eps: f64,
    delta: f64,
    seed: u64,
    config: &SensitivityConfig,
) -> Result<Coreset> {
    check_coreset_args(k, eps, delta)?;
    let points = positive_part(points)?;
    if k >= points.n() {
        return Ok(Coreset::exact(&points));
    }
    let bic = bicriteria_kmeans_with(&points, k, delta, derive_seed(seed, 1), config)?;
    let profile = kmeans_sensitivities_with(&points, &bic, config.c_s)?;
    let s = config.sample_size.unwrap_or_else(|| {
        vc_sample_size_with(
            profile.total(),
            kmeans_dim_bound(points.d(), k, config.c_dim),
            eps,
            delta,
            config.c_vc,
        )
    });
    if s >= points.n() {
        return Ok(Coreset::exact(&points));
    }
    sensitivity_sample(&points, &profile, s, derive_seed(seed, 2))
}

/// Dimension-independent k-means coreset: reduce to the top singular
/// directions, sample at `ε/8` there, lift back.
pub fn small_kmeans_coreset(points: &PointSet, k: usize, eps: f64, delta: f64, seed: u64) -> Result<Coreset> {
    small_kmeans_coreset_with(points, k, eps, delta, seed, &SensitivityConfig::default())
}

pub fn small_kmeans_coreset_with(
    points: &PointSet,
    k: usize,
    eps: f64,
    delta: f64,
    seed: u64,
    config: &SensitivityConfig,
) -> Result<Coreset> {
    check_coreset_args(k, eps, delta)?;
    let points = positive_part(points)?;
    let reduced = reduce_with(&points, k, eps, ReduceMode::CoresetLift, config.reduced_dim)?;
    let low = kmeans_coreset_with(&reduced.reduced_point_set(), k, eps / 8.0, delta, seed, config)?;
    lift_coreset(&low, &reduced)
}

/// Weighted centroid of each listed cluster (used by solvers that work on partitions).
pub(crate) fn centroids_of(points: &PointSet, labels: &[usize], k: usize) -> Array2<f64> {
    let mut sums = Array2::<f64>::zeros((k, points.d()));
    let mut mass = Array1::<f64>::zeros(k);
    for (i, &c) in labels.iter().enumerate() {
        sums.row_mut(c).scaled_add(points.weight(i), &points.row(i));
        mass[c] += points.weight(i);
    }
    for c in 0..k {
        if mass[c] > 0.0 {
            let m = mass[c];
            sums.row_mut(c).mapv_inplace(|x| x / m);
        }
    }
    sums
}

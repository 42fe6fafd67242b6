//! Query families for checking coreset guarantees empirically, and the
//! comparison of true against estimated costs.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::clustering::{brute_force_kmeans, lloyd_restarts};
use crate::coreset::{derive_seed, Coreset};
use crate::error::{invalid_argument, Result};
use crate::exec::Exec;
use crate::linalg::{dist2_with, CenterSet, PointSet, QueryShape, Subspace};

/// Random `j`-subspaces of `R^d` (Gaussian offsets when `affine`).
pub fn random_subspaces(d: usize, j: usize, affine: bool, count: usize, seed: u64) -> Result<Vec<QueryShape>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Subspace::random(d, j, affine, &mut rng).map(QueryShape::Subspace))
        .collect()
}

/// Shapes contained in random `j`-dimensional linear subspaces: `k` centers
/// with coordinates of size `scale`, the subspace itself with an offset
/// inside it, and affine `(j-1)`-flats inside it when `j >= 2`.
pub fn shapes_in_subspaces(d: usize, j: usize, k: usize, scale: f64, count: usize, seed: u64) -> Result<Vec<QueryShape>> {
    if j == 0 || j >= d {
        return invalid_argument(format!("j = {j} must lie in [1, {}]", d.saturating_sub(1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for t in 0..count {
        let host = Subspace::random(d, j, false, &mut rng)?;
        let x = host.basis().to_owned();
        let mut coords = |n: usize| Array1::from_shape_fn(n, |_| scale * rng.sample::<f64, _>(StandardNormal));
        let kind = if j >= 2 { t % 3 } else { t % 2 };
        out.push(match kind {
            0 => {
                let mut c = Array2::zeros((k, d));
                for mut row in c.outer_iter_mut() {
                    row.assign(&x.dot(&coords(j)));
                }
                QueryShape::Centers(CenterSet::new(c)?)
            }
            1 => QueryShape::Subspace(Subspace::new(x.clone(), Some(x.dot(&coords(j))))?),
            _ => {
                let inner = Subspace::random(j, j - 1, false, &mut rng)?;
                let offset = x.dot(&Array1::from_shape_fn(j, |_| scale * rng.sample::<f64, _>(StandardNormal)));
                QueryShape::Subspace(Subspace::new(x.dot(&inner.basis()), Some(offset))?)
            }
        });
    }
    Ok(out)
}

/// Candidate center sets for "for all `C`" checks: near-optimal solutions and
/// perturbations of them, random sets around the data, and far-away sets.
pub fn center_grid(points: &PointSet, k: usize, count: usize, seed: u64) -> Result<Vec<QueryShape>> {
    if k == 0 || k > points.n() {
        return invalid_argument(format!("k = {k} must lie in [1, n = {}]", points.n()));
    }
    let d = points.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = points.mean();
    let spread = {
        let var: f64 = (0..points.n())
            .map(|i| points.weight(i) * crate::linalg::sq_dist(points.row(i), mean.view()))
            .sum::<f64>()
            / points.total_weight().max(f64::MIN_POSITIVE);
        (var / d as f64).sqrt().max(1e-12)
    };
    let radius = (0..points.n())
        .map(|i| crate::linalg::sq_dist(points.row(i), mean.view()).sqrt())
        .fold(0.0, f64::max)
        .max(spread);
    let best = if points.n() <= 12 {
        brute_force_kmeans(points, k)?.into_inner()
    } else {
        lloyd_restarts(points, k, derive_seed(seed, 99), 100, 10, Exec::default())?
            .centers
            .into_inner()
    };
    let gaussian = |rng: &mut ChaCha8Rng, s: f64| Array2::from_shape_fn((k, d), |_| s * rng.sample::<f64, _>(StandardNormal));

    let mut out = vec![QueryShape::Centers(CenterSet::new(best.clone())?)];
    let n_near = count / 2;
    let n_random = count / 4;
    let n_far = count / 10;
    for t in 1..n_near {
        let s = spread * 2f64.powf(-4.0 + 6.0 * t as f64 / n_near as f64);
        out.push(QueryShape::Centers(CenterSet::new(&best + &gaussian(&mut rng, s))?));
    }
    for _ in 0..n_random {
        let idx: Vec<usize> = (0..k).map(|_| rng.random_range(0..points.n())).collect();
        out.push(QueryShape::Centers(CenterSet::new(points.rows().select(Axis(0), &idx))?));
    }
    for _ in 0..n_far {
        let far = radius * 10f64.powf(rng.random_range(1.0..3.0));
        let mut c = gaussian(&mut rng, 1.0);
        for mut row in c.outer_iter_mut() {
            let norm = row.dot(&row).sqrt().max(1e-12);
            row.mapv_inplace(|x| x * far / norm);
            row += &mean;
        }
        out.push(QueryShape::Centers(CenterSet::new(c)?));
    }
    while out.len() < count {
        let c = gaussian(&mut rng, 2.0 * spread) + mean.view().insert_axis(Axis(0));
        out.push(QueryShape::Centers(CenterSet::new(c)?));
    }
    out.truncate(count);
    Ok(out)
}

/// True cost of the data against a query and the coreset's estimate of it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryCost {
    pub truth: f64,
    pub estimate: f64,
}

impl QueryCost {
    /// `estimate / truth`, with `0/0 = 1`.
    pub fn ratio(&self) -> f64 {
        if self.truth == 0.0 {
            if self.estimate == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.estimate / self.truth
        }
    }
}

/// Relative slack allowed below the true cost in sandwich checks.
pub const LOWER_SLACK: f64 = 1e-9;

/// Costs over a query family.
#[derive(Clone, Debug, Default)]
pub struct Agreement {
    pub costs: Vec<QueryCost>,
}

impl Agreement {
    /// `max |ratio - 1|`.
    pub fn max_deviation(&self) -> f64 {
        self.costs.iter().map(|c| (c.ratio() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn mean_ratio(&self) -> f64 {
        self.costs.iter().map(QueryCost::ratio).sum::<f64>() / self.costs.len().max(1) as f64
    }

    /// Queries violating `truth - 1e-9·truth <= estimate <= (1 + ε)·truth`.
    pub fn sandwich_violations(&self, eps: f64) -> usize {
        self.costs
            .iter()
            .filter(|c| {
                let slack = LOWER_SLACK * c.truth.abs() + 1e-300;
                c.estimate < c.truth - slack || c.estimate > (1.0 + eps) * c.truth + slack
            })
            .count()
    }

    /// Queries violating `|estimate - truth| <= ε·truth`.
    pub fn two_sided_violations(&self, eps: f64) -> usize {
        self.costs
            .iter()
            .filter(|c| (c.estimate - c.truth).abs() > eps * c.truth + LOWER_SLACK * c.truth.abs() + 1e-300)
            .count()
    }
}

/// Costs of `points` itself against every shape.
pub fn true_costs(points: &PointSet, shapes: &[QueryShape], exec: Exec) -> Result<Vec<f64>> {
    shapes.iter().map(|s| dist2_with(points, s, exec)).collect()
}

/// Compares precomputed true costs against the coreset.
pub fn agreement_with(truths: &[f64], coreset: &Coreset, shapes: &[QueryShape]) -> Result<Agreement> {
    if truths.len() != shapes.len() {
        return invalid_argument("one true cost per shape is required");
    }
    let costs = truths
        .iter()
        .zip(shapes)
        .map(|(&truth, s)| {
            Ok(QueryCost {
                truth,
                estimate: coreset.cost_with(s, Exec::Sequential)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Agreement { costs })
}

pub fn agreement(points: &PointSet, coreset: &Coreset, shapes: &[QueryShape]) -> Result<Agreement> {
    agreement_with(&true_costs(points, shapes, Exec::default())?, coreset, shapes)
}

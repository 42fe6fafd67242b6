#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tinycore::PointSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((n, d), |_| r.sample(StandardNormal))
}

pub fn gaussian(n: usize, d: usize, seed: u64) -> PointSet {
    PointSet::new(gaussian_matrix(n, d, seed)).unwrap()
}

/// `k` unit-variance blobs with centers `sep` apart along random directions.
pub fn blobs(n: usize, d: usize, k: usize, sep: f64, spread: f64, seed: u64) -> PointSet {
    let mut r = rng(seed);
    let centers = Array2::from_shape_fn((k, d), |_| sep * r.sample::<f64, _>(StandardNormal));
    let rows = Array2::from_shape_fn((n, d), |(i, c)| centers[[i % k, c]] + spread * r.sample::<f64, _>(StandardNormal));
    PointSet::new(rows).unwrap()
}

pub fn weighted(points: &PointSet, seed: u64) -> PointSet {
    let mut r = rng(seed);
    let w = Array1::from_shape_fn(points.n(), |_| r.random_range(1..=5) as f64);
    points.reweighted(Some(w)).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Frobenius norm squared of `a` after right multiplication by `x`.
pub fn frob_sq(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

pub fn to_csv(points: &PointSet) -> String {
    let mut s = String::new();
    for row in points.rows().outer_iter() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

//! The weighted summary `(S, w, Δ)` shared by every construction.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{invalid_input, Result};
use crate::exec::Exec;
use crate::linalg::{dist2_with, PointSet, QueryShape};

/// Weighted points plus a query-independent offset.
///
/// Its cost against a shape `C` is `Σ w_i dist²(S_i, C) + Δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coreset {
    points: Array2<f64>,
    weights: Array1<f64>,
    delta: f64,
}

impl Coreset {
    pub fn new(points: Array2<f64>, weights: Array1<f64>, delta: f64) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return invalid_input("coreset has no points");
        }
        if weights.len() != points.nrows() {
            return invalid_input(format!(
                "{} weights for {} coreset points",
                weights.len(),
                points.nrows()
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return invalid_input("coreset weights must be finite and non-negative");
        }
        if points.iter().any(|x| !x.is_finite()) {
            return invalid_input("coreset points must be finite");
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return invalid_input(format!("offset {delta} is not a non-negative number"));
        }
        Ok(Coreset {
            points,
            weights,
            // clears a negative zero
            delta: delta.abs(),
        })
    }

    /// The input itself, with its weights (ones if unweighted) and `Δ = 0`.
    pub fn exact(points: &PointSet) -> Self {
        Coreset {
            weights: points.weight_vec(),
            points: points.rows().to_owned(),
            delta: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.sum()
    }

    pub fn into_parts(self) -> (Array2<f64>, Array1<f64>, f64) {
        (self.points, self.weights, self.delta)
    }

    /// The weighted points without the offset.
    pub fn to_point_set(&self) -> PointSet {
        PointSet::with_weights(self.points.clone(), self.weights.clone())
            .expect("coreset invariants imply a valid point set")
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return invalid_input(format!("offset {delta} is not a non-negative number"));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn cost(&self, shape: &QueryShape) -> Result<f64> {
        self.cost_with(shape, Exec::default())
    }

    pub fn cost_with(&self, shape: &QueryShape, exec: Exec) -> Result<f64> {
        Ok(dist2_with(&self.to_point_set(), shape, exec)? + self.delta)
    }

    /// Union of coresets: points are concatenated and offsets add up.
    pub fn merge(parts: &[&Coreset]) -> Result<Coreset> {
        let Some(first) = parts.first() else {
            return invalid_input("nothing to merge");
        };
        if parts.iter().any(|c| c.d() != first.d()) {
            return invalid_input("cannot merge coresets of different dimension");
        }
        let pts: Vec<_> = parts.iter().map(|c| c.points.view()).collect();
        let ws: Vec<_> = parts.iter().map(|c| c.weights.view()).collect();
        let points = ndarray::concatenate(Axis(0), &pts).expect("dimensions checked");
        let weights = ndarray::concatenate(Axis(0), &ws).expect("1-d");
        let delta = parts.iter().map(|c| c.delta).sum();
        Coreset::new(points, weights, delta)
    }
}

/// `⌈x⌉` that ignores floating point noise just above an integer, so that
/// e.g. `3.0 / 0.1` rounds up to 30 rather than 31.
pub(crate) fn ceil_tol(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r.max(0.0) as usize
    } else {
        x.ceil().max(0.0) as usize
    }
}

/// Independent sub-seed for the `stream`-th randomized step of a seeded run.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

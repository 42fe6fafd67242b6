//! Dense matrix kernel: weighted point sets, exact SVD, low-rank
//! approximation and squared-distance evaluation against query shapes.

mod shape;
mod svd;

pub use shape::{dist2, dist2_point, dist2_with, sq_dist, CenterSet, QueryShape};
pub use svd::{low_rank_approx, right_svd, svd, RightSvd, SvdFactors};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid_argument, invalid_input, Result};

/// Orthonormality tolerance used when validating bases and factors.
pub const TOL_ORTH: f64 = 1e-8;
/// Relative reconstruction tolerance for SVD factors.
pub const TOL_RECON: f64 = 1e-8;

/// `n` points in `R^d` stored as rows, with optional non-negative multiplicities.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    rows: Array2<f64>,
    weights: Option<Array1<f64>>,
}

impl PointSet {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        check_rows(&rows)?;
        Ok(PointSet {
            rows,
            weights: None,
        })
    }

    pub fn with_weights(rows: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        check_rows(&rows)?;
        if weights.len() != rows.nrows() {
            return invalid_input(format!(
                "{} weights for {} rows",
                weights.len(),
                rows.nrows()
            ));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return invalid_input(format!("weight {w} at row {i} is negative or not finite"));
        }
        Ok(PointSet {
            rows,
            weights: Some(weights),
        })
    }

    /// Builds a point set from a row-major slice of `n * d` coordinates.
    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n * d != data.len() {
            return invalid_input(format!("{} values do not form a {n}x{d} matrix", data.len()));
        }
        let rows = Array2::from_shape_vec((n, d), data)
            .map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
        PointSet::new(rows)
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn d(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.rows.row(i)
    }

    pub fn weights(&self) -> Option<&Array1<f64>> {
        self.weights.as_ref()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Multiplicity of row `i` (1 when the set is unweighted).
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    /// Explicit weight vector, ones when unweighted.
    pub fn weight_vec(&self) -> Array1<f64> {
        self.weights
            .clone()
            .unwrap_or_else(|| Array1::ones(self.n()))
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.as_ref().map_or(self.n() as f64, |w| w.sum())
    }

    /// Weighted centroid. Falls back to the plain mean when all weights vanish.
    pub fn mean(&self) -> Array1<f64> {
        let total = self.total_weight();
        if total <= 0.0 {
            return self.rows.mean_axis(Axis(0)).expect("n >= 1");
        }
        let mut mu = Array1::zeros(self.d());
        for (i, row) in self.rows.outer_iter().enumerate() {
            mu.scaled_add(self.weight(i), &row);
        }
        mu / total
    }

    pub fn into_parts(self) -> (Array2<f64>, Option<Array1<f64>>) {
        (self.rows, self.weights)
    }

    /// Sub-population indexed by `idx`, keeping weights.
    pub fn select(&self, idx: &[usize]) -> PointSet {
        let rows = self.rows.select(Axis(0), idx);
        let weights = self.weights.as_ref().map(|w| w.select(Axis(0), idx));
        PointSet { rows, weights }
    }

    /// Row-wise union. The result is weighted if any part is.
    pub fn concat(parts: &[&PointSet]) -> Result<PointSet> {
        let first = parts
            .first()
            .ok_or_else(|| crate::Error::InvalidInput("nothing to concatenate".into()))?;
        let d = first.d();
        if parts.iter().any(|p| p.d() != d) {
            return invalid_input("dimension mismatch in union");
        }
        let views: Vec<_> = parts.iter().map(|p| p.rows.view()).collect();
        let rows = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
        if parts.iter().any(|p| p.is_weighted()) {
            let w: Vec<f64> = parts
                .iter()
                .flat_map(|p| p.weight_vec().to_vec())
                .collect();
            PointSet::with_weights(rows, Array1::from(w))
        } else {
            PointSet::new(rows)
        }
    }

    /// Drops the weight vector (or replaces it).
    pub fn reweighted(&self, weights: Option<Array1<f64>>) -> Result<PointSet> {
        match weights {
            Some(w) => PointSet::with_weights(self.rows.clone(), w),
            None => PointSet::new(self.rows.clone()),
        }
    }
}

fn check_rows(rows: &Array2<f64>) -> Result<()> {
    if rows.nrows() == 0 {
        return invalid_input("empty input");
    }
    if rows.ncols() == 0 {
        return invalid_input("points have zero dimensions");
    }
    if let Some(pos) = rows.iter().position(|x| !x.is_finite()) {
        let (i, j) = (pos / rows.ncols(), pos % rows.ncols());
        return invalid_input(format!("non-finite entry at row {i}, column {j}"));
    }
    Ok(())
}

/// Rows scaled by `√w_i`, so that the squared distance of the folded matrix
/// to any linear subspace equals the weighted distance of the original set.
pub fn weighted_fold(points: &PointSet) -> Array2<f64> {
    let mut out = points.rows.clone();
    if let Some(w) = points.weights() {
        for (mut row, wi) in out.outer_iter_mut().zip(w.iter()) {
            row *= wi.sqrt();
        }
    }
    out
}

pub fn frobenius_sq(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// A linear (no offset) or affine `j`-dimensional subspace of `R^d`,
/// stored as a `d x j` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: Array2<f64>,
    offset: Option<Array1<f64>>,
}

impl Subspace {
    pub fn new(basis: Array2<f64>, offset: Option<Array1<f64>>) -> Result<Self> {
        let (d, j) = basis.dim();
        if j == 0 || j >= d {
            return invalid_argument(format!("subspace dimension {j} must lie in [1, {}]", d - 1));
        }
        if let Some(p) = &offset {
            if p.len() != d {
                return invalid_argument("offset dimension differs from basis");
            }
        }
        let gram = basis.t().dot(&basis);
        let dev = max_identity_deviation(gram.view());
        if dev > TOL_ORTH {
            return invalid_argument(format!("basis is not orthonormal (deviation {dev:e})"));
        }
        Ok(Subspace { basis, offset })
    }

    /// Orthonormalizes the columns of `span` (which must be independent).
    pub fn from_span(span: ArrayView2<'_, f64>, offset: Option<Array1<f64>>) -> Result<Self> {
        let basis = orthonormalize(span)?;
        Subspace::new(basis, offset)
    }

    /// Random subspace: Gaussian `d x j` draw, orthonormalized; Gaussian offset when `affine`.
    pub fn random<R: Rng + ?Sized>(d: usize, j: usize, affine: bool, rng: &mut R) -> Result<Self> {
        if j == 0 || j >= d {
            return invalid_argument(format!("subspace dimension {j} must lie in [1, {}]", d.saturating_sub(1)));
        }
        loop {
            let g = Array2::from_shape_fn((d, j), |_| rng.sample::<f64, _>(StandardNormal));
            if let Ok(basis) = orthonormalize(g.view()) {
                let offset =
                    affine.then(|| Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(StandardNormal)));
                return Subspace::new(basis, offset);
            }
        }
    }

    pub fn basis(&self) -> ArrayView2<'_, f64> {
        self.basis.view()
    }

    pub fn offset(&self) -> Option<&Array1<f64>> {
        self.offset.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Squared distance of `x` to the subspace, via the explicit residual
    /// `r = (x - p) - X Xᵀ (x - p)`; the orthogonal complement is never formed.
    pub fn dist2(&self, x: ArrayView1<'_, f64>) -> f64 {
        let centered;
        let y = match &self.offset {
            Some(p) => {
                centered = &x - p;
                centered.view()
            }
            None => x,
        };
        let coeff = self.basis.t().dot(&y);
        let proj = self.basis.dot(&coeff);
        y.iter().zip(proj.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Modified Gram–Schmidt with re-orthogonalization. Fails on (numerically)
/// dependent columns.
pub fn orthonormalize(span: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (d, j) = span.dim();
    let mut q = span.to_owned();
    for c in 0..j {
        let norm0 = q.column(c).dot(&q.column(c)).sqrt();
        for _ in 0..2 {
            for p in 0..c {
                let proj = q.column(p).dot(&q.column(c));
                let qp = q.column(p).to_owned();
                q.column_mut(c).scaled_add(-proj, &qp);
            }
        }
        let norm = q.column(c).dot(&q.column(c)).sqrt();
        if norm.is_nan() || norm <= 1e-10 * norm0.max(f64::MIN_POSITIVE) || norm == 0.0 {
            return invalid_argument(format!("column {c} of a {d}x{j} span is dependent"));
        }
        q.column_mut(c).mapv_inplace(|x| x / norm);
    }
    Ok(q)
}

/// `max |G - I|` entrywise.
pub fn max_identity_deviation(g: ArrayView2<'_, f64>) -> f64 {
    g.indexed_iter()
        .map(|((i, j), &x)| (x - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

/// Projection coordinates `A X` of all rows onto the columns of `basis`.
pub fn project(a: ArrayView2<'_, f64>, basis: ArrayView2<'_, f64>) -> Array2<f64> {
    a.dot(&basis)
}

/// First `m` columns of a matrix.
pub(crate) fn leading_columns(a: &Array2<f64>, m: usize) -> Array2<f64> {
    a.slice(s![.., ..m]).to_owned()
}

//! Coresets for the linear and affine `j`-subspace problems.
//!
//! The linear construction keeps the top `m` rows of `ΣVᵀ` and charges the
//! discarded spectrum to `Δ`. The affine one centers the data, builds a
//! linear coreset `S′` and mirrors it around the mean as `μ ± √(m/W)·S′`.

use ndarray::{Array1, Array2};

use crate::coreset::{ceil_tol, Coreset};
use crate::error::{invalid_argument, invalid_input, Result};
use crate::linalg::{right_svd, weighted_fold, PointSet};

/// `j + ⌈j/ε⌉ - 1`.
///
/// # Panics
/// If `j == 0` or `eps` is not positive.
pub fn coreset_size_linear(j: usize, eps: f64) -> usize {
    assert!(j >= 1 && eps > 0.0, "coreset_size_linear needs j >= 1 and eps > 0");
    j + ceil_tol(j as f64 / eps) - 1
}

pub(crate) fn check_subspace_args(d: usize, j: usize, eps: f64) -> Result<()> {
    if j == 0 || j >= d {
        return invalid_argument(format!(
            "subspace dimension j = {j} must lie in [1, {}]",
            d.saturating_sub(1)
        ));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid_argument(format!("epsilon must be positive, got {eps}"));
    }
    Ok(())
}

/// Linear `j`-subspace coreset: `m = min(n, d, j + ⌈j/ε⌉ - 1)` rows
/// `σ_i v_iᵀ` with unit weights and `Δ = Σ_{i>m} σ_i²`.
///
/// Weighted inputs are folded (rows scaled by `√w_i`) first.
pub fn linear_subspace_coreset(points: &PointSet, j: usize, eps: f64) -> Result<Coreset> {
    check_subspace_args(points.d(), j, eps)?;
    let a = weighted_fold(points);
    let f = right_svd(a.view())?;
    let m = points.n().min(points.d()).min(coreset_size_linear(j, eps));
    let mut s = Array2::zeros((m, points.d()));
    for i in 0..m {
        let mut row = s.row_mut(i);
        row.assign(&f.v.column(i));
        row *= f.sigma[i];
    }
    Coreset::new(s, Array1::ones(m), f.tail_energy(m))
}

/// Affine `j`-subspace coreset of `2m` points with weights `n/(2m)`.
/// Weighted inputs use [`affine_subspace_coreset_weighted`].
pub fn affine_subspace_coreset(points: &PointSet, j: usize, eps: f64) -> Result<Coreset> {
    affine_subspace_coreset_weighted(points, j, eps)
}

/// Affine coreset for weighted inputs: `B_i = √w_i (A_i - μ)` with the
/// weighted mean `μ`, scaling `√(m/W)` and output weights `W/(2m)`.
pub fn affine_subspace_coreset_weighted(points: &PointSet, j: usize, eps: f64) -> Result<Coreset> {
    check_subspace_args(points.d(), j, eps)?;
    let total = points.total_weight();
    if total <= 0.0 {
        return invalid_input("total weight is zero");
    }
    let mu = points.mean();
    let mut b = points.rows().to_owned();
    for (i, mut row) in b.outer_iter_mut().enumerate() {
        row -= &mu;
        row *= points.weight(i).sqrt();
    }
    let lin = linear_subspace_coreset(&PointSet::new(b)?, j, eps)?;
    let m = lin.len();
    let scale = (m as f64 / total).sqrt();
    let mut s = Array2::zeros((2 * m, points.d()));
    for (i, row) in lin.points().outer_iter().enumerate() {
        let shifted = &row * scale;
        s.row_mut(i).assign(&(&mu + &shifted));
        s.row_mut(m + i).assign(&(&mu - &shifted));
    }
    Coreset::new(s, Array1::from_elem(2 * m, total / (2 * m) as f64), lin.delta())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn size_formula() {
        assert_eq!(coreset_size_linear(2, 0.5), 5);
        assert_eq!(coreset_size_linear(1, 1.0), 1);
        assert_eq!(coreset_size_linear(3, 0.1), 32);
        assert_eq!(coreset_size_linear(5, 0.2), 29);
    }

    #[test]
    fn identity_three() {
        let c = linear_subspace_coreset(&PointSet::new(Array2::eye(3)).unwrap(), 1, 1.0).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c.delta() - 2.0).abs() < 1e-12);
        let norm: f64 = c.points().row(0).iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argument_checks() {
        let p = PointSet::new(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert!(matches!(
            linear_subspace_coreset(&p, 2, 0.5),
            Err(crate::Error::InvalidArgument(_))
        ));
        assert!(linear_subspace_coreset(&p, 1, 0.0).is_err());
        let z = PointSet::with_weights(array![[1.0, 2.0]], array![0.0]).unwrap();
        assert!(matches!(
            affine_subspace_coreset_weighted(&z, 1, 0.5),
            Err(crate::Error::InvalidInput(_))
        ));
    }
}

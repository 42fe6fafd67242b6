use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{invalid_argument, invalid_input, Result};

const ROTATION_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 100;

/// Thin SVD `A = U Σ Vᵀ` with `r = min(n, d)` and `σ` non-increasing.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: Array2<f64>,
    pub sigma: Array1<f64>,
    pub v: Array2<f64>,
}

/// Singular values and right singular vectors only (`d x r`).
#[derive(Clone, Debug)]
pub struct RightSvd {
    pub sigma: Array1<f64>,
    pub v: Array2<f64>,
}

impl SvdFactors {
    pub fn rank_bound(&self) -> usize {
        self.sigma.len()
    }

    /// `Σ_{i>m} σ_i²`, the squared Frobenius residual of the rank-`m` approximation.
    pub fn tail_energy(&self, m: usize) -> f64 {
        tail_energy(&self.sigma, m)
    }
}

impl RightSvd {
    pub fn tail_energy(&self, m: usize) -> f64 {
        tail_energy(&self.sigma, m)
    }
}

pub(crate) fn tail_energy(sigma: &Array1<f64>, m: usize) -> f64 {
    sigma.iter().skip(m).map(|s| s * s).sum()
}

/// Exact thin SVD by one-sided (Hestenes) Jacobi rotations.
pub fn svd(a: ArrayView2<'_, f64>) -> Result<SvdFactors> {
    check_finite(a)?;
    let (n, d) = a.dim();
    if n >= d {
        let out = jacobi(columns(a), true);
        Ok(SvdFactors {
            u: from_columns(&out.left, n),
            sigma: Array1::from(out.sigma),
            v: from_columns(&out.rotation.expect("requested"), d),
        })
    } else {
        let out = jacobi(columns(a.t()), true);
        Ok(SvdFactors {
            u: from_columns(&out.rotation.expect("requested"), n),
            sigma: Array1::from(out.sigma),
            v: from_columns(&out.left, d),
        })
    }
}

/// Singular values and right singular vectors. Tall inputs are first
/// reduced to their `d x d` triangular factor by Householder QR, which leaves
/// `σ` and `V` unchanged.
pub fn right_svd(a: ArrayView2<'_, f64>) -> Result<RightSvd> {
    check_finite(a)?;
    let (n, d) = a.dim();
    if n > 2 * d {
        let r = householder_r(a);
        let out = jacobi(r, true);
        Ok(RightSvd {
            sigma: Array1::from(out.sigma),
            v: from_columns(&out.rotation.expect("requested"), d),
        })
    } else if n >= d {
        let out = jacobi(columns(a), true);
        Ok(RightSvd {
            sigma: Array1::from(out.sigma),
            v: from_columns(&out.rotation.expect("requested"), d),
        })
    } else {
        let out = jacobi(columns(a.t()), false);
        Ok(RightSvd {
            sigma: Array1::from(out.sigma),
            v: from_columns(&out.left, d),
        })
    }
}

/// `U Σ^(m) Vᵀ`: all but the leading `m` singular values zeroed.
pub fn low_rank_approx(f: &SvdFactors, m: usize) -> Result<Array2<f64>> {
    let r = f.sigma.len();
    if m == 0 || m > r {
        return invalid_argument(format!("rank {m} outside [1, {r}]"));
    }
    let mut us = f.u.slice(ndarray::s![.., ..m]).to_owned();
    for (mut col, s) in us.columns_mut().into_iter().zip(f.sigma.iter()) {
        col *= *s;
    }
    Ok(us.dot(&f.v.slice(ndarray::s![.., ..m]).t()))
}

fn check_finite(a: ArrayView2<'_, f64>) -> Result<()> {
    if a.iter().any(|x| !x.is_finite()) {
        return invalid_input("matrix has non-finite entries");
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return invalid_input("matrix is empty");
    }
    Ok(())
}

fn columns(a: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    a.columns().into_iter().map(|c| c.to_vec()).collect()
}

fn from_columns(cols: &[Vec<f64>], len: usize) -> Array2<f64> {
    Array2::from_shape_fn((len, cols.len()), |(i, j)| cols[j][i])
}

struct JacobiOut {
    sigma: Vec<f64>,
    /// Normalized rotated columns (left singular vectors of the column matrix).
    left: Vec<Vec<f64>>,
    /// Accumulated right rotation, as columns.
    rotation: Option<Vec<Vec<f64>>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (p, q) = (*x, *y);
        *x = c * p - s * q;
        *y = s * p + c * q;
    }
}

/// Orthogonalizes the given columns (length `len`, count `c <= len`) by
/// cyclic Jacobi sweeps and returns them sorted by decreasing norm.
fn jacobi(mut cols: Vec<Vec<f64>>, want_rotation: bool) -> JacobiOut {
    let c = cols.len();
    let len = cols.first().map_or(0, Vec::len);
    let mut rot: Vec<Vec<f64>> = if want_rotation {
        (0..c)
            .map(|i| {
                let mut e = vec![0.0; c];
                e[i] = 1.0;
                e
            })
            .collect()
    } else {
        Vec::new()
    };

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in (p + 1)..c {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                let (lo, hi) = cols.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], cs, sn);
                if want_rotation {
                    let (lo, hi) = rot.split_at_mut(q);
                    rotate(&mut lo[p], &mut hi[0], cs, sn);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols.iter().map(|x| dot(x, x).sqrt()).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let sigma: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let mut left: Vec<Option<Vec<f64>>> = order
        .iter()
        .map(|&i| {
            (norms[i] > 0.0).then(|| cols[i].iter().map(|x| x / norms[i]).collect())
        })
        .collect();
    complete_basis(&mut left, len);
    let rotation = want_rotation.then(|| order.iter().map(|&i| rot[i].clone()).collect());

    JacobiOut {
        sigma,
        left: left.into_iter().map(|x| x.expect("completed")).collect(),
        rotation,
    }
}

/// Fills missing columns with unit vectors orthogonal to all present ones.
fn complete_basis(cols: &mut [Option<Vec<f64>>], len: usize) {
    let mut candidate = 0;
    for k in 0..cols.len() {
        if cols[k].is_some() {
            continue;
        }
        while candidate < len {
            let mut e = vec![0.0; len];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for other in cols.iter().flatten() {
                    let p = dot(other, &e);
                    e.iter_mut().zip(other).for_each(|(x, o)| *x -= p * o);
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 0.5 {
                e.iter_mut().for_each(|x| *x /= norm);
                cols[k] = Some(e);
                break;
            }
        }
    }
}

/// Upper-triangular factor of a Householder QR, returned as `d` columns of length `d`.
fn householder_r(a: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    let (n, d) = a.dim();
    let mut cols = columns(a);
    for k in 0..d {
        let norm = cols[k][k..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if cols[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vv = dot(&v, &v);
        if vv == 0.0 {
            continue;
        }
        for col in cols.iter_mut().skip(k) {
            let f = 2.0 * dot(&v, &col[k..]) / vv;
            col[k..].iter_mut().zip(&v).for_each(|(x, vi)| *x -= f * vi);
        }
    }
    debug_assert!(n >= d);
    cols.into_iter().map(|c| c[..d].to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_sq, max_identity_deviation};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.sample(StandardNormal))
    }

    fn check_factors(a: &Array2<f64>, f: &SvdFactors) {
        let r = a.nrows().min(a.ncols());
        assert_eq!(f.sigma.len(), r);
        assert!(f.sigma.windows(2).into_iter().all(|w| w[0] >= w[1]));
        assert!(max_identity_deviation(f.u.t().dot(&f.u).view()) <= 1e-8);
        assert!(max_identity_deviation(f.v.t().dot(&f.v).view()) <= 1e-8);
        let recon = low_rank_approx(f, r).unwrap();
        let err = frobenius_sq((&recon - a).view()).sqrt();
        assert!(err <= 1e-8 * frobenius_sq(a.view()).sqrt().max(1.0), "{err}");
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let f = svd(Array2::<f64>::eye(3).view()).unwrap();
        for s in f.sigma.iter() {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_case() {
        let f = svd(array![[2.0, 0.0], [0.0, 3.0]].view()).unwrap();
        assert!((f.sigma[0] - 3.0).abs() < 1e-14 && (f.sigma[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction_entrywise() {
        let a = gaussian(5, 4, 1);
        let f = svd(a.view()).unwrap();
        let recon = low_rank_approx(&f, 4).unwrap();
        let max = (&recon - &a).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(max <= 1e-10, "{max}");
        check_factors(&a, &f);
    }

    #[test]
    fn wide_tall_and_rank_deficient() {
        check_factors(&gaussian(3, 7, 2), &svd(gaussian(3, 7, 2).view()).unwrap());
        check_factors(&gaussian(40, 6, 3), &svd(gaussian(40, 6, 3).view()).unwrap());
        let r1 = gaussian(8, 1, 4).dot(&gaussian(1, 5, 5));
        let f = svd(r1.view()).unwrap();
        check_factors(&r1, &f);
        assert!(f.sigma[1] <= 1e-12 * f.sigma[0]);
        let zeros = Array2::<f64>::zeros((4, 3));
        check_factors(&zeros, &svd(zeros.view()).unwrap());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(svd(array![[1.0, f64::INFINITY]].view()).is_err());
    }

    #[test]
    fn low_rank_of_diagonal() {
        let a = array![[3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]];
        let f = svd(a.view()).unwrap();
        let a2 = low_rank_approx(&f, 2).unwrap();
        let want = array![[3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.0]];
        assert!((&a2 - &want).iter().all(|x| x.abs() < 1e-14));
        assert!(low_rank_approx(&f, 0).is_err());
        assert!(low_rank_approx(&f, 4).is_err());
    }

    #[test]
    fn rank_one_recovered_exactly() {
        let a = gaussian(6, 1, 9).dot(&gaussian(1, 4, 10));
        let f = svd(a.view()).unwrap();
        let a1 = low_rank_approx(&f, 1).unwrap();
        assert!((&a1 - &a).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn residual_equals_tail_energy() {
        let a = gaussian(6, 4, 12);
        let f = svd(a.view()).unwrap();
        let a2 = low_rank_approx(&f, 2).unwrap();
        let resid = frobenius_sq((&a - &a2).view());
        let tail = f.sigma[2].powi(2) + f.sigma[3].powi(2);
        assert!((resid - tail).abs() <= 1e-9 * tail);
    }

    #[test]
    fn right_svd_agrees_with_full() {
        for (n, d) in [(50, 6), (9, 6), (4, 9)] {
            let a = gaussian(n, d, (n * d) as u64);
            let full = svd(a.view()).unwrap();
            let right = right_svd(a.view()).unwrap();
            for (x, y) in full.sigma.iter().zip(right.sigma.iter()) {
                assert!((x - y).abs() <= 1e-10 * full.sigma[0]);
            }
            assert!(max_identity_deviation(right.v.t().dot(&right.v).view()) <= 1e-8);
            // A V V^T reproduces A when all directions are kept.
            let back = a.dot(&right.v).dot(&right.v.t());
            assert!((&back - &a).iter().all(|x| x.abs() < 1e-9));
        }
    }
}

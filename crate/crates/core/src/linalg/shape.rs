use ndarray::{Array2, ArrayView1, ArrayView2};

use super::{PointSet, Subspace};
use crate::error::{invalid_argument, invalid_input, Result};
use crate::exec::Exec;

/// `k` point centers in `R^d`, stored as rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterSet {
    centers: Array2<f64>,
}

impl CenterSet {
    pub fn new(centers: Array2<f64>) -> Result<Self> {
        if centers.nrows() == 0 || centers.ncols() == 0 {
            return invalid_argument("center set is empty");
        }
        if centers.iter().any(|x| !x.is_finite()) {
            return invalid_input("center set has non-finite entries");
        }
        Ok(CenterSet { centers })
    }

    pub fn centers(&self) -> ArrayView2<'_, f64> {
        self.centers.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.centers
    }

    pub fn k(&self) -> usize {
        self.centers.nrows()
    }

    pub fn d(&self) -> usize {
        self.centers.ncols()
    }

    /// Index and squared distance of the nearest center; ties go to the lowest index.
    #[inline]
    pub fn nearest(&self, x: ArrayView1<'_, f64>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (c, center) in self.centers.outer_iter().enumerate() {
            let d2 = sq_dist(x, center);
            if d2 < best.1 {
                best = (c, d2);
            }
        }
        best
    }
}

#[inline]
pub fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `C` in `dist²(A, C)`.
#[derive(Clone, Debug, PartialEq)]
pub enum QueryShape {
    Centers(CenterSet),
    Subspace(Subspace),
    /// Union of affine flats (projective clustering with `k` flats).
    Flats(Vec<Subspace>),
}

impl QueryShape {
    pub fn ambient_dim(&self) -> usize {
        match self {
            QueryShape::Centers(c) => c.d(),
            QueryShape::Subspace(s) => s.ambient_dim(),
            QueryShape::Flats(f) => f.first().map_or(0, Subspace::ambient_dim),
        }
    }

    fn validate(&self) -> Result<()> {
        if let QueryShape::Flats(f) = self {
            if f.is_empty() {
                return invalid_argument("empty set of flats");
            }
            let d = f[0].ambient_dim();
            if f.iter().any(|s| s.ambient_dim() != d) {
                return invalid_argument("flats live in different dimensions");
            }
        }
        Ok(())
    }
}

/// Squared distance from a single point to the shape (no dimension check).
#[inline]
pub fn dist2_point(x: ArrayView1<'_, f64>, shape: &QueryShape) -> f64 {
    match shape {
        QueryShape::Centers(c) => c.nearest(x).1,
        QueryShape::Subspace(s) => s.dist2(x),
        QueryShape::Flats(f) => f.iter().map(|s| s.dist2(x)).fold(f64::INFINITY, f64::min),
    }
}

/// `Σ w_i · dist²(A_i, C)` using the default execution strategy.
pub fn dist2(points: &PointSet, shape: &QueryShape) -> Result<f64> {
    dist2_with(points, shape, Exec::default())
}

pub fn dist2_with(points: &PointSet, shape: &QueryShape, exec: Exec) -> Result<f64> {
    shape.validate()?;
    if shape.ambient_dim() != points.d() {
        return invalid_argument(format!(
            "shape lives in R^{} but points in R^{}",
            shape.ambient_dim(),
            points.d()
        ));
    }
    Ok(exec.sum(points.n(), |i| {
        let w = points.weight(i);
        if w == 0.0 {
            0.0
        } else {
            w * dist2_point(points.row(i), shape)
        }
    }))
}

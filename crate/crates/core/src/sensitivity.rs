//! Sensitivity sampling: bicriteria k-means, sensitivity upper bounds,
//! the VC-style sample size, and the importance sampler that keeps
//! high-sensitivity points deterministically.

use ndarray::{Array1, ArrayView1};
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;

use crate::clustering::{assign, d2_seeding, lloyd_refine};
use crate::coreset::{ceil_tol, derive_seed, Coreset};
use crate::error::{invalid_argument, invalid_input, Error, Result};
use crate::exec::Exec;
use crate::linalg::{CenterSet, PointSet};

/// Constants of the sampling framework. All bounds hold up to these factors,
/// so they are exposed rather than hard-coded.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityConfig {
    /// Multiplier of the per-point sensitivity bound.
    pub c_s: f64,
    /// Budget for the total sensitivity: `S̃ <= c_tot · β · k`.
    pub c_tot: f64,
    /// Multiplier of the sample size formula.
    pub c_vc: f64,
    /// Multiplier of the VC dimension bound `d · k · log₂(k + 1)`.
    pub c_dim: f64,
    /// Bicriteria centers per requested center.
    pub beta: usize,
    /// Fixed sample size instead of the formula.
    pub sample_size: Option<usize>,
    /// Fixed target dimension for the reduce-then-sample constructions.
    pub reduced_dim: Option<usize>,
    pub exec: Exec,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            c_s: 8.0,
            c_tot: 64.0,
            c_vc: 1.0,
            c_dim: 1.0,
            beta: 2,
            sample_size: None,
            reduced_dim: None,
            exec: Exec::default(),
        }
    }
}

/// Upper bounds `σ̃_i` on the sensitivities and their total `S̃`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityProfile {
    sigma: Array1<f64>,
    total: f64,
}

impl SensitivityProfile {
    pub fn new(sigma: Array1<f64>) -> Result<Self> {
        if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return invalid_input("sensitivities must be finite and non-negative");
        }
        let total = sigma.sum();
        if total <= 0.0 {
            return invalid_input("total sensitivity is zero");
        }
        Ok(SensitivityProfile { sigma, total })
    }

    pub fn sigma(&self) -> ArrayView1<'_, f64> {
        self.sigma.view()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

/// A solution with `β·k` centers and its per-cluster statistics.
#[derive(Clone, Debug)]
pub struct BicriteriaSolution {
    pub centers: CenterSet,
    pub assignment: Vec<usize>,
    /// Weighted cost of each cluster.
    pub cluster_costs: Vec<f64>,
    /// Total weight of each cluster.
    pub cluster_sizes: Vec<f64>,
}

impl BicriteriaSolution {
    pub fn cost(&self) -> f64 {
        self.cluster_costs.iter().sum()
    }

    fn from_centers(points: &PointSet, centers: CenterSet, exec: Exec) -> Self {
        let assigned = assign(points, &centers, exec);
        let mut cluster_costs = vec![0.0; centers.k()];
        let mut cluster_sizes = vec![0.0; centers.k()];
        for (i, &(c, d2)) in assigned.iter().enumerate() {
            cluster_costs[c] += points.weight(i) * d2;
            cluster_sizes[c] += points.weight(i);
        }
        BicriteriaSolution {
            centers,
            assignment: assigned.into_iter().map(|a| a.0).collect(),
            cluster_costs,
            cluster_sizes,
        }
    }
}

/// Repetitions needed to push a constant failure probability below `δ`.
pub(crate) fn repetitions(delta: f64) -> usize {
    ceil_tol((1.0 / delta).log2()).max(1)
}

/// `(α, β)`-approximation with `β = 2`: D² seeding of `2k` centers followed
/// by one Lloyd step, repeated `⌈log₂(1/δ)⌉` times keeping the cheapest.
pub fn bicriteria_kmeans(points: &PointSet, k: usize, delta: f64, seed: u64) -> Result<BicriteriaSolution> {
    bicriteria_kmeans_with(points, k, delta, seed, &SensitivityConfig::default())
}

pub fn bicriteria_kmeans_with(
    points: &PointSet,
    k: usize,
    delta: f64,
    seed: u64,
    config: &SensitivityConfig,
) -> Result<BicriteriaSolution> {
    if k == 0 || k > points.n() {
        return invalid_argument(format!("k = {k} must lie in [1, n = {}]", points.n()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return invalid_argument(format!("delta must lie in (0, 1), got {delta}"));
    }
    let count = (config.beta.max(1) * k).min(points.n());
    if count == points.n() {
        let centers = CenterSet::new(points.rows().to_owned())?;
        return Ok(BicriteriaSolution::from_centers(points, centers, config.exec));
    }
    let mut best: Option<(f64, CenterSet)> = None;
    for r in 0..repetitions(delta) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
        let init = d2_seeding(points, count, &mut rng)?;
        let run = lloyd_refine(points, init, 1, config.exec)?;
        if best.as_ref().is_none_or(|b| run.cost < b.0) {
            best = Some((run.cost, run.centers));
        }
    }
    let (_, centers) = best.expect("at least one repetition");
    Ok(BicriteriaSolution::from_centers(points, centers, config.exec))
}

/// `σ̃_i = c_s · (w_i / |J_i|_w + w_i · dist²(p_i, C′) / cost(A, C′))` with default `c_s`.
pub fn kmeans_sensitivities(points: &PointSet, bic: &BicriteriaSolution) -> Result<SensitivityProfile> {
    kmeans_sensitivities_with(points, bic, SensitivityConfig::default().c_s)
}

pub fn kmeans_sensitivities_with(points: &PointSet, bic: &BicriteriaSolution, c_s: f64) -> Result<SensitivityProfile> {
    if bic.assignment.len() != points.n() || bic.centers.d() != points.d() {
        return invalid_input("bicriteria solution does not belong to these points");
    }
    let cost = bic.cost();
    let sigma = Array1::from_shape_fn(points.n(), |i| {
        let c = bic.assignment[i];
        let w = points.weight(i);
        let size = bic.cluster_sizes[c];
        let mut s = if size > 0.0 { w / size } else { 0.0 };
        if cost > 0.0 {
            let d2 = crate::linalg::sq_dist(points.row(i), bic.centers.centers().row(c));
            s += w * d2 / cost;
        }
        c_s * s
    });
    SensitivityProfile::new(sigma)
}

/// Sensitivity bounds for `A` from those of a nearby `B` with
/// `Σ w_i ‖a_i - b_i‖² <= α · opt`:
/// `σ̃_a,i = (4 + 4α) · (σ̃_b,i + w_i ‖a_i - b_i‖² / opt)`.
pub fn movement_sensitivities(
    points_a: &PointSet,
    points_b: &PointSet,
    profile_b: &SensitivityProfile,
    opt_cost: f64,
    alpha: f64,
) -> Result<SensitivityProfile> {
    if !(opt_cost > 0.0 && opt_cost.is_finite()) {
        return invalid_input(format!("optimal cost must be positive, got {opt_cost}"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return invalid_argument(format!("alpha must be non-negative, got {alpha}"));
    }
    if points_a.n() != points_b.n() || points_a.d() != points_b.d() || profile_b.len() != points_a.n() {
        return invalid_argument("moved point sets and profile must have matching shapes");
    }
    let moved: Vec<f64> = (0..points_a.n())
        .map(|i| points_a.weight(i) * crate::linalg::sq_dist(points_a.row(i), points_b.row(i)))
        .collect();
    let budget = alpha * opt_cost;
    let total_move: f64 = moved.iter().sum();
    if total_move > budget * (1.0 + 1e-12) + f64::MIN_POSITIVE {
        return invalid_input(format!(
            "movement {total_move} exceeds the budget alpha * opt = {budget}"
        ));
    }
    let factor = 4.0 + 4.0 * alpha;
    let sigma = Array1::from_shape_fn(points_a.n(), |i| factor * (profile_b.sigma[i] + moved[i] / opt_cost));
    SensitivityProfile::new(sigma)
}

/// `⌈S̃/ε² · (dim · log₂ max(S̃, 2) + log₂(1/δ))⌉` (with `c_vc = 1`).
pub fn vc_sample_size(total_sensitivity: f64, dim_bound: usize, eps: f64, delta: f64) -> usize {
    vc_sample_size_with(total_sensitivity, dim_bound, eps, delta, 1.0)
}

pub fn vc_sample_size_with(total_sensitivity: f64, dim_bound: usize, eps: f64, delta: f64, c_vc: f64) -> usize {
    let t = total_sensitivity;
    let s = c_vc * t / (eps * eps) * (dim_bound as f64 * t.max(2.0).log2() + (1.0 / delta).log2());
    ceil_tol(s)
}

/// `⌈c_dim · d · k · log₂(k + 1)⌉`: dimension bound for `k` centers in `R^d`.
pub fn kmeans_dim_bound(d: usize, k: usize, c_dim: f64) -> usize {
    ceil_tol(c_dim * (d * k) as f64 * ((k + 1) as f64).log2())
}

/// Raises `sigma` (each `<= cap`) to `min(cap, λ·σ_i)` with the `λ >= 1`
/// that makes the values sum to `target`. Requires `len · cap >= target`.
pub fn water_fill(sigma: &[f64], target: f64, cap: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let mut rest: f64 = sigma.iter().sum();
    let mut lambda = None;
    for (t, &i) in order.iter().enumerate() {
        if rest <= 0.0 {
            break;
        }
        let l = (target - t as f64 * cap) / rest;
        if l * sigma[i] <= cap {
            lambda = Some((t, l.max(1.0)));
            break;
        }
        rest -= sigma[i];
    }
    let mut out = vec![cap; sigma.len()];
    if let Some((t, l)) = lambda {
        for &i in &order[t..] {
            out[i] = (l * sigma[i]).min(cap).max(sigma[i]);
        }
    }
    out
}

/// Importance sample of size `|D| + s`, where `D` holds the points with
/// `σ̃_i / S̃ > 1/s` (kept with their own weight). The rest are drawn `s`
/// times i.i.d. with probability `σ̃₁_i / S̃` and weight `w_i · S̃ / (s · σ̃₁_i)`,
/// where `σ̃₁` is the water-filled profile capped at `S̃ / s`. Every output
/// weight is at least the input weight of its point. `Δ = 0`.
pub fn sensitivity_sample(points: &PointSet, profile: &SensitivityProfile, s: usize, seed: u64) -> Result<Coreset> {
    if profile.total() <= 0.0 {
        return invalid_input("degenerate sensitivity profile");
    }
    if profile.len() != points.n() {
        return invalid_input("profile length differs from the number of points");
    }
    if s == 0 {
        return invalid_argument("sample size must be at least 1");
    }
    let total = profile.total();
    let cap = total / s as f64;
    let mut kept = Vec::new();
    let mut pool = Vec::new();
    for i in 0..points.n() {
        let w = points.weight(i);
        if w == 0.0 {
            continue;
        }
        let si = profile.sigma[i];
        if si > cap || si == 0.0 {
            kept.push(i);
        } else {
            pool.push(i);
        }
    }
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for &i in &kept {
        rows.push(i);
        weights.push(points.weight(i));
    }
    if pool.len() <= s {
        for &i in &pool {
            rows.push(i);
            weights.push(points.weight(i));
        }
    } else {
        let raw: Vec<f64> = pool.iter().map(|&i| profile.sigma[i]).collect();
        let capped = water_fill(&raw, total, cap);
        let sum: f64 = capped.iter().sum();
        let alias = WeightedAliasIndex::new(capped.clone())
            .map_err(|e| Error::InvalidInput(format!("cannot build sampling table: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        for _ in 0..s {
            let t = alias.sample(&mut rng);
            let i = pool[t];
            let w = points.weight(i);
            rows.push(i);
            weights.push((w * sum / (s as f64 * capped[t])).max(w));
        }
    }
    if rows.is_empty() {
        return invalid_input("nothing to sample");
    }
    let pts = points.rows().select(ndarray::Axis(0), &rows);
    Coreset::new(pts, Array1::from(weights), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn sample_size_example() {
        assert_eq!(vc_sample_size(4.0, 8, 0.5, 0.1), 310);
        let want = (16.0 * (16.0 + 10f64.log2())).ceil() as usize;
        assert_eq!(vc_sample_size(4.0, 8, 0.5, 0.1), want);
    }

    #[test]
    fn water_fill_constraints() {
        let sigma = [0.05, 0.1, 0.2, 0.01, 0.3];
        let out = water_fill(&sigma, 1.0, 0.3);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in sigma.iter().zip(&out) {
            assert!(b >= a && *b <= 0.3);
        }
    }

    #[test]
    fn identical_points_get_mass_only() {
        let p = PointSet::new(Array2::from_elem((5, 2), 1.0)).unwrap();
        let bic = bicriteria_kmeans(&p, 1, 0.1, 0).unwrap();
        assert_eq!(bic.cost(), 0.0);
        let prof = kmeans_sensitivities(&p, &bic).unwrap();
        for s in prof.sigma() {
            assert!((s - 8.0 / 5.0).abs() < 1e-12);
        }
        assert!((prof.total() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn movement_errors() {
        let a = PointSet::new(array![[0.0], [1.0]]).unwrap();
        let prof = SensitivityProfile::new(array![0.5, 0.5]).unwrap();
        assert!(matches!(
            movement_sensitivities(&a, &a, &prof, 0.0, 1.0),
            Err(Error::InvalidInput(_))
        ));
        let b = PointSet::new(array![[0.0], [3.0]]).unwrap();
        assert!(movement_sensitivities(&a, &b, &prof, 1.0, 1.0).is_err());
    }
}

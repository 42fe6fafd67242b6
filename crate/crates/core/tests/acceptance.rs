//! Acceptance suite. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits nonzero if any criterion fails.

mod common;

use std::process::{Command, Stdio};
use std::time::Instant;

use common::{blobs, gaussian, gaussian_matrix, rng};
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use tinycore::bregman::{
    bregman_coreset, depth_limit, f1, partition_helper, ClusteringFeature, Divergence, PartitionSolver,
};
use tinycore::clustering::{kmeans_coreset_with, small_kmeans_coreset_with};
use tinycore::dimred::{approx_solution, reduce, ExactSolver, Problem, ReduceMode};
use tinycore::exec::Exec;
use tinycore::queries::{center_grid, random_subspaces, shapes_in_subspaces};
use tinycore::sensitivity::SensitivityConfig;
use tinycore::streaming::{schedule_factor, StreamConfig, StreamKind, StreamState};
use tinycore::subspace_coreset::{affine_subspace_coreset, affine_subspace_coreset_weighted, linear_subspace_coreset};
use tinycore::{CenterSet, Coreset, PointSet, QueryShape};

const LOWER_SLACK: f64 = 1e-9;

type DivFn<'a> = Box<dyn Fn(ArrayView1<'_, f64>, ArrayView1<'_, f64>) -> f64 + 'a>;
type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

// ---------------------------------------------------------------------------
// Oracles: plain loops over the raw coordinates, independent of the library's
// cost evaluation.

fn sq(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn point_cost(x: ArrayView1<'_, f64>, shape: &QueryShape) -> f64 {
    match shape {
        QueryShape::Centers(c) => c.centers().outer_iter().map(|z| sq(x, z)).fold(f64::INFINITY, f64::min),
        QueryShape::Subspace(s) => {
            let b = s.basis();
            let y: Vec<f64> = match s.offset() {
                Some(p) => x.iter().zip(p.iter()).map(|(a, c)| a - c).collect(),
                None => x.to_vec(),
            };
            let mut r = y.clone();
            for col in 0..b.ncols() {
                let c: f64 = (0..y.len()).map(|i| b[[i, col]] * y[i]).sum();
                for i in 0..y.len() {
                    r[i] -= c * b[[i, col]];
                }
            }
            r.iter().map(|v| v * v).sum()
        }
        QueryShape::Flats(_) => unreachable!("not used by the acceptance suite"),
    }
}

fn oracle_rows(rows: ndarray::ArrayView2<'_, f64>, weights: &[f64], shape: &QueryShape) -> f64 {
    rows.outer_iter().zip(weights).map(|(x, w)| w * point_cost(x, shape)).sum()
}

fn oracle(points: &PointSet, shape: &QueryShape) -> f64 {
    oracle_rows(points.rows(), &points.weight_vec().to_vec(), shape)
}

fn oracle_coreset(c: &Coreset, shape: &QueryShape) -> f64 {
    oracle_rows(c.points(), &c.weights().to_vec(), shape) + c.delta()
}

fn truths(points: &PointSet, shapes: &[QueryShape]) -> Vec<f64> {
    Exec::default().map(shapes.len(), |i| oracle(points, &shapes[i]))
}

/// Largest `|est/truth - 1|`, and whether every estimate lies in
/// `[truth (1 - 1e-9), (1 + upper) truth]` and `[(1 - lower) truth, ..]`.
struct Check {
    max_dev: f64,
    violations: usize,
}

fn sandwich(truth: &[f64], c: &Coreset, shapes: &[QueryShape], lower: f64, upper: f64) -> Check {
    let mut max_dev: f64 = 0.0;
    let mut violations = 0;
    for (t, s) in truth.iter().zip(shapes) {
        let e = oracle_coreset(c, s);
        max_dev = max_dev.max((e - t).abs() / t);
        if e < (1.0 - lower) * t || e > (1.0 + upper) * t {
            violations += 1;
        }
    }
    Check { max_dev, violations }
}

fn tuned(sample: usize, reduced: Option<usize>) -> SensitivityConfig {
    SensitivityConfig {
        sample_size: Some(sample),
        reduced_dim: reduced,
        ..SensitivityConfig::default()
    }
}

/// `j + ⌈j/ε⌉ - 1` for `ε = num/den`, in integers.
fn linear_size(j: usize, num: usize, den: usize) -> usize {
    j + (j * den).div_ceil(num) - 1
}

fn seeds<T: Send>(n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    Exec::default().map(n, |i| f(i as u64))
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let a = gaussian(500, 50, 1);
    let mut worst = 0.0f64;
    let mut ok = true;
    let mut sizes = Vec::new();
    for (j, num, den) in [(1, 1, 1), (2, 1, 2), (3, 1, 10), (5, 1, 5)] {
        let eps = num as f64 / den as f64;
        let t = Instant::now();
        let c = linear_subspace_coreset(&a, j, eps).unwrap();
        worst = worst.max(t.elapsed().as_secs_f64());
        ok &= c.len() == linear_size(j, num, den);
        sizes.push(format!("{}={}", j, c.len()));
    }
    ok &= worst < 1.0;
    outcome(ok, format!("sizes j={} (expected 1,5,32,29), slowest {:.3}s", sizes.join(","), worst))
}

fn subspace_sandwich(affine: bool) -> (bool, String) {
    let inputs = [("gaussian", gaussian(500, 50, 2)), ("clustered", blobs(500, 50, 5, 6.0, 1.0, 3))];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, a) in &inputs {
        for (j, eps) in [(1, 1.0), (2, 0.5), (3, 0.1), (5, 0.2)] {
            let shapes = random_subspaces(50, j, affine, 200, 10 + j as u64).unwrap();
            let t = truths(a, &shapes);
            let c = if affine {
                affine_subspace_coreset(a, j, eps).unwrap()
            } else {
                linear_subspace_coreset(a, j, eps).unwrap()
            };
            let chk = sandwich(&t, &c, &shapes, LOWER_SLACK, eps);
            ok &= chk.violations == 0;
            parts.push(format!("{name}/j{j}:{}", chk.violations));
        }
    }
    (ok, format!("violations {}", parts.join(" ")))
}

fn criterion_2() -> Outcome {
    let (ok, detail) = subspace_sandwich(false);
    outcome(ok, detail)
}

fn criterion_3() -> Outcome {
    let (mut ok, detail) = subspace_sandwich(true);
    // weighted input against replication of each row by its (integer) weight
    let base = gaussian_matrix(120, 20, 4);
    let mut r = rng(5);
    let w: Vec<usize> = (0..120).map(|_| r.random_range(1..=5)).collect();
    let weighted = PointSet::with_weights(base.clone(), Array1::from_iter(w.iter().map(|&x| x as f64))).unwrap();
    let mut rows = Vec::new();
    for (i, &m) in w.iter().enumerate() {
        for _ in 0..m {
            rows.extend(base.row(i).iter().copied());
        }
    }
    let total: usize = w.iter().sum();
    let replicated = PointSet::new(Array2::from_shape_vec((total, 20), rows).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    let mut sandwich_bad = 0;
    for (j, eps) in [(1, 0.5), (3, 0.2)] {
        let cw = affine_subspace_coreset_weighted(&weighted, j, eps).unwrap();
        let cr = affine_subspace_coreset(&replicated, j, eps).unwrap();
        let shapes = random_subspaces(20, j, true, 200, 6 + j as u64).unwrap();
        for s in &shapes {
            let (x, y) = (oracle_coreset(&cw, s), oracle_coreset(&cr, s));
            worst = worst.max((x - y).abs() / x.abs().max(y.abs()));
        }
        sandwich_bad += sandwich(&truths(&weighted, &shapes), &cw, &shapes, LOWER_SLACK, eps).violations;
    }
    ok &= worst <= 1e-9 && sandwich_bad == 0;
    outcome(ok, format!("{detail}; weighted vs 5x replication max rel diff {worst:.2e}, weighted sandwich violations {sandwich_bad}"))
}

fn criterion_4() -> Outcome {
    let a = gaussian(300, 100, 7);
    let mut ok = true;
    let mut parts = Vec::new();
    for (j, eps) in [(1usize, 0.5), (1, 1.0), (2, 0.5), (2, 1.0)] {
        let r = reduce(&a, j, eps, ReduceMode::General).unwrap();
        let expected = ((8 * j) as f64 / (eps * eps)).ceil() as usize - 1;
        ok &= r.m() == expected.min(100);
        let low = r.low_rank_point_set();
        let shapes = shapes_in_subspaces(100, j, 3, 1.0, 200, 8 + j as u64).unwrap();
        let bad = shapes
            .iter()
            .filter(|s| {
                let t = oracle(&a, s);
                (oracle(&low, s) + r.delta() - t).abs() > eps * t
            })
            .count();
        ok &= bad == 0;
        parts.push(format!("j{j}/eps{eps}: m={} violations={bad}", r.m()));
    }
    outcome(ok, parts.join(", "))
}

/// Index of every coreset row in the input (rows are copied verbatim).
fn source_rows(points: &PointSet, c: &Coreset) -> Vec<usize> {
    c.points()
        .outer_iter()
        .map(|p| (0..points.n()).find(|&i| points.row(i) == p).unwrap())
        .collect()
}

fn criterion_5() -> Outcome {
    let (k, eps, delta) = (4, 0.5, 0.1);
    let a = blobs(400, 20, k, 6.0, 1.0, 20);
    let grid = center_grid(&a, k, 500, 21).unwrap();
    let t = truths(&a, &grid);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, config) in [("default", SensitivityConfig::default()), ("tuned s=100", tuned(100, None))] {
        let runs = seeds(100, |seed| {
            let c = kmeans_coreset_with(&a, k, eps, delta, seed, &config).unwrap();
            let floor = c.weights().iter().zip(source_rows(&a, &c)).all(|(w, i)| *w >= a.weight(i)) && c.delta() == 0.0;
            let chk = sandwich(&t, &c, &grid, eps, eps);
            (chk.violations == 0, floor, c.len())
        });
        let passed = runs.iter().filter(|r| r.0).count();
        let floors = runs.iter().all(|r| r.1);
        ok &= passed >= 90 && floors;
        parts.push(format!("{name}: grid {passed}/100, weight floor {}, m={}", if floors { "ok" } else { "BROKEN" }, runs[0].2));
    }
    let config = tuned(100, None);
    let totals = seeds(1000, |seed| kmeans_coreset_with(&a, k, eps, delta, 1000 + seed, &config).unwrap().total_weight());
    let mean = totals.iter().sum::<f64>() / totals.len() as f64;
    let rel = (mean / a.total_weight() - 1.0).abs();
    ok &= rel <= 0.02;
    parts.push(format!("mean total weight off by {:.3}%", 100.0 * rel));
    outcome(ok, parts.join("; "))
}

/// The same point cloud placed isometrically in `R^d`.
fn embed(a: &PointSet, d: usize, seed: u64) -> PointSet {
    let mut padded = Array2::zeros((a.n(), d));
    padded.slice_mut(ndarray::s![.., ..a.d()]).assign(&a.rows());
    let q = tinycore::linalg::orthonormalize(gaussian_matrix(d, d, seed).view()).unwrap();
    PointSet::new(padded.dot(&q.t())).unwrap()
}

fn criterion_6() -> Outcome {
    let (k, eps, delta) = (4, 0.5, 0.1);
    let base = blobs(400, 20, k, 6.0, 1.0, 30);
    let a40 = embed(&base, 40, 31);
    let a80 = embed(&base, 80, 32);
    let g40 = center_grid(&a40, k, 500, 33).unwrap();
    let g80 = center_grid(&a80, k, 500, 34).unwrap();
    let (t40, t80) = (truths(&a40, &g40), truths(&a80, &g80));
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, config) in [("default", SensitivityConfig::default()), ("tuned s=100 m=12", tuned(100, Some(12)))] {
        let runs = seeds(100, |seed| {
            let c40 = small_kmeans_coreset_with(&a40, k, eps, delta, seed, &config).unwrap();
            let c80 = small_kmeans_coreset_with(&a80, k, eps, delta, seed, &config).unwrap();
            let p40 = sandwich(&t40, &c40, &g40, eps, eps).violations == 0;
            let p80 = sandwich(&t80, &c80, &g80, eps, eps).violations == 0;
            (c40.len(), c80.len(), p40, p80)
        });
        let same = runs.iter().all(|r| r.0 == r.1);
        let p40 = runs.iter().filter(|r| r.2).count();
        let p80 = runs.iter().filter(|r| r.3).count();
        ok &= same && p40 >= 90 && p80 >= 90;
        parts.push(format!(
            "{name}: counts {} (m={}), grid d=40 {p40}/100, d=80 {p80}/100",
            if same { "identical" } else { "DIFFER" },
            runs[0].0
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();

    let n = 1usize << 14;
    let a = gaussian(n, 60, 40);
    let mut s = StreamState::new(StreamConfig::new(StreamKind::Subspace { j: 1 }, 0.5), 60).unwrap();
    let mut checkpoints = Vec::new();
    for (i, row) in a.rows().outer_iter().enumerate() {
        s.insert(row).unwrap();
        let m = i + 1;
        if m >= 256 && m.is_power_of_two() {
            checkpoints.push((m, s.stats().peak_live_points));
        }
    }
    let shapes = random_subspaces(60, 1, false, 100, 41).unwrap();
    let chk = sandwich(&truths(&a, &shapes), &s.query().unwrap(), &shapes, 1.5, 1.5);
    ok &= chk.violations == 0;
    parts.push(format!("subspace stream max error {:.3} (limit 1.5)", chk.max_dev));

    // least-squares fit of live = c·log²n past the raw-buffer phase; every
    // checkpoint must stay within 25% of the fitted curve
    let fit: Vec<(f64, f64)> =
        checkpoints.iter().filter(|(m, _)| *m >= 1024).map(|&(m, l)| ((m as f64).log2().powi(2), l as f64)).collect();
    let c = fit.iter().map(|(x, y)| x * y).sum::<f64>() / fit.iter().map(|(x, _)| x * x).sum::<f64>();
    let held = fit.iter().all(|(x, y)| *y <= 1.25 * c * x);
    ok &= held;
    parts.push(format!(
        "live points {} fit c={c:.2} {}",
        checkpoints.iter().map(|(m, l)| format!("{m}:{l}")).collect::<Vec<_>>().join(" "),
        if held { "holds" } else { "EXCEEDED" }
    ));

    let (k, eps) = (3, 0.5);
    let b = blobs(1 << 12, 5, k, 8.0, 1.0, 42);
    let grid = center_grid(&b, k, 500, 43).unwrap();
    let t = truths(&b, &grid);
    for (name, config) in [("default", SensitivityConfig::default()), ("tuned s=100", tuned(100, None))] {
        let passed = seeds(100, |seed| {
            let cfg = StreamConfig::new(StreamKind::KMeans { k }, eps).delta(0.1).seed(seed).sensitivity(config.clone());
            let mut st = StreamState::new(cfg, 5).unwrap();
            st.insert_all(&b.rows().to_owned()).unwrap();
            sandwich(&t, &st.query().unwrap(), &grid, eps, eps).violations == 0
        })
        .into_iter()
        .filter(|&p| p)
        .count();
        ok &= passed >= 90;
        parts.push(format!("k-means stream {name}: grid {passed}/100"));
    }

    let mut schedule_ok = true;
    for eps in [0.01, 0.1, 0.5, 1.0] {
        for h in 1..=64u32 {
            let direct = (1.0 + eps / (10.0 * h as f64)).powi(h as i32);
            schedule_ok &= direct <= 1.0 + eps && schedule_factor(eps, h) <= 1.0 + eps;
            schedule_ok &= (schedule_factor(eps, h) - direct).abs() <= 1e-12;
        }
    }
    ok &= schedule_ok;
    parts.push(format!("schedule h<=64 {}", if schedule_ok { "holds" } else { "FAILS" }));
    outcome(ok, parts.join("; "))
}

fn mahalanobis_oracle(b: &Array2<f64>) -> impl Fn(ArrayView1<'_, f64>, ArrayView1<'_, f64>) -> f64 + '_ {
    move |p, q| {
        (0..b.nrows())
            .map(|r| {
                let y: f64 = (0..b.ncols()).map(|c| b[[r, c]] * (p[c] - q[c])).sum();
                y * y
            })
            .sum()
    }
}

fn cf_oracle(cfs: &[ClusteringFeature], centers: &CenterSet, d: &dyn Fn(ArrayView1<'_, f64>, ArrayView1<'_, f64>) -> f64) -> f64 {
    cfs.iter()
        .map(|cf| {
            let near = centers.centers().outer_iter().map(|z| d(cf.centroid.view(), z)).fold(f64::INFINITY, f64::min);
            cf.internal_cost + cf.weight * near
        })
        .sum()
}

fn criterion_8() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let dim = 3;
    let diag = Array2::from_diag(&Array1::linspace(0.5, 2.0, dim));
    let full = gaussian_matrix(dim, dim, 50) + Array2::<f64>::eye(dim) * 3.0;
    let cases: Vec<(&str, Divergence, DivFn<'_>)> = vec![
        ("euclidean", Divergence::squared_euclidean(), Box::new(sq)),
        ("mahalanobis-diag", Divergence::mahalanobis(diag.clone()).unwrap(), Box::new(mahalanobis_oracle(&diag))),
        ("mahalanobis-full", Divergence::mahalanobis(full.clone()).unwrap(), Box::new(mahalanobis_oracle(&full))),
    ];
    let mut r = rng(51);
    let mut worst: f64 = 0.0;
    for (t, (_, div, d)) in cases.iter().enumerate() {
        for draw in 0..1000u64 {
            let n = r.random_range(1..15);
            let rows = gaussian_matrix(n, dim, 100_000 * t as u64 + draw);
            let w: Vec<f64> = (0..n).map(|_| r.random_range(0.5..3.0)).collect();
            let z = Array1::from_shape_fn(dim, |_| r.random_range(-3.0..3.0));
            let total: f64 = w.iter().sum();
            let mu = Array1::from_shape_fn(dim, |c| (0..n).map(|i| w[i] * rows[[i, c]]).sum::<f64>() / total);
            let lhs: f64 = (0..n).map(|i| w[i] * d(rows.row(i), z.view())).sum();
            let opt1: f64 = (0..n).map(|i| w[i] * d(rows.row(i), mu.view())).sum();
            let rhs = opt1 + total * d(mu.view(), z.view());
            worst = worst.max((lhs - rhs).abs() / lhs.max(1.0));
            // the library evaluates the same divergence
            let a = PointSet::with_weights(rows.clone(), Array1::from(w.clone())).unwrap();
            worst = worst.max((div.opt1(&a) - opt1).abs() / opt1.max(1.0));
        }
    }
    ok &= worst <= 1e-9;
    parts.push(format!("centroid identity residual {worst:.1e}"));

    let f = f1(1.0, 1.0);
    ok &= (f - 1.0 / 25.0).abs() <= 1e-15;
    parts.push(format!("f1(1)={f}"));

    // Gaussian blobs keep splitting at any scale; blobs made of a few
    // repeated sites show the compression
    let gauss = blobs(150, dim, 3, 8.0, 1.0, 52);
    let sites = blobs(15, dim, 3, 8.0, 1.0, 54);
    let repeated = PointSet::new(Array2::from_shape_fn((600, dim), |(i, c)| sites.row(i % 15)[c])).unwrap();
    let solver = PartitionSolver::default();
    for (data, a) in [("gaussian blobs", &gauss), ("repeated-site blobs", &repeated)] {
        let grid = center_grid(a, 3, 500, 53).unwrap();
        for (name, div, d) in &cases[..2] {
            let nu = depth_limit(0.5, div.similarity()).unwrap();
            let cfs = bregman_coreset(a, 3, 0.5, div, &solver).unwrap();
            let limit = 2.0 * 3f64.powi(nu as i32);
            let err = grid
                .iter()
                .map(|s| {
                    let QueryShape::Centers(c) = s else { unreachable!() };
                    let truth: f64 = (0..a.n())
                        .map(|i| c.centers().outer_iter().map(|z| d(a.row(i), z)).fold(f64::INFINITY, f64::min))
                        .sum();
                    (cf_oracle(&cfs, c, d.as_ref()) - truth).abs() / truth
                })
                .fold(0.0, f64::max);
            ok &= cfs.len() as f64 <= limit && err <= 0.5;
            parts.push(format!("{data} n={} {name}: {} CFs (limit {limit}), grid error {err:.3}", a.n(), cfs.len()));
        }
    }
    let mut deepest = 0;
    let mut depth_ok = true;
    for seed in 0..20u64 {
        let b = blobs(40 + 5 * seed as usize, 2, 3, 2.0 + seed as f64, 1.0, 60 + seed);
        let div = Divergence::squared_euclidean();
        let nu = 1 + seed as usize % 4;
        let leaves = partition_helper(&b, 3, 0, nu, f1(0.25, 1.0), &solver, &div).unwrap();
        for l in &leaves {
            deepest = deepest.max(l.depth);
            depth_ok &= l.depth <= nu;
        }
    }
    ok &= depth_ok;
    parts.push(format!("depth <= nu {} (deepest {deepest})", if depth_ok { "always" } else { "VIOLATED" }));
    outcome(ok, parts.join("; "))
}

/// Exact weighted k-means optimum by enumerating set partitions into at most `k` blocks.
fn exhaustive_kmeans(a: &PointSet, k: usize) -> f64 {
    fn rec(a: &PointSet, k: usize, labels: &mut Vec<usize>, used: usize, best: &mut f64) {
        let n = a.n();
        if labels.len() == n {
            let mut cost = 0.0;
            for b in 0..used {
                let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == b).collect();
                let w: f64 = idx.iter().map(|&i| a.weight(i)).sum();
                let mu: Vec<f64> = (0..a.d()).map(|c| idx.iter().map(|&i| a.weight(i) * a.row(i)[c]).sum::<f64>() / w).collect();
                cost += idx.iter().map(|&i| a.weight(i) * sq(a.row(i), ArrayView1::from(&mu))).sum::<f64>();
            }
            *best = best.min(cost);
            return;
        }
        for b in 0..(used + 1).min(k) {
            labels.push(b);
            rec(a, k, labels, used.max(b + 1), best);
            labels.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(a, k, &mut Vec::new(), 0, &mut best);
    best
}

fn criterion_9() -> Outcome {
    let results = seeds(100, |i| {
        let mut r = rng(900 + i);
        let n = r.random_range(2..=12);
        let d = r.random_range(2..=6);
        let k = r.random_range(1..=3.min(n));
        let eps = [0.2, 0.5, 0.8][i as usize % 3];
        let a = blobs(n, d, k, 5.0, 1.0, 1000 + i);
        let a = if i % 2 == 0 { common::weighted(&a, 2000 + i) } else { a };
        let opt = exhaustive_kmeans(&a, k);
        let got = oracle(&a, &approx_solution(&a, Problem::KMeans { k }, eps, &ExactSolver).unwrap());
        got <= (1.0 + eps) / (1.0 - eps) * opt * (1.0 + 1e-12) + 1e-12
    });
    let passed = results.iter().filter(|&&p| p).count();
    outcome(passed == 100, format!("{passed}/100 instances within (1+eps)/(1-eps) of the optimum"))
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_tinycore"))
        .args(args)
        .stdin(Stdio::null())
        .output()
        .unwrap();
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_10() -> Outcome {
    use tinycore::cli::format::{read_coreset, write_binary};
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    let data = path("data.csv");
    std::fs::write(&data, common::to_csv(&gaussian(500, 50, 70))).unwrap();
    let mut parts = Vec::new();

    let commands: Vec<Vec<String>> = vec![
        vec!["coreset", "kmeans", "--k", "4", "--epsilon", "0.5", "--seed", "3", "--sample-size", "80"],
        vec!["coreset", "small-kmeans", "--k", "3", "--epsilon", "0.5", "--seed", "3", "--sample-size", "50", "--reduced-dim", "10"],
        vec!["coreset", "affine", "--j", "2", "--epsilon", "0.5"],
        vec!["solve", "kmeans", "--k", "3", "--epsilon", "0.5", "--seed", "4", "--trials", "3", "--sample-size", "60"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).chain([data.clone()]).collect())
    .collect();
    let mut identical = true;
    for c in &commands {
        let args: Vec<&str> = c.iter().map(String::as_str).collect();
        let (c1, o1) = cli(&args);
        let (c2, o2) = cli(&args);
        identical &= c1 == 0 && c2 == 0 && o1 == o2 && !o1.is_empty();
    }
    parts.push(format!("reruns {}", if identical { "byte-identical" } else { "DIFFER" }));

    let bin = path("c.cs");
    let (code, _) = cli(&["coreset", "kmeans", "--k", "4", "--epsilon", "0.5", "--seed", "3", "--sample-size", "80", &data, "-o", &bin]);
    let bytes = std::fs::read(&bin).unwrap();
    let file = read_coreset(&bytes).unwrap();
    let mut again = Vec::new();
    write_binary(&file, &mut again).unwrap();
    let lossless = code == 0 && again == bytes && read_coreset(&again).unwrap() == file;
    parts.push(format!("binary round-trip {}", if lossless { "lossless" } else { "LOSSY" }));

    let tight = path("tight.cs");
    let (c0, _) = cli(&["coreset", "subspace", "--j", "1", "--epsilon", "0.05", &data, "-o", &tight]);
    let eval = ["eval", tight.as_str(), data.as_str(), "--queries", "subspace", "--j", "1", "--count", "200", "--seed", "5"];
    let (clean, _) = cli(&eval);
    let mut f = read_coreset(&std::fs::read(&tight).unwrap()).unwrap();
    f.coreset = f.coreset.clone().with_delta(f.coreset.delta() * 1.1).unwrap();
    let mut buf = Vec::new();
    write_binary(&f, &mut buf).unwrap();
    std::fs::write(&tight, buf).unwrap();
    let (corrupt, report) = cli(&eval);
    let control = c0 == 0 && clean == 0 && corrupt != 0 && String::from_utf8_lossy(&report).contains("result=fail");
    parts.push(format!("negative control: clean exit {clean}, corrupted exit {corrupt}"));
    outcome(identical && lossless && control, parts.join("; "))
}

fn main() {
    // `cargo test -- --list` and filters pass arguments; the suite always runs in full
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 10] = [
        ("linear coreset size and runtime", criterion_1),
        ("linear sandwich bound", criterion_2),
        ("affine sandwich bound", criterion_3),
        ("dimensionality reduction", criterion_4),
        ("k-means coreset", criterion_5),
        ("smaller k-means coreset", criterion_6),
        ("streaming", criterion_7),
        ("Bregman coreset", criterion_8),
        ("oracle agreement", criterion_9),
        ("CLI", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        if !o.ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} ({:.1}s)",
            i + 1,
            if o.ok { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

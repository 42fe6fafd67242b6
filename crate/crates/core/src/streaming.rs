//! Merge-and-reduce streaming.
//!
//! Points are buffered until the buffer holds twice a level coreset, then
//! compressed and pushed through a binary counter of buckets: equal-level
//! summaries are merged and compressed again. Epoch `h` lasts `2^h`
//! insertions and runs at precision `γ = ε/(10h)`; at its end the live
//! buckets are folded into one summary for the epoch.

use ndarray::{Array1, Array2, ArrayView1};

use crate::clustering::small_kmeans_coreset_with;
use crate::coreset::{derive_seed, Coreset};
use crate::error::{invalid_argument, invalid_input, Error, Result};
use crate::sensitivity::{kmeans_dim_bound, vc_sample_size_with, SensitivityConfig};
use crate::subspace_coreset::{
    affine_subspace_coreset_weighted, check_subspace_args, coreset_size_linear, linear_subspace_coreset,
};

/// The problem every summary is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamKind {
    Subspace { j: usize },
    Affine { j: usize },
    KMeans { k: usize },
}

#[derive(Clone, Debug)]
pub struct StreamConfig {
    pub kind: StreamKind,
    pub eps: f64,
    /// Total failure budget of all randomized constructions.
    pub delta: f64,
    pub seed: u64,
    pub sensitivity: SensitivityConfig,
}

impl StreamConfig {
    pub fn new(kind: StreamKind, eps: f64) -> Self {
        StreamConfig {
            kind,
            eps,
            delta: 0.1,
            seed: 0,
            sensitivity: SensitivityConfig::default(),
        }
    }

    pub fn delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sensitivity(mut self, config: SensitivityConfig) -> Self {
        self.sensitivity = config;
        self
    }
}

/// Precision of epoch `h`.
pub fn precision(eps: f64, h: u32) -> f64 {
    eps / (10.0 * h as f64)
}

/// `(1 + ε/(10h))^h`, the error accumulated over `h` levels of epoch `h`.
pub fn schedule_factor(eps: f64, h: u32) -> f64 {
    (1.0 + precision(eps, h)).powi(h as i32)
}

/// Instrumentation counters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub points_seen: u64,
    pub reduce_calls: u64,
    /// Largest number of compressions any stored point has gone through.
    pub max_depth: u32,
    pub live_points: usize,
    pub peak_live_points: usize,
}

#[derive(Clone, Debug)]
struct Summary {
    coreset: Coreset,
    depth: u32,
}

/// Single-writer streaming state.
#[derive(Clone, Debug)]
pub struct StreamState {
    config: StreamConfig,
    d: usize,
    buffer: Vec<f64>,
    buckets: Vec<Option<Summary>>,
    epochs: Vec<Summary>,
    h: u32,
    epoch_counter: u64,
    construction: u64,
    stats: StreamStats,
}

impl StreamState {
    pub fn new(config: StreamConfig, d: usize) -> Result<Self> {
        if d == 0 {
            return invalid_argument("points need at least one dimension");
        }
        if !(config.eps > 0.0 && config.eps <= 1.0) {
            return invalid_argument(format!("epsilon must lie in (0, 1], got {}", config.eps));
        }
        if !(config.delta > 0.0 && config.delta < 1.0) {
            return invalid_argument(format!("delta must lie in (0, 1), got {}", config.delta));
        }
        match config.kind {
            StreamKind::Subspace { j } | StreamKind::Affine { j } => check_subspace_args(d, j, config.eps)?,
            StreamKind::KMeans { k: 0 } => return invalid_argument("k must be at least 1"),
            StreamKind::KMeans { .. } => {}
        }
        Ok(StreamState {
            config,
            d,
            buffer: Vec::new(),
            buckets: Vec::new(),
            epochs: Vec::new(),
            h: 1,
            epoch_counter: 0,
            construction: 2,
            stats: StreamStats::default(),
        })
    }

    pub fn config(&self) -> &StreamConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn epoch(&self) -> u32 {
        self.h
    }

    pub fn stats(&self) -> &StreamStats {
        &self.stats
    }

    /// Points currently waiting in the buffer.
    pub fn buffered(&self) -> usize {
        self.buffer.len() / self.d
    }

    /// Levels holding a bucket, lowest first.
    pub fn occupied_levels(&self) -> Vec<usize> {
        (0..self.buckets.len()).filter(|&i| self.buckets[i].is_some()).collect()
    }

    /// Summary size at precision `gamma`; the buffer is compressed once it
    /// holds twice this many points.
    pub fn level_size(&self, gamma: f64) -> usize {
        match self.config.kind {
            StreamKind::Subspace { j } => coreset_size_linear(j, gamma),
            StreamKind::Affine { j } => 2 * coreset_size_linear(j, gamma),
            StreamKind::KMeans { k } => {
                let cfg = &self.config.sensitivity;
                cfg.sample_size.unwrap_or_else(|| {
                    let dim = cfg.reduced_dim.unwrap_or(self.d).min(self.d);
                    let total = cfg.c_s * (cfg.beta * k + 1) as f64;
                    vc_sample_size_with(
                        total,
                        kmeans_dim_bound(dim, k, cfg.c_dim),
                        gamma / 8.0,
                        self.config.delta,
                        cfg.c_vc,
                    )
                })
            }
        }
    }

    pub fn insert(&mut self, point: ArrayView1<'_, f64>) -> Result<()> {
        if point.len() != self.d {
            return invalid_input(format!("point has {} coordinates, expected {}", point.len(), self.d));
        }
        if point.iter().any(|x| !x.is_finite()) {
            return invalid_input("point has non-finite coordinates");
        }
        self.buffer.extend(point.iter());
        self.stats.points_seen += 1;
        self.epoch_counter += 1;
        let gamma = precision(self.config.eps, self.h);
        if self.buffered() >= 2 * self.level_size(gamma) {
            self.flush(gamma)?;
        }
        if self.epoch_counter >= 1u64.checked_shl(self.h).unwrap_or(u64::MAX) {
            self.end_epoch(gamma)?;
        }
        self.update_live();
        Ok(())
    }

    pub fn insert_all(&mut self, rows: &Array2<f64>) -> Result<()> {
        rows.outer_iter().try_for_each(|r| self.insert(r))
    }

    fn update_live(&mut self) {
        let live = self.buffered()
            + self.buckets.iter().flatten().map(|s| s.coreset.len()).sum::<usize>()
            + self.epochs.iter().map(|s| s.coreset.len()).sum::<usize>();
        self.stats.live_points = live;
        self.stats.peak_live_points = self.stats.peak_live_points.max(live);
    }

    fn take_buffer(&mut self) -> Result<Coreset> {
        let n = self.buffered();
        let rows = Array2::from_shape_vec((n, self.d), std::mem::take(&mut self.buffer))
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Coreset::new(rows, Array1::ones(n), 0.0)
    }

    fn flush(&mut self, gamma: f64) -> Result<()> {
        let raw = self.take_buffer()?;
        let mut t = Summary {
            coreset: self.compress(&raw, gamma)?,
            depth: 1,
        };
        let mut level = 0;
        while let Some(Some(b)) = self.buckets.get_mut(level).map(Option::take) {
            let merged = Coreset::merge(&[&b.coreset, &t.coreset])?;
            t = Summary {
                coreset: self.compress(&merged, gamma)?,
                depth: b.depth.max(t.depth) + 1,
            };
            level += 1;
        }
        if self.buckets.len() <= level {
            self.buckets.resize(level + 1, None);
        }
        self.stats.max_depth = self.stats.max_depth.max(t.depth);
        self.buckets[level] = Some(t);
        Ok(())
    }

    fn end_epoch(&mut self, gamma: f64) -> Result<()> {
        let live: Vec<Summary> = self.buckets.drain(..).flatten().collect();
        if !live.is_empty() {
            let parts: Vec<&Coreset> = live.iter().map(|s| &s.coreset).collect();
            let depth = live.iter().map(|s| s.depth).max().unwrap_or(0);
            let folded = if live.len() == 1 {
                Summary {
                    coreset: live[0].coreset.clone(),
                    depth,
                }
            } else {
                Summary {
                    coreset: self.compress(&Coreset::merge(&parts)?, gamma)?,
                    depth: depth + 1,
                }
            };
            self.stats.max_depth = self.stats.max_depth.max(folded.depth);
            self.epochs.push(folded);
        }
        self.h += 1;
        self.epoch_counter = 0;
        Ok(())
    }

    /// One reduce step on a weighted summary; offsets accumulate.
    fn compress(&mut self, input: &Coreset, eps: f64) -> Result<Coreset> {
        self.stats.reduce_calls += 1;
        let c = self.construct(input, eps, self.construction)?;
        if matches!(self.config.kind, StreamKind::KMeans { .. }) {
            self.construction += 1;
        }
        Ok(c)
    }

    fn construct(&self, input: &Coreset, eps: f64, construction: u64) -> Result<Coreset> {
        let points = input.to_point_set();
        let out = match self.config.kind {
            StreamKind::Subspace { j } => linear_subspace_coreset(&points, j, eps)?,
            StreamKind::Affine { j } => affine_subspace_coreset_weighted(&points, j, eps)?,
            StreamKind::KMeans { k } => {
                let c = construction as f64;
                small_kmeans_coreset_with(
                    &points,
                    k,
                    eps,
                    self.config.delta / (c * c),
                    derive_seed(self.config.seed, construction),
                    &self.config.sensitivity,
                )?
            }
        };
        let delta = out.delta() + input.delta();
        out.with_delta(delta)
    }

    /// Everything stored so far as one weighted union (no compression).
    pub fn summary(&self) -> Result<Coreset> {
        if self.stats.points_seen == 0 {
            return Err(Error::EmptyState("no points have been inserted".into()));
        }
        let buffered = if self.buffer.is_empty() {
            None
        } else {
            let n = self.buffered();
            let rows = Array2::from_shape_vec((n, self.d), self.buffer.clone())
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            Some(Coreset::new(rows, Array1::ones(n), 0.0)?)
        };
        let parts: Vec<&Coreset> = self
            .epochs
            .iter()
            .chain(self.buckets.iter().flatten())
            .map(|s| &s.coreset)
            .chain(buffered.as_ref())
            .collect();
        Coreset::merge(&parts)
    }

    /// Final coreset: one more construction at precision `ε` on the union of
    /// all stored summaries and the buffer. Does not modify the state.
    pub fn query(&self) -> Result<Coreset> {
        let union = self.summary()?;
        self.construct(&union, self.config.eps, self.construction)
    }
}

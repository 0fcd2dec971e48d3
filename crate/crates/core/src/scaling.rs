//! Coefficient bounds for scaling DCT tokens into roughly `[-1, 1]`.
//!
//! * Entropy-consistent scaling (ECS): one global bound `η`, the larger
//!   magnitude of the `τ` and `100 − τ` percentiles of the luma DC
//!   coefficient.
//! * Naive scaling: the same statistic computed separately for every
//!   channel and zigzag rank, giving `3B²` bounds.
//!
//! Percentiles interpolate linearly between the closest order statistics
//! (`pos = (n − 1) · q / 100`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_TAU: f64 = 98.25;

/// Reservoir capacity per rank when streaming large datasets.
pub const RESERVOIR_CAPACITY: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    Naive,
    Ecs,
}

/// Bounds document as written by `dctk bounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingBounds {
    pub mode: ScalingMode,
    pub tau: f64,
    pub block_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub naive_bounds: Option<Vec<f64>>,
}

impl ScalingBounds {
    pub fn ecs(tau: f64, block_size: usize, eta: f64) -> Result<Self> {
        let b = Self {
            mode: ScalingMode::Ecs,
            tau,
            block_size,
            eta: Some(eta),
            naive_bounds: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn naive(tau: f64, block_size: usize, bounds: Vec<f64>) -> Result<Self> {
        let b = Self {
            mode: ScalingMode::Naive,
            tau,
            block_size,
            eta: None,
            naive_bounds: Some(bounds),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        if self.block_size == 0 {
            return Err(Error::param("block_size", "must be at least 1"));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self.mode {
            ScalingMode::Ecs => match self.eta {
                Some(eta) if positive(eta) => Ok(()),
                Some(_) => Err(Error::param("eta", "must be strictly positive")),
                None => Err(Error::param("eta", "missing for ecs bounds")),
            },
            ScalingMode::Naive => match &self.naive_bounds {
                Some(v) if v.len() != 3 * self.block_size * self.block_size => Err(Error::param(
                    "naive_bounds",
                    format!("expected {} values, got {}", 3 * self.block_size * self.block_size, v.len()),
                )),
                Some(v) if v.iter().all(|&x| positive(x)) => Ok(()),
                Some(_) => Err(Error::param("naive_bounds", "all bounds must be strictly positive")),
                None => Err(Error::param("naive_bounds", "missing for naive bounds")),
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(text)?;
        b.validate()?;
        Ok(b)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// Percentile level must lie strictly between 50 and 100.
pub fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 50.0 && tau < 100.0) {
        return Err(Error::param("tau", format!("{tau} is outside (50, 100)")));
    }
    Ok(())
}

/// Percentile `q ∈ [0, 100]` of already sorted data.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * q / 100.0;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `max(|P_τ|, |P_{100−τ}|)` over `samples` (order irrelevant).
pub fn percentile_bound(samples: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if samples.len() < 2 {
        return Err(Error::EmptyInput("percentile bound needs at least 2 samples"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("scaling samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let up = percentile_sorted(&sorted, tau);
    let low = percentile_sorted(&sorted, 100.0 - tau);
    Ok(up.abs().max(low.abs()))
}

/// ECS bound from pooled luma DC samples.
pub fn estimate_ecs_bound(dc_samples: &[f64], tau: f64) -> Result<f64> {
    percentile_bound(dc_samples, tau)
}

/// Naive per-rank bounds. Each channel slice is flattened `blocks × B²` in
/// zigzag order; the result is Y ranks, then Cb, then Cr.
pub fn estimate_naive_bounds(channels: [&[f64]; 3], block_size: usize, tau: f64) -> Result<Vec<f64>> {
    let per_block = block_size * block_size;
    let mut bounds = Vec::with_capacity(3 * per_block);
    for ch in channels {
        if ch.is_empty() {
            return Err(Error::EmptyInput("channel has no blocks"));
        }
        if ch.len() % per_block != 0 {
            return Err(Error::DimensionMismatch(format!(
                "channel length {} is not a multiple of {per_block}",
                ch.len()
            )));
        }
        let mut column = Vec::with_capacity(ch.len() / per_block);
        for rank in 0..per_block {
            column.clear();
            column.extend(ch.iter().skip(rank).step_by(per_block).copied());
            bounds.push(percentile_bound(&column, tau)?);
        }
    }
    Ok(bounds)
}

/// Fixed-capacity uniform reservoir (Algorithm R) whose replacement
/// decisions come from the counter-based generator, so the retained set
/// depends only on the seed and the order values are offered in.
#[derive(Debug, Clone)]
pub struct Reservoir {
    capacity: usize,
    seed: u64,
    key: u64,
    seen: u64,
    values: Vec<f64>,
}

impl Reservoir {
    pub fn new(capacity: usize, seed: u64, key: u64) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            seed,
            key,
            seen: 0,
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, v: f64) {
        if self.values.len() < self.capacity {
            self.values.push(v);
        } else {
            let j = (rng::uniform(self.seed, self.key, self.seen) * (self.seen + 1) as f64) as usize;
            if j < self.capacity {
                self.values[j] = v;
            }
        }
        self.seen += 1;
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Streams per-channel, per-rank coefficient samples for bound estimation.
#[derive(Debug, Clone)]
pub struct BoundsAccumulator {
    block_size: usize,
    // [channel][rank]
    ranks: Vec<Reservoir>,
}

impl BoundsAccumulator {
    pub fn new(block_size: usize) -> Self {
        Self::with_capacity(block_size, RESERVOIR_CAPACITY, 0)
    }

    pub fn with_capacity(block_size: usize, capacity: usize, seed: u64) -> Self {
        let n = block_size * block_size;
        Self {
            block_size,
            ranks: (0..3 * n).map(|k| Reservoir::new(capacity, seed, k as u64)).collect(),
        }
    }

    /// Adds one image's coefficients (`[Y, Cb, Cr]`, each `blocks × B²`).
    pub fn add(&mut self, channels: &[Vec<f64>; 3]) {
        let n = self.block_size * self.block_size;
        for (c, ch) in channels.iter().enumerate() {
            for block in ch.chunks_exact(n) {
                for (rank, &v) in block.iter().enumerate() {
                    self.ranks[c * n + rank].push(v);
                }
            }
        }
    }

    pub fn rank_samples(&self, channel: usize, rank: usize) -> &[f64] {
        self.ranks[channel * self.block_size * self.block_size + rank].values()
    }

    pub fn ecs(&self, tau: f64) -> Result<ScalingBounds> {
        let eta = estimate_ecs_bound(self.rank_samples(0, 0), tau)?;
        ScalingBounds::ecs(tau, self.block_size, eta)
    }

    pub fn naive(&self, tau: f64) -> Result<ScalingBounds> {
        let n = self.block_size * self.block_size;
        let mut bounds = Vec::with_capacity(3 * n);
        for c in 0..3 {
            for rank in 0..n {
                bounds.push(percentile_bound(self.rank_samples(c, rank), tau)?);
            }
        }
        ScalingBounds::naive(tau, self.block_size, bounds)
    }
}

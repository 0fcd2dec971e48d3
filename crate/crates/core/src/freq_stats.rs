//! Frequency statistics in the block-DCT domain.
//!
//! The frequency axis throughout is the zigzag rank inside a block. Inputs
//! are flat `blocks × B²` coefficient matrices in zigzag order, as produced
//! by [`crate::tokenizer::plane_block_coefficients`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::schedule::NoiseSchedule;
use crate::tokenizer::SEGMENTS;

pub const DEFAULT_BINS: usize = 256;
pub const MIN_BINS: usize = 16;
pub const MIN_ENTROPY_SAMPLES: usize = 1000;
pub const MIN_APSD_BLOCKS: usize = 1000;

/// Blocks per partial sum; fixed so reductions do not depend on threads.
const CHUNK_BLOCKS: usize = 1024;

/// Differential entropy (nats) of `samples` from a `bins`-bin histogram over
/// the empirical range. `None` when all samples are equal.
pub fn histogram_entropy(samples: &[f64], bins: usize) -> Option<f64> {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return None;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in samples {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = samples.len() as f64;
    let discrete: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    Some(discrete + width.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyWeights {
    pub block_size: usize,
    pub drop_count: usize,
    pub bins: usize,
    /// `3(B²−m)` weights: Y ranks, then Cb, then Cr.
    pub weights: Vec<f64>,
    /// Raw differential entropies; `None` for degenerate ranks.
    pub entropies: Vec<Option<f64>>,
    /// Indices into `weights` that were degenerate.
    pub degenerate: Vec<usize>,
}

impl EntropyWeights {
    pub fn kept(&self) -> usize {
        self.block_size * self.block_size - self.drop_count
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let k = self.kept();
        &self.weights[c * k..(c + 1) * k]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Entropy weights for the kept ranks of each channel.
///
/// Weights are `exp(H_i)` normalized to mean 1, so they are positive and a
/// global rescale of all samples leaves them unchanged. Degenerate ranks get
/// the smallest weight among the others and are listed in `degenerate`.
pub fn entropy_weights(
    channels: [&[f64]; 3],
    block_size: usize,
    drop_count: usize,
    bins: usize,
) -> Result<EntropyWeights> {
    let b2 = block_size * block_size;
    if block_size == 0 || drop_count >= b2 {
        return Err(Error::param("drop", format!("need m < B² = {b2}")));
    }
    if bins < MIN_BINS {
        return Err(Error::param("bins", format!("need at least {MIN_BINS}, got {bins}")));
    }
    let kept = b2 - drop_count;
    let mut columns = Vec::with_capacity(3 * kept);
    for data in channels {
        if data.len() % b2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "coefficient count {} is not a multiple of B² = {b2}",
                data.len()
            )));
        }
        let blocks = data.len() / b2;
        if blocks < MIN_ENTROPY_SAMPLES {
            return Err(Error::param(
                "input",
                format!("need at least {MIN_ENTROPY_SAMPLES} blocks per channel, got {blocks}"),
            ));
        }
        for r in 0..kept {
            columns.push((data, r));
        }
    }
    let entropies: Vec<Option<f64>> = columns
        .par_iter()
        .map(|&(data, r)| {
            let col: Vec<f64> = data.iter().skip(r).step_by(b2).copied().collect();
            histogram_entropy(&col, bins)
        })
        .collect();

    let h_max = entropies.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = entropies
        .iter()
        .map(|h| h.map_or(f64::NAN, |h| (h - h_max).exp()))
        .collect();
    let degenerate: Vec<usize> = (0..weights.len()).filter(|&i| entropies[i].is_none()).collect();
    let floor = weights.iter().copied().filter(|w| !w.is_nan()).fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1.0 };
    for &i in &degenerate {
        weights[i] = floor;
    }
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    for w in &mut weights {
        *w /= mean;
    }
    Ok(EntropyWeights {
        block_size,
        drop_count,
        bins,
        weights,
        entropies,
        degenerate,
    })
}

/// Weighted squared error `Σ w_i r_i²` over a token-layout residual vector.
/// The four luma segments of each token share the Y weights.
pub fn apply_ebfr(residuals: &[f64], w: &EntropyWeights) -> Result<f64> {
    let k = w.kept();
    let width = SEGMENTS * k;
    if residuals.is_empty() || residuals.len() % width != 0 {
        return Err(Error::DimensionMismatch(format!(
            "residual length {} is not a positive multiple of the token width {width}",
            residuals.len()
        )));
    }
    let per_token: Vec<f64> = residuals
        .par_chunks(width)
        .map(|tok| {
            tok.chunks(k)
                .enumerate()
                .map(|(seg, vals)| {
                    let wc = w.channel(seg.saturating_sub(3));
                    vals.iter().zip(wc).map(|(r, w)| w * r * r).sum::<f64>()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(per_token.iter().sum())
}

/// Averaged power per zigzag rank for one channel at one diffusion time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumProfile {
    pub channel: usize,
    pub t: f64,
    pub sample_count: usize,
    pub power: Vec<f64>,
}

/// Monte-Carlo APSD of `coeffs` perturbed by the VP kernel at each `t`.
///
/// Noise for block `i`, rank `r` is `gaussian(seed, i, r)`, the same keying
/// as [`crate::diffuse::perturb_rows`]; every `t` reuses the same draws.
pub fn apsd(
    coeffs: &[f64],
    block_size: usize,
    channel: usize,
    sched: &NoiseSchedule,
    t_grid: &[f64],
    seed: u64,
) -> Result<Vec<SpectrumProfile>> {
    let b2 = block_size * block_size;
    if block_size == 0 || coeffs.len() % b2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "coefficient count {} is not a multiple of B² = {b2}",
            coeffs.len()
        )));
    }
    let blocks = coeffs.len() / b2;
    if blocks == 0 {
        return Err(Error::EmptyInput("apsd dataset"));
    }
    if blocks < MIN_APSD_BLOCKS {
        return Err(Error::param(
            "input",
            format!("need at least {MIN_APSD_BLOCKS} blocks, got {blocks}"),
        ));
    }
    t_grid
        .iter()
        .map(|&t| {
            let p = crate::diffuse::perturb_params(t, sched)?;
            let partials: Vec<Vec<f64>> = coeffs
                .par_chunks(CHUNK_BLOCKS * b2)
                .enumerate()
                .map(|(ci, chunk)| {
                    let mut acc = vec![0.0; b2];
                    for (bi, block) in chunk.chunks(b2).enumerate() {
                        let key = (ci * CHUNK_BLOCKS + bi) as u64;
                        for (r, &x) in block.iter().enumerate() {
                            let v = if t == 0.0 {
                                x
                            } else {
                                p.mean_coef * x + p.std * rng::gaussian(seed, key, r as u64)
                            };
                            acc[r] += v * v;
                        }
                    }
                    acc
                })
                .collect();
            let mut power = vec![0.0; b2];
            for part in &partials {
                for (a, v) in power.iter_mut().zip(part) {
                    *a += v;
                }
            }
            for a in &mut power {
                *a /= blocks as f64;
            }
            Ok(SpectrumProfile {
                channel,
                t,
                sample_count: blocks,
                power,
            })
        })
        .collect()
}

/// Noisy power minus the attenuated clean power, per rank. Under the VP
/// kernel this estimates the noise variance `std²` at every rank.
pub fn noise_floor(noisy: &SpectrumProfile, clean: &SpectrumProfile, sched: &NoiseSchedule) -> Result<Vec<f64>> {
    if noisy.power.len() != clean.power.len() {
        return Err(Error::DimensionMismatch("profiles have different rank counts".into()));
    }
    let p = crate::diffuse::perturb_params(noisy.t, sched)?;
    let k = p.mean_coef * p.mean_coef;
    Ok(noisy.power.iter().zip(&clean.power).map(|(n, c)| n - k * c).collect())
}

/// Least-squares fit of `ln P = ln K − α ln r` over ranks `r ≥ 1`.
/// Returns `(K, α)`.
pub fn power_law_fit(profile: &SpectrumProfile) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = profile
        .power
        .iter()
        .enumerate()
        .skip(1)
        .map(|(r, &p)| {
            if p > 0.0 && p.is_finite() {
                Ok(((r as f64).ln(), p.ln()))
            } else {
                Err(Error::param("profile", format!("power at rank {r} is {p}")))
            }
        })
        .collect::<Result<_>>()?;
    if pts.len() < 4 {
        return Err(Error::param("profile", "need at least 4 ranks above DC"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(((my - slope * mx).exp(), -slope))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// Variance-exploding SDE with constant diffusion coefficient `g`.
    VeConstG { g: f64 },
    /// The SNR-scaled VP schedule.
    Vp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdTime {
    Reached(f64),
    /// The SNR stays above γ on all of `[0, 1]`; holds the unclipped root.
    Saturated(f64),
}

impl ThresholdTime {
    pub fn value(self) -> f64 {
        match self {
            ThresholdTime::Reached(t) | ThresholdTime::Saturated(t) => t,
        }
    }

    pub fn is_saturated(self) -> bool {
        matches!(self, ThresholdTime::Saturated(_))
    }
}

/// Time at which a frequency with clean power `s0` has SNR equal to `gamma`.
///
/// VP: the scaled SNR is `s0 / (e^{y′} − 1)`, which with
/// `e^{y} − 1 = c (e^{y′} − 1)` gives `y = ln((c·s0 + γ)/γ)`.
pub fn snr_threshold_time(s0: f64, gamma: f64, sched: &NoiseSchedule, mode: ThresholdMode) -> Result<ThresholdTime> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::param("s0", format!("must be positive, got {s0}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
    }
    let t = match mode {
        ThresholdMode::VeConstG { g } => {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::param("g", format!("must be positive, got {g}")));
            }
            s0 / (gamma * g * g)
        }
        ThresholdMode::Vp => {
            sched.validate()?;
            let y = (sched.c * s0 / gamma).ln_1p();
            sched.t_of_y(y)
        }
    };
    Ok(if t > 1.0 { ThresholdTime::Saturated(t) } else { ThresholdTime::Reached(t) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian_column(n: usize, sigma: f64, key: u64) -> Vec<f64> {
        (0..n).map(|i| sigma * rng::gaussian(17, key, i as u64)).collect()
    }

    /// `blocks × B²` matrix with rank `r` drawn as `std(r) · N(0,1)`.
    fn blocks(n: usize, b2: usize, seed: u64, std: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..n * b2)
            .map(|i| std(i % b2) * rng::gaussian(seed, (i / b2) as u64, (i % b2) as u64))
            .collect()
    }

    #[test]
    fn gaussian_entropy_difference_is_ln2() {
        let h1 = histogram_entropy(&gaussian_column(100_000, 1.0, 1), 256).unwrap();
        let h2 = histogram_entropy(&gaussian_column(100_000, 2.0, 2), 256).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!(((h2 - h1) / ln2 - 1.0).abs() < 0.05);
        // absolute level against ½ ln(2πe)
        let exact = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((h1 - exact).abs() < 0.02);
    }

    #[test]
    fn histogram_entropy_of_constant_is_none() {
        assert_eq!(histogram_entropy(&[3.0; 50], 32), None);
    }

    #[test]
    fn exchangeable_ranks_get_unit_weights() {
        let data = blocks(5000, 4, 3, |_| 1.0);
        let w = entropy_weights([&data, &data, &data], 2, 0, 256).unwrap();
        assert_eq!(w.weights.len(), 12);
        for &v in &w.weights {
            assert!((v - 1.0).abs() < 0.02, "{v}");
        }
    }

    #[test]
    fn weights_are_positive_mean_one_and_scale_free() {
        let data = blocks(4000, 16, 4, |r| 1.0 / (1.0 + r as f64));
        let w = entropy_weights([&data, &data, &data], 4, 3, 256).unwrap();
        assert_eq!(w.weights.len(), 3 * 13);
        assert!(w.weights.iter().all(|&v| v > 0.0));
        let mean = w.weights.iter().sum::<f64>() / w.weights.len() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!(w.channel(0)[0] > w.channel(0)[12]);

        let scaled: Vec<f64> = data.iter().map(|v| v * 37.5).collect();
        let ws = entropy_weights([&scaled, &scaled, &scaled], 4, 3, 256).unwrap();
        for (a, b) in w.weights.iter().zip(&ws.weights) {
            assert!((a / b - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn degenerate_rank_is_flagged_with_floor_weight() {
        let mut data = blocks(2000, 4, 5, |r| 1.0 + r as f64);
        for i in (3..data.len()).step_by(4) {
            data[i] = 0.5;
        }
        let w = entropy_weights([&data, &data, &data], 2, 0, 64).unwrap();
        assert_eq!(w.degenerate, vec![3, 7, 11]);
        let min = w.weights.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);
        assert_eq!(w.weights[3], min);
    }

    #[test]
    fn entropy_weight_preconditions() {
        let data = blocks(10, 4, 6, |_| 1.0);
        assert!(entropy_weights([&data, &data, &data], 2, 0, 64).is_err());
        let data = blocks(2000, 4, 6, |_| 1.0);
        assert!(entropy_weights([&data, &data, &data], 2, 0, 8).is_err());
        assert!(entropy_weights([&data, &data, &data], 2, 4, 64).is_err());
    }

    fn unit_weights(b: usize, m: usize) -> EntropyWeights {
        let k = b * b - m;
        EntropyWeights {
            block_size: b,
            drop_count: m,
            bins: 16,
            weights: vec![1.0; 3 * k],
            entropies: vec![Some(0.0); 3 * k],
            degenerate: vec![],
        }
    }

    #[test]
    fn ebfr_unit_weights_is_sum_of_squares() {
        let r: Vec<f64> = (0..2 * 6 * 3).map(|i| i as f64 * 0.25 - 3.0).collect();
        let w = unit_weights(2, 1);
        let plain: f64 = r.iter().map(|v| v * v).sum();
        assert_eq!(apply_ebfr(&r, &w).unwrap(), plain);
        assert!(apply_ebfr(&r[..7], &w).is_err());
        assert!(apply_ebfr(&[], &w).is_err());
    }

    #[test]
    fn ebfr_single_residual_at_luma_dc() {
        let mut w = unit_weights(2, 0);
        w.weights[0] = 2.5;
        let mut r = vec![0.0; 24];
        r[0] = 3.0;
        assert_eq!(apply_ebfr(&r, &w).unwrap(), 2.5 * 9.0);
        // same rank in the last luma segment
        r[0] = 0.0;
        r[12] = 3.0;
        assert_eq!(apply_ebfr(&r, &w).unwrap(), 2.5 * 9.0);
        // Cb rank 0 uses the second channel's weight
        r[12] = 0.0;
        r[16] = 3.0;
        assert_eq!(apply_ebfr(&r, &w).unwrap(), 9.0);
    }

    proptest! {
        #[test]
        fn ebfr_matches_naive_loop(
            b in 2usize..4,
            m in 0usize..3,
            tokens in 1usize..5,
            seed in any::<u64>(),
        ) {
            let k = b * b - m;
            let mut w = unit_weights(b, m);
            for (i, v) in w.weights.iter_mut().enumerate() {
                *v = 0.1 + rng::uniform(seed, 1, i as u64);
            }
            let r: Vec<f64> = (0..tokens * 6 * k).map(|i| rng::gaussian(seed, 2, i as u64)).collect();
            let mut naive = 0.0;
            for tok in 0..tokens {
                for seg in 0..6 {
                    let ch = match seg { 0..=3 => 0, 4 => 1, _ => 2 };
                    for j in 0..k {
                        let v = r[tok * 6 * k + seg * k + j];
                        naive += w.weights[ch * k + j] * v * v;
                    }
                }
            }
            let got = apply_ebfr(&r, &w).unwrap();
            prop_assert!((got - naive).abs() <= 1e-12 * naive.max(1.0));
        }
    }

    #[test]
    fn white_noise_profile_is_flat() {
        let data = blocks(100_000, 16, 8, |_| 1.0);
        let p = &apsd(&data, 4, 0, &NoiseSchedule::default(), &[0.0], 1).unwrap()[0];
        assert_eq!(p.sample_count, 100_000);
        for &v in &p.power {
            assert!((v - 1.0).abs() < 0.03);
        }
        let (_, alpha) = power_law_fit(p).unwrap();
        assert!(alpha.abs() < 0.05);
    }

    #[test]
    fn noise_floor_equals_scheduled_variance() {
        let data = blocks(20_000, 16, 9, |r| (1.0 + r as f64).powf(-1.0));
        let s = NoiseSchedule::with_scale(4.0).unwrap();
        let profiles = apsd(&data, 4, 0, &s, &[0.0, 0.3, 0.7], 2).unwrap();
        for noisy in &profiles[1..] {
            let var = crate::diffuse::perturb_params(noisy.t, &s).unwrap().std.powi(2);
            for f in noise_floor(noisy, &profiles[0], &s).unwrap() {
                assert!((f / var - 1.0).abs() < 0.05);
            }
        }
    }

    #[test]
    fn apsd_is_thread_count_invariant() {
        let data = blocks(3000, 4, 10, |_| 1.0);
        let s = NoiseSchedule::default();
        let run = |n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| apsd(&data, 2, 0, &s, &[0.0, 0.5], 4).unwrap())
        };
        assert_eq!(run(1), run(5));
    }

    #[test]
    fn apsd_rejects_small_inputs() {
        let s = NoiseSchedule::default();
        assert!(matches!(apsd(&[], 2, 0, &s, &[0.0], 0), Err(Error::EmptyInput(_))));
        assert!(apsd(&[0.0; 40], 2, 0, &s, &[0.0], 0).is_err());
        assert!(apsd(&[0.0; 41], 2, 0, &s, &[0.0], 0).is_err());
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let power = (0..64).map(|r| if r == 0 { 99.0 } else { 3.0 * (r as f64).powf(-2.0) }).collect();
        let p = SpectrumProfile { channel: 0, t: 0.0, sample_count: 1, power };
        let (k, a) = power_law_fit(&p).unwrap();
        assert!((k - 3.0).abs() < 1e-9 && (a - 2.0).abs() < 1e-9);
    }

    #[test]
    fn power_law_fit_errors() {
        let p = SpectrumProfile { channel: 0, t: 0.0, sample_count: 1, power: vec![1.0; 4] };
        assert!(power_law_fit(&p).is_err());
        let p = SpectrumProfile { channel: 0, t: 0.0, sample_count: 1, power: vec![1.0, 1.0, 0.0, 1.0, 1.0, 1.0] };
        assert!(power_law_fit(&p).is_err());
    }

    #[test]
    fn threshold_examples() {
        let s = NoiseSchedule::default();
        let ve = snr_threshold_time(1.0, 1.0, &s, ThresholdMode::VeConstG { g: 1.0 }).unwrap();
        assert_eq!(ve, ThresholdTime::Reached(1.0));
        let vp = snr_threshold_time(1.0, 1.0, &s, ThresholdMode::Vp).unwrap();
        // independent oracle: quadratic formula for 0.1 t + 9.95 t² = ln 2
        let y = std::f64::consts::LN_2;
        let t = (-0.1 + (0.01f64 + 2.0 * 19.9 * y).sqrt()) / 19.9;
        assert!((vp.value() - t).abs() < 1e-12);
        assert!((vp.value() - 0.2590).abs() < 5e-5);
        let sat = snr_threshold_time(1e6, 1e-3, &s, ThresholdMode::Vp).unwrap();
        assert!(sat.is_saturated() && sat.value() > 1.0);
        assert!(snr_threshold_time(0.0, 1.0, &s, ThresholdMode::Vp).is_err());
        assert!(snr_threshold_time(1.0, -1.0, &s, ThresholdMode::Vp).is_err());
    }

    #[test]
    fn vp_threshold_hits_target_snr() {
        for c in [1.0, 4.0, 12.0] {
            let s = NoiseSchedule::with_scale(c).unwrap();
            let t = snr_threshold_time(0.3, 0.7, &s, ThresholdMode::Vp).unwrap().value();
            let y = s.y_scaled(t).unwrap();
            assert!((0.3 / y.exp_m1() - 0.7).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn threshold_monotone(s0 in 0.01f64..10.0, g1 in 0.01f64..10.0, g2 in 0.01f64..10.0, c in 1.0f64..12.0) {
            let s = NoiseSchedule::with_scale(c).unwrap();
            let (lo, hi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
            for mode in [ThresholdMode::Vp, ThresholdMode::VeConstG { g: 0.8 }] {
                let t_lo = snr_threshold_time(s0, lo, &s, mode).unwrap().value();
                let t_hi = snr_threshold_time(s0, hi, &s, mode).unwrap().value();
                prop_assert!(t_hi <= t_lo);
                let t_big = snr_threshold_time(2.0 * s0, lo, &s, mode).unwrap().value();
                prop_assert!(t_big >= t_lo);
            }
        }
    }
}

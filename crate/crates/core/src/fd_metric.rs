//! Fréchet distance between Gaussian fits of image features, the drop-count
//! scan built on it, and the closed-form compression ratio.
//!
//! Two feature extractors are built in:
//!
//! * `pixels8`: luma averaged over an 8×8 grid of equal cells (64 values).
//! * `dctstats`: per channel and zigzag rank, the mean and population
//!   standard deviation of the level-shifted block coefficients over one
//!   image (`6B²` values, ordered Y means, Y stds, Cb means, ...).

use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colorspace::{reconstruct_rgb, subsample_rgb};
use crate::error::{Error, Result};
use crate::image_io::RgbImage;
use crate::tokenizer::{channel_block_coefficients, detokenize, tokenize, TokenConfig};

pub const RIDGE: f64 = 1e-6;
pub const EIGEN_TOLERANCE: f64 = 1e-8;
const PIXELS8_GRID: usize = 8;

/// `2B² / (B² − m)`: RGB signal count over kept coefficient count.
pub fn compression_ratio(block_size: usize, drop_count: usize) -> Result<f64> {
    let b2 = block_size * block_size;
    if block_size == 0 || drop_count >= b2 {
        return Err(Error::param(
            "drop",
            format!("must lie in [0, {}] for block size {block_size}", b2.saturating_sub(1)),
        ));
    }
    Ok(2.0 * b2 as f64 / (b2 - drop_count) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

impl GaussianStats {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, n: usize) -> Result<Self> {
        let d = mean.len();
        if d == 0 || cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "mean has {d} entries, covariance is {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if !mean.iter().chain(cov.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("gaussian statistics"));
        }
        let scale = cov.amax().max(1.0);
        if (&cov - cov.transpose()).amax() > 1e-10 * scale {
            return Err(Error::param("cov", "covariance is not symmetric"));
        }
        let min = SymmetricEigen::new(cov.clone()).eigenvalues.min();
        if min < -EIGEN_TOLERANCE * scale {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { mean, cov, n })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased covariance of `n × d` rows, plus `RIDGE · I`.
pub fn gaussian_stats(features: &[Vec<f64>]) -> Result<GaussianStats> {
    let n = features.len();
    if n < 2 {
        return Err(Error::param("features", format!("need at least 2 samples, got {n}")));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|f| f.len() != d) {
        return Err(Error::DimensionMismatch("feature rows differ in length".into()));
    }
    if !features.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("features"));
    }
    let mut mean = DVector::zeros(d);
    for row in features {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean /= n as f64;
    let centered = DMatrix::from_fn(n, d, |i, j| features[i][j] - mean[j]);
    let mut cov = centered.transpose() * &centered / (n - 1) as f64;
    for i in 0..d {
        cov[(i, i)] += RIDGE;
    }
    Ok(GaussianStats { mean, cov, n })
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let scale = eig.eigenvalues.amax().max(1.0);
    let min = eig.eigenvalues.min();
    if min < -EIGEN_TOLERANCE * scale {
        return Err(Error::NotPsd(min));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// `|μ₁−μ₂|² + tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^{1/2})`.
///
/// The trace term is evaluated as `Σ √λᵢ` over the eigenvalues of the
/// symmetric matrix `Σ₁^{1/2} Σ₂ Σ₁^{1/2}`. Negative eigenvalues smaller in
/// magnitude than `1e-8 · max(1, λ_max)` are treated as zero.
pub fn frechet_distance(s1: &GaussianStats, s2: &GaussianStats) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "feature dimensions {} and {}",
            s1.dim(),
            s2.dim()
        )));
    }
    let diff = (&s1.mean - &s2.mean).norm_squared();
    let r1 = psd_sqrt(&s1.cov)?;
    let m = &r1 * &s2.cov * &r1;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let scale = eig.eigenvalues.amax().max(1.0);
    let min = eig.eigenvalues.min();
    if min < -EIGEN_TOLERANCE * scale {
        return Err(Error::NotPsd(min));
    }
    let tr_sqrt: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((diff + s1.cov.trace() + s2.cov.trace() - 2.0 * tr_sqrt).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    #[serde(rename = "pixels8")]
    DownsampledPixels,
    #[serde(rename = "dctstats")]
    DctBlockStats,
}

impl FeatureMode {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::DownsampledPixels => "pixels8",
            FeatureMode::DctBlockStats => "dctstats",
        }
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pixels8" => Ok(FeatureMode::DownsampledPixels),
            "dctstats" => Ok(FeatureMode::DctBlockStats),
            _ => Err(Error::param("features", format!("expected pixels8 or dctstats, got `{s}`"))),
        }
    }
}

pub fn pixels8_features(img: &RgbImage) -> Result<Vec<f64>> {
    let (w, h) = (img.width(), img.height());
    if w % PIXELS8_GRID != 0 || h % PIXELS8_GRID != 0 {
        return Err(Error::InvalidDimensions {
            width: w,
            height: h,
            reason: "pixels8 features need dimensions divisible by 8",
        });
    }
    let (cw, ch) = (w / PIXELS8_GRID, h / PIXELS8_GRID);
    let mut out = vec![0.0; PIXELS8_GRID * PIXELS8_GRID];
    for r in 0..h {
        for c in 0..w {
            let [pr, pg, pb] = img.pixel(r, c);
            let y = 0.299 * pr as f64 + 0.587 * pg as f64 + 0.114 * pb as f64;
            out[(r / ch) * PIXELS8_GRID + c / cw] += y;
        }
    }
    let area = (cw * ch) as f64;
    for v in &mut out {
        *v /= area;
    }
    Ok(out)
}

pub fn dct_stats_features(img: &RgbImage, block_size: usize) -> Result<Vec<f64>> {
    let b2 = block_size * block_size;
    let channels = channel_block_coefficients(&subsample_rgb(img), block_size)?;
    let mut out = Vec::with_capacity(6 * b2);
    for data in &channels {
        let blocks = (data.len() / b2) as f64;
        let mut mean = vec![0.0; b2];
        for block in data.chunks(b2) {
            for (m, v) in mean.iter_mut().zip(block) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= blocks);
        let mut var = vec![0.0; b2];
        for block in data.chunks(b2) {
            for ((s, v), m) in var.iter_mut().zip(block).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        out.extend_from_slice(&mean);
        out.extend(var.iter().map(|s| (s / blocks).sqrt()));
    }
    Ok(out)
}

pub fn extract_features(images: &[RgbImage], mode: FeatureMode, block_size: usize) -> Result<Vec<Vec<f64>>> {
    images
        .par_iter()
        .map(|img| match mode {
            FeatureMode::DownsampledPixels => pixels8_features(img),
            FeatureMode::DctBlockStats => dct_stats_features(img, block_size),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub gamma: f64,
    pub m_grid: Vec<usize>,
    pub features: FeatureMode,
}

impl ScanConfig {
    pub fn validate(&self, block_size: usize) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::param("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if self.m_grid.is_empty() {
            return Err(Error::param("grid", "no drop counts given"));
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("grid", "drop counts must be strictly ascending"));
        }
        let b2 = block_size * block_size;
        if let Some(&m) = self.m_grid.iter().find(|&&m| m >= b2) {
            return Err(Error::param("grid", format!("drop count {m} exceeds B² − 1 = {}", b2 - 1)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub m: usize,
    pub ratio: f64,
    pub distance: f64,
}

/// Result of a drop-count scan. Distances compare reconstructions against
/// the raw originals, so the `m = 0` point already includes the loss from
/// chroma subsampling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub block_size: usize,
    pub gamma: f64,
    pub features: FeatureMode,
    pub curve: Vec<ScanPoint>,
    pub m_star: usize,
    /// No grid point met the threshold; `m_star` is then 0.
    pub saturated: bool,
}

/// Counts steps where the curve drops by more than `rel_tol` of its range.
pub fn count_inversions(curve: &[ScanPoint], rel_tol: f64) -> usize {
    let max = curve.iter().map(|p| p.distance.abs()).fold(0.0, f64::max);
    curve
        .windows(2)
        .filter(|w| w[1].distance < w[0].distance - rel_tol * max)
        .count()
}

/// Round trip through chroma subsampling and an `m`-truncated tokenization.
pub fn reconstruct(img: &RgbImage, block_size: usize, drop_count: usize) -> Result<RgbImage> {
    let cfg = TokenConfig::new(block_size, drop_count, 1.0, img.height(), img.width())?;
    let tokens = tokenize(&subsample_rgb(img), &cfg)?;
    Ok(reconstruct_rgb(&detokenize(&tokens)))
}

pub fn scan_mstar(images: &[RgbImage], block_size: usize, cfg: &ScanConfig) -> Result<ScanReport> {
    cfg.validate(block_size)?;
    if images.is_empty() {
        return Err(Error::EmptyInput("scan dataset"));
    }
    let reference = gaussian_stats(&extract_features(images, cfg.features, block_size)?)?;
    let mut curve = Vec::with_capacity(cfg.m_grid.len());
    for &m in &cfg.m_grid {
        let feats: Vec<Vec<f64>> = images
            .par_iter()
            .map(|img| {
                let rec = reconstruct(img, block_size, m)?;
                match cfg.features {
                    FeatureMode::DownsampledPixels => pixels8_features(&rec),
                    FeatureMode::DctBlockStats => dct_stats_features(&rec, block_size),
                }
            })
            .collect::<Result<_>>()?;
        let distance = frechet_distance(&reference, &gaussian_stats(&feats)?)?;
        curve.push(ScanPoint {
            m,
            ratio: compression_ratio(block_size, m)?,
            distance,
        });
    }
    let best = curve.iter().filter(|p| p.distance < cfg.gamma).map(|p| p.m).max();
    Ok(ScanReport {
        block_size,
        gamma: cfg.gamma,
        features: cfg.features,
        m_star: best.unwrap_or(0),
        saturated: best.is_none(),
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn stats1(mean: f64, var: f64) -> GaussianStats {
        GaussianStats::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, var), 10).unwrap()
    }

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..d).map(|j| rng::gaussian(seed, i as u64, j as u64) * (1 + j) as f64).collect())
            .collect()
    }

    #[test]
    fn table_ratios() {
        let cases = [(4, 7, "3.56"), (4, 8, "4.00"), (4, 9, "4.57"), (8, 44, "6.40"), (8, 46, "7.11"), (8, 48, "8.00")];
        for (b, m, want) in cases {
            assert_eq!(format!("{:.2}", compression_ratio(b, m).unwrap()), want);
        }
        assert_eq!(compression_ratio(5, 0).unwrap(), 2.0);
        assert!(compression_ratio(4, 16).is_err());
    }

    #[test]
    fn stats_examples() {
        let s = gaussian_stats(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(s.mean[0], 1.0);
        assert!((s.cov[(0, 0)] - 2.0 - RIDGE).abs() < 1e-15);
        let same = gaussian_stats(&vec![vec![1.0, 5.0]; 4]).unwrap();
        assert_eq!(same.cov, DMatrix::identity(2, 2) * RIDGE);
        assert!(gaussian_stats(&[vec![1.0]]).is_err());
        assert!(gaussian_stats(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn covariance_matches_brute_force() {
        let rows = random_rows(1000, 8, 3);
        let s = gaussian_stats(&rows).unwrap();
        for a in 0..8 {
            let ma: f64 = rows.iter().map(|r| r[a]).sum::<f64>() / 1000.0;
            for b in 0..8 {
                let mb: f64 = rows.iter().map(|r| r[b]).sum::<f64>() / 1000.0;
                let c: f64 = rows.iter().map(|r| (r[a] - ma) * (r[b] - mb)).sum::<f64>() / 999.0;
                let ridge = if a == b { RIDGE } else { 0.0 };
                assert!((s.cov[(a, b)] - ridge - c).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn analytic_one_dimensional_distances() {
        assert!((frechet_distance(&stats1(0.0, 1.0), &stats1(1.0, 1.0)).unwrap() - 1.0).abs() < 1e-6);
        assert!((frechet_distance(&stats1(0.0, 1.0), &stats1(0.0, 4.0)).unwrap() - 1.0).abs() < 1e-6);
        assert!(frechet_distance(&stats1(0.3, 2.0), &stats1(0.3, 2.0)).unwrap() < 1e-8);
    }

    #[test]
    fn diagonal_case_matches_closed_form() {
        let s1 = GaussianStats::new(DVector::from_vec(vec![1.0, 0.0]), DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0])), 5).unwrap();
        let s2 = GaussianStats::new(DVector::from_vec(vec![0.0, 2.0]), DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0])), 5).unwrap();
        // 1 + 4 + (2-1)² + (3-1)²
        assert!((frechet_distance(&s1, &s2).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn stats_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(GaussianStats::new(DVector::zeros(2), bad, 2).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(GaussianStats::new(DVector::zeros(2), neg, 2), Err(Error::NotPsd(_))));
        let s3 = GaussianStats::new(DVector::zeros(3), DMatrix::identity(3, 3), 2).unwrap();
        assert!(frechet_distance(&stats1(0.0, 1.0), &s3).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_nonnegative(seed in any::<u64>(), d in 1usize..6) {
            let a = gaussian_stats(&random_rows(20, d, seed)).unwrap();
            let b = gaussian_stats(&random_rows(30, d, seed ^ 0xabc)).unwrap();
            let ab = frechet_distance(&a, &b).unwrap();
            let ba = frechet_distance(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-8 * ab.max(1.0));
            prop_assert!(frechet_distance(&a, &a).unwrap() < 1e-8);
        }
    }

    fn test_image(w: usize, h: usize, seed: u64) -> RgbImage {
        RgbImage::from_fn(w, h, |r, c| {
            let v = |k: u64| {
                let base = 128.0 + 60.0 * ((r as f64 * 0.3 + k as f64).sin() + (c as f64 * 0.2).cos()) / 2.0;
                (base + 30.0 * rng::uniform(seed, (r * w + c) as u64, k)).clamp(0.0, 255.0) as u8
            };
            [v(0), v(1), v(2)]
        })
        .unwrap()
    }

    #[test]
    fn feature_shapes() {
        let img = test_image(16, 16, 1);
        assert_eq!(pixels8_features(&img).unwrap().len(), 64);
        assert_eq!(dct_stats_features(&img, 2).unwrap().len(), 24);
        assert_eq!(dct_stats_features(&img, 4).unwrap().len(), 96);
        let flat = RgbImage::from_fn(16, 16, |_, _| [128, 128, 128]).unwrap();
        assert!(dct_stats_features(&flat, 2).unwrap().iter().all(|v| v.abs() < 1e-9));
        assert!(pixels8_features(&flat).unwrap().iter().all(|v| (v - 128.0).abs() < 1e-9));
        assert!(pixels8_features(&test_image(12, 16, 1)).is_err());
    }

    #[test]
    fn scan_with_loose_threshold_takes_largest_m() {
        let images: Vec<RgbImage> = (0..6).map(|s| test_image(16, 16, s)).collect();
        let cfg = ScanConfig {
            gamma: f64::INFINITY,
            m_grid: vec![0, 1, 2, 3],
            features: FeatureMode::DctBlockStats,
        };
        let rep = scan_mstar(&images, 2, &cfg).unwrap();
        assert_eq!(rep.m_star, 3);
        assert!(!rep.saturated);
        assert_eq!(rep.curve.len(), 4);

        let tight = ScanConfig { gamma: 1e-12, ..cfg };
        let rep = scan_mstar(&images, 2, &tight).unwrap();
        assert_eq!(rep.m_star, 0);
        assert!(rep.saturated);
    }

    #[test]
    fn scan_config_validation() {
        let ok = ScanConfig { gamma: 1.0, m_grid: vec![0, 3], features: FeatureMode::DownsampledPixels };
        assert!(ok.validate(2).is_ok());
        assert!(ScanConfig { m_grid: vec![0, 4], ..ok.clone() }.validate(2).is_err());
        assert!(ScanConfig { m_grid: vec![2, 1], ..ok.clone() }.validate(2).is_err());
        assert!(ScanConfig { m_grid: vec![], ..ok.clone() }.validate(2).is_err());
        assert!(ScanConfig { gamma: 0.0, ..ok }.validate(2).is_err());
    }

    #[test]
    fn inversion_counting() {
        let pts = |d: &[f64]| d.iter().enumerate().map(|(m, &distance)| ScanPoint { m, ratio: 2.0, distance }).collect::<Vec<_>>();
        assert_eq!(count_inversions(&pts(&[0.0, 1.0, 1.0, 3.0]), 1e-9), 0);
        assert_eq!(count_inversions(&pts(&[0.0, 2.0, 1.0, 3.0, 2.5]), 1e-9), 2);
    }
}

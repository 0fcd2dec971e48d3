//! 2× upsampling in the block-DCT domain, with average pooling and a
//! bilinear baseline.
//!
//! Pooling a `2B × 2B` block `A` to `B × B` relates the spectra by
//!
//! ```text
//! D̄(k,l) ≈ ½ cos(kπ/4B) cos(lπ/4B) D(k,l),   k, l < B
//! ```
//!
//! with equality when `A` has no energy at `k ≥ B` or `l ≥ B`.
//! [`dct_upsample`] inverts this per low-resolution block and zero-fills the
//! upper half of the spectrum.

use std::f64::consts::PI;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block_dct::Dct2d;
use crate::colorspace::{rgb_to_ycbcr, ycbcr_to_rgb, YcbcrPlanes};
use crate::error::{Error, Result};
use crate::image_io::{GrayImage, RgbImage};
use crate::plane::Plane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dct,
    Bilinear,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dct" => Ok(Method::Dct),
            "bilinear" => Ok(Method::Bilinear),
            _ => Err(Error::param("method", format!("expected dct or bilinear, got `{s}`"))),
        }
    }
}

/// Mean of each 2×2 cell.
pub fn avg_pool2(img: &Plane) -> Result<Plane> {
    let (w, h) = (img.width(), img.height());
    if w % 2 != 0 || h % 2 != 0 {
        return Err(Error::InvalidDimensions {
            width: w,
            height: h,
            reason: "average pooling needs even dimensions",
        });
    }
    Ok(Plane::from_fn(w / 2, h / 2, |r, c| {
        0.25 * (img.get(2 * r, 2 * c)
            + img.get(2 * r, 2 * c + 1)
            + img.get(2 * r + 1, 2 * c)
            + img.get(2 * r + 1, 2 * c + 1))
    }))
}

/// `1 / cos(kπ/4B)` for `k < B`.
fn inverse_gain(block_size: usize) -> Vec<f64> {
    let n = block_size as f64;
    (0..block_size)
        .map(|k| 1.0 / (k as f64 * PI / (4.0 * n)).cos())
        .collect()
}

pub fn dct_upsample(low: &Plane, block_size: usize) -> Result<Plane> {
    let b = block_size;
    let (w, h) = (low.width(), low.height());
    if b == 0 || w % b != 0 || h % b != 0 || w == 0 || h == 0 {
        return Err(Error::InvalidDimensions {
            width: w,
            height: h,
            reason: "low-resolution dimensions must be positive multiples of the block size",
        });
    }
    let small = Dct2d::new(b);
    let large = Dct2d::new(2 * b);
    let gain = inverse_gain(b);
    let (across, down) = (w / b, h / b);
    let blocks: Vec<Vec<f64>> = (0..across * down)
        .into_par_iter()
        .map(|i| {
            let (br, bc) = (i / across, i % across);
            let mut pix = vec![0.0; b * b];
            let mut coef = vec![0.0; b * b];
            low.read_block(br * b, bc * b, b, &mut pix);
            small.forward(&pix, &mut coef);
            let n = 2 * b;
            let mut big = vec![0.0; n * n];
            for k in 0..b {
                for l in 0..b {
                    big[k * n + l] = 2.0 * coef[k * b + l] * gain[k] * gain[l];
                }
            }
            let mut out = vec![0.0; n * n];
            large.inverse(&big, &mut out);
            out
        })
        .collect();
    let mut hi = Plane::new(2 * w, 2 * h);
    for (i, block) in blocks.iter().enumerate() {
        let (br, bc) = (i / across, i % across);
        hi.write_block(2 * br * b, 2 * bc * b, 2 * b, block);
    }
    Ok(hi)
}

/// 2× bilinear interpolation with half-pixel centres and edge clamping.
pub fn bilinear_upsample(low: &Plane) -> Plane {
    let (w, h) = (low.width(), low.height());
    let taps = |x: usize, n: usize| {
        let s = ((x as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, s - i0 as f64)
    };
    Plane::from_fn(2 * w, 2 * h, |r, c| {
        let (r0, r1, fr) = taps(r, h);
        let (c0, c1, fc) = taps(c, w);
        let top = low.get(r0, c0) * (1.0 - fc) + low.get(r0, c1) * fc;
        let bot = low.get(r1, c0) * (1.0 - fc) + low.get(r1, c1) * fc;
        top * (1.0 - fr) + bot * fr
    })
}

pub fn upsample_plane(low: &Plane, method: Method, block_size: usize) -> Result<Plane> {
    match method {
        Method::Dct => dct_upsample(low, block_size),
        Method::Bilinear => Ok(bilinear_upsample(low)),
    }
}

/// Peak signal-to-noise ratio in dB for peak value 255.
pub fn psnr(a: &Plane, b: &Plane) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.data().len() as f64;
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

pub fn gray_to_plane(img: &GrayImage) -> Plane {
    Plane::from_fn(img.width(), img.height(), |r, c| img.data()[r * img.width() + c] as f64)
}

pub fn plane_to_gray(p: &Plane) -> Result<GrayImage> {
    let data = p.data().iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    GrayImage::new(p.width(), p.height(), data)
}

pub fn upsample_gray(img: &GrayImage, method: Method, block_size: usize) -> Result<GrayImage> {
    plane_to_gray(&upsample_plane(&gray_to_plane(img), method, block_size)?)
}

/// Upsamples each full-resolution YCbCr plane and converts back.
pub fn upsample_rgb(img: &RgbImage, method: Method, block_size: usize) -> Result<RgbImage> {
    let p = rgb_to_ycbcr(img);
    let up = YcbcrPlanes::new(
        upsample_plane(&p.y, method, block_size)?,
        upsample_plane(&p.cb, method, block_size)?,
        upsample_plane(&p.cr, method, block_size)?,
    )?;
    ycbcr_to_rgb(&up)
}

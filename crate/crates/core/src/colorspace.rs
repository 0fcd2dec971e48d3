//! RGB ↔ YCbCr (BT.601 full range, JPEG convention) and 2× chroma
//! subsampling.
//!
//! All arithmetic is `f64`. Quantization to 8 bits happens only in
//! [`ycbcr_to_rgb`].

use crate::error::{Error, Result};
use crate::image_io::RgbImage;
use crate::plane::Plane;

const FORWARD: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
];
const OFFSET: [f64; 3] = [0.0, 128.0, 128.0];

// Inverse of FORWARD, computed once from the exact matrix.
fn inverse_matrix() -> [[f64; 3]; 3] {
    let m = FORWARD;
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            *v = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    inv
}

/// Converts one RGB triple to (Y, Cb, Cr).
#[inline]
pub fn rgb_to_ycbcr_pixel(rgb: [f64; 3]) -> [f64; 3] {
    let mut out = OFFSET;
    for (o, row) in out.iter_mut().zip(&FORWARD) {
        *o += row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2];
    }
    out
}

/// Inverse affine map without clamping or rounding.
pub fn ycbcr_to_rgb_pixel(ycc: [f64; 3]) -> [f64; 3] {
    let inv = inverse_matrix();
    apply_inverse(&inv, ycc)
}

#[inline]
fn apply_inverse(inv: &[[f64; 3]; 3], ycc: [f64; 3]) -> [f64; 3] {
    let d = [ycc[0] - OFFSET[0], ycc[1] - OFFSET[1], ycc[2] - OFFSET[2]];
    let mut out = [0.0; 3];
    for (o, row) in out.iter_mut().zip(inv) {
        *o = row[0] * d[0] + row[1] * d[1] + row[2] * d[2];
    }
    out
}

#[inline]
fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Full-resolution Y, Cb, Cr planes.
#[derive(Debug, Clone, PartialEq)]
pub struct YcbcrPlanes {
    pub y: Plane,
    pub cb: Plane,
    pub cr: Plane,
}

impl YcbcrPlanes {
    pub fn new(y: Plane, cb: Plane, cr: Plane) -> Result<Self> {
        if !y.same_shape(&cb) || !y.same_shape(&cr) {
            return Err(Error::DimensionMismatch(
                "Y, Cb and Cr planes must have equal size".into(),
            ));
        }
        Ok(Self { y, cb, cr })
    }

    pub fn width(&self) -> usize {
        self.y.width()
    }

    pub fn height(&self) -> usize {
        self.y.height()
    }
}

/// Luma at full resolution plus chroma at half resolution in both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampledImage {
    y: Plane,
    cb: Plane,
    cr: Plane,
}

impl SubsampledImage {
    pub fn new(y: Plane, cb: Plane, cr: Plane) -> Result<Self> {
        if !cb.same_shape(&cr) {
            return Err(Error::DimensionMismatch("Cb and Cr differ in size".into()));
        }
        if y.width() != 2 * cb.width() || y.height() != 2 * cb.height() {
            return Err(Error::DimensionMismatch(format!(
                "luma {}x{} is not twice chroma {}x{}",
                y.width(),
                y.height(),
                cb.width(),
                cb.height()
            )));
        }
        if !(y.is_finite() && cb.is_finite() && cr.is_finite()) {
            return Err(Error::NonFinite("subsampled image planes"));
        }
        Ok(Self { y, cb, cr })
    }

    pub fn y(&self) -> &Plane {
        &self.y
    }

    pub fn cb(&self) -> &Plane {
        &self.cb
    }

    pub fn cr(&self) -> &Plane {
        &self.cr
    }

    pub fn width(&self) -> usize {
        self.y.width()
    }

    pub fn height(&self) -> usize {
        self.y.height()
    }

    pub fn into_planes(self) -> (Plane, Plane, Plane) {
        (self.y, self.cb, self.cr)
    }
}

pub fn rgb_to_ycbcr(img: &RgbImage) -> YcbcrPlanes {
    let (w, h) = (img.width(), img.height());
    let mut y = Plane::new(w, h);
    let mut cb = Plane::new(w, h);
    let mut cr = Plane::new(w, h);
    for row in 0..h {
        for col in 0..w {
            let p = img.pixel(row, col);
            let ycc = rgb_to_ycbcr_pixel([p[0] as f64, p[1] as f64, p[2] as f64]);
            y.set(row, col, ycc[0]);
            cb.set(row, col, ycc[1]);
            cr.set(row, col, ycc[2]);
        }
    }
    YcbcrPlanes { y, cb, cr }
}

/// Applies the inverse transform, then rounds and clamps to 8 bits.
pub fn ycbcr_to_rgb(planes: &YcbcrPlanes) -> Result<RgbImage> {
    let inv = inverse_matrix();
    let (w, h) = (planes.width(), planes.height());
    RgbImage::from_fn(w, h, |row, col| {
        let rgb = apply_inverse(
            &inv,
            [
                planes.y.get(row, col),
                planes.cb.get(row, col),
                planes.cr.get(row, col),
            ],
        );
        [quantize(rgb[0]), quantize(rgb[1]), quantize(rgb[2])]
    })
}

fn mean_pool2(plane: &Plane) -> Plane {
    let (w, h) = (plane.width() / 2, plane.height() / 2);
    Plane::from_fn(w, h, |r, c| {
        let (r2, c2) = (2 * r, 2 * c);
        0.25 * (plane.get(r2, c2)
            + plane.get(r2, c2 + 1)
            + plane.get(r2 + 1, c2)
            + plane.get(r2 + 1, c2 + 1))
    })
}

fn replicate2(plane: &Plane) -> Plane {
    Plane::from_fn(2 * plane.width(), 2 * plane.height(), |r, c| {
        plane.get(r / 2, c / 2)
    })
}

/// 2×2 mean pooling of Cb and Cr; Y is passed through untouched.
pub fn chroma_downsample(planes: YcbcrPlanes) -> Result<SubsampledImage> {
    let (w, h) = (planes.width(), planes.height());
    if w % 2 != 0 || h % 2 != 0 || w == 0 || h == 0 {
        return Err(Error::InvalidDimensions {
            width: w,
            height: h,
            reason: "chroma subsampling requires even dimensions",
        });
    }
    let cb = mean_pool2(&planes.cb);
    let cr = mean_pool2(&planes.cr);
    SubsampledImage::new(planes.y, cb, cr)
}

/// Nearest-neighbour replication of each chroma sample into its 2×2 cell.
pub fn chroma_upsample(s: &SubsampledImage) -> YcbcrPlanes {
    YcbcrPlanes {
        y: s.y.clone(),
        cb: replicate2(&s.cb),
        cr: replicate2(&s.cr),
    }
}

/// RGB → YCbCr → 4:2:0.
pub fn subsample_rgb(img: &RgbImage) -> SubsampledImage {
    chroma_downsample(rgb_to_ycbcr(img)).expect("RgbImage dimensions are even")
}

/// 4:2:0 → YCbCr → quantized RGB.
pub fn reconstruct_rgb(s: &SubsampledImage) -> RgbImage {
    ycbcr_to_rgb(&chroma_upsample(s)).expect("subsampled luma dimensions are even and nonzero")
}

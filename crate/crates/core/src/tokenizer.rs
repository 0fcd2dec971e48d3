//! Image ↔ token codec.
//!
//! Each token covers a `2B × 2B` luma area and carries six zigzag-ordered,
//! truncated, η-scaled coefficient vectors laid out as
//! `[Y_TL | Y_TR | Y_BL | Y_BR | Cb | Cr]`, each of length `B² − m`.
//! Tokens are stored in raster order over the `(h/2B) × (w/2B)` token grid.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::block_dct::{zigzag_order, Dct2d, ZigzagOrder};
use crate::colorspace::SubsampledImage;
use crate::error::{Error, Result};
use crate::plane::Plane;

/// Level shift applied to every plane before the transform.
pub const LEVEL_SHIFT: f64 = 128.0;

/// Segments per token: four luma blocks, one Cb, one Cr.
pub const SEGMENTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenConfig {
    pub block_size: usize,
    pub drop_count: usize,
    pub eta: f64,
    pub height: usize,
    pub width: usize,
}

impl TokenConfig {
    pub fn new(
        block_size: usize,
        drop_count: usize,
        eta: f64,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        let cfg = Self {
            block_size,
            drop_count,
            eta,
            height,
            width,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.block_size;
        if b == 0 {
            return Err(Error::param("block_size", "must be at least 1"));
        }
        if self.drop_count >= b * b {
            return Err(Error::param(
                "drop_count",
                format!("must be in 0..={} for block size {b}", b * b - 1),
            ));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::param("eta", "must be a positive finite number"));
        }
        let patch = 2 * b;
        if self.height == 0 || self.width == 0 || self.height % patch != 0 || self.width % patch != 0
        {
            return Err(Error::InvalidDimensions {
                width: self.width,
                height: self.height,
                reason: "image dimensions must be positive multiples of 2 * block_size",
            });
        }
        Ok(())
    }

    /// Coefficients kept per block.
    pub fn kept(&self) -> usize {
        self.block_size * self.block_size - self.drop_count
    }

    pub fn token_width(&self) -> usize {
        SEGMENTS * self.kept()
    }

    pub fn tokens_down(&self) -> usize {
        self.height / (2 * self.block_size)
    }

    pub fn tokens_across(&self) -> usize {
        self.width / (2 * self.block_size)
    }

    pub fn token_count(&self) -> usize {
        self.tokens_down() * self.tokens_across()
    }
}

/// `N × 6(B² − m)` coefficient matrix, row-major by token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenArray {
    config: TokenConfig,
    data: Vec<f64>,
}

impl TokenArray {
    pub fn new(config: TokenConfig, data: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let expected = config.token_count() * config.token_width();
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "token array needs {expected} coefficients, got {}",
                data.len()
            )));
        }
        Ok(Self { config, data })
    }

    pub fn zeros(config: TokenConfig) -> Result<Self> {
        let len = config.token_count() * config.token_width();
        Self::new(config, vec![0.0; len])
    }

    pub fn config(&self) -> &TokenConfig {
        &self.config
    }

    pub fn token_count(&self) -> usize {
        self.config.token_count()
    }

    pub fn token_width(&self) -> usize {
        self.config.token_width()
    }

    pub fn token(&self, i: usize) -> &[f64] {
        let w = self.token_width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Same geometry and metadata, new coefficients.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.config, data)
    }
}

/// Block origins `(plane, row, col)` for the six segments of token
/// `(ti, tj)`; plane 0 = Y, 1 = Cb, 2 = Cr.
fn segment_origins(ti: usize, tj: usize, b: usize) -> [(usize, usize, usize); SEGMENTS] {
    let (yr, yc) = (2 * b * ti, 2 * b * tj);
    let (cr, cc) = (b * ti, b * tj);
    [
        (0, yr, yc),
        (0, yr, yc + b),
        (0, yr + b, yc),
        (0, yr + b, yc + b),
        (1, cr, cc),
        (2, cr, cc),
    ]
}

struct BlockCodec {
    dct: Dct2d,
    zigzag: ZigzagOrder,
    block: Vec<f64>,
    coeffs: Vec<f64>,
    scan: Vec<f64>,
}

impl BlockCodec {
    fn new(b: usize) -> Self {
        Self {
            dct: Dct2d::new(b),
            zigzag: zigzag_order(b),
            block: vec![0.0; b * b],
            coeffs: vec![0.0; b * b],
            scan: vec![0.0; b * b],
        }
    }

    /// Level-shifted block at `(row, col)` → full zigzag vector in `self.scan`.
    fn encode(&mut self, plane: &Plane, row: usize, col: usize) {
        let b = self.dct.size();
        plane.read_block(row, col, b, &mut self.block);
        for v in &mut self.block {
            *v -= LEVEL_SHIFT;
        }
        self.dct.forward(&self.block, &mut self.coeffs);
        self.zigzag.scan(&self.coeffs, &mut self.scan);
    }

    fn decode(&mut self, prefix: &[f64], plane: &mut Plane, row: usize, col: usize) {
        let b = self.dct.size();
        self.zigzag.unscan(prefix, &mut self.coeffs);
        self.dct.inverse(&self.coeffs, &mut self.block);
        for v in &mut self.block {
            *v += LEVEL_SHIFT;
        }
        plane.write_block(row, col, b, &self.block);
    }
}

pub fn tokenize(s: &SubsampledImage, cfg: &TokenConfig) -> Result<TokenArray> {
    cfg.validate()?;
    if s.height() != cfg.height || s.width() != cfg.width {
        return Err(Error::DimensionMismatch(format!(
            "image is {}x{} but config expects {}x{}",
            s.width(),
            s.height(),
            cfg.width,
            cfg.height
        )));
    }
    let b = cfg.block_size;
    let kept = cfg.kept();
    let planes = [s.y(), s.cb(), s.cr()];
    let mut codec = BlockCodec::new(b);
    let mut data = Vec::with_capacity(cfg.token_count() * cfg.token_width());
    let inv_eta = 1.0 / cfg.eta;
    for ti in 0..cfg.tokens_down() {
        for tj in 0..cfg.tokens_across() {
            for (p, row, col) in segment_origins(ti, tj, b) {
                codec.encode(planes[p], row, col);
                data.extend(codec.scan[..kept].iter().map(|c| c * inv_eta));
            }
        }
    }
    TokenArray::new(*cfg, data)
}

pub fn detokenize(t: &TokenArray) -> SubsampledImage {
    let cfg = t.config;
    let b = cfg.block_size;
    let kept = cfg.kept();
    let mut planes = [
        Plane::new(cfg.width, cfg.height),
        Plane::new(cfg.width / 2, cfg.height / 2),
        Plane::new(cfg.width / 2, cfg.height / 2),
    ];
    let mut codec = BlockCodec::new(b);
    let mut prefix = vec![0.0; kept];
    let across = cfg.tokens_across();
    for ti in 0..cfg.tokens_down() {
        for tj in 0..across {
            let token = t.token(ti * across + tj);
            for (seg, (p, row, col)) in segment_origins(ti, tj, b).into_iter().enumerate() {
                for (dst, src) in prefix.iter_mut().zip(&token[seg * kept..(seg + 1) * kept]) {
                    *dst = src * cfg.eta;
                }
                codec.decode(&prefix, &mut planes[p], row, col);
            }
        }
    }
    let [y, cb, cr] = planes;
    SubsampledImage::new(y, cb, cr).expect("planes built with consistent geometry")
}

/// Full zigzag-ordered, level-shifted, unscaled DCT coefficients of every
/// block in one plane, flattened block-major (`blocks × B²`).
pub fn plane_block_coefficients(plane: &Plane, block_size: usize) -> Result<Vec<f64>> {
    let b = block_size;
    if b == 0 || plane.width() % b != 0 || plane.height() % b != 0 {
        return Err(Error::InvalidDimensions {
            width: plane.width(),
            height: plane.height(),
            reason: "plane dimensions must be multiples of the block size",
        });
    }
    let mut codec = BlockCodec::new(b);
    let mut out = Vec::with_capacity(plane.width() * plane.height());
    for row in (0..plane.height()).step_by(b) {
        for col in (0..plane.width()).step_by(b) {
            codec.encode(plane, row, col);
            out.extend_from_slice(&codec.scan);
        }
    }
    Ok(out)
}

/// Per-channel block coefficients `[Y, Cb, Cr]` of a subsampled image.
pub fn channel_block_coefficients(s: &SubsampledImage, block_size: usize) -> Result<[Vec<f64>; 3]> {
    Ok([
        plane_block_coefficients(s.y(), block_size)?,
        plane_block_coefficients(s.cb(), block_size)?,
        plane_block_coefficients(s.cr(), block_size)?,
    ])
}

// --- DCTK token files -------------------------------------------------------

pub const DCTK_MAGIC: &[u8; 4] = b"DCTK";
pub const DCTK_VERSION: u16 = 1;

/// Serializes as: magic, version (u16), then little-endian
/// `h:u32 w:u32 B:u16 m:u16 eta:f64 N:u64`, then `N · 6(B² − m)` f64 values.
pub fn write_tokens<W: Write>(mut w: W, t: &TokenArray) -> Result<()> {
    let cfg = t.config;
    let too_big = |name: &'static str| Error::param(name, "does not fit the DCTK header field");
    w.write_all(DCTK_MAGIC)?;
    w.write_all(&DCTK_VERSION.to_le_bytes())?;
    w.write_all(&u32::try_from(cfg.height).map_err(|_| too_big("height"))?.to_le_bytes())?;
    w.write_all(&u32::try_from(cfg.width).map_err(|_| too_big("width"))?.to_le_bytes())?;
    w.write_all(&u16::try_from(cfg.block_size).map_err(|_| too_big("block_size"))?.to_le_bytes())?;
    w.write_all(&u16::try_from(cfg.drop_count).map_err(|_| too_big("drop_count"))?.to_le_bytes())?;
    w.write_all(&cfg.eta.to_le_bytes())?;
    w.write_all(&(t.token_count() as u64).to_le_bytes())?;
    for v in &t.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::InvalidTokenFile("truncated header".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub fn read_tokens<R: Read>(mut r: R) -> Result<TokenArray> {
    let magic: [u8; 4] = read_array(&mut r)?;
    if &magic != DCTK_MAGIC {
        return Err(Error::InvalidTokenFile("bad magic".into()));
    }
    let version = u16::from_le_bytes(read_array(&mut r)?);
    if version != DCTK_VERSION {
        return Err(Error::InvalidTokenFile(format!("unsupported version {version}")));
    }
    let height = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let width = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let block_size = u16::from_le_bytes(read_array(&mut r)?) as usize;
    let drop_count = u16::from_le_bytes(read_array(&mut r)?) as usize;
    let eta = f64::from_le_bytes(read_array(&mut r)?);
    let count = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let cfg = TokenConfig::new(block_size, drop_count, eta, height, width)
        .map_err(|e| Error::InvalidTokenFile(e.to_string()))?;
    if count != cfg.token_count() {
        return Err(Error::InvalidTokenFile(format!(
            "header token count {count} disagrees with geometry ({})",
            cfg.token_count()
        )));
    }
    let len = count * cfg.token_width();
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::InvalidTokenFile("truncated payload".into()),
        _ => Error::Io(e),
    })?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    TokenArray::new(cfg, data)
}

pub fn save_tokens(path: impl AsRef<Path>, t: &TokenArray) -> Result<()> {
    write_tokens(BufWriter::new(File::create(path)?), t)
}

pub fn load_tokens(path: impl AsRef<Path>) -> Result<TokenArray> {
    read_tokens(BufReader::new(File::open(path)?))
}

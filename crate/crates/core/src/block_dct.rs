//! Orthonormal 2D type-II DCT on square blocks and zigzag ordering.
//!
//! The forward transform is
//!
//! ```text
//! D(u,v) = a(u) a(v) sum_x sum_y A(x,y) cos((2x+1)u pi / 2B) cos((2y+1)v pi / 2B)
//! a(0) = sqrt(1/B),  a(u>0) = sqrt(2/B)
//! ```
//!
//! evaluated separably as `C A Cᵀ` with a precomputed `B × B` basis `C`.
//! Input blocks are expected to be zero-centred already.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Precomputed separable DCT-II basis for one block size.
#[derive(Debug, Clone)]
pub struct Dct2d {
    size: usize,
    // basis[u * size + x] = a(u) cos((2x+1) u pi / 2B)
    basis: Vec<f64>,
}

impl Dct2d {
    pub fn new(size: usize) -> Self {
        assert!(size >= 1, "block size must be at least 1");
        let n = size as f64;
        let mut basis = vec![0.0; size * size];
        for u in 0..size {
            let alpha = if u == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            for x in 0..size {
                basis[u * size + x] =
                    alpha * ((2 * x + 1) as f64 * u as f64 * PI / (2.0 * n)).cos();
            }
        }
        Self { size, basis }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Row `u` of the 1D basis.
    pub fn basis_row(&self, u: usize) -> &[f64] {
        &self.basis[u * self.size..(u + 1) * self.size]
    }

    /// Forward transform of a row-major `B × B` block.
    pub fn forward(&self, input: &[f64], out: &mut [f64]) {
        let n = self.size;
        assert_eq!(input.len(), n * n);
        assert_eq!(out.len(), n * n);
        // tmp = C · A
        let mut tmp = vec![0.0; n * n];
        for u in 0..n {
            let c = self.basis_row(u);
            for x in 0..n {
                let cu = c[x];
                let row = &input[x * n..(x + 1) * n];
                for (t, a) in tmp[u * n..(u + 1) * n].iter_mut().zip(row) {
                    *t += cu * a;
                }
            }
        }
        // out = tmp · Cᵀ
        for u in 0..n {
            let t = &tmp[u * n..(u + 1) * n];
            for v in 0..n {
                out[u * n + v] = dot(t, self.basis_row(v));
            }
        }
    }

    /// Inverse transform: `Cᵀ D C`.
    pub fn inverse(&self, input: &[f64], out: &mut [f64]) {
        let n = self.size;
        assert_eq!(input.len(), n * n);
        assert_eq!(out.len(), n * n);
        // tmp = Cᵀ · D
        let mut tmp = vec![0.0; n * n];
        for u in 0..n {
            let c = self.basis_row(u);
            let row = &input[u * n..(u + 1) * n];
            for x in 0..n {
                let cu = c[x];
                for (t, d) in tmp[x * n..(x + 1) * n].iter_mut().zip(row) {
                    *t += cu * d;
                }
            }
        }
        // out = tmp · C
        out.fill(0.0);
        for x in 0..n {
            for v in 0..n {
                let tv = tmp[x * n + v];
                for (o, c) in out[x * n..(x + 1) * n].iter_mut().zip(self.basis_row(v)) {
                    *o += tv * c;
                }
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// DCT coefficients of one `B × B` block, row-major by `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DctBlock {
    block_size: usize,
    coeffs: Vec<f64>,
}

impl DctBlock {
    pub fn new(block_size: usize, coeffs: Vec<f64>) -> Result<Self> {
        if block_size == 0 || coeffs.len() != block_size * block_size {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients do not form a {block_size}x{block_size} block",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("dct block"));
        }
        Ok(Self { block_size, coeffs })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.coeffs[u * self.block_size + v]
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }
}

fn square_side(len: usize) -> Option<usize> {
    let side = (len as f64).sqrt().round() as usize;
    (side >= 1 && side * side == len).then_some(side)
}

/// Forward DCT of a row-major square block; the side length is inferred.
pub fn dct2(block: &[f64]) -> Result<DctBlock> {
    let side = square_side(block.len()).ok_or_else(|| {
        Error::DimensionMismatch(format!("{} samples do not form a square block", block.len()))
    })?;
    let mut out = vec![0.0; block.len()];
    Dct2d::new(side).forward(block, &mut out);
    DctBlock::new(side, out)
}

pub fn idct2(d: &DctBlock) -> Vec<f64> {
    let mut out = vec![0.0; d.coeffs.len()];
    Dct2d::new(d.block_size).inverse(&d.coeffs, &mut out);
    out
}

/// Zigzag permutation: `perm[rank]` is the row-major index of the
/// coefficient visited at that rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZigzagOrder {
    block_size: usize,
    perm: Vec<usize>,
}

impl ZigzagOrder {
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn position(&self, rank: usize) -> (usize, usize) {
        let idx = self.perm[rank];
        (idx / self.block_size, idx % self.block_size)
    }

    /// Row-major block → zigzag vector (full length).
    pub fn scan(&self, block: &[f64], out: &mut [f64]) {
        for (o, &idx) in out.iter_mut().zip(&self.perm) {
            *o = block[idx];
        }
    }

    /// Zigzag prefix → row-major block, zero-filling the missing tail.
    pub fn unscan(&self, prefix: &[f64], block: &mut [f64]) {
        block.fill(0.0);
        for (&v, &idx) in prefix.iter().zip(&self.perm) {
            block[idx] = v;
        }
    }
}

/// JPEG-convention zigzag: start at (0,0), step right, then alternate
/// down-left and up-right along anti-diagonals.
pub fn zigzag_order(block_size: usize) -> ZigzagOrder {
    assert!(block_size >= 1, "block size must be at least 1");
    let n = block_size;
    let mut perm = Vec::with_capacity(n * n);
    for diag in 0..(2 * n - 1) {
        let lo = diag.saturating_sub(n - 1);
        let hi = diag.min(n - 1);
        if diag % 2 == 1 {
            // down-left: row increases
            for row in lo..=hi {
                perm.push(row * n + (diag - row));
            }
        } else {
            // up-right: row decreases
            for row in (lo..=hi).rev() {
                perm.push(row * n + (diag - row));
            }
        }
    }
    ZigzagOrder {
        block_size: n,
        perm,
    }
}

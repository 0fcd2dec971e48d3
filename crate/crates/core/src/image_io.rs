//! Binary PNM (P5 / P6, maxval 255) images.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit interleaved RGB image with even dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_rgb_dims(width, height)?;
        if data.len() != 3 * width * height {
            return Err(Error::DimensionMismatch(format!(
                "rgb image {width}x{height} needs {} bytes, got {}",
                3 * width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        check_rgb_dims(width, height)?;
        let mut data = Vec::with_capacity(3 * width * height);
        for row in 0..height {
            for col in 0..width {
                data.extend_from_slice(&f(row, col));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

fn check_rgb_dims(width: usize, height: usize) -> Result<()> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "color images must be at least 2x2",
        });
    }
    if width % 2 != 0 || height % 2 != 0 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "color images must have even dimensions",
        });
    }
    Ok(())
}

/// 8-bit single-channel image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "image must not be empty",
            });
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "gray image {width}x{height} needs {} bytes, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Image {
    Rgb(RgbImage),
    Gray(GrayImage),
}

impl From<RgbImage> for Image {
    fn from(img: RgbImage) -> Self {
        Image::Rgb(img)
    }
}

impl From<GrayImage> for Image {
    fn from(img: GrayImage) -> Self {
        Image::Gray(img)
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = fs::read(path)?;
    decode_pnm(&bytes)
}

pub fn write_image(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    fs::write(path, encode_pnm(image))?;
    Ok(())
}

/// Reads a color image, rejecting grayscale files.
pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    match read_image(path)? {
        Image::Rgb(img) => Ok(img),
        Image::Gray(_) => Err(Error::MalformedHeader(
            "expected a P6 color image, found P5".into(),
        )),
    }
}

pub fn encode_pnm(image: &Image) -> Vec<u8> {
    let (magic, width, height, payload) = match image {
        Image::Rgb(img) => ("P6", img.width, img.height, img.data.as_slice()),
        Image::Gray(img) => ("P5", img.width, img.height, img.data.as_slice()),
    };
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(payload);
    out
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("{what} out of range")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 {
        return Err(Error::MalformedHeader("file too short".into()));
    }
    let color = match &bytes[..2] {
        b"P6" => true,
        b"P5" => false,
        _ => return Err(Error::MalformedHeader("magic must be P5 or P6".into())),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if cur.pos < bytes.len() && !bytes[cur.pos].is_ascii_whitespace() && bytes[cur.pos] != b'#' {
        return Err(Error::MalformedHeader("magic must be followed by whitespace".into()));
    }
    let width = cur.read_uint("width")? as usize;
    let height = cur.read_uint("height")? as usize;
    let maxval = cur.read_uint("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the payload
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::MalformedHeader("missing separator after maxval".into())),
    }
    let channels = if color { 3 } else { 1 };
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let data = payload[..expected].to_vec();
    if color {
        Ok(Image::Rgb(RgbImage::new(width, height, data)?))
    } else {
        Ok(Image::Gray(GrayImage::new(width, height, data)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_rgb_2x2() {
        let mut file = b"P6\n2 2\n255\n".to_vec();
        file.extend_from_slice(&[0u8; 12]);
        let img = decode_pnm(&file).unwrap();
        assert_eq!(img, Image::Rgb(RgbImage::new(2, 2, vec![0; 12]).unwrap()));
    }

    #[test]
    fn truncated_payload() {
        let mut file = b"P6 4 4 255\n".to_vec();
        file.extend_from_slice(&[7u8; 24]);
        assert!(matches!(
            decode_pnm(&file),
            Err(Error::TruncatedPayload {
                expected: 48,
                found: 24
            })
        ));
    }

    #[test]
    fn gray_identity_payload() {
        let mut file = b"P5\n3 3\n255\n".to_vec();
        file.extend(0u8..9);
        let img = decode_pnm(&file).unwrap();
        assert_eq!(
            img,
            Image::Gray(GrayImage::new(3, 3, (0u8..9).collect()).unwrap())
        );
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut file = b"P5 # comment\n# another\n2 # w\n1\n255\n".to_vec();
        file.extend_from_slice(&[1, 2]);
        let img = decode_pnm(&file).unwrap();
        assert_eq!(img, Image::Gray(GrayImage::new(2, 1, vec![1, 2]).unwrap()));
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(matches!(
            decode_pnm(b"P3\n2 2\n255\n"),
            Err(Error::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_pnm(b"P6\n2 2\n65535\n"),
            Err(Error::UnsupportedMaxval(65535))
        ));
        assert!(matches!(decode_pnm(b"P6\n2\n"), Err(Error::MalformedHeader(_))));
        let mut odd = b"P6\n3 2\n255\n".to_vec();
        odd.extend_from_slice(&[0; 18]);
        assert!(matches!(
            decode_pnm(&odd),
            Err(Error::InvalidDimensions { .. })
        ));
    }

    #[test]
    fn gray_1x1_roundtrip() {
        let img = Image::Gray(GrayImage::new(1, 1, vec![128]).unwrap());
        assert_eq!(decode_pnm(&encode_pnm(&img)).unwrap(), img);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ppm");
        let data: Vec<u8> = (0..64 * 64 * 3).map(|i| (i * 31 % 251) as u8).collect();
        let img = Image::Rgb(RgbImage::new(64, 64, data).unwrap());
        write_image(&path, &img).unwrap();
        assert_eq!(read_image(&path).unwrap(), img);
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes, encode_pnm(&img));
    }

    proptest! {
        #[test]
        fn rgb_roundtrip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let (w, h) = (2 * w, 2 * h);
            let data: Vec<u8> = (0..3 * w * h)
                .map(|i| (crate::rng::hash(seed, 0, i as u64, 0) & 0xff) as u8)
                .collect();
            let img = Image::Rgb(RgbImage::new(w, h, data).unwrap());
            let bytes = encode_pnm(&img);
            let back = decode_pnm(&bytes).unwrap();
            prop_assert_eq!(&back, &img);
            prop_assert_eq!(encode_pnm(&back), bytes);
        }
    }
}

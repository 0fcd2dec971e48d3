#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dctk::image_io::{write_image, Image, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

pub fn random_image(w: usize, h: usize, r: &mut ChaCha8Rng) -> RgbImage {
    let data: Vec<u8> = (0..w * h * 3).map(|_| r.random()).collect();
    RgbImage::new(w, h, data).unwrap()
}

/// Random colors constant on every 2×2 cell.
pub fn replicated_image(w: usize, h: usize, r: &mut ChaCha8Rng) -> RgbImage {
    let cells: Vec<[u8; 3]> = (0..(w / 2) * (h / 2)).map(|_| [r.random(), r.random(), r.random()]).collect();
    RgbImage::from_fn(w, h, |row, col| cells[(row / 2) * (w / 2) + col / 2]).unwrap()
}

/// Sum of a few low-frequency cosines around a random mean level.
pub fn smooth_image(w: usize, h: usize, r: &mut ChaCha8Rng) -> RgbImage {
    let mut waves = Vec::new();
    for _ in 0..3 {
        let fx = r.random_range(0.0..2.0);
        let fy = r.random_range(0.0..2.0);
        let amp: [f64; 3] = [r.random_range(5.0..30.0), r.random_range(5.0..30.0), r.random_range(5.0..30.0)];
        let phase = r.random_range(0.0..2.0 * PI);
        waves.push((fx, fy, amp, phase));
    }
    let base: [f64; 3] = [r.random_range(60.0..196.0), r.random_range(60.0..196.0), r.random_range(60.0..196.0)];
    RgbImage::from_fn(w, h, |row, col| {
        let mut px = [0u8; 3];
        for (k, p) in px.iter_mut().enumerate() {
            let mut v = base[k];
            for (fx, fy, amp, phase) in &waves {
                v += amp[k] * (2.0 * PI * (fx * col as f64 / w as f64 + fy * row as f64 / h as f64) + phase).cos();
            }
            *p = v.round().clamp(0.0, 255.0) as u8;
        }
        px
    })
    .unwrap()
}

pub fn write_ppm(path: &Path, img: &RgbImage) {
    write_image(path, &Image::Rgb(img.clone())).unwrap();
}

/// Writes `images` as `img_000.ppm`, ... into `dir`.
pub fn write_dataset(dir: &Path, images: &[RgbImage]) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, img) in images.iter().enumerate() {
        write_ppm(&dir.join(format!("img_{i:03}.ppm")), img);
    }
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_dctk"))
}

pub fn run_cli(args: &[&str]) -> Output {
    Command::new(bin()).args(args).env_remove("DCTK_THREADS").output().unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

//! Block-DCT image tokenization and the surrounding diffusion-modeling
//! toolkit: color transforms, coefficient scaling, SNR-scaled noise
//! schedules, frequency statistics, Fréchet-distance compression scans and
//! DCT-domain upsampling.

pub mod block_dct;
pub mod cli;
pub mod colorspace;
pub mod error;
pub mod fd_metric;
pub mod image_io;
pub mod plane;
pub mod diffuse;
pub mod freq_stats;
pub mod rng;
pub mod scaling;
pub mod schedule;
pub mod tokenizer;
pub mod upsample;

pub use error::{Error, Result};

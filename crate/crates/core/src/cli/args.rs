use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::scaling::DEFAULT_TAU;
use crate::schedule::{DEFAULT_A, DEFAULT_B, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_STEPS};

#[derive(Debug, Parser)]
#[command(name = "dctk", version, about = "Block-DCT image tokens and frequency tools")]
pub struct Cli {
    /// Worker threads (0 = all cores). Falls back to DCTK_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a PPM image into a DCTK token file.
    Encode(EncodeArgs),
    /// Decode a DCTK token file back to a PPM image.
    Decode(DecodeArgs),
    /// Estimate coefficient bounds over an image set.
    Bounds(BoundsArgs),
    /// Scan drop counts and report the Fréchet-distance curve.
    #[command(name = "scan-m")]
    ScanM(ScanArgs),
    /// Perturb a DCTK token file with the forward VP kernel.
    Diffuse(DiffuseArgs),
    /// Averaged power per zigzag rank, clean and noisy.
    Apsd(ApsdArgs),
    /// Upsample an image by 2.
    Upsample(UpsampleArgs),
    /// Print the compression ratio for a block size and drop count.
    Ratio(RatioArgs),
    /// Entropy weights per kept rank and channel.
    Weights(WeightsArgs),
    /// Fréchet distance between two image sets.
    Fd(FdArgs),
}

#[derive(Debug, Args)]
pub struct BlockArgs {
    /// DCT block size B.
    #[arg(long = "block-size", default_value_t = 4)]
    pub block_size: usize,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = DEFAULT_A)]
    pub a: f64,
    #[arg(long, default_value_t = DEFAULT_B)]
    pub b: f64,
    /// SNR scale factor; defaults to 4 up to 256² and 12 above.
    #[arg(long)]
    pub c: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub block: BlockArgs,
    /// Number of high-frequency zigzag slots dropped per block.
    #[arg(long, default_value_t = 0)]
    pub drop: usize,
    /// ECS bounds file supplying η.
    #[arg(long, conflicts_with = "eta")]
    pub bounds: Option<PathBuf>,
    /// Scaling bound η (default 1).
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundsMode {
    Ecs,
    Naive,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Image file or directory of PPM files.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub block: BlockArgs,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = BoundsMode::Ecs)]
    pub mode: BoundsMode,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub block: BlockArgs,
    /// Distance threshold; depends on the feature space.
    #[arg(long)]
    pub gamma: f64,
    /// Drop counts, e.g. `0..15` or `0,4,8` (default: all of 0..B²-1).
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value = "dctstats")]
    pub features: String,
    /// CSV file receiving `m,ratio,distance` rows.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiffuseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Continuous time in [0, 1].
    #[arg(long, required_unless_present = "step", conflicts_with = "step")]
    pub t: Option<f64>,
    /// Discrete step in [0, steps] instead of a continuous time.
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    #[arg(long = "beta-start", default_value_t = DEFAULT_BETA_START)]
    pub beta_start: f64,
    #[arg(long = "beta-end", default_value_t = DEFAULT_BETA_END)]
    pub beta_end: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
}

#[derive(Debug, Args)]
pub struct ApsdArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub block: BlockArgs,
    /// Comma-separated diffusion times.
    #[arg(long = "t-list", default_value = "0")]
    pub t_list: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// ECS bounds file supplying η.
    #[arg(long, conflicts_with = "eta")]
    pub bounds: Option<PathBuf>,
    /// Scaling bound η; estimated from the input when neither flag is set.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dct,
    Bilinear,
}

#[derive(Debug, Args)]
pub struct UpsampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Dct)]
    pub method: MethodArg,
    #[command(flatten)]
    pub block: BlockArgs,
}

#[derive(Debug, Args)]
pub struct RatioArgs {
    #[arg(long = "block-size")]
    pub block_size: usize,
    #[arg(long)]
    pub drop: usize,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub block: BlockArgs,
    #[arg(long, default_value_t = 0)]
    pub drop: usize,
    #[arg(long, default_value_t = crate::freq_stats::DEFAULT_BINS)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct FdArgs {
    /// Image file or directory.
    #[arg(long)]
    pub input: PathBuf,
    /// Reference image file or directory.
    #[arg(long)]
    pub reference: PathBuf,
    #[command(flatten)]
    pub block: BlockArgs,
    #[arg(long, default_value = "dctstats")]
    pub features: String,
}

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::args::*;
use super::fmt_num;
use crate::colorspace::{reconstruct_rgb, subsample_rgb};
use crate::diffuse::{discrete_params, perturb_params, perturb_with};
use crate::error::{Error, Result};
use crate::fd_metric::{
    compression_ratio, extract_features, frechet_distance, gaussian_stats, scan_mstar, FeatureMode, ScanConfig,
};
use crate::freq_stats::{apsd, entropy_weights, power_law_fit};
use crate::image_io::{read_image, read_rgb, write_image, Image, RgbImage};
use crate::scaling::{check_tau, BoundsAccumulator, ScalingBounds, ScalingMode};
use crate::schedule::{default_snr_scale, discrete_schedule, NoiseSchedule};
use crate::tokenizer::{channel_block_coefficients, detokenize, load_tokens, save_tokens, tokenize, TokenConfig};
use crate::upsample::{upsample_gray, upsample_rgb, Method};

const CHANNEL_NAMES: [&str; 3] = ["Y", "Cb", "Cr"];

/// Images loaded and transformed together when streaming bounds.
const LOAD_CHUNK: usize = 64;

pub(super) fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Encode(a) => encode(a, out),
        Command::Decode(a) => decode(a, out),
        Command::Bounds(a) => bounds(a, out),
        Command::ScanM(a) => scan(a, out),
        Command::Diffuse(a) => diffuse(a, out),
        Command::Apsd(a) => apsd_cmd(a, out),
        Command::Upsample(a) => upsample(a, out),
        Command::Ratio(a) => ratio(a, out),
        Command::Weights(a) => weights(a, out, err),
        Command::Fd(a) => fd(a, out),
    }
}

fn check_block(block_size: usize, drop: usize) -> Result<()> {
    if block_size == 0 {
        return Err(Error::param("block-size", "must be at least 1"));
    }
    let b2 = block_size * block_size;
    if drop >= b2 {
        return Err(Error::param(
            "drop",
            format!("must lie in [0, {}] for block size {block_size}, got {drop}", b2 - 1),
        ));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::param("eta", format!("must be positive, got {eta}")));
    }
    Ok(())
}

fn check_schedule(s: &ScheduleArgs) -> Result<()> {
    let c = s.c.unwrap_or(1.0);
    NoiseSchedule::new(s.a, s.b, c).map(|_| ())
}

fn schedule_for(s: &ScheduleArgs, height: usize, width: usize) -> Result<NoiseSchedule> {
    NoiseSchedule::new(s.a, s.b, s.c.unwrap_or_else(|| default_snr_scale(height, width)))
}

/// η from an ECS bounds file, checking it matches the block size.
fn eta_from_bounds(path: &Path, block_size: usize) -> Result<f64> {
    let b = ScalingBounds::load(path)?;
    if b.mode != ScalingMode::Ecs {
        return Err(Error::param(
            "bounds",
            "token files carry a single η, so an ecs bounds file is required",
        ));
    }
    if b.block_size != block_size {
        return Err(Error::param(
            "bounds",
            format!("file was estimated for block size {}, not {block_size}", b.block_size),
        ));
    }
    Ok(b.eta.expect("validated ecs bounds carry eta"))
}

/// Image files under `path` in lexicographic order, or `path` itself.
fn image_paths(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(path)? {
        let p = entry?.path();
        let is_image = p
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "ppm" | "pnm"));
        if is_image && p.is_file() {
            files.push(p);
        }
    }
    if files.is_empty() {
        return Err(Error::EmptyInput("no .ppm files in input directory"));
    }
    files.sort();
    Ok(files)
}

fn load_images(paths: &[PathBuf]) -> Result<Vec<RgbImage>> {
    paths.par_iter().map(read_rgb).collect()
}

/// Per-channel level-shifted block coefficients of every image, in order.
fn dataset_coefficients(paths: &[PathBuf], block_size: usize) -> Result<([Vec<f64>; 3], (usize, usize))> {
    let mut channels: [Vec<f64>; 3] = Default::default();
    let mut dims = None;
    for chunk in paths.chunks(LOAD_CHUNK) {
        let per_image: Vec<([Vec<f64>; 3], (usize, usize))> = chunk
            .par_iter()
            .map(|p| {
                let img = read_rgb(p)?;
                let dims = (img.height(), img.width());
                Ok((channel_block_coefficients(&subsample_rgb(&img), block_size)?, dims))
            })
            .collect::<Result<_>>()?;
        for (coeffs, d) in per_image {
            dims.get_or_insert(d);
            for (dst, src) in channels.iter_mut().zip(coeffs) {
                dst.extend(src);
            }
        }
    }
    Ok((channels, dims.expect("at least one image")))
}

fn encode(a: EncodeArgs, out: &mut dyn Write) -> Result<()> {
    let b = a.block.block_size;
    check_block(b, a.drop)?;
    if let Some(eta) = a.eta {
        check_eta(eta)?;
    }
    let eta = match &a.bounds {
        Some(p) => eta_from_bounds(p, b)?,
        None => a.eta.unwrap_or(1.0),
    };
    let img = read_rgb(&a.input)?;
    let cfg = TokenConfig::new(b, a.drop, eta, img.height(), img.width())?;
    let tokens = tokenize(&subsample_rgb(&img), &cfg)?;
    save_tokens(&a.out, &tokens)?;
    writeln!(out, "tokens\t{}\twidth\t{}\teta\t{}", cfg.token_count(), cfg.token_width(), fmt_num(eta))?;
    Ok(())
}

fn decode(a: DecodeArgs, out: &mut dyn Write) -> Result<()> {
    let tokens = load_tokens(&a.input)?;
    let img = reconstruct_rgb(&detokenize(&tokens));
    write_image(&a.out, &Image::Rgb(img))?;
    let c = tokens.config();
    writeln!(out, "image\t{}x{}", c.width, c.height)?;
    Ok(())
}

fn bounds(a: BoundsArgs, out: &mut dyn Write) -> Result<()> {
    let b = a.block.block_size;
    check_block(b, 0)?;
    check_tau(a.tau)?;
    let paths = image_paths(&a.input)?;
    let mut acc = BoundsAccumulator::new(b);
    for chunk in paths.chunks(LOAD_CHUNK) {
        let coeffs: Vec<[Vec<f64>; 3]> = chunk
            .par_iter()
            .map(|p| channel_block_coefficients(&subsample_rgb(&read_rgb(p)?), b))
            .collect::<Result<_>>()?;
        for c in &coeffs {
            acc.add(c);
        }
    }
    let bounds = match a.mode {
        BoundsMode::Ecs => acc.ecs(a.tau)?,
        BoundsMode::Naive => acc.naive(a.tau)?,
    };
    bounds.save(&a.out)?;
    match (&bounds.eta, &bounds.naive_bounds) {
        (Some(eta), _) => writeln!(out, "eta\t{}", fmt_num(*eta))?,
        (_, Some(v)) => writeln!(out, "naive_bounds\t{}", v.len())?,
        _ => {}
    }
    Ok(())
}

/// Parses `0..15`, `0,4,8` or a mix such as `0..3,8`; ranges are inclusive.
pub(super) fn parse_grid(spec: &str) -> Result<Vec<usize>> {
    let bad = || Error::param("grid", format!("cannot parse `{spec}`"));
    let mut grid = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if hi < lo {
                return Err(bad());
            }
            grid.extend(lo..=hi);
        } else {
            grid.push(part.parse().map_err(|_| bad())?);
        }
    }
    if grid.is_empty() {
        return Err(bad());
    }
    Ok(grid)
}

fn parse_times(spec: &str) -> Result<Vec<f64>> {
    let ts: Vec<f64> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::param("t-list", format!("cannot parse `{s}`"))))
        .collect::<Result<_>>()?;
    if ts.is_empty() {
        return Err(Error::param("t-list", "no times given"));
    }
    if let Some(t) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::param("t-list", format!("{t} is outside [0, 1]")));
    }
    Ok(ts)
}

fn scan(a: ScanArgs, out: &mut dyn Write) -> Result<()> {
    let b = a.block.block_size;
    check_block(b, 0)?;
    let grid = match &a.grid {
        Some(g) => parse_grid(g)?,
        None => (0..b * b).collect(),
    };
    let cfg = ScanConfig {
        gamma: a.gamma,
        m_grid: grid,
        features: a.features.parse()?,
    };
    cfg.validate(b)?;
    let images = load_images(&image_paths(&a.input)?)?;
    let report = scan_mstar(&images, b, &cfg)?;
    let mut csv = String::from("m,ratio,distance\n");
    writeln!(out, "m\tratio\tdistance")?;
    for p in &report.curve {
        writeln!(csv, "{},{},{}", p.m, fmt_num(p.ratio), fmt_num(p.distance)).expect("string write");
        writeln!(out, "{}\t{}\t{}", p.m, fmt_num(p.ratio), fmt_num(p.distance))?;
    }
    writeln!(out, "m*\t{}", report.m_star)?;
    if report.saturated {
        writeln!(out, "saturated\tno drop count met gamma {}", fmt_num(report.gamma))?;
    }
    writeln!(out, "note\tdistances are against the originals; m=0 includes chroma subsampling loss")?;
    if let Some(path) = &a.report {
        std::fs::write(path, csv)?;
    }
    Ok(())
}

fn diffuse(a: DiffuseArgs, out: &mut dyn Write) -> Result<()> {
    check_schedule(&a.schedule)?;
    if let Some(t) = a.t {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::ScheduleOutOfRange(format!("t = {t} is outside [0, 1]")));
        }
    }
    if let Some(step) = a.step {
        if a.steps < 2 {
            return Err(Error::param("steps", "need at least 2 steps"));
        }
        if step > a.steps {
            return Err(Error::param("step", format!("must lie in [0, {}], got {step}", a.steps)));
        }
    }
    let tokens = load_tokens(&a.input)?;
    let cfg = *tokens.config();
    let sched = schedule_for(&a.schedule, cfg.height, cfg.width)?;
    let params = match (a.t, a.step) {
        (Some(t), _) => perturb_params(t, &sched)?,
        (None, Some(step)) => {
            let d = discrete_schedule(a.steps, a.beta_start, a.beta_end, sched.c)?;
            discrete_params(step, &d)?
        }
        (None, None) => return Err(Error::param("t", "either --t or --step is required")),
    };
    let noisy = perturb_with(&tokens, params, a.seed)?;
    save_tokens(&a.out, &noisy)?;
    writeln!(
        out,
        "c\t{}\tmean_coef\t{}\tstd\t{}",
        fmt_num(sched.c),
        fmt_num(params.mean_coef),
        fmt_num(params.std)
    )?;
    Ok(())
}

fn apsd_cmd(a: ApsdArgs, out: &mut dyn Write) -> Result<()> {
    let b = a.block.block_size;
    check_block(b, 0)?;
    check_schedule(&a.schedule)?;
    check_tau(a.tau)?;
    if let Some(eta) = a.eta {
        check_eta(eta)?;
    }
    let ts = parse_times(&a.t_list)?;
    let fixed_eta = match &a.bounds {
        Some(p) => Some(eta_from_bounds(p, b)?),
        None => a.eta,
    };
    let (mut channels, (h, w)) = dataset_coefficients(&image_paths(&a.input)?, b)?;
    let eta = match fixed_eta {
        Some(e) => e,
        None => {
            let dc: Vec<f64> = channels[0].iter().step_by(b * b).copied().collect();
            crate::scaling::estimate_ecs_bound(&dc, a.tau)?
        }
    };
    for ch in &mut channels {
        ch.iter_mut().for_each(|v| *v /= eta);
    }
    let sched = schedule_for(&a.schedule, h, w)?;
    let mut csv = String::from("t,channel,rank,power\n");
    writeln!(out, "eta\t{}\tc\t{}", fmt_num(eta), fmt_num(sched.c))?;
    writeln!(out, "t\tchannel\tK\talpha")?;
    let mut profiles: Vec<_> = Vec::new();
    for (c, data) in channels.iter().enumerate() {
        profiles.extend(apsd(data, b, c, &sched, &ts, a.seed)?);
    }
    profiles.sort_by(|x, y| x.t.total_cmp(&y.t).then(x.channel.cmp(&y.channel)));
    for p in &profiles {
        let name = CHANNEL_NAMES[p.channel];
        for (r, v) in p.power.iter().enumerate() {
            writeln!(csv, "{},{},{},{}", fmt_num(p.t), name, r, fmt_num(*v)).expect("string write");
        }
        match power_law_fit(p) {
            Ok((k, alpha)) => writeln!(out, "{}\t{}\t{}\t{}", fmt_num(p.t), name, fmt_num(k), fmt_num(alpha))?,
            Err(_) => writeln!(out, "{}\t{}\t-\t-", fmt_num(p.t), name)?,
        }
    }
    std::fs::write(&a.out, csv)?;
    Ok(())
}

fn upsample(a: UpsampleArgs, out: &mut dyn Write) -> Result<()> {
    let b = a.block.block_size;
    check_block(b, 0)?;
    let method = match a.method {
        MethodArg::Dct => Method::Dct,
        MethodArg::Bilinear => Method::Bilinear,
    };
    let up: Image = match read_image(&a.input)? {
        Image::Rgb(img) => upsample_rgb(&img, method, b)?.into(),
        Image::Gray(img) => upsample_gray(&img, method, b)?.into(),
    };
    write_image(&a.output, &up)?;
    let (w, h) = match &up {
        Image::Rgb(i) => (i.width(), i.height()),
        Image::Gray(i) => (i.width(), i.height()),
    };
    writeln!(out, "image\t{w}x{h}")?;
    Ok(())
}

fn ratio(a: RatioArgs, out: &mut dyn Write) -> Result<()> {
    let r = compression_ratio(a.block_size, a.drop)?;
    writeln!(out, "{r:.2}\t{}", fmt_num(r))?;
    Ok(())
}

fn weights(a: WeightsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let b = a.block.block_size;
    check_block(b, a.drop)?;
    if a.bins < crate::freq_stats::MIN_BINS {
        return Err(Error::param(
            "bins",
            format!("need at least {}, got {}", crate::freq_stats::MIN_BINS, a.bins),
        ));
    }
    let (channels, _) = dataset_coefficients(&image_paths(&a.input)?, b)?;
    let w = entropy_weights([&channels[0], &channels[1], &channels[2]], b, a.drop, a.bins)?;
    std::fs::write(&a.out, w.to_json()? + "\n")?;
    let k = w.kept();
    for &i in &w.degenerate {
        writeln!(err, "warning: {} rank {} is constant; assigned the minimum weight", CHANNEL_NAMES[i / k], i % k)?;
    }
    writeln!(out, "channel\tdc_weight\tlast_weight")?;
    for (c, name) in CHANNEL_NAMES.iter().enumerate() {
        let ws = w.channel(c);
        writeln!(out, "{name}\t{}\t{}", fmt_num(ws[0]), fmt_num(ws[k - 1]))?;
    }
    Ok(())
}

fn fd(a: FdArgs, out: &mut dyn Write) -> Result<()> {
    let b = a.block.block_size;
    check_block(b, 0)?;
    let mode: FeatureMode = a.features.parse()?;
    let x = load_images(&image_paths(&a.input)?)?;
    let y = load_images(&image_paths(&a.reference)?)?;
    let sx = gaussian_stats(&extract_features(&x, mode, b)?)?;
    let sy = gaussian_stats(&extract_features(&y, mode, b)?)?;
    writeln!(out, "{}", fmt_num(frechet_distance(&sx, &sy)?))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("0..3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_grid("0,4, 8").unwrap(), vec![0, 4, 8]);
        assert_eq!(parse_grid("0..2,7").unwrap(), vec![0, 1, 2, 7]);
        assert!(parse_grid("3..1").is_err());
        assert!(parse_grid("x").is_err());
        assert!(parse_grid("").is_err());
    }

    #[test]
    fn time_list_syntax() {
        assert_eq!(parse_times("0, 0.5,1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_times("1.5").is_err());
        assert!(parse_times("a").is_err());
    }
}

//! Forward VP perturbation of scaled token arrays.
//!
//! `x_t = e^{−y′(t)/2} · x_0 + √(1 − e^{−y′(t)}) · ε`, with `ε` drawn per
//! coefficient from the counter-based generator keyed by
//! `(seed, token index, coefficient index)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::schedule::{DiscreteSchedule, NoiseSchedule};
use crate::tokenizer::TokenArray;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbParams {
    pub mean_coef: f64,
    pub std: f64,
}

pub fn perturb_params(t: f64, sched: &NoiseSchedule) -> Result<PerturbParams> {
    let y = sched.y_scaled(t)?;
    Ok(PerturbParams {
        mean_coef: (-0.5 * y).exp(),
        std: (-(-y).exp_m1()).sqrt(),
    })
}

/// Perturbs one token row in place.
fn perturb_row(row: &mut [f64], token: u64, p: PerturbParams, seed: u64) {
    for (j, v) in row.iter_mut().enumerate() {
        *v = p.mean_coef * *v + p.std * rng::gaussian(seed, token, j as u64);
    }
}

/// Kernel coefficients at 1-based step `k` of a discrete schedule:
/// `(√ᾱ′_k, √(1 − ᾱ′_k))`. Step 0 is the clean sample.
pub fn discrete_params(step: usize, sched: &DiscreteSchedule) -> Result<PerturbParams> {
    if step > sched.steps() {
        return Err(Error::param(
            "step",
            format!("must lie in [0, {}], got {step}", sched.steps()),
        ));
    }
    let ab = if step == 0 { 1.0 } else { sched.alpha_bar[step - 1] };
    Ok(PerturbParams {
        mean_coef: ab.sqrt(),
        std: (1.0 - ab).sqrt(),
    })
}

pub fn perturb(x0: &TokenArray, t: f64, sched: &NoiseSchedule, seed: u64) -> Result<TokenArray> {
    perturb_with(x0, perturb_params(t, sched)?, seed)
}

/// Applies given kernel coefficients; `std == 0` returns the input as is.
pub fn perturb_with(x0: &TokenArray, p: PerturbParams, seed: u64) -> Result<TokenArray> {
    if p.std == 0.0 {
        return Ok(x0.clone());
    }
    let width = x0.token_width();
    let mut data = x0.data().to_vec();
    data.par_chunks_mut(width)
        .enumerate()
        .for_each(|(i, row)| perturb_row(row, i as u64, p, seed));
    x0.with_data(data)
}

/// Perturbs a flat `rows × width` coefficient matrix with the same keying
/// as [`perturb`]; row `i` uses token key `i`.
pub fn perturb_rows(data: &mut [f64], width: usize, t: f64, sched: &NoiseSchedule, seed: u64) -> Result<()> {
    let p = perturb_params(t, sched)?;
    if t == 0.0 {
        return Ok(());
    }
    data.par_chunks_mut(width)
        .enumerate()
        .for_each(|(i, row)| perturb_row(row, i as u64, p, seed));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::TokenConfig;

    fn sample_tokens() -> TokenArray {
        let cfg = TokenConfig::new(2, 0, 1.0, 16, 16).unwrap();
        let n = cfg.token_count() * cfg.token_width();
        TokenArray::new(cfg, (0..n).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap()
    }

    #[test]
    fn params_at_endpoints() {
        let s = NoiseSchedule::default();
        assert_eq!(perturb_params(0.0, &s).unwrap(), PerturbParams { mean_coef: 1.0, std: 0.0 });
        let p = perturb_params(1.0, &s).unwrap();
        assert!((p.std - (1.0 - (-10.05f64).exp()).sqrt()).abs() < 1e-15);
        assert!((p.std - 0.999978).abs() < 1e-6);
        assert!(perturb_params(1.1, &s).is_err());
    }

    #[test]
    fn variance_is_preserved_on_grid() {
        for c in [1.0, 4.0, 12.0] {
            let s = NoiseSchedule::with_scale(c).unwrap();
            for i in 0..=1000 {
                let p = perturb_params(i as f64 / 1000.0, &s).unwrap();
                assert!((p.mean_coef.powi(2) + p.std.powi(2) - 1.0).abs() < 1e-12);
                assert!(p.mean_coef > 0.0 && p.mean_coef <= 1.0);
            }
        }
    }

    #[test]
    fn discrete_params_follow_alpha_bar() {
        let d = crate::schedule::discrete_schedule(1000, 1e-4, 0.02, 4.0).unwrap();
        assert_eq!(discrete_params(0, &d).unwrap(), PerturbParams { mean_coef: 1.0, std: 0.0 });
        let p = discrete_params(500, &d).unwrap();
        assert!((p.mean_coef.powi(2) - d.alpha_bar[499]).abs() < 1e-15);
        assert!((p.mean_coef.powi(2) + p.std.powi(2) - 1.0).abs() < 1e-12);
        assert!(discrete_params(1001, &d).is_err());
    }

    #[test]
    fn zero_time_is_identity() {
        let x = sample_tokens();
        assert_eq!(perturb(&x, 0.0, &NoiseSchedule::default(), 3).unwrap(), x);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let x = sample_tokens();
        let s = NoiseSchedule::with_scale(4.0).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| perturb(&x, 0.4, &s, 99).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(4));
        assert_eq!(a, run(7));
        assert_ne!(a, perturb(&x, 0.4, &s, 100).unwrap());
    }

    #[test]
    fn monte_carlo_moments_match_kernel() {
        // 1e5 samples of a single coefficient value x0 = 0.8 at t = 0.3
        let s = NoiseSchedule::default();
        let p = perturb_params(0.3, &s).unwrap();
        let mut data = vec![0.8; 100_000];
        perturb_rows(&mut data, 1, 0.3, &s, 12).unwrap();
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean / (0.8 * p.mean_coef) - 1.0).abs() < 0.01);
        assert!((var.sqrt() / p.std - 1.0).abs() < 0.01);
    }

    #[test]
    fn noise_is_isotropic_across_coefficients() {
        let width = 16;
        let rows = 20_000;
        let mut data = vec![0.0; width * rows];
        let s = NoiseSchedule::default();
        perturb_rows(&mut data, width, 1.0, &s, 5).unwrap();
        let p = perturb_params(1.0, &s).unwrap();
        for j in 0..width {
            let var = data.iter().skip(j).step_by(width).map(|v| v * v).sum::<f64>() / rows as f64;
            assert!((var / p.std.powi(2) - 1.0).abs() < 0.05);
        }
    }
}

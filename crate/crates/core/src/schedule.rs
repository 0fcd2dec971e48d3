//! VP-SDE noise schedule with SNR scaling.
//!
//! Base schedule: `β(t) = a + b·t`, `y(t) = ∫₀ᵗ β = a·t + b·t²/2`,
//! `SNR(t) = e^{−y} / (1 − e^{−y})`. SNR scaling by `c` defines a new
//! schedule `β′(t; c)` whose integral `y′` satisfies
//! `SNR′(t) = c · SNR(t)`, which gives the closed forms
//!
//! ```text
//! y′(t)       = ln(1 + (e^{y} − 1) / c)
//! β′(t; c)    = β(t) / (1 + (c − 1) e^{−y})
//! λ(t)        = ½ ln SNR′(t)
//! t(λ)        = (−a + √(a² + 2b·ln(1 + c·e^{−2λ}))) / b
//! ```
//!
//! Everything is written in `expm1`/`ln_1p` form so that no NaN appears for
//! `t ∈ [0, 1]` and `c ∈ [1, 64]`.

use crate::error::{Error, Result};

pub const DEFAULT_A: f64 = 0.1;
pub const DEFAULT_B: f64 = 19.9;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;
pub const DEFAULT_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            a: DEFAULT_A,
            b: DEFAULT_B,
            c: 1.0,
        }
    }
}

/// SNR scale used for a given image resolution: 4 up to 256², 12 above.
pub fn default_snr_scale(height: usize, width: usize) -> f64 {
    if height.max(width) <= 256 {
        4.0
    } else {
        12.0
    }
}

fn check_unit_interval(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::ScheduleOutOfRange(format!("t = {t} is outside [0, 1]")));
    }
    Ok(())
}

impl NoiseSchedule {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let s = Self { a, b, c };
        s.validate()?;
        Ok(s)
    }

    pub fn with_scale(c: f64) -> Result<Self> {
        Self::new(DEFAULT_A, DEFAULT_B, c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("{v} must be positive and finite")));
            }
        }
        Ok(())
    }

    /// Unscaled base rate `β(t) = a + b·t`.
    pub fn beta(&self, t: f64) -> f64 {
        self.a + self.b * t
    }

    /// Unscaled integral `y(t) = a·t + ½·b·t²`.
    pub fn y_integral(&self, t: f64) -> Result<f64> {
        check_unit_interval(t)?;
        Ok(self.y_unchecked(t))
    }

    fn y_unchecked(&self, t: f64) -> f64 {
        self.a * t + 0.5 * self.b * t * t
    }

    /// SNR-scaled integral `y′(t)`; exactly zero at `t = 0`.
    pub fn y_scaled(&self, t: f64) -> Result<f64> {
        check_unit_interval(t)?;
        Ok(self.y_scaled_unchecked(t))
    }

    fn y_scaled_unchecked(&self, t: f64) -> f64 {
        (self.y_unchecked(t).exp_m1() / self.c).ln_1p()
    }

    /// Scaled SNR `c / (e^{y} − 1)`; infinite at `t = 0`.
    pub fn snr(&self, t: f64) -> Result<f64> {
        check_unit_interval(t)?;
        Ok(self.c / self.y_unchecked(t).exp_m1())
    }

    /// Scaled rate `β′(t; c)`; reduces to `a + b·t` when `c = 1`.
    pub fn beta_prime(&self, t: f64) -> Result<f64> {
        check_unit_interval(t)?;
        let y = self.y_unchecked(t);
        Ok(self.beta(t) / (1.0 + (self.c - 1.0) * (-y).exp()))
    }

    /// Half log-SNR `λ(t) = ½ ln SNR′(t)`.
    pub fn lambda_of_t(&self, t: f64) -> Result<f64> {
        check_unit_interval(t)?;
        if t == 0.0 {
            return Err(Error::ScheduleOutOfRange("lambda diverges at t = 0".into()));
        }
        Ok(0.5 * (self.c.ln() - self.y_unchecked(t).exp_m1().ln()))
    }

    /// Inverse of [`lambda_of_t`](Self::lambda_of_t) on `(0, 1]`.
    pub fn t_of_lambda(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() {
            return Err(Error::ScheduleOutOfRange(format!("lambda = {lambda}")));
        }
        // ln[c(1 + e^{2λ})/e^{2λ} + 1 − c] = ln(1 + c·e^{−2λ})
        let y = (self.c * (-2.0 * lambda).exp()).ln_1p();
        let t = self.t_of_y(y);
        if !(t > 0.0) {
            return Err(Error::ScheduleOutOfRange(format!(
                "lambda = {lambda} lies above the range reachable for t > 0"
            )));
        }
        if t > 1.0 {
            return Err(Error::ScheduleOutOfRange(format!(
                "lambda = {lambda} lies below lambda(1) = {}",
                self.lambda_of_t(1.0)?
            )));
        }
        Ok(t)
    }

    /// Positive root of `a·t + ½·b·t² = y`, in cancellation-free form.
    pub fn t_of_y(&self, y: f64) -> f64 {
        2.0 * y / (self.a + (self.a * self.a + 2.0 * self.b * y).sqrt())
    }
}

/// Per-step discrete schedule (`β′_t`, `ᾱ′_t`), 1-based steps stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSchedule {
    pub beta: Vec<f64>,
    pub alpha_bar: Vec<f64>,
}

impl DiscreteSchedule {
    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn snr(&self) -> Vec<f64> {
        self.alpha_bar.iter().map(|a| a / (1.0 - a)).collect()
    }
}

/// Linear base `β` from `beta_start` to `beta_end` over `steps` values.
pub fn linear_betas(steps: usize, beta_start: f64, beta_end: f64) -> Vec<f64> {
    let denom = (steps - 1) as f64;
    (0..steps)
        .map(|i| beta_start + (beta_end - beta_start) * i as f64 / denom)
        .collect()
}

/// SNR-scaled discrete schedule: `ᾱ′_t = c·ᾱ_t / (1 + (c − 1)·ᾱ_t)` and
/// `β′_t = 1 − ᾱ′_t / ᾱ′_{t−1}` with `ᾱ′_0 = 1`.
pub fn discrete_schedule(steps: usize, beta_start: f64, beta_end: f64, c: f64) -> Result<DiscreteSchedule> {
    if steps < 2 {
        return Err(Error::param("steps", "need at least 2 steps"));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::param("c", "must be positive"));
    }
    let valid = |b: f64| b > 0.0 && b < 1.0;
    if !valid(beta_start) || !valid(beta_end) {
        return Err(Error::param("beta", "base betas must lie in (0, 1)"));
    }
    let base = linear_betas(steps, beta_start, beta_end);
    let mut beta = Vec::with_capacity(steps);
    let mut alpha_bar = Vec::with_capacity(steps);
    let mut base_cum = 1.0;
    let mut prev = 1.0;
    for (i, b) in base.iter().enumerate() {
        base_cum *= 1.0 - b;
        let scaled = c * base_cum / (1.0 + (c - 1.0) * base_cum);
        let step_beta = 1.0 - scaled / prev;
        if !valid(step_beta) {
            return Err(Error::ScheduleOutOfRange(format!(
                "scaled beta at step {} is {step_beta}",
                i + 1
            )));
        }
        beta.push(step_beta);
        alpha_bar.push(scaled);
        prev = scaled;
    }
    Ok(DiscreteSchedule { beta, alpha_bar })
}

/// Unscaled cumulative `ᾱ_t` of a linear base schedule.
pub fn base_alpha_bar(steps: usize, beta_start: f64, beta_end: f64) -> Vec<f64> {
    let mut cum = 1.0;
    linear_betas(steps, beta_start, beta_end)
        .into_iter()
        .map(|b| {
            cum *= 1.0 - b;
            cum
        })
        .collect()
}

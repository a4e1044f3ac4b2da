//! Variance-preserving noise schedules.

use crate::error::{domain, Error, Result};

/// Named schedules; the id is what the bitstream header records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchedulePreset {
    /// `ᾱ_t ∝ cos²(π/2 · (t/T + 0.008)/1.008)`
    Cosine,
    /// `β` linear from `0.1/T` to `20/T`.
    Linear,
}

impl SchedulePreset {
    pub fn id(self) -> u8 {
        match self {
            SchedulePreset::Cosine => 0,
            SchedulePreset::Linear => 1,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(SchedulePreset::Cosine),
            1 => Ok(SchedulePreset::Linear),
            other => Err(Error::Format(format!("unknown schedule preset id {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchedulePreset::Cosine => "cosine",
            SchedulePreset::Linear => "linear",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "cosine" => Ok(SchedulePreset::Cosine),
            "linear" => Ok(SchedulePreset::Linear),
            other => Err(Error::Config(format!("unknown schedule {other:?}"))),
        }
    }
}

const COSINE_OFFSET: f64 = 0.008;
/// Profiles are scaled so that `σ_t² ≤ 0.9999` without flattening the tail.
const MAX_SIGMA_SQ: f64 = 0.9999;

/// `σ_t` for `t = 1..=T`, with `σ_0 = 0` implied.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    preset: SchedulePreset,
    sigma: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn new(preset: SchedulePreset, steps: usize) -> Result<Self> {
        if steps == 0 || steps > u16::MAX as usize {
            return domain(format!("step count {steps} outside 1..=65535"));
        }
        let t_max = steps as f64;
        let sigma_sq: Vec<f64> = match preset {
            SchedulePreset::Cosine => {
                let f = |t: f64| {
                    let c = ((t / t_max + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * std::f64::consts::FRAC_PI_2).cos();
                    c * c
                };
                let f0 = f(0.0);
                (1..=steps).map(|t| 1.0 - f(t as f64) / f0).collect()
            }
            SchedulePreset::Linear => {
                let (lo, hi) = (0.1 / t_max, 20.0 / t_max);
                let mut log_alpha_bar = 0.0;
                (1..=steps)
                    .map(|t| {
                        let frac = if steps == 1 { 0.0 } else { (t - 1) as f64 / (t_max - 1.0) };
                        let beta = (lo + (hi - lo) * frac).min(0.999);
                        log_alpha_bar += (-beta).ln_1p();
                        -log_alpha_bar.exp_m1()
                    })
                    .collect()
            }
        };
        let sigma: Vec<f64> = sigma_sq.iter().map(|s| (MAX_SIGMA_SQ * s).sqrt()).collect();
        if sigma[0] <= 0.0 || sigma.windows(2).any(|w| w[1] <= w[0]) {
            return domain(format!("{} schedule with T = {steps} is not strictly increasing", preset.name()));
        }
        Ok(DiffusionSchedule { preset, sigma })
    }

    pub fn preset(&self) -> SchedulePreset {
        self.preset
    }

    pub fn steps(&self) -> usize {
        self.sigma.len()
    }

    fn check(&self, t: usize) -> Result<()> {
        if t <= self.steps() {
            Ok(())
        } else {
            domain(format!("step {t} outside 0..={}", self.steps()))
        }
    }

    /// Noise level at step `t`; `t = 0` is the clean signal.
    pub fn sigma(&self, t: usize) -> Result<f64> {
        self.check(t)?;
        Ok(if t == 0 { 0.0 } else { self.sigma[t - 1] })
    }

    /// Signal coefficient `√(1 − σ_t²)`.
    pub fn alpha(&self, t: usize) -> Result<f64> {
        let s = self.sigma(t)?;
        Ok(((1.0 - s) * (1.0 + s)).sqrt())
    }

    /// Variance-exploding noise level `η_t = σ_t/√(1 − σ_t²)`.
    pub fn eta(&self, t: usize) -> Result<f64> {
        Ok(self.sigma(t)? / self.alpha(t)?)
    }

    /// `β` integrated over step `t`: `−ln((1 − σ_t²)/(1 − σ_{t−1}²))`.
    pub fn beta(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return domain("beta is defined for t ≥ 1");
        }
        let (a0, a1) = (self.alpha(t - 1)?, self.alpha(t)?);
        Ok(-2.0 * (a1 / a0).ln())
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigma
    }

    /// Step whose `σ_t` is closest to `sigma`.
    pub fn nearest_step(&self, sigma: f64) -> usize {
        let mut best = (f64::INFINITY, 1);
        for (i, s) in self.sigma.iter().enumerate() {
            let d = (s - sigma).abs();
            if d < best.0 {
                best = (d, i + 1);
            }
        }
        best.1
    }
}

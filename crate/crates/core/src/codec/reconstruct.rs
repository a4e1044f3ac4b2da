//! Reconstruction of `x` from a noisy `z_t`: exact posterior sampling or the probability-flow ODE.

use super::schedule::DiffusionSchedule;
use super::source::{AnalyticSource, LevelScore, ScoreModel};
use crate::error::{check_dim, domain, Error, Result};
use crate::rng::StreamRng;

pub const DEFAULT_ODE_STEPS: usize = 256;

fn ve_coordinates(z: &[f64], sigma: f64) -> Result<(Vec<f64>, f64)> {
    if !(0.0..1.0).contains(&sigma) {
        return domain(format!("noise level {sigma} outside [0, 1)"));
    }
    let a = ((1.0 - sigma) * (1.0 + sigma)).sqrt();
    Ok((z.iter().map(|v| v / a).collect(), sigma / a))
}

/// Draw from `p(x | z)` where `z = √(1−σ²)x + σu`.
pub fn reconstruct_ancestral_at(z: &[f64], source: &AnalyticSource, sigma: f64, rng: &mut StreamRng) -> Result<Vec<f64>> {
    check_dim(source.dim(), z.len())?;
    let (y, eta) = ve_coordinates(z, sigma)?;
    let mut out = vec![0.0; z.len()];
    source.sample_posterior_ve(&y, eta, rng, &mut out);
    Ok(out)
}

pub fn reconstruct_ancestral(
    z: &[f64],
    source: &AnalyticSource,
    schedule: &DiffusionSchedule,
    t: usize,
    rng: &mut StreamRng,
) -> Result<Vec<f64>> {
    reconstruct_ancestral_at(z, source, schedule.sigma(t)?, rng)
}

/// Fixed-step RK4 for `dy/dη = −η ∇ ln p̃_η(y)` from `η(σ)` down to 0, with the
/// score prepared once per stage level so many points can share it.
pub struct FlowIntegrator<'a> {
    sigma: f64,
    alpha: f64,
    h: f64,
    etas: Vec<f64>,
    levels: Vec<LevelScore<'a>>,
    dim: usize,
}

impl<'a> FlowIntegrator<'a> {
    pub fn new<M: ScoreModel + ?Sized>(model: &'a M, sigma: f64, ode_steps: usize) -> Result<Self> {
        if ode_steps == 0 {
            return domain("ode_steps must be at least 1");
        }
        let (_, eta0) = ve_coordinates(&[], sigma)?;
        let h = -eta0 / ode_steps as f64;
        let etas: Vec<f64> = (0..=2 * ode_steps)
            .map(|i| if i == 2 * ode_steps { 0.0 } else { eta0 + h * (i as f64 * 0.5) })
            .collect();
        let levels = etas.iter().map(|&e| model.level_score(e)).collect();
        Ok(FlowIntegrator {
            sigma,
            alpha: ((1.0 - sigma) * (1.0 + sigma)).sqrt(),
            h,
            etas,
            levels,
            dim: model.dim(),
        })
    }

    pub fn solve(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, z.len())?;
        let dim = self.dim;
        let h = self.h;
        let mut y: Vec<f64> = z.iter().map(|v| v / self.alpha).collect();
        let mut k = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
        let mut probe = vec![0.0; dim];
        let drift = |level: usize, y: &[f64], out: &mut [f64]| -> Result<()> {
            (self.levels[level])(y, out);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteScore { z: z.to_vec(), t: self.sigma });
            }
            let eta = self.etas[level];
            out.iter_mut().for_each(|v| *v *= -eta);
            Ok(())
        };
        for i in 0..self.etas.len() / 2 {
            drift(2 * i, &y, &mut k[0])?;
            for j in 0..dim {
                probe[j] = y[j] + 0.5 * h * k[0][j];
            }
            drift(2 * i + 1, &probe, &mut k[1])?;
            for j in 0..dim {
                probe[j] = y[j] + 0.5 * h * k[1][j];
            }
            drift(2 * i + 1, &probe, &mut k[2])?;
            for j in 0..dim {
                probe[j] = y[j] + h * k[2][j];
            }
            drift(2 * i + 2, &probe, &mut k[3])?;
            for j in 0..dim {
                y[j] += h / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
            }
        }
        Ok(y)
    }
}

/// One-off flow reconstruction; see [`FlowIntegrator`] for repeated use.
pub fn reconstruct_flow_at<M: ScoreModel + ?Sized>(z: &[f64], model: &M, sigma: f64, ode_steps: usize) -> Result<Vec<f64>> {
    check_dim(model.dim(), z.len())?;
    FlowIntegrator::new(model, sigma, ode_steps)?.solve(z)
}

pub fn reconstruct_flow<M: ScoreModel + ?Sized>(
    z: &[f64],
    model: &M,
    schedule: &DiffusionSchedule,
    t: usize,
    ode_steps: usize,
) -> Result<Vec<f64>> {
    reconstruct_flow_at(z, model, schedule.sigma(t)?, ode_steps)
}

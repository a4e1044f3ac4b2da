//! Reverse channel coding with the Poisson functional representation.
//!
//! The encoder walks a shared candidate stream drawn from the prior `p`,
//! scores candidate `n` by `t_n · p(z_n)/q(z_n)` with exponential arrival
//! times `t_n`, and stops once no later candidate can beat the best score.
//! Only the winning index is transmitted; the decoder regenerates it.

pub mod arith;
pub mod zipf;

pub use arith::{BitReader, BitWriter};
pub use zipf::{
    deserialize_index, read_index, serialize_index, write_index, zeta, zipf_codelength,
    zipf_exponent, MAX_INDEX,
};

use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{check_dim, domain, Error, Result, SearchState};
use crate::rng::{sequential, CandidateStream, StreamKey, StreamRng, StreamTag};
use crate::special::{normal_log_pdf, nats_to_bits};

/// Hard cap on candidates examined in one transmission.
pub const CANDIDATE_BUDGET: u64 = 1 << 30;

/// A density that can be evaluated and sampled from a candidate generator.
pub trait Density: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, z: &[f64]) -> f64;
    fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]);
}

/// Axis-aligned Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        check_dim(mean.len(), var.len())?;
        if mean.is_empty() {
            return domain("Gaussian must have at least one coordinate");
        }
        if var.iter().any(|v| !(v.is_finite() && *v > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return domain("Gaussian needs finite means and positive finite variances");
        }
        Ok(DiagGaussian { mean, var })
    }

    pub fn standard(dim: usize) -> Self {
        DiagGaussian {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }

    /// `D_KL(self ∥ other)` in nats.
    pub fn kl_to(&self, other: &DiagGaussian) -> f64 {
        self.mean
            .iter()
            .zip(&self.var)
            .zip(other.mean.iter().zip(&other.var))
            .map(|((mq, vq), (mp, vp))| 0.5 * (vq / vp - 1.0 - (vq / vp).ln() + (mq - mp).powi(2) / vp))
            .sum()
    }
}

impl Density for DiagGaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(x, (m, v))| normal_log_pdf(*x, *m, *v))
            .sum()
    }

    fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        for ((o, m), v) in out.iter_mut().zip(&self.mean).zip(&self.var) {
            let u: f64 = StandardNormal.sample(rng);
            *o = m + v.sqrt() * u;
        }
    }
}

/// Natural log of the analytic `inf_z p(z)/q(z)` for axis-aligned Gaussians.
pub fn gaussian_log_wmin(prior: &DiagGaussian, target: &DiagGaussian) -> Result<f64> {
    check_dim(prior.dim(), target.dim())?;
    let mut total = 0.0;
    for j in 0..prior.dim() {
        let (mp, vp) = (prior.mean[j], prior.var[j]);
        let (mq, vq) = (target.mean[j], target.var[j]);
        if mp == mq && vp == vq {
            continue;
        }
        if vq >= vp {
            return Err(Error::Unsupported(format!(
                "coordinate {j}: target variance {vq} is not below prior variance {vp}"
            )));
        }
        // The log-ratio is a convex quadratic minimized at (μq vp − μp vq)/(vp − vq).
        total += 0.5 * (vq / vp).ln() - (mq - mp).powi(2) / (2.0 * (vp - vq));
    }
    Ok(total)
}

/// Location of the per-coordinate infimum of `p/q`.
pub fn gaussian_wmin_argmin(prior: &DiagGaussian, target: &DiagGaussian) -> Vec<f64> {
    (0..prior.dim())
        .map(|j| {
            let (mp, vp) = (prior.mean[j], prior.var[j]);
            let (mq, vq) = (target.mean[j], target.var[j]);
            (mq * vp - mp * vq) / (vp - vq)
        })
        .collect()
}

/// `inf_z p(z)/q(z)` for axis-aligned Gaussians.
pub fn gaussian_wmin(prior: &DiagGaussian, target: &DiagGaussian) -> Result<f64> {
    Ok(gaussian_log_wmin(prior, target)?.exp())
}

/// Result of checking a claimed `w_min` on random points drawn from the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WminProbe {
    pub min_log_ratio: f64,
    pub violated: bool,
}

pub fn probe_log_wmin<P: Density + ?Sized, Q: Density + ?Sized>(
    prior: &P,
    target: &Q,
    log_w_min: f64,
    probes: usize,
    rng: &mut StreamRng,
) -> WminProbe {
    let mut z = vec![0.0; target.dim()];
    let mut min_log_ratio = f64::INFINITY;
    for _ in 0..probes {
        target.sample_into(rng, &mut z);
        min_log_ratio = min_log_ratio.min(prior.log_density(&z) - target.log_density(&z));
    }
    WminProbe {
        min_log_ratio,
        violated: min_log_ratio < log_w_min,
    }
}

/// One reverse-channel-coding transmission.
pub struct RccChannel<'a> {
    pub prior: &'a dyn Density,
    pub target: &'a dyn Density,
    /// `ln w_min`; kept in log form so high-dimensional bounds do not underflow.
    pub log_w_min: f64,
    pub stream_key: StreamKey,
    pub step_id: u64,
    /// Information estimate in nats used to pick the Zipf exponent; must be
    /// computable by the decoder when the index is entropy coded.
    pub info_nats: f64,
    pub budget: u64,
}

impl<'a> RccChannel<'a> {
    pub fn new(
        prior: &'a dyn Density,
        target: &'a dyn Density,
        w_min: f64,
        stream_key: StreamKey,
        step_id: u64,
        info_nats: f64,
    ) -> Result<Self> {
        if !(w_min > 0.0) {
            return domain(format!("w_min {w_min} must be positive"));
        }
        Self::with_log_wmin(prior, target, w_min.ln(), stream_key, step_id, info_nats)
    }

    pub fn with_log_wmin(
        prior: &'a dyn Density,
        target: &'a dyn Density,
        log_w_min: f64,
        stream_key: StreamKey,
        step_id: u64,
        info_nats: f64,
    ) -> Result<Self> {
        check_dim(prior.dim(), target.dim())?;
        if log_w_min.is_nan() || log_w_min == f64::NEG_INFINITY {
            return domain("w_min must be positive");
        }
        if log_w_min > 1e-12 {
            return domain(format!("w_min {} exceeds 1", log_w_min.exp()));
        }
        if !(info_nats >= 0.0) {
            return domain(format!("information estimate {info_nats} must be non-negative"));
        }
        Ok(RccChannel {
            prior,
            target,
            log_w_min: log_w_min.min(0.0),
            stream_key,
            step_id,
            info_nats,
            budget: CANDIDATE_BUDGET,
        })
    }

    pub fn w_min(&self) -> f64 {
        self.log_w_min.exp()
    }

    pub fn zipf_exponent(&self) -> Result<f64> {
        zipf_exponent(nats_to_bits(self.info_nats))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionRecord {
    pub selected_index: u64,
    pub candidates_examined: u64,
    pub ideal_codelength_bits: f64,
    pub kl_nats_estimate: f64,
    /// The selected candidate, as the decoder will regenerate it.
    pub sample: Vec<f64>,
}

/// Selects a candidate index whose sample is exactly distributed as the target.
pub fn rcc_encode(channel: &RccChannel<'_>) -> Result<TransmissionRecord> {
    let candidates = CandidateStream::new(&channel.stream_key, channel.step_id);
    let mut arrivals = sequential(&channel.stream_key, channel.step_id, StreamTag::Arrivals);
    let dim = channel.prior.dim();
    let mut z = vec![0.0; dim];
    let mut best = vec![0.0; dim];
    let mut t = 0.0f64;
    let mut best_log_score = f64::INFINITY;
    let mut best_index = 0u64;
    let mut n = 0u64;
    loop {
        n += 1;
        let e: f64 = Exp1.sample(&mut arrivals);
        t += e;
        channel.prior.sample_into(&mut candidates.candidate(n), &mut z);
        let log_score = t.ln() + (channel.prior.log_density(&z) - channel.target.log_density(&z));
        if log_score < best_log_score {
            best_log_score = log_score;
            best_index = n;
            best.copy_from_slice(&z);
        }
        // Every later score is at least t · w_min.
        if best_log_score <= t.ln() + channel.log_w_min {
            break;
        }
        if n >= channel.budget {
            return Err(Error::BudgetExceeded {
                budget: channel.budget,
                state: SearchState {
                    candidates_examined: n,
                    best_index,
                    best_score: best_log_score.exp(),
                    arrival_time: t,
                },
            });
        }
    }
    Ok(TransmissionRecord {
        selected_index: best_index,
        candidates_examined: n,
        ideal_codelength_bits: zipf_codelength(best_index, channel.zipf_exponent()?)?,
        kl_nats_estimate: channel.info_nats,
        sample: best,
    })
}

/// Regenerates candidate `selected_index` of the `(key, step_id)` stream.
pub fn rcc_decode<P: Density + ?Sized>(
    selected_index: u64,
    prior: &P,
    stream_key: &StreamKey,
    step_id: u64,
) -> Result<Vec<f64>> {
    if selected_index == 0 {
        return Err(Error::Range(0));
    }
    let mut z = vec![0.0; prior.dim()];
    prior.sample_into(
        &mut CandidateStream::new(stream_key, step_id).candidate(selected_index),
        &mut z,
    );
    Ok(z)
}

/// Achievable cost `C + log₂(C + 1) + 5` of one transmission carrying `C` bits.
pub fn bound_check(kl_bits: f64) -> f64 {
    kl_bits + (kl_bits + 1.0).log2() + 5.0
}

/// Sequential noise generator tied to the same key schedule as the candidate streams.
pub fn noise_stream(key: &StreamKey, step_id: u64) -> StreamRng {
    sequential(key, step_id, StreamTag::Noise)
}

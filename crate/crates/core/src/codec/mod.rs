//! Progressive codec: transmit `z_T`, then refine `z_s` given `z_{s+1}` down to
//! `t_stop`, one reverse-channel-coded sample per step.
//!
//! All densities are axis-aligned Gaussians in the source basis `w = Qᵀz`.
//! The refinement target is the forward-process posterior
//! `q(z_s | z_{s+1}, x) = N(c₁x + c₂z_{s+1}, β̃)` and the shared prior replaces
//! `x` by its posterior given `z_{s+1}`, which adds `c₁² Var[x | z_{s+1}]` to
//! the variance.

pub mod bitstream;
pub mod reconstruct;
pub mod schedule;
pub mod source;

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};

pub use bitstream::Bitstream;
pub use reconstruct::{
    FlowIntegrator,
    reconstruct_ancestral, reconstruct_ancestral_at, reconstruct_flow, reconstruct_flow_at, DEFAULT_ODE_STEPS,
};
pub use schedule::{DiffusionSchedule, SchedulePreset};
pub use source::{AnalyticSource, LevelScore, MixturePosterior, ScoreModel, SmoothedLaplace, SourceKind};

use crate::error::{check_dim, domain, Error, Result};
use crate::gaussian_rd::format_sig;
use crate::rcc::{
    bound_check, rcc_encode, read_index, write_index, zipf_exponent, BitReader, BitWriter, DiagGaussian,
    RccChannel,
};
use crate::rng::{StreamKey, StreamRng};
use crate::special::nats_to_bits;

pub const DEFAULT_CHUNK_BITS: u32 = 40;
pub const DEFAULT_STEPS: usize = 100;

/// `z_t = √(1−σ_t²)x + σ_t u` with `u` drawn from `noise`.
pub fn forward_corrupt(x: &[f64], schedule: &DiffusionSchedule, t: usize, noise: &mut StreamRng) -> Result<Vec<f64>> {
    if t == 0 || t > schedule.steps() {
        return domain(format!("step {t} outside 1..={}", schedule.steps()));
    }
    let (a, s) = (schedule.alpha(t)?, schedule.sigma(t)?);
    Ok(x.iter()
        .map(|xi| {
            let u: f64 = StandardNormal.sample(noise);
            a * xi + s * u
        })
        .collect())
}

/// Cost of sending `C` bits in chunks of `B`: `C/B · (B + log₂(B+1) + 5)`.
pub fn chunk_overhead(total_kl_bits: f64, chunk_bits: f64) -> Result<f64> {
    if !(total_kl_bits >= 0.0 && total_kl_bits.is_finite()) {
        return domain(format!("total information {total_kl_bits} must be finite and non-negative"));
    }
    if !(chunk_bits > 0.0 && chunk_bits.is_finite()) {
        return domain(format!("chunk size {chunk_bits} must be positive"));
    }
    Ok(total_kl_bits / chunk_bits * (chunk_bits + (chunk_bits + 1.0).log2() + 5.0))
}

/// One transmitted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// `T` for the initial `z_T`, otherwise the step `s` being refined.
    pub step: usize,
    /// Realized `D_KL(q ∥ p)` in bits.
    pub kl_bits: f64,
    /// Decoder-side information estimate that sets the Zipf exponent.
    pub info_bits: f64,
    pub index: u64,
    pub code_bits: usize,
    pub candidates: u64,
    pub chunk: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub first_step: usize,
    pub last_step: usize,
    pub kl_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateLedger {
    pub chunk_bits: u32,
    pub prior_term: StepRecord,
    /// Refinements for `s = T−1` down to `t_stop`.
    pub steps: Vec<StepRecord>,
    pub chunks: Vec<Chunk>,
    /// `Σ bound_check` over chunks.
    pub bound_bits: f64,
    /// `bound_check` of the total, as if all steps were one transmission.
    pub joint_bound_bits: f64,
    pub chunk_model_bits: f64,
    pub payload_bits: usize,
}

impl RateLedger {
    pub fn prior_term_bits(&self) -> f64 {
        self.prior_term.kl_bits
    }

    pub fn per_step_kl_bits(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.kl_bits).collect()
    }

    pub fn total_kl_bits(&self) -> f64 {
        self.prior_term.kl_bits + self.steps.iter().map(|s| s.kl_bits).sum::<f64>()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "record,step,kl_bits,info_bits,index,code_bits,candidates,chunk")?;
        for (kind, r) in std::iter::once(("prior", &self.prior_term)).chain(self.steps.iter().map(|r| ("refine", r))) {
            writeln!(
                out,
                "{kind},{},{},{},{},{},{},{}",
                r.step,
                format_sig(r.kl_bits),
                format_sig(r.info_bits),
                r.index,
                r.code_bits,
                r.candidates,
                r.chunk
            )?;
        }
        let summary = [
            ("total_kl", self.total_kl_bits()),
            ("bound", self.bound_bits),
            ("joint_bound", self.joint_bound_bits),
            ("chunk_model", self.chunk_model_bits),
            ("payload", self.payload_bits as f64),
        ];
        for (name, v) in summary {
            writeln!(out, "{name},,{},,,,,", format_sig(v))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub bitstream: Bitstream,
    pub ledger: RateLedger,
    /// `z_{t_stop}` in data coordinates, as the decoder will reproduce it.
    pub z: Vec<f64>,
}

/// Shared prior for one step plus the target variance the decoder can infer.
struct StepModel {
    prior: DiagGaussian,
    target_var: Vec<f64>,
    c1: f64,
    c2: f64,
}

impl StepModel {
    fn initial(source: &AnalyticSource, schedule: &DiffusionSchedule) -> Result<Self> {
        let t = schedule.steps();
        let (a, s) = (schedule.alpha(t)?, schedule.sigma(t)?);
        let mean = source.basis_mean().iter().map(|m| a * m).collect();
        let var = source.basis_var().iter().map(|v| a * a * v + s * s).collect();
        Ok(StepModel {
            prior: DiagGaussian::new(mean, var)?,
            target_var: vec![s * s; source.dim()],
            c1: a,
            c2: 0.0,
        })
    }

    /// Prior for `z_s` given `w_next = Qᵀz_{s+1}`.
    fn refine(source: &AnalyticSource, schedule: &DiffusionSchedule, s: usize, w_next: &[f64]) -> Result<Self> {
        let (a_s, sig_s) = (schedule.alpha(s)?, schedule.sigma(s)?);
        let (a_n, sig_n) = (schedule.alpha(s + 1)?, schedule.sigma(s + 1)?);
        let (v_s, v_n) = (sig_s * sig_s, sig_n * sig_n);
        let r = a_n / a_s;
        let omega2 = (v_n - v_s) / ((1.0 - sig_s) * (1.0 + sig_s));
        let beta = 1.0 / (1.0 / v_s + r * r / omega2);
        let c1 = beta * a_s / v_s;
        let c2 = beta * r / omega2;
        let y: Vec<f64> = w_next.iter().map(|w| w / a_n).collect();
        let post = source.posterior_basis(&y, sig_n / a_n);
        let (pm, pv) = (post.mean(), post.var());
        let mean = (0..w_next.len()).map(|j| c1 * pm[j] + c2 * w_next[j]).collect();
        let var = pv.iter().map(|v| beta + c1 * c1 * v).collect();
        Ok(StepModel {
            prior: DiagGaussian::new(mean, var)?,
            target_var: vec![beta; w_next.len()],
            c1,
            c2,
        })
    }

    fn target(&self, x_basis: &[f64], w_next: Option<&[f64]>) -> Result<DiagGaussian> {
        let mean = x_basis
            .iter()
            .enumerate()
            .map(|(j, x)| self.c1 * x + w_next.map_or(0.0, |w| self.c2 * w[j]))
            .collect();
        DiagGaussian::new(mean, self.target_var.clone())
    }

    /// Expected KL over the target mean, which only needs prior-side quantities.
    fn info_nats(&self) -> f64 {
        self.prior
            .var
            .iter()
            .zip(&self.target_var)
            .map(|(vp, vq)| 0.5 * (vp / vq).ln())
            .sum::<f64>()
            .max(0.0)
    }

    fn zipf_exponent(&self) -> Result<f64> {
        zipf_exponent(nats_to_bits(self.info_nats()))
    }
}

fn check_header(bitstream: &Bitstream, source: &AnalyticSource, schedule: &DiffusionSchedule) -> Result<()> {
    if bitstream.preset != schedule.preset() || bitstream.steps as usize != schedule.steps() {
        return Err(Error::Format(format!(
            "bitstream uses the {} schedule with T = {}, decoder has {} with T = {}",
            bitstream.preset.name(),
            bitstream.steps,
            schedule.preset().name(),
            schedule.steps()
        )));
    }
    if bitstream.source_hash != source.hash() {
        return Err(Error::Format("bitstream was encoded for a different source".into()));
    }
    Ok(())
}

/// Transmits `z_T, z_{T−1}, …, z_{t_stop}` for the datum `x`.
pub fn encode(
    x: &[f64],
    source: &AnalyticSource,
    schedule: &DiffusionSchedule,
    t_stop: usize,
    chunk_bits: u32,
    stream_key: StreamKey,
) -> Result<Encoded> {
    check_dim(source.dim(), x.len())?;
    let steps = schedule.steps();
    if t_stop == 0 || t_stop > steps {
        return domain(format!("t_stop {t_stop} outside 1..={steps}"));
    }
    if chunk_bits == 0 {
        return Err(Error::Config("chunk budget must be positive".into()));
    }
    let budget = chunk_bits as f64;
    let x_basis = source.to_basis(x);
    let mut payload = BitWriter::new();
    let mut chunks: Vec<Chunk> = Vec::new();
    let mut records = Vec::with_capacity(steps - t_stop + 1);
    let mut w: Vec<f64> = Vec::new();
    for step in (t_stop..=steps).rev() {
        let (model, target) = if step == steps {
            let m = StepModel::initial(source, schedule)?;
            let q = m.target(&x_basis, None)?;
            (m, q)
        } else {
            let m = StepModel::refine(source, schedule, step, &w)?;
            let q = m.target(&x_basis, Some(&w))?;
            (m, q)
        };
        let kl_bits = nats_to_bits(target.kl_to(&model.prior));
        if kl_bits > budget {
            return Err(Error::Config(format!(
                "step {step} carries {kl_bits:.3} bits, more than the {chunk_bits}-bit chunk budget"
            )));
        }
        match chunks.last_mut() {
            Some(c) if c.kl_bits + kl_bits <= budget => {
                c.kl_bits += kl_bits;
                c.last_step = step;
            }
            _ => chunks.push(Chunk {
                first_step: step,
                last_step: step,
                kl_bits,
            }),
        }
        let log_w_min = crate::rcc::gaussian_log_wmin(&model.prior, &target)?;
        let channel = RccChannel::with_log_wmin(&model.prior, &target, log_w_min, stream_key, step as u64, model.info_nats())?;
        let rec = rcc_encode(&channel)?;
        let before = payload.len();
        write_index(&mut payload, rec.selected_index, model.zipf_exponent()?)?;
        records.push(StepRecord {
            step,
            kl_bits,
            info_bits: nats_to_bits(model.info_nats()),
            index: rec.selected_index,
            code_bits: payload.len() - before,
            candidates: rec.candidates_examined,
            chunk: chunks.len() - 1,
        });
        w = rec.sample;
    }
    let prior_term = records.remove(0);
    let total = prior_term.kl_bits + records.iter().map(|r| r.kl_bits).sum::<f64>();
    let ledger = RateLedger {
        chunk_bits,
        bound_bits: chunks.iter().map(|c| bound_check(c.kl_bits)).sum(),
        joint_bound_bits: bound_check(total),
        chunk_model_bits: chunk_overhead(total, budget)?,
        payload_bits: payload.len(),
        prior_term,
        steps: records,
        chunks,
    };
    let bitstream = Bitstream {
        preset: schedule.preset(),
        steps: steps as u16,
        t_stop: t_stop as u16,
        chunk_bits,
        stream_key,
        source_hash: source.hash(),
        payload: payload.into_bytes(),
    };
    Ok(Encoded {
        bitstream,
        ledger,
        z: source.from_basis(&w),
    })
}

/// Regenerates `z_{t_stop}` from a bitstream.
pub fn decode_to_z(bitstream: &Bitstream, source: &AnalyticSource, schedule: &DiffusionSchedule) -> Result<Vec<f64>> {
    check_header(bitstream, source, schedule)?;
    let steps = schedule.steps();
    let t_stop = bitstream.t_stop as usize;
    let mut reader = BitReader::new(&bitstream.payload, bitstream.payload.len() * 8);
    let mut w: Vec<f64> = Vec::new();
    for step in (t_stop..=steps).rev() {
        let model = if step == steps {
            StepModel::initial(source, schedule)?
        } else {
            StepModel::refine(source, schedule, step, &w)?
        };
        let index = read_index(&mut reader, model.zipf_exponent()?)?;
        w = crate::rcc::rcc_decode(index, &model.prior, &bitstream.stream_key, step as u64)?;
    }
    let rest = reader.len() - reader.position();
    if rest >= 8 || (reader.position()..reader.len()).any(|i| reader.bit(i)) {
        return Err(Error::Framing(format!("{rest} unused payload bits after the last step")));
    }
    Ok(source.from_basis(&w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_rd::Spectrum;
    use crate::rng::labelled;
    use crate::stats::MeanEstimate;

    #[test]
    fn chunk_overhead_values() {
        let v = chunk_overhead(100.0, 10.0).unwrap();
        assert!((v - 10.0 * (15.0 + 11f64.log2())).abs() < 1e-12);
        assert!((v - 184.594_316_186).abs() < 1e-8);
        assert!((chunk_overhead(37.0, 37.0).unwrap() - bound_check(37.0)).abs() < 1e-12);
        assert!(chunk_overhead(100.0, 100.0).unwrap() < v);
        assert!(chunk_overhead(1.0, 0.0).is_err());
        assert!(chunk_overhead(-1.0, 3.0).is_err());
    }

    #[test]
    fn forward_corrupt_limits_and_range() {
        let sched = DiffusionSchedule::new(SchedulePreset::Cosine, 10).unwrap();
        let mut rng = labelled(1, "fc");
        assert!(forward_corrupt(&[1.0], &sched, 0, &mut rng).is_err());
        assert!(forward_corrupt(&[1.0], &sched, 11, &mut rng).is_err());
        let n = 100_000;
        let t = 5;
        let (a, s) = (sched.alpha(t).unwrap(), sched.sigma(t).unwrap());
        let z: Vec<f64> = (0..n).map(|_| forward_corrupt(&[2.0], &sched, t, &mut rng).unwrap()[0]).collect();
        let m = MeanEstimate::from_samples(&z);
        assert!((m.mean - 2.0 * a).abs() < 4.0 * m.std_error);
        let var = z.iter().map(|v| (v - m.mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - s * s).abs() < 0.02 * s * s);
    }

    #[test]
    fn round_trip_is_bitwise_and_stop_at_t_has_only_prior_term() {
        let src = AnalyticSource::symmetric_pair(2.0, 0.25).unwrap();
        let sched = DiffusionSchedule::new(SchedulePreset::Cosine, 100).unwrap();
        for seed in 0..5 {
            let key = StreamKey::from_seed(seed);
            let x = [if seed % 2 == 0 { 1.7 } else { -2.3 }];
            let enc = encode(&x, &src, &sched, 30, DEFAULT_CHUNK_BITS, key).unwrap();
            assert_eq!(enc.ledger.steps.len(), 70);
            let bytes = enc.bitstream.to_bytes().unwrap();
            let parsed = Bitstream::from_bytes(&bytes).unwrap();
            let z = decode_to_z(&parsed, &src, &sched).unwrap();
            assert_eq!(z[0].to_bits(), enc.z[0].to_bits());
            assert!(enc.ledger.bound_bits >= enc.ledger.total_kl_bits());
            assert!(enc.ledger.per_step_kl_bits().iter().all(|k| *k >= 0.0));
        }
        let enc = encode(&[0.4], &src, &sched, 100, 40, StreamKey::from_seed(1)).unwrap();
        assert!(enc.ledger.steps.is_empty());
        assert!(enc.ledger.prior_term_bits() > 0.0);
    }

    #[test]
    fn decoder_rejects_mismatch_and_truncation() {
        let src = AnalyticSource::symmetric_pair(2.0, 0.25).unwrap();
        let sched = DiffusionSchedule::new(SchedulePreset::Cosine, 50).unwrap();
        let enc = encode(&[1.0], &src, &sched, 10, 40, StreamKey::from_seed(3)).unwrap();
        let other = AnalyticSource::symmetric_pair(2.0, 0.3).unwrap();
        assert!(matches!(decode_to_z(&enc.bitstream, &other, &sched), Err(Error::Format(_))));
        let lin = DiffusionSchedule::new(SchedulePreset::Linear, 50).unwrap();
        assert!(matches!(decode_to_z(&enc.bitstream, &src, &lin), Err(Error::Format(_))));
        let mut cut = enc.bitstream.clone();
        cut.payload.truncate(cut.payload.len() - 1);
        assert!(matches!(decode_to_z(&cut, &src, &sched), Err(Error::Framing(_))));
        let mut long = enc.bitstream.clone();
        long.payload.push(0);
        assert!(matches!(decode_to_z(&long, &src, &sched), Err(Error::Framing(_))));
    }

    #[test]
    fn oversized_step_is_a_configuration_error() {
        let src = AnalyticSource::gaussian(&Spectrum::new(vec![100.0; 8]).unwrap(), None).unwrap();
        let sched = DiffusionSchedule::new(SchedulePreset::Linear, 1).unwrap();
        match encode(&[10.0; 8], &src, &sched, 1, 2, StreamKey::from_seed(0)) {
            Err(Error::Config(msg)) => assert!(msg.contains("step 1")),
            other => panic!("expected configuration error, got {other:?}"),
        }
    }

    #[test]
    fn single_step_kl_matches_mutual_information() {
        // T = 1: E KL(q(z|x) ∥ p_T) = I[X; Z] = ½ Σ log₂(1 + a²λ/σ²).
        let sp = Spectrum::new(vec![2.0, 0.5]).unwrap();
        let src = AnalyticSource::gaussian(&sp, None).unwrap();
        let sched = DiffusionSchedule::new(SchedulePreset::Linear, 1).unwrap();
        let (a, s) = (sched.alpha(1).unwrap(), sched.sigma(1).unwrap());
        let exact: f64 = sp.lambdas().iter().map(|l| 0.5 * (1.0 + a * a * l / (s * s)).log2()).sum();
        let mut rng = labelled(2, "t1");
        let kls: Vec<f64> = (0..20_000)
            .map(|_| {
                let mut x = [0.0; 2];
                src.sample(&mut rng, &mut x);
                let m = StepModel::initial(&src, &sched).unwrap();
                nats_to_bits(m.target(&x, None).unwrap().kl_to(&m.prior))
            })
            .collect();
        let est = MeanEstimate::from_samples(&kls);
        assert!((est.mean - exact).abs() < 3.0 * est.std_error, "{} vs {exact}", est.mean);
        let m = StepModel::initial(&src, &sched).unwrap();
        assert!((nats_to_bits(m.info_nats()) - exact).abs() < 1e-12);
    }
}

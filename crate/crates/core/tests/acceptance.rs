//! Acceptance criteria, one pass/fail line each.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use diffc::codec::{chunk_overhead, encode, AnalyticSource, DiffusionSchedule, SchedulePreset, ScoreModel, SmoothedLaplace};
use diffc::gaussian_rd::{
    diffc_a_point, diffc_a_star_point, diffc_f_point, gaussian_rdf, log_space, per_component_snr, point_at_rate,
    GaussianSchedule, Reconstruction, Spectrum, Variant,
};
use diffc::harness::suite::LAPLACE_SMOOTHING;
use diffc::harness::{
    check_flow_ancestral_ratio, check_flow_optimality, check_g_anchor, check_realism, check_smoothness_monotone,
    Rival, TheoremReport,
};
use diffc::rcc::{gaussian_log_wmin, rcc_encode, bound_check, DiagGaussian, RccChannel};
use diffc::rng::{labelled, StreamKey};
use diffc::special::{nats_to_bits, normal_cdf};
use diffc::stats::{ks_one_sample, MeanEstimate};

const SEED: u64 = 20240601;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn reports(reports: &[TheoremReport]) -> Verdict {
    let lines: Vec<_> = reports.iter().flat_map(|r| &r.assertions).collect();
    let failed: Vec<String> = lines.iter().filter(|a| !a.pass).map(|a| a.csv_line()).collect();
    if failed.is_empty() {
        verdict(true, format!("{} assertions", lines.len()))
    } else {
        verdict(false, format!("failed: {}", failed.join(" | ")))
    }
}

fn power_spectrum() -> Spectrum {
    Spectrum::power_law(256, 2.0).unwrap()
}

fn standard_normal_exactness() -> Verdict {
    let unit = Spectrum::white(1).unwrap();
    let mut worst: f64 = 0.0;
    for sigma in [0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
        let a = diffc_a_point(&unit, sigma).unwrap();
        let f = diffc_f_point(&unit, sigma).unwrap();
        worst = worst
            .max((a.distortion - 2.0 * sigma * sigma).abs())
            .max((a.rate.bits().unwrap() + sigma.log2()).abs())
            .max((f.distortion - (2.0 - 2.0 * (1.0 - sigma * sigma).sqrt())).abs());
    }
    verdict(worst < 1e-12, format!("max error {worst:e}"))
}

fn waterfilled_rate_identity() -> Verdict {
    let sp = power_spectrum();
    let mut worst: f64 = 0.0;
    for theta in log_space(sp.min() * 1e-2, sp.max(), 64) {
        let p = diffc_a_star_point(&sp, theta).unwrap();
        let rd = gaussian_rdf(&sp, p.distortion / 2.0).unwrap();
        worst = worst.max((p.rate.bits().unwrap() - rd).abs());
    }
    verdict(worst < 1e-9, format!("max |rate - R(D/2)| = {worst:e} bits"))
}

fn snr_ordering() -> Verdict {
    let sp = power_spectrum();
    let order = [Variant::DiffCFStar, Variant::DiffCF, Variant::DiffCAStar, Variant::DiffCA];
    let mut violations = Vec::new();
    let (mut min_gap, mut max_gap) = (f64::INFINITY, f64::NEG_INFINITY);
    for rate in log_space(0.05, 2.5, 60) {
        let snr: Vec<f64> = order.iter().map(|&v| point_at_rate(&sp, v, rate).unwrap().1.snr_db).collect();
        if !snr.windows(2).all(|w| w[0] >= w[1]) {
            violations.push(format!("rate {rate}: {snr:?}"));
        }
        if rate >= 1.5 {
            let gap = snr[1] - snr[3];
            min_gap = min_gap.min(gap);
            max_gap = max_gap.max(gap);
        }
    }
    let gap_ok = min_gap >= 2.0 && max_gap <= 3.02;
    verdict(
        violations.is_empty() && gap_ok,
        format!("order violations {}, F-A gap above 1.5 bpd in [{min_gap:.4}, {max_gap:.4}] dB {}", violations.len(), violations.join("; ")),
    )
}

fn component_snr_profile() -> Verdict {
    let sp = power_spectrum();
    let (theta, _) = point_at_rate(&sp, Variant::DiffCAStar, 0.391).unwrap();
    let schedule = GaussianSchedule::waterfilled(&sp, theta).unwrap();
    let snr = per_component_snr(&sp, &schedule, Reconstruction::Ancestral).unwrap();
    let (flat, nonzero): (Vec<_>, Vec<_>) = sp.lambdas().iter().zip(&snr).partition(|(l, _)| **l <= theta);
    let zero_ok = !flat.is_empty() && flat.iter().all(|(_, s)| **s == 0.0);
    let active = nonzero.len();
    let mut spreads = Vec::new();
    for (variant, recon) in [(Variant::PinkA, Reconstruction::Ancestral), (Variant::PinkF, Reconstruction::Flow)] {
        let (sigma, _) = point_at_rate(&sp, variant, 0.391).unwrap();
        let s = per_component_snr(&sp, &GaussianSchedule::pink(&sp, sigma).unwrap(), recon).unwrap();
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        spreads.push(hi - lo);
    }
    let pink_ok = spreads.iter().all(|s| *s <= 1e-9);
    verdict(
        zero_ok && pink_ok,
        format!("{} components at 0 dB, {active} active; pink spreads {spreads:?}", flat.len()),
    )
}

fn rcc_exactness() -> Verdict {
    let prior = DiagGaussian::standard(1);
    let target = DiagGaussian::new(vec![0.7], vec![0.09]).unwrap();
    let kl_nats = target.kl_to(&prior);
    let log_w_min = gaussian_log_wmin(&prior, &target).unwrap();
    let key = StreamKey::from_seed(SEED);
    let mut samples = Vec::with_capacity(5000);
    let mut lengths = Vec::with_capacity(5000);
    for step in 0..5000u64 {
        let channel = RccChannel::with_log_wmin(&prior, &target, log_w_min, key, step, kl_nats).unwrap();
        let record = rcc_encode(&channel).unwrap();
        samples.push(record.sample[0]);
        lengths.push(record.ideal_codelength_bits);
    }
    let ks = ks_one_sample(&samples, |x| normal_cdf(x, 0.7, 0.09));
    let kl = nats_to_bits(kl_nats);
    let mean_len = MeanEstimate::from_samples(&lengths).mean;
    let bound = bound_check(kl);
    verdict(
        ks.p_value > 0.01 && mean_len + 1.0 <= bound,
        format!("KS p = {:.4}; mean codelength + 1 = {:.4} <= {bound:.4} bits", ks.p_value, mean_len + 1.0),
    )
}

fn codec_rate_consistency() -> Verdict {
    let spectrum = Spectrum::new(vec![1.0, 0.25]).unwrap();
    let source = AnalyticSource::gaussian(&spectrum, None).unwrap();
    let schedule = DiffusionSchedule::new(SchedulePreset::Cosine, 100).unwrap();
    let t_stop = schedule.nearest_step(0.5);
    let sigma = schedule.sigma(t_stop).unwrap();
    let analytic = diffc_a_point(&spectrum, sigma).unwrap().rate.bits().unwrap();
    let mut rng = labelled(SEED, "acceptance/codec-inputs");
    let totals: Vec<f64> = (0..10_000u64)
        .map(|i| {
            let mut x = [0.0; 2];
            source.sample(&mut rng, &mut x);
            encode(&x, &source, &schedule, t_stop, 40, StreamKey::from_seed(i)).unwrap().ledger.total_kl_bits()
        })
        .collect();
    let m = MeanEstimate::from_samples(&totals);
    verdict(
        (m.mean - analytic).abs() <= 3.0 * m.std_error,
        format!("t_stop {t_stop} (sigma {sigma:.4}): ledger {:.5} +- {:.5} vs I = {analytic:.5} bits", m.mean, m.std_error),
    )
}

fn gmm() -> AnalyticSource {
    AnalyticSource::symmetric_pair(2.0, 0.25).unwrap()
}

fn flow_ancestral_ratio() -> Verdict {
    reports(&[check_flow_ancestral_ratio(&gmm(), &[0.02], 1_000_000, SEED).unwrap()])
}

fn flow_optimality() -> Verdict {
    reports(&[check_flow_optimality(&gmm(), 0.5, 100_000, 1000, &Rival::ALL, SEED).unwrap()])
}

fn smoothness_and_anchors() -> Verdict {
    let schedule = DiffusionSchedule::new(SchedulePreset::Cosine, 100).unwrap();
    let grid: Vec<usize> = (0..10).map(|k| 1 + 11 * k).collect();
    let mut out = vec![check_smoothness_monotone(&gmm(), &schedule, &grid, 100_000, SEED).unwrap()];
    let normal = AnalyticSource::standard_normal(4);
    for sigma in [0.0, 0.5, 0.99] {
        out.push(check_g_anchor("normal", &normal, sigma, 1.0, 100_000, SEED).unwrap());
    }
    let laplace = SmoothedLaplace::unit_variance(LAPLACE_SMOOTHING);
    out.push(check_g_anchor("laplace", &laplace, 0.0, 2.0, 100_000, SEED).unwrap());
    reports(&out)
}

fn realism() -> Verdict {
    reports(&[check_realism(&gmm(), &[0.1, 0.5, 0.9], 10_000, SEED).unwrap()])
}

fn chunk_overhead_model() -> Verdict {
    let c = 1234.5;
    let budgets = [10.0f64, 20.0, 40.0, 100.0];
    let mut exact = true;
    let mut ratios = Vec::new();
    for b in budgets {
        let got = chunk_overhead(c, b).unwrap();
        exact &= got == c / b * (b + (b + 1.0).log2() + 5.0);
        ratios.push(got / c);
    }
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    verdict(exact && decreasing, format!("overhead ratios {ratios:?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict, u64); 11] = [
        ("1 standard-normal exactness", standard_normal_exactness, 1),
        ("2 water-filled rate identity", waterfilled_rate_identity, 1),
        ("3 SNR ordering and F-A gap", snr_ordering, 5),
        ("4 per-component SNR at 0.391 bpd", component_snr_profile, 1),
        ("5 RCC exactness and codelength", rcc_exactness, 60),
        ("6 codec rate consistency", codec_rate_consistency, 300),
        ("7 flow/ancestral error ratio", flow_ancestral_ratio, 120),
        ("8 flow is the comonotone map", flow_optimality, 120),
        ("9 smoothness and G anchors", smoothness_and_anchors, 120),
        ("10 realism", realism, 180),
        ("11 chunk overhead model", chunk_overhead_model, 1),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, check, budget_s) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget_s);
        let pass = v.pass && in_time;
        failures += usize::from(!pass);
        println!(
            "acceptance {name}: {} ({}; {:.2} s of {budget_s} s)",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}

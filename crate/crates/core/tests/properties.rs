use proptest::prelude::*;

use diffc::codec::{
    chunk_overhead, decode_to_z, encode, AnalyticSource, Bitstream, DiffusionSchedule, SchedulePreset, ScoreModel,
};
use diffc::gaussian_rd::{
    diffc_a_point, diffc_a_star_point, diffc_f_point, diffc_f_star_point, gaussian_rdf, point_at_rate, waterfill,
    Spectrum, Variant,
};
use diffc::rcc::{deserialize_index, serialize_index, zipf_codelength};
use diffc::rng::StreamKey;

fn spectrum() -> impl Strategy<Value = Spectrum> {
    prop::collection::vec(0.01f64..10.0, 1..12).prop_map(|v| Spectrum::new(v).unwrap())
}

fn rate_of(l: &[f64], d: &[f64]) -> f64 {
    l.iter().zip(d).map(|(l, d)| 0.5 * (l / d).log2().max(0.0)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn waterfill_meets_the_budget(sp in spectrum(), frac in 0.01f64..1.0) {
        let d = frac * sp.total_variance();
        let sol = waterfill(&sp, d).unwrap();
        prop_assert!((sol.total - d).abs() <= 1e-9 * d.max(1.0));
        for (l, di) in sp.lambdas().iter().zip(&sol.per_component) {
            prop_assert_eq!(*di, l.min(sol.theta));
        }
    }

    #[test]
    fn waterfill_beats_any_feasible_allocation(sp in spectrum(), frac in 0.05f64..0.95, mix in prop::collection::vec(0.0f64..1.0, 12)) {
        let d = frac * sp.total_variance();
        let best = gaussian_rdf(&sp, d).unwrap();
        // Shrink a random allocation until it fits inside both the budget and each λ_i.
        let raw: Vec<f64> = sp.lambdas().iter().zip(&mix).map(|(l, m)| l * (0.01 + 0.99 * m)).collect();
        let scale = (d / raw.iter().sum::<f64>()).min(1.0);
        let alloc: Vec<f64> = raw.iter().map(|r| r * scale).collect();
        prop_assert!(best <= rate_of(sp.lambdas(), &alloc) + 1e-9);
    }

    #[test]
    fn waterfilled_schedule_dominates_isotropic(sp in spectrum(), sigma in 0.05f64..0.95) {
        let iso = diffc_a_point(&sp, sigma).unwrap();
        let rate_bpd = iso.rate_bpd().unwrap();
        let (_, star) = point_at_rate(&sp, Variant::DiffCAStar, rate_bpd).unwrap();
        prop_assert!(star.distortion <= iso.distortion * (1.0 + 1e-9));
        let flow = diffc_f_point(&sp, sigma).unwrap();
        let (_, flow_star) = point_at_rate(&sp, Variant::DiffCFStar, flow.rate_bpd().unwrap()).unwrap();
        prop_assert!(flow_star.distortion <= flow.distortion * (1.0 + 1e-9));
    }

    #[test]
    fn rates_are_scale_free(sp in spectrum(), theta_frac in 0.01f64..1.0, c in 0.1f64..10.0) {
        let theta = theta_frac * sp.max();
        let scaled = sp.scaled(c).unwrap();
        for (p, q) in [
            (diffc_a_star_point(&sp, theta).unwrap(), diffc_a_star_point(&scaled, c * theta).unwrap()),
            (diffc_f_star_point(&sp, theta).unwrap(), diffc_f_star_point(&scaled, c * theta).unwrap()),
        ] {
            prop_assert!((p.rate.bits().unwrap() - q.rate.bits().unwrap()).abs() < 1e-9);
            prop_assert!((c * p.distortion - q.distortion).abs() < 1e-9 * q.distortion.max(1.0));
            prop_assert!((p.snr_db - q.snr_db).abs() < 1e-9);
        }
    }

    #[test]
    fn tweedie_matches_posterior_mean(
        mu in 0.1f64..3.0,
        var in 0.05f64..2.0,
        w in 0.1f64..0.9,
        y in -6.0f64..6.0,
        eta in 0.01f64..3.0,
    ) {
        let src = AnalyticSource::mixture(vec![w, 1.0 - w], vec![vec![-mu], vec![mu]], vec![vec![var], vec![2.0 * var]], None).unwrap();
        let mut score = [0.0];
        src.score_ve(&[y], eta, &mut score);
        let mean = src.posterior_basis(&[y], eta).mean()[0];
        prop_assert!((y + eta * eta * score[0] - mean).abs() < 1e-9 * (1.0 + mean.abs()));
    }

    #[test]
    fn zipf_index_round_trips_within_two_bits(n in 1u64..(1u64 << 40), lambda in 1.01f64..6.0) {
        let w = serialize_index(n, lambda).unwrap();
        prop_assert_eq!(deserialize_index(w.bytes(), w.len(), lambda).unwrap(), n);
        prop_assert!(w.len() as f64 <= zipf_codelength(n, lambda).unwrap() + 2.0);
    }

    #[test]
    fn chunking_never_beats_the_raw_rate(c in 0.0f64..1e4, b in 1.0f64..1e3) {
        prop_assert!(chunk_overhead(c, b).unwrap() >= c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn codec_round_trips_bit_exactly(
        x in prop::collection::vec(-3.0f64..3.0, 2),
        seed in any::<u64>(),
        t_stop in 1usize..=40,
        linear in any::<bool>(),
    ) {
        let src = AnalyticSource::mixture(
            vec![0.3, 0.7],
            vec![vec![-1.0, 0.5], vec![1.5, -0.5]],
            vec![vec![0.3, 0.2], vec![0.5, 0.4]],
            None,
        ).unwrap();
        let preset = if linear { SchedulePreset::Linear } else { SchedulePreset::Cosine };
        let schedule = DiffusionSchedule::new(preset, 40).unwrap();
        let enc = encode(&x, &src, &schedule, t_stop, 40, StreamKey::from_seed(seed)).unwrap();
        let bytes = enc.bitstream.to_bytes().unwrap();
        let parsed = Bitstream::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&parsed, &enc.bitstream);
        let z = decode_to_z(&parsed, &src, &schedule).unwrap();
        prop_assert_eq!(z, enc.z);
        prop_assert_eq!(enc.ledger.payload_bits.div_ceil(8), parsed.payload.len());
    }
}

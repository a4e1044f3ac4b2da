//! Scalar special functions shared by the analytic sources and the test statistics.

use statrs::function::erf;

pub use std::f64::consts::LOG2_E;
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

pub fn nats_to_bits(nats: f64) -> f64 {
    nats * LOG2_E
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-density of `N(mean, var)` at `x`.
pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

pub fn normal_cdf(x: f64, mean: f64, var: f64) -> f64 {
    0.5 * erf::erfc(-(x - mean) / (2.0 * var).sqrt())
}

/// Upper tail `P(X > x)`, accurate far into the tail.
pub fn normal_sf(x: f64, mean: f64, var: f64) -> f64 {
    0.5 * erf::erfc((x - mean) / (2.0 * var).sqrt())
}

/// `ln(erfcx(u))` where `erfcx(u) = exp(u²) erfc(u)`, stable for any finite `u`.
pub fn ln_erfcx(u: f64) -> f64 {
    if u <= 0.0 {
        // erfc(u) lies in [1, 2] here, no cancellation.
        u * u + erf::erfc(u).ln()
    } else if u < 25.0 {
        u * u + erf::erfc(u).ln()
    } else {
        let inv2 = 1.0 / (u * u);
        let series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2;
        (FRAC_1_SQRT_PI / u * series).ln()
    }
}

/// Kolmogorov survival function `Q(x) = P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Small-argument form converges faster.
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut cdf = 0.0;
        for k in 1..=20 {
            let kk = (2 * k - 1) as f64;
            cdf += (-kk * kk * pi2 / (8.0 * x * x)).exp();
        }
        let cdf = cdf * (2.0 * std::f64::consts::PI).sqrt() / x;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sum += sign * term;
            if term < 1e-18 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_erfcx_matches_direct_evaluation() {
        for &u in &[-3.0, -0.5, 0.0, 0.7, 4.0, 12.0] {
            let direct = (u * u + erf::erfc(u).ln()).exp();
            assert!((ln_erfcx(u).exp() / direct - 1.0).abs() < 1e-12, "u = {u}");
        }
        // Asymptotic branch joins the direct branch continuously.
        let below = ln_erfcx(25.0 - 1e-9);
        let above = ln_erfcx(25.0 + 1e-9);
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn kolmogorov_tail_known_values() {
        // Q(1.3581) ≈ 0.05, Q(1.6276) ≈ 0.01.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-3);
        // Both branches agree where they meet.
        let a = kolmogorov_sf(1.18 - 1e-9);
        let b = kolmogorov_sf(1.18 + 1e-9);
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn log_sum_exp_handles_large_offsets() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}

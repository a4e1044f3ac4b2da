//! Closed-form rate, distortion and SNR for Gaussian sources.
//!
//! Every scheme here is a per-component linear Gaussian channel
//! `Z_i = a_i X_i + b_i U_i` applied in the eigenbasis of the source
//! covariance. Ancestral reconstruction draws `X̂ ~ P(X | Z)`; flow
//! reconstruction applies the variance-matching linear map, which is the
//! exact probability-flow solution for Gaussian data.

mod curve;
mod fit;

pub use curve::{
    format_sig, log_space, point_at_rate, sweep_curve, write_curves_csv, write_snr_csv, Control, RDCurve,
    Variant,
};
pub use fit::{fit_spectrum, parse_matrix, FittedSpectrum};

use std::fmt;
use std::io::BufRead;
use std::path::Path;

use crate::error::{check_dim, domain, Error, Result};

/// Eigenvalues of a Gaussian source covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    lambdas: Vec<f64>,
}

impl Spectrum {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return domain("spectrum must have at least one component");
        }
        if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return domain(format!("eigenvalue {bad} is not finite and positive"));
        }
        Ok(Spectrum { lambdas })
    }

    /// `λ_i = i^{-exponent}` for `i = 1..=dim`.
    pub fn power_law(dim: usize, exponent: f64) -> Result<Self> {
        Spectrum::new((1..=dim).map(|i| (i as f64).powf(-exponent)).collect())
    }

    pub fn white(dim: usize) -> Result<Self> {
        Spectrum::new(vec![1.0; dim])
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn total_variance(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.lambdas.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.lambdas.iter().copied().fold(f64::MAX, f64::min)
    }

    pub fn is_white(&self) -> bool {
        let first = self.lambdas[0];
        self.lambdas.iter().all(|&l| l == first)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Spectrum::new(self.lambdas.iter().map(|l| l * factor).collect())
    }

    /// Parses one eigenvalue per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lambdas = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let value: f64 = line.parse().map_err(|_| {
                Error::Format(format!("line {}: cannot parse eigenvalue {line:?}", lineno + 1))
            })?;
            lambdas.push(value);
        }
        Spectrum::new(lambdas)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut text = String::new();
        for line in std::io::BufReader::new(file).lines() {
            text.push_str(&line?);
            text.push('\n');
        }
        Spectrum::parse(&text)
    }

    pub fn to_text(&self) -> String {
        self.lambdas.iter().map(|l| format!("{l}\n")).collect()
    }
}

/// Reverse water-filling allocation `D_i = min(λ_i, θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    pub theta: f64,
    pub per_component: Vec<f64>,
    pub total: f64,
}

fn filled(lambdas: &[f64], theta: f64) -> f64 {
    lambdas.iter().map(|&l| l.min(theta)).sum()
}

/// Finds `θ` with `Σ min(λ_i, θ) = total_distortion` by bisection.
pub fn waterfill(spectrum: &Spectrum, total_distortion: f64) -> Result<WaterfillSolution> {
    let lambdas = spectrum.lambdas();
    let total = spectrum.total_variance();
    if !(total_distortion > 0.0 && total_distortion <= total) {
        return domain(format!(
            "total distortion {total_distortion} outside (0, {total}]"
        ));
    }
    let (mut lo, mut hi) = (0.0, spectrum.max());
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if filled(lambdas, mid) < total_distortion {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = if (filled(lambdas, lo) - total_distortion).abs()
        <= (filled(lambdas, hi) - total_distortion).abs()
    {
        lo
    } else {
        hi
    };
    let per_component: Vec<f64> = lambdas.iter().map(|&l| l.min(theta)).collect();
    let total = per_component.iter().sum();
    Ok(WaterfillSolution {
        theta,
        per_component,
        total,
    })
}

/// `R*(D) = ½ Σ log₂(λ_i / D_i)` in total bits.
pub fn gaussian_rdf(spectrum: &Spectrum, total_distortion: f64) -> Result<f64> {
    let solution = waterfill(spectrum, total_distortion)?;
    Ok(rdf_from_allocation(spectrum, &solution.per_component))
}

fn rdf_from_allocation(spectrum: &Spectrum, allocation: &[f64]) -> f64 {
    spectrum
        .lambdas()
        .iter()
        .zip(allocation)
        .map(|(&l, &d)| 0.5 * (l / d).log2().max(0.0))
        .sum()
}

/// Total rate of a scheme; infinite rates are kept out of the float domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Bits(f64),
    Unbounded,
}

impl Rate {
    pub fn is_unbounded(self) -> bool {
        matches!(self, Rate::Unbounded)
    }

    pub fn bits(self) -> Option<f64> {
        match self {
            Rate::Bits(b) => Some(b),
            Rate::Unbounded => None,
        }
    }

    fn from_bits(bits: f64) -> Self {
        if bits.is_finite() {
            Rate::Bits(bits)
        } else {
            Rate::Unbounded
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Bits(b) => write!(f, "{b}"),
            Rate::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// One point of a rate-distortion curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RDPoint {
    pub rate: Rate,
    pub dims: usize,
    pub distortion: f64,
    pub snr_db: f64,
}

impl RDPoint {
    fn new(spectrum: &Spectrum, rate_bits: f64, distortion: f64) -> Self {
        RDPoint {
            rate: Rate::from_bits(rate_bits),
            dims: spectrum.dim(),
            distortion,
            snr_db: snr_db(spectrum, distortion),
        }
    }

    /// Rate in bits per dimension, `None` at the noiseless endpoint.
    pub fn rate_bpd(&self) -> Option<f64> {
        self.rate.bits().map(|b| b / self.dims as f64)
    }
}

/// `SNR = 10 log10(2 E‖X‖²) − 10 log10(D)`.
pub fn snr_db(spectrum: &Spectrum, distortion: f64) -> f64 {
    10.0 * (2.0 * spectrum.total_variance()).log10() - 10.0 * distortion.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reconstruction {
    Ancestral,
    Flow,
}

impl Reconstruction {
    pub fn name(self) -> &'static str {
        match self {
            Reconstruction::Ancestral => "ancestral",
            Reconstruction::Flow => "flow",
        }
    }
}

/// How the per-component noise was chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    Isotropic { sigma: f64 },
    Waterfilled { theta: f64, gamma_sq: Vec<f64> },
    OptimalFlow { theta: f64, alpha: Vec<f64> },
    Pink { sigma: f64 },
}

/// Per-component channel `Z_i = signal_coeff · X_i + noise_std · U_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelComponent {
    pub signal_coeff: f64,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSchedule {
    pub kind: ScheduleKind,
    pub components: Vec<ChannelComponent>,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma < 1.0 {
        Ok(())
    } else {
        domain(format!("sigma {sigma} outside (0, 1)"))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta >= 0.0 && theta.is_finite() {
        Ok(())
    } else {
        domain(format!("theta {theta} must be finite and non-negative"))
    }
}

impl GaussianSchedule {
    /// Same noise level in every direction.
    pub fn isotropic(spectrum: &Spectrum, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        let c = ChannelComponent {
            signal_coeff: (1.0 - sigma * sigma).sqrt(),
            noise_std: sigma,
        };
        Ok(GaussianSchedule {
            kind: ScheduleKind::Isotropic { sigma },
            components: vec![c; spectrum.dim()],
        })
    }

    /// `γ_i² = min(1, θ/λ_i)`, noise scaled by `√λ_i`.
    pub fn waterfilled(spectrum: &Spectrum, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        let gamma_sq: Vec<f64> = spectrum
            .lambdas()
            .iter()
            .map(|&l| (theta / l).min(1.0))
            .collect();
        let components = spectrum
            .lambdas()
            .iter()
            .zip(&gamma_sq)
            .map(|(&l, &g2)| ChannelComponent {
                signal_coeff: (1.0 - g2).sqrt(),
                noise_std: (g2 * l).sqrt(),
            })
            .collect();
        Ok(GaussianSchedule {
            kind: ScheduleKind::Waterfilled { theta, gamma_sq },
            components,
        })
    }

    /// `α_i = (√(λ_i² + θ²) − θ)/λ_i`, the rate-optimal noise when `X̂ = Z`.
    pub fn optimal_flow(spectrum: &Spectrum, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        // λ/(√(λ²+θ²)+θ) is the same quantity without cancellation for θ ≫ λ.
        let alpha: Vec<f64> = spectrum
            .lambdas()
            .iter()
            .map(|&l| l / ((l * l + theta * theta).sqrt() + theta))
            .collect();
        let components = spectrum
            .lambdas()
            .iter()
            .zip(&alpha)
            .map(|(&l, &a)| ChannelComponent {
                signal_coeff: a,
                noise_std: ((1.0 - a) * (1.0 + a)).sqrt() * l.sqrt(),
            })
            .collect();
        Ok(GaussianSchedule {
            kind: ScheduleKind::OptimalFlow { theta, alpha },
            components,
        })
    }

    /// Covariance-matched noise: std `σ√λ_i`, signal `√(1−σ²)`.
    pub fn pink(spectrum: &Spectrum, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        let a = (1.0 - sigma * sigma).sqrt();
        let components = spectrum
            .lambdas()
            .iter()
            .map(|&l| ChannelComponent {
                signal_coeff: a,
                noise_std: sigma * l.sqrt(),
            })
            .collect();
        Ok(GaussianSchedule {
            kind: ScheduleKind::Pink { sigma },
            components,
        })
    }

    fn check(&self, spectrum: &Spectrum) -> Result<()> {
        check_dim(spectrum.dim(), self.components.len())
    }
}

/// Per-component squared error for the given reconstruction.
pub fn component_distortions(
    spectrum: &Spectrum,
    schedule: &GaussianSchedule,
    reconstruction: Reconstruction,
) -> Result<Vec<f64>> {
    schedule.check(spectrum)?;
    Ok(spectrum
        .lambdas()
        .iter()
        .zip(&schedule.components)
        .map(|(&l, c)| component_distortion(l, c, reconstruction))
        .collect())
}

fn component_distortion(lambda: f64, c: &ChannelComponent, reconstruction: Reconstruction) -> f64 {
    let a2 = c.signal_coeff * c.signal_coeff;
    let b2 = c.noise_std * c.noise_std;
    if c.signal_coeff == 0.0 {
        // Channel carries nothing; both reconstructions are independent redraws.
        return 2.0 * lambda;
    }
    if b2 == 0.0 {
        return 0.0;
    }
    let z_var = a2 * lambda + b2;
    match reconstruction {
        // 2 Var(X | Z)
        Reconstruction::Ancestral => 2.0 * lambda * b2 / z_var,
        // 2λ(1 − r) with r = a√λ/√Var(Z), written as 2λ(1 − r²)/(1 + r).
        Reconstruction::Flow => {
            let r = c.signal_coeff * (lambda / z_var).sqrt();
            2.0 * lambda * (b2 / z_var) / (1.0 + r)
        }
    }
}

/// Per-component mutual information `I[X_i, Z_i]` in bits.
pub fn component_rates_bits(spectrum: &Spectrum, schedule: &GaussianSchedule) -> Result<Vec<f64>> {
    schedule.check(spectrum)?;
    Ok(spectrum
        .lambdas()
        .iter()
        .zip(&schedule.components)
        .map(|(&l, c)| {
            let snr = c.signal_coeff * c.signal_coeff * l / (c.noise_std * c.noise_std);
            0.5 * snr.ln_1p() / std::f64::consts::LN_2
        })
        .collect())
}

/// Rate and distortion of an arbitrary schedule.
pub fn evaluate(
    spectrum: &Spectrum,
    schedule: &GaussianSchedule,
    reconstruction: Reconstruction,
) -> Result<RDPoint> {
    let rate: f64 = component_rates_bits(spectrum, schedule)?.iter().sum();
    let distortion: f64 = component_distortions(spectrum, schedule, reconstruction)?
        .iter()
        .sum();
    Ok(RDPoint::new(spectrum, rate, distortion))
}

/// Isotropic noise, ancestral reconstruction.
pub fn diffc_a_point(spectrum: &Spectrum, sigma: f64) -> Result<RDPoint> {
    evaluate(
        spectrum,
        &GaussianSchedule::isotropic(spectrum, sigma)?,
        Reconstruction::Ancestral,
    )
}

/// Isotropic noise, flow reconstruction; same channel rate as [`diffc_a_point`].
pub fn diffc_f_point(spectrum: &Spectrum, sigma: f64) -> Result<RDPoint> {
    evaluate(
        spectrum,
        &GaussianSchedule::isotropic(spectrum, sigma)?,
        Reconstruction::Flow,
    )
}

/// Water-filled noise, ancestral reconstruction; attains `R*(D/2)`.
pub fn diffc_a_star_point(spectrum: &Spectrum, theta: f64) -> Result<RDPoint> {
    evaluate(
        spectrum,
        &GaussianSchedule::waterfilled(spectrum, theta)?,
        Reconstruction::Ancestral,
    )
}

/// Optimal flow noise with `X̂ = Z`.
pub fn diffc_f_star_point(spectrum: &Spectrum, theta: f64) -> Result<RDPoint> {
    // Z already has the source distribution, so the flow map is the identity
    // and the generic flow evaluation reduces to 2λ(1 − α).
    evaluate(
        spectrum,
        &GaussianSchedule::optimal_flow(spectrum, theta)?,
        Reconstruction::Flow,
    )
}

pub fn pink_point(spectrum: &Spectrum, sigma: f64, reconstruction: Reconstruction) -> Result<RDPoint> {
    evaluate(spectrum, &GaussianSchedule::pink(spectrum, sigma)?, reconstruction)
}

/// Per-component `10 log10(2λ_i) − 10 log10(D_i)`.
pub fn per_component_snr(
    spectrum: &Spectrum,
    schedule: &GaussianSchedule,
    reconstruction: Reconstruction,
) -> Result<Vec<f64>> {
    let distortions = component_distortions(spectrum, schedule, reconstruction)?;
    Ok(spectrum
        .lambdas()
        .iter()
        .zip(distortions)
        .map(|(&l, d)| {
            if d == 2.0 * l {
                0.0
            } else {
                10.0 * (2.0 * l).log10() - 10.0 * d.log10()
            }
        })
        .collect())
}

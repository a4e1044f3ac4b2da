//! Rate-distortion sweeps and their CSV form.

use std::io::Write;

use rayon::prelude::*;

use super::{
    diffc_a_point, diffc_a_star_point, diffc_f_point, diffc_f_star_point, per_component_snr,
    pink_point, rdf_from_allocation, GaussianSchedule, RDPoint, Reconstruction, Spectrum,
};
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    DiffCA,
    DiffCF,
    DiffCAStar,
    DiffCFStar,
    PinkA,
    PinkF,
    /// `R*(D)`
    Rd,
    /// `R*(D/2)` plotted against `D`
    RdHalf,
}

/// Which scalar parameterizes a variant's curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Sigma,
    Theta,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::DiffCA,
        Variant::DiffCF,
        Variant::DiffCAStar,
        Variant::DiffCFStar,
        Variant::PinkA,
        Variant::PinkF,
        Variant::Rd,
        Variant::RdHalf,
    ];

    /// Label written into curve files.
    pub fn label(self) -> &'static str {
        match self {
            Variant::DiffCA => "DiffC-A",
            Variant::DiffCF => "DiffC-F",
            Variant::DiffCAStar => "DiffC-A*",
            Variant::DiffCFStar => "DiffC-F*",
            Variant::PinkA => "P-A",
            Variant::PinkF => "P-F",
            Variant::Rd => "R*(D)",
            Variant::RdHalf => "R*(D/2)",
        }
    }

    /// File-name friendly identifier.
    pub fn slug(self) -> &'static str {
        match self {
            Variant::DiffCA => "diffc_a",
            Variant::DiffCF => "diffc_f",
            Variant::DiffCAStar => "diffc_a_star",
            Variant::DiffCFStar => "diffc_f_star",
            Variant::PinkA => "pink_a",
            Variant::PinkF => "pink_f",
            Variant::Rd => "rd",
            Variant::RdHalf => "rd_half",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.label().eq_ignore_ascii_case(name) || v.slug() == name)
            .ok_or_else(|| Error::Config(format!("unknown variant {name:?}")))
    }

    pub fn control(self) -> Control {
        match self {
            Variant::DiffCA | Variant::DiffCF | Variant::PinkA | Variant::PinkF => Control::Sigma,
            _ => Control::Theta,
        }
    }

    pub fn point(self, spectrum: &Spectrum, control: f64) -> Result<RDPoint> {
        match self {
            Variant::DiffCA => diffc_a_point(spectrum, control),
            Variant::DiffCF => diffc_f_point(spectrum, control),
            Variant::DiffCAStar => diffc_a_star_point(spectrum, control),
            Variant::DiffCFStar => diffc_f_star_point(spectrum, control),
            Variant::PinkA => pink_point(spectrum, control, Reconstruction::Ancestral),
            Variant::PinkF => pink_point(spectrum, control, Reconstruction::Flow),
            Variant::Rd | Variant::RdHalf => {
                if !(control >= 0.0 && control.is_finite()) {
                    return domain(format!("theta {control} must be finite and non-negative"));
                }
                let allocation: Vec<f64> =
                    spectrum.lambdas().iter().map(|&l| l.min(control)).collect();
                let filled: f64 = allocation.iter().sum();
                let rate = if control == 0.0 {
                    f64::INFINITY
                } else {
                    rdf_from_allocation(spectrum, &allocation)
                };
                let distortion = if self == Variant::Rd { filled } else { 2.0 * filled };
                Ok(RDPoint::new(spectrum, rate, distortion))
            }
        }
    }

    /// The channel behind a point, when the variant is a coding scheme.
    pub fn schedule(self, spectrum: &Spectrum, control: f64) -> Result<Option<(GaussianSchedule, Reconstruction)>> {
        Ok(Some(match self {
            Variant::DiffCA => (GaussianSchedule::isotropic(spectrum, control)?, Reconstruction::Ancestral),
            Variant::DiffCF => (GaussianSchedule::isotropic(spectrum, control)?, Reconstruction::Flow),
            Variant::DiffCAStar => (GaussianSchedule::waterfilled(spectrum, control)?, Reconstruction::Ancestral),
            Variant::DiffCFStar => (GaussianSchedule::optimal_flow(spectrum, control)?, Reconstruction::Flow),
            Variant::PinkA => (GaussianSchedule::pink(spectrum, control)?, Reconstruction::Ancestral),
            Variant::PinkF => (GaussianSchedule::pink(spectrum, control)?, Reconstruction::Flow),
            Variant::Rd | Variant::RdHalf => return Ok(None),
        }))
    }

    /// 64 log-spaced control values spanning the useful range.
    pub fn default_grid(self, spectrum: &Spectrum) -> Vec<f64> {
        match self.control() {
            Control::Sigma => log_space(1e-3, 0.999, 64),
            Control::Theta => log_space(spectrum.min() * 1e-3, spectrum.max(), 64),
        }
    }

    fn control_bounds(self, spectrum: &Spectrum) -> (f64, f64) {
        match self.control() {
            Control::Sigma => (1e-15, 1.0 - 1e-15),
            Control::Theta => (spectrum.min() * 1e-15, spectrum.max() * 1e15),
        }
    }
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RDCurve {
    pub variant: Variant,
    pub points: Vec<RDPoint>,
}

fn rate_order(p: &RDPoint) -> f64 {
    p.rate.bits().unwrap_or(f64::INFINITY)
}

/// Evaluates a variant on a control grid; points come back sorted by rate.
pub fn sweep_curve(spectrum: &Spectrum, variant: Variant, grid: &[f64]) -> Result<RDCurve> {
    if grid.is_empty() {
        return domain("empty control grid");
    }
    let mut points = grid
        .par_iter()
        .map(|&c| variant.point(spectrum, c))
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| rate_order(a).total_cmp(&rate_order(b)));
    Ok(RDCurve { variant, points })
}

/// Finds the control value whose point has the requested rate in bits per dimension.
pub fn point_at_rate(spectrum: &Spectrum, variant: Variant, rate_bpd: f64) -> Result<(f64, RDPoint)> {
    if !(rate_bpd > 0.0 && rate_bpd.is_finite()) {
        return domain(format!("target rate {rate_bpd} must be positive and finite"));
    }
    let bpd = |c: f64| -> Result<f64> {
        Ok(variant
            .point(spectrum, c)?
            .rate_bpd()
            .unwrap_or(f64::INFINITY))
    };
    let (lo, hi) = variant.control_bounds(spectrum);
    let (mut lo, mut hi) = (lo.ln(), hi.ln());
    if bpd(lo.exp())? < rate_bpd || bpd(hi.exp())? > rate_bpd {
        return domain(format!("rate {rate_bpd} bpd is out of reach for {}", variant.label()));
    }
    // Rate is non-increasing in the control for every variant.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bpd(mid.exp())? > rate_bpd {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let control = (0.5 * (lo + hi)).exp();
    Ok((control, variant.point(spectrum, control)?))
}

/// Formats with 12 significant digits, dropping trailing zeros.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-4..12).contains(&exponent) {
        let decimals = (11 - exponent).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

/// Writes `variant,rate_bpd,distortion,snr_db` rows; unbounded rates become `unbounded`.
pub fn write_curves_csv<W: Write>(out: &mut W, curves: &[RDCurve]) -> std::io::Result<()> {
    writeln!(out, "variant,rate_bpd,distortion,snr_db")?;
    for curve in curves {
        for p in &curve.points {
            let (rate, snr) = match p.rate_bpd() {
                Some(r) => (format_sig(r), format_sig(p.snr_db)),
                None => ("unbounded".to_string(), "unbounded".to_string()),
            };
            writeln!(
                out,
                "{},{},{},{}",
                curve.variant.label(),
                rate,
                format_sig(p.distortion),
                snr
            )?;
        }
    }
    Ok(())
}

/// Per-component SNR of each coding variant at a common rate.
pub fn write_snr_csv<W: Write>(
    out: &mut W,
    spectrum: &Spectrum,
    variants: &[Variant],
    rate_bpd: f64,
) -> Result<()> {
    writeln!(out, "variant,component,lambda,snr_db")?;
    for &variant in variants {
        let (control, _) = point_at_rate(spectrum, variant, rate_bpd)?;
        let Some((schedule, recon)) = variant.schedule(spectrum, control)? else {
            continue;
        };
        let snr = per_component_snr(spectrum, &schedule, recon)?;
        for (i, (l, s)) in spectrum.lambdas().iter().zip(snr).enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                variant.label(),
                i + 1,
                format_sig(*l),
                format_sig(s)
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.5), "0.5");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(123.456), "123.456");
        assert_eq!(format_sig(-2.0 / 3.0), "-0.666666666667");
        assert_eq!(format_sig(1.5e-7), "1.50000000000e-7");
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.label()).unwrap(), v);
            assert_eq!(Variant::parse(v.slug()).unwrap(), v);
        }
        assert!(Variant::parse("nope").is_err());
    }

    #[test]
    fn sweep_is_sorted_and_rejects_empty_grid() {
        let s = Spectrum::power_law(16, 2.0).unwrap();
        assert!(sweep_curve(&s, Variant::DiffCA, &[]).is_err());
        for v in Variant::ALL {
            let curve = sweep_curve(&s, v, &v.default_grid(&s)).unwrap();
            assert_eq!(curve.points.len(), 64);
            for w in curve.points.windows(2) {
                assert!(rate_order(&w[0]) <= rate_order(&w[1]));
                assert!(w[0].distortion >= w[1].distortion);
            }
        }
    }

    #[test]
    fn a_star_curve_equals_half_distortion_reference() {
        let s = Spectrum::power_law(64, 2.0).unwrap();
        let grid = Variant::DiffCAStar.default_grid(&s);
        let a = sweep_curve(&s, Variant::DiffCAStar, &grid).unwrap();
        let r = sweep_curve(&s, Variant::RdHalf, &grid).unwrap();
        for (p, q) in a.points.iter().zip(&r.points) {
            assert!((p.distortion - q.distortion).abs() < 1e-12 * p.distortion.max(1.0));
            assert!((p.rate.bits().unwrap() - q.rate.bits().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn rate_targeting_hits_the_target() {
        let s = Spectrum::power_law(32, 2.0).unwrap();
        for v in Variant::ALL {
            let (_, p) = point_at_rate(&s, v, 0.391).unwrap();
            assert!((p.rate_bpd().unwrap() - 0.391).abs() < 1e-9, "{}", v.label());
        }
        assert!(point_at_rate(&s, Variant::DiffCA, 0.0).is_err());
    }

    #[test]
    fn csv_marks_unbounded_rates() {
        let s = Spectrum::white(1).unwrap();
        let curve = sweep_curve(&s, Variant::DiffCFStar, &[0.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &[curve]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "variant,rate_bpd,distortion,snr_db");
        assert!(lines[1].starts_with("DiffC-F*,0.135776651582,"));
        assert_eq!(lines[2], "DiffC-F*,unbounded,0,unbounded");
        assert!(!text.contains("inf"));
    }
}

//! Quadrature oracles: CDFs, quantiles and low-dimensional integrals from densities alone.

use crate::codec::AnalyticSource;
use crate::error::{domain, Result};
use crate::quad::integrate_with;

const REL_TOL: f64 = 1e-10;
const ABS_TOL: f64 = 1e-300;
const KL_REL_TOL: f64 = 1e-9;
const KL_ABS_TOL: f64 = 1e-14;
const MAX_SEGMENTS: usize = 2000;
/// Half-width of the integration window in units of the widest component.
const WINDOW: f64 = 12.0;

/// Window and component centres of `Y = X + ηU` for a 1-D source.
fn window(source: &AnalyticSource, eta: f64) -> (f64, f64, Vec<f64>) {
    let centres: Vec<f64> = source.means().iter().map(|m| m[0]).collect();
    let spread = source
        .vars()
        .iter()
        .map(|v| (v[0] + eta * eta).sqrt())
        .fold(0.0, f64::max);
    let lo = centres.iter().copied().fold(f64::INFINITY, f64::min) - WINDOW * spread;
    let hi = centres.iter().copied().fold(f64::NEG_INFINITY, f64::max) + WINDOW * spread;
    (lo, hi, centres)
}

fn breakpoints(lo: f64, hi: f64, centres: &[f64]) -> Vec<f64> {
    let mut pts = vec![lo];
    let mut inner: Vec<f64> = centres.iter().copied().filter(|c| *c > lo && *c < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(hi);
    pts
}

/// `∫` of the density of `Y = X + ηU` over `[a, b]`, split at the component centres.
fn mass(source: &AnalyticSource, eta: f64, a: f64, b: f64, centres: &[f64]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut pdf = |y: f64| source.log_density_basis(&[y], eta).exp();
    integrate_with(&mut pdf, &breakpoints(a, b, centres), REL_TOL, ABS_TOL, MAX_SEGMENTS).value
}

/// Lower and upper tail masses at `y`, each integrated directly so neither loses precision.
pub fn quadrature_cdf(source: &AnalyticSource, y: f64, eta: f64) -> Result<(f64, f64)> {
    if source.dim() != 1 {
        return domain("quadrature CDF needs a 1-D source");
    }
    let (lo, hi, centres) = window(source, eta);
    let y = y.clamp(lo, hi);
    Ok((mass(source, eta, lo, y, &centres), mass(source, eta, y, hi, &centres)))
}

/// Inverse of the clean-source CDF given a tail mass; `upper` selects which tail `p` measures.
pub fn quadrature_quantile(source: &AnalyticSource, p: f64, upper: bool) -> Result<f64> {
    if source.dim() != 1 {
        return domain("quadrature quantile needs a 1-D source");
    }
    let (mut lo, mut hi, centres) = window(source, 0.0);
    let (lo0, hi0) = (lo, hi);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below = if upper {
            mass(source, 0.0, mid, hi0, &centres) > p
        } else {
            mass(source, 0.0, lo0, mid, &centres) < p
        };
        if below {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `F₀⁻¹(F̃_σ(y))` with `y = z/√(1−σ²)`: the monotone map that carries the noisy
/// marginal onto the source, computed only from the two densities.
pub fn comonotone_oracle(source: &AnalyticSource, z: f64, sigma: f64) -> Result<f64> {
    let a = ((1.0 - sigma) * (1.0 + sigma)).sqrt();
    let (lower, upper) = quadrature_cdf(source, z / a, sigma / a)?;
    if lower <= upper {
        quadrature_quantile(source, lower, false)
    } else {
        quadrature_quantile(source, upper, true)
    }
}

/// Integral over a product of windows in one or two dimensions; each axis is
/// given as `(centres, spread)`.
pub(crate) fn integrate_nd(axes: &[(Vec<f64>, f64)], f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let axis_points = |(centres, spread): &(Vec<f64>, f64)| {
        let lo = centres.iter().copied().fold(f64::INFINITY, f64::min) - WINDOW * spread;
        let hi = centres.iter().copied().fold(f64::NEG_INFINITY, f64::max) + WINDOW * spread;
        breakpoints(lo, hi, centres)
    };
    match axes.len() {
        1 => {
            let mut g = |x: f64| f(&[x]);
            integrate_with(&mut g, &axis_points(&axes[0]), KL_REL_TOL, KL_ABS_TOL, MAX_SEGMENTS).value
        }
        2 => {
            let inner_pts = axis_points(&axes[1]);
            let mut outer = |x: f64| {
                let mut g = |y: f64| f(&[x, y]);
                integrate_with(&mut g, &inner_pts, KL_REL_TOL, KL_ABS_TOL, MAX_SEGMENTS).value
            };
            integrate_with(&mut outer, &axis_points(&axes[0]), KL_REL_TOL, KL_ABS_TOL, MAX_SEGMENTS).value
        }
        d => panic!("integrate_nd supports 1 or 2 axes, got {d}"),
    }
}

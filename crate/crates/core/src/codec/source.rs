//! Sources whose diffused marginals, scores and posteriors are known in closed form.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::schedule::DiffusionSchedule;
use crate::error::{check_dim, domain, Error, Result};
use crate::gaussian_rd::Spectrum;
use crate::rng::StreamRng;
use crate::special::{ln_erfcx, log_sum_exp, normal_cdf, normal_log_pdf, normal_sf, LN_2PI};

const ORTHOGONALITY_TOL: f64 = 1e-10;

/// A score function frozen at one noise level.
pub type LevelScore<'a> = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync + 'a>;

/// Score of the variance-exploding marginal `Y = X + ηU`, plus sampling of `X`.
pub trait ScoreModel: Sync {
    fn dim(&self) -> usize;

    /// `∇_y ln p̃_η(y)`.
    fn score_ve(&self, y: &[f64], eta: f64, out: &mut [f64]);

    fn sample(&self, rng: &mut StreamRng, out: &mut [f64]);

    /// Score at one fixed `η`, for callers that evaluate many points at the same level.
    fn level_score(&self, eta: f64) -> LevelScore<'_> {
        Box::new(move |y, out| self.score_ve(y, eta, out))
    }

    /// `E[X | Y = y]`; Tweedie's formula unless a model knows better.
    fn posterior_mean_ve(&self, y: &[f64], eta: f64, out: &mut [f64]) {
        self.score_ve(y, eta, out);
        for (o, yi) in out.iter_mut().zip(y) {
            *o = yi + eta * eta * *o;
        }
    }

    /// `∇_z ln p_t(z)` for the variance-preserving marginal at step `t`.
    fn score(&self, z: &[f64], schedule: &DiffusionSchedule, t: usize, out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), z.len())?;
        let a = schedule.alpha(t)?;
        let y: Vec<f64> = z.iter().map(|v| v / a).collect();
        self.score_ve(&y, schedule.eta(t)?, out);
        for o in out.iter_mut() {
            *o /= a;
        }
        Ok(())
    }

    /// `E[X | Z_t = z]`.
    fn posterior_mean(&self, z: &[f64], schedule: &DiffusionSchedule, t: usize, out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), z.len())?;
        let a = schedule.alpha(t)?;
        let y: Vec<f64> = z.iter().map(|v| v / a).collect();
        self.posterior_mean_ve(&y, schedule.eta(t)?, out);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Gaussian,
    GaussianMixture,
}

/// Gaussian or Gaussian mixture with axis-aligned components in the basis
/// `s = Qᵀx`; `Q` is the optional orthogonal rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSource {
    kind: SourceKind,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
    rotation: Option<DMatrix<f64>>,
}

/// Posterior of the basis coordinates given `Y = y` with noise `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePosterior {
    pub responsibilities: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
}

impl MixturePosterior {
    pub fn mean(&self) -> Vec<f64> {
        let dim = self.means[0].len();
        (0..dim)
            .map(|j| self.responsibilities.iter().zip(&self.means).map(|(r, m)| r * m[j]).sum())
            .collect()
    }

    /// Per-coordinate `Var[S_j | y]`.
    pub fn var(&self) -> Vec<f64> {
        let mean = self.mean();
        (0..mean.len())
            .map(|j| {
                let second: f64 = self
                    .responsibilities
                    .iter()
                    .zip(self.means.iter().zip(&self.vars))
                    .map(|(r, (m, v))| r * (v[j] + m[j] * m[j]))
                    .sum();
                (second - mean[j] * mean[j]).max(0.0)
            })
            .collect()
    }
}

impl AnalyticSource {
    /// Zero-mean Gaussian with covariance `Q diag(λ) Qᵀ`.
    pub fn gaussian(spectrum: &Spectrum, rotation: Option<DMatrix<f64>>) -> Result<Self> {
        let dim = spectrum.dim();
        let mut s = Self::mixture(vec![1.0], vec![vec![0.0; dim]], vec![spectrum.lambdas().to_vec()], rotation)?;
        s.kind = SourceKind::Gaussian;
        Ok(s)
    }

    pub fn standard_normal(dim: usize) -> Self {
        Self::gaussian(&Spectrum::white(dim).expect("dim ≥ 1"), None).expect("valid source")
    }

    pub fn mixture(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        vars: Vec<Vec<f64>>,
        rotation: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if weights.is_empty() {
            return domain("mixture needs at least one component");
        }
        check_dim(weights.len(), means.len())?;
        check_dim(weights.len(), vars.len())?;
        let dim = means[0].len();
        if dim == 0 {
            return domain("source dimension must be at least 1");
        }
        for (m, v) in means.iter().zip(&vars) {
            check_dim(dim, m.len())?;
            check_dim(dim, v.len())?;
            if m.iter().any(|x| !x.is_finite()) || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return domain("component means must be finite and variances positive");
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return domain("mixture weights must be positive");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return domain(format!("mixture weights sum to {total}, not 1"));
        }
        if let Some(q) = &rotation {
            if q.nrows() != dim || q.ncols() != dim {
                return Err(Error::Shape { expected: dim, got: q.nrows() });
            }
            let defect = (q.transpose() * q - DMatrix::<f64>::identity(dim, dim)).amax();
            if defect > ORTHOGONALITY_TOL {
                return domain(format!("rotation is not orthogonal (defect {defect:e})"));
            }
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(AnalyticSource {
            kind: SourceKind::GaussianMixture,
            weights,
            log_weights,
            means,
            vars,
            rotation,
        })
    }

    /// Symmetric two-component 1-D mixture `½N(−μ, v) + ½N(μ, v)`.
    pub fn symmetric_pair(mu: f64, var: f64) -> Result<Self> {
        Self::mixture(vec![0.5, 0.5], vec![vec![-mu], vec![mu]], vec![vec![var], vec![var]], None)
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn vars(&self) -> &[Vec<f64>] {
        &self.vars
    }

    pub fn rotation(&self) -> Option<&DMatrix<f64>> {
        self.rotation.as_ref()
    }

    pub fn to_basis(&self, x: &[f64]) -> Vec<f64> {
        match &self.rotation {
            None => x.to_vec(),
            Some(q) => (0..self.dim())
                .map(|c| (0..self.dim()).map(|r| q[(r, c)] * x[r]).sum())
                .collect(),
        }
    }

    pub fn from_basis(&self, s: &[f64]) -> Vec<f64> {
        match &self.rotation {
            None => s.to_vec(),
            Some(q) => (0..self.dim())
                .map(|r| (0..self.dim()).map(|c| q[(r, c)] * s[c]).sum())
                .collect(),
        }
    }

    /// Per-coordinate mean of the basis coordinates.
    pub fn basis_mean(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.weights.iter().zip(&self.means).map(|(w, m)| w * m[j]).sum())
            .collect()
    }

    /// Per-coordinate variance of the basis coordinates.
    pub fn basis_var(&self) -> Vec<f64> {
        let mean = self.basis_mean();
        (0..self.dim())
            .map(|j| {
                let second: f64 = self
                    .weights
                    .iter()
                    .zip(self.means.iter().zip(&self.vars))
                    .map(|(w, (m, v))| w * (v[j] + m[j] * m[j]))
                    .sum();
                second - mean[j] * mean[j]
            })
            .collect()
    }

    /// `E‖X‖²`.
    pub fn second_moment(&self) -> f64 {
        self.basis_var()
            .iter()
            .zip(self.basis_mean())
            .map(|(v, m)| v + m * m)
            .sum()
    }

    /// Log-density of `Y = X + ηU` at a point in basis coordinates.
    pub fn log_density_basis(&self, y: &[f64], eta: f64) -> f64 {
        let e2 = eta * eta;
        let terms: Vec<f64> = (0..self.components())
            .map(|k| self.component_log_likelihood(k, y, e2))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_density_basis(&self.to_basis(x), 0.0)
    }

    fn component_log_likelihood(&self, k: usize, y: &[f64], e2: f64) -> f64 {
        self.log_weights[k]
            + y.iter()
                .zip(self.means[k].iter().zip(&self.vars[k]))
                .map(|(yj, (m, v))| normal_log_pdf(*yj, *m, v + e2))
                .sum::<f64>()
    }

    /// Exact posterior of the basis coordinates given basis-coordinate `y`.
    pub fn posterior_basis(&self, y: &[f64], eta: f64) -> MixturePosterior {
        let e2 = eta * eta;
        let logs: Vec<f64> = (0..self.components())
            .map(|k| self.component_log_likelihood(k, y, e2))
            .collect();
        let norm = log_sum_exp(&logs);
        let responsibilities = logs.iter().map(|l| (l - norm).exp()).collect();
        let mut means = Vec::with_capacity(self.components());
        let mut vars = Vec::with_capacity(self.components());
        for k in 0..self.components() {
            let (m, v) = (&self.means[k], &self.vars[k]);
            means.push((0..y.len()).map(|j| m[j] + v[j] / (v[j] + e2) * (y[j] - m[j])).collect());
            vars.push((0..y.len()).map(|j| v[j] * e2 / (v[j] + e2)).collect());
        }
        MixturePosterior {
            responsibilities,
            means,
            vars,
        }
    }

    /// Streams `Σ_k r_k f_k` without allocating: `f(k, weight, out)` adds the
    /// weighted contribution of component `k` and `out` is normalized at the end.
    fn responsibility_weighted<F: FnMut(usize, f64, &mut [f64])>(&self, y: &[f64], e2: f64, out: &mut [f64], mut f: F) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut max = f64::NEG_INFINITY;
        let mut total = 0.0;
        for k in 0..self.components() {
            let l = self.component_log_likelihood(k, y, e2);
            if l > max {
                let rescale = (max - l).exp();
                total *= rescale;
                out.iter_mut().for_each(|o| *o *= rescale);
                max = l;
            }
            let w = (l - max).exp();
            total += w;
            f(k, w, out);
        }
        out.iter_mut().for_each(|o| *o /= total);
    }

    fn score_basis(&self, y: &[f64], e2: f64, out: &mut [f64]) {
        self.responsibility_weighted(y, e2, out, |k, w, out| {
            for j in 0..y.len() {
                out[j] -= w * (y[j] - self.means[k][j]) / (self.vars[k][j] + e2);
            }
        });
    }

    /// Component constants at noise variance `e2`: `ln w_k − ½ Σ_j ln(2π(v_kj + e2))` and `1/(v_kj + e2)`.
    fn level_constants(&self, e2: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
        (0..self.components())
            .map(|k| {
                let inv: Vec<f64> = self.vars[k].iter().map(|v| 1.0 / (v + e2)).collect();
                let norm = self.log_weights[k]
                    - 0.5 * inv.iter().map(|i| LN_2PI - i.ln()).sum::<f64>();
                (norm, inv)
            })
            .unzip()
    }

    fn posterior_mean_basis(&self, y: &[f64], e2: f64, out: &mut [f64]) {
        self.responsibility_weighted(y, e2, out, |k, w, out| {
            for j in 0..y.len() {
                let (m, v) = (self.means[k][j], self.vars[k][j]);
                out[j] += w * (m + v / (v + e2) * (y[j] - m));
            }
        });
    }

    /// Draw from `p(x | Y = y)` where `y` is in data coordinates.
    pub fn sample_posterior_ve(&self, y: &[f64], eta: f64, rng: &mut StreamRng, out: &mut [f64]) {
        let post = self.posterior_basis(&self.to_basis(y), eta);
        let k = pick(&post.responsibilities, rng.random::<f64>());
        let s: Vec<f64> = post.means[k]
            .iter()
            .zip(&post.vars[k])
            .map(|(m, v)| {
                let u: f64 = StandardNormal.sample(rng);
                m + v.sqrt() * u
            })
            .collect();
        out.copy_from_slice(&self.from_basis(&s));
    }

    /// CDF of `Y = X + ηU` for a 1-D source.
    pub fn cdf_ve(&self, y: f64, eta: f64) -> Result<f64> {
        self.check_scalar()?;
        let e2 = eta * eta;
        Ok(self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .map(|(w, (m, v))| w * normal_cdf(y, m[0], v[0] + e2))
            .sum())
    }

    /// Upper tail of `Y = X + ηU` for a 1-D source.
    pub fn sf_ve(&self, y: f64, eta: f64) -> Result<f64> {
        self.check_scalar()?;
        let e2 = eta * eta;
        Ok(self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .map(|(w, (m, v))| w * normal_sf(y, m[0], v[0] + e2))
            .sum())
    }

    /// Inverse of [`Self::cdf_ve`] by bisection, accurate in either tail.
    pub fn quantile_ve(&self, p: f64, eta: f64) -> Result<f64> {
        self.check_scalar()?;
        if !(p > 0.0 && p < 1.0) {
            return domain(format!("probability {p} outside (0, 1)"));
        }
        let e2 = eta * eta;
        let spread = self.vars.iter().map(|v| (v[0] + e2).sqrt()).fold(0.0, f64::max);
        let lo_m = self.means.iter().map(|m| m[0]).fold(f64::INFINITY, f64::min);
        let hi_m = self.means.iter().map(|m| m[0]).fold(f64::NEG_INFINITY, f64::max);
        let (mut lo, mut hi) = (lo_m - 40.0 * spread, hi_m + 40.0 * spread);
        let upper = p > 0.5;
        let q = if upper { 1.0 - p } else { p };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let below = if upper {
                self.sf_ve(mid, eta)? > q
            } else {
                self.cdf_ve(mid, eta)? < q
            };
            if below {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    fn check_scalar(&self) -> Result<()> {
        if self.dim() == 1 {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("operation needs a 1-D source, got dimension {}", self.dim())))
        }
    }

    /// SHA-256 of a canonical description, recorded in bitstream headers.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"diffc/source/v1");
        h.update([match self.kind {
            SourceKind::Gaussian => 0u8,
            SourceKind::GaussianMixture => 1u8,
        }]);
        h.update((self.dim() as u32).to_le_bytes());
        h.update((self.components() as u32).to_le_bytes());
        for k in 0..self.components() {
            h.update(self.weights[k].to_le_bytes());
            for v in self.means[k].iter().chain(&self.vars[k]) {
                h.update(v.to_le_bytes());
            }
        }
        match &self.rotation {
            None => h.update([0u8]),
            Some(q) => {
                h.update([1u8]);
                for v in q.iter() {
                    h.update(v.to_le_bytes());
                }
            }
        }
        h.finalize().into()
    }
}

fn pick(probabilities: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probabilities.len() - 1
}

impl ScoreModel for AnalyticSource {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn score_ve(&self, y: &[f64], eta: f64, out: &mut [f64]) {
        let e2 = eta * eta;
        match &self.rotation {
            None => self.score_basis(y, e2, out),
            Some(_) => {
                let mut s = vec![0.0; y.len()];
                self.score_basis(&self.to_basis(y), e2, &mut s);
                out.copy_from_slice(&self.from_basis(&s));
            }
        }
    }

    fn level_score(&self, eta: f64) -> LevelScore<'_> {
        if self.rotation.is_some() {
            return Box::new(move |y, out| self.score_ve(y, eta, out));
        }
        let (norm, inv) = self.level_constants(eta * eta);
        if self.dim() == 1 {
            let means: Vec<f64> = self.means.iter().map(|m| m[0]).collect();
            let inv: Vec<f64> = inv.iter().map(|i| i[0]).collect();
            return Box::new(move |y, out| {
                let y = y[0];
                let log_lik = |k: usize| norm[k] - 0.5 * (y - means[k]) * (y - means[k]) * inv[k];
                let max = (0..norm.len()).map(log_lik).fold(f64::NEG_INFINITY, f64::max);
                let (mut total, mut acc) = (0.0, 0.0);
                for k in 0..norm.len() {
                    let w = (log_lik(k) - max).exp();
                    total += w;
                    acc += w * (means[k] - y) * inv[k];
                }
                out[0] = acc / total;
            });
        }
        Box::new(move |y, out| {
            let log_lik = |k: usize| {
                let m = &self.means[k];
                norm[k] - 0.5 * (0..y.len()).map(|j| (y[j] - m[j]) * (y[j] - m[j]) * inv[k][j]).sum::<f64>()
            };
            let max = (0..norm.len()).map(log_lik).fold(f64::NEG_INFINITY, f64::max);
            out.iter_mut().for_each(|o| *o = 0.0);
            let mut total = 0.0;
            for k in 0..norm.len() {
                let w = (log_lik(k) - max).exp();
                total += w;
                for j in 0..y.len() {
                    out[j] += w * (self.means[k][j] - y[j]) * inv[k][j];
                }
            }
            out.iter_mut().for_each(|o| *o /= total);
        })
    }

    fn posterior_mean_ve(&self, y: &[f64], eta: f64, out: &mut [f64]) {
        let e2 = eta * eta;
        match &self.rotation {
            None => self.posterior_mean_basis(y, e2, out),
            Some(_) => {
                let mut s = vec![0.0; y.len()];
                self.posterior_mean_basis(&self.to_basis(y), e2, &mut s);
                out.copy_from_slice(&self.from_basis(&s));
            }
        }
    }

    fn sample(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let k = pick(&self.weights, rng.random::<f64>());
        let s: Vec<f64> = self.means[k]
            .iter()
            .zip(&self.vars[k])
            .map(|(m, v)| {
                let u: f64 = StandardNormal.sample(rng);
                m + v.sqrt() * u
            })
            .collect();
        match &self.rotation {
            None => out.copy_from_slice(&s),
            Some(_) => out.copy_from_slice(&self.from_basis(&s)),
        }
    }
}

/// Laplace distribution smoothed by a narrow Gaussian so its score is defined everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedLaplace {
    pub scale: f64,
    pub smoothing: f64,
}

impl SmoothedLaplace {
    /// Laplace with unit variance (`b = 1/√2`).
    pub fn unit_variance(smoothing: f64) -> Self {
        SmoothedLaplace {
            scale: std::f64::consts::FRAC_1_SQRT_2,
            smoothing,
        }
    }

    fn erfcx_args(&self, y: f64, eta: f64) -> (f64, f64, f64) {
        let s = (self.smoothing * self.smoothing + eta * eta).sqrt();
        let b = self.scale;
        let u1 = (s / b - y / s) * std::f64::consts::FRAC_1_SQRT_2;
        let u2 = (s / b + y / s) * std::f64::consts::FRAC_1_SQRT_2;
        (s, u1, u2)
    }

    pub fn log_density_ve(&self, y: f64, eta: f64) -> f64 {
        let (s, u1, u2) = self.erfcx_args(y, eta);
        let b = self.scale;
        // Branches for X > 0 and X < 0, each kept free of large cancelling terms.
        let t1 = -y / b + ln_erfc(u1);
        let t2 = y / b + ln_erfc(u2);
        let hi = t1.max(t2);
        -(4.0 * b).ln() + s * s / (2.0 * b * b) + hi + ((t1 - hi).exp() + (t2 - hi).exp()).ln()
    }
}

fn ln_erfc(u: f64) -> f64 {
    if u >= 0.0 {
        ln_erfcx(u) - u * u
    } else {
        (2.0 - (ln_erfcx(-u) - u * u).exp()).ln()
    }
}

impl ScoreModel for SmoothedLaplace {
    fn dim(&self) -> usize {
        1
    }

    fn score_ve(&self, y: &[f64], eta: f64, out: &mut [f64]) {
        let (_, u1, u2) = self.erfcx_args(y[0], eta);
        out[0] = (0.5 * (ln_erfcx(u2) - ln_erfcx(u1))).tanh() / self.scale;
    }

    fn sample(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let u: f64 = rng.random::<f64>() - 0.5;
        let laplace = -self.scale * u.signum() * (-2.0 * u.abs()).ln_1p();
        let g: f64 = StandardNormal.sample(rng);
        out[0] = laplace + self.smoothing * g;
    }
}

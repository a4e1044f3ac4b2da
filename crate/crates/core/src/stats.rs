//! Sample statistics and goodness-of-fit tests used by the harness and tests.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::special::kolmogorov_sf;

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return MeanEstimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        // Welford keeps the variance accurate for large n.
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let delta = x - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (x - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        MeanEstimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestOutcome {
    pub fn rejects_at(&self, level: f64) -> bool {
        self.p_value <= level
    }
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> TestOutcome {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    TestOutcome {
        statistic: d,
        p_value: kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * d),
    }
}

/// Sum of pairwise absolute differences `Σ_{i<j} |x_i − x_j|` of sorted data.
fn sorted_pair_sum(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| x * (2.0 * k as f64 + 1.0 - n))
        .sum()
}

/// Energy statistic `(nm/(n+m)) (2E|X−Y| − E|X−X'| − E|Y−Y'|)` for scalars.
fn energy_statistic_1d(pooled: &[f64], n: usize, scratch: &mut Vec<f64>) -> f64 {
    let m = pooled.len() - n;
    let mut sum_within = |part: &[f64]| {
        scratch.clear();
        scratch.extend_from_slice(part);
        scratch.sort_by(f64::total_cmp);
        sorted_pair_sum(scratch)
    };
    let sx = sum_within(&pooled[..n]);
    let sy = sum_within(&pooled[n..]);
    let sall = sum_within(pooled);
    let cross = sall - sx - sy;
    let (nf, mf) = (n as f64, m as f64);
    let exy = cross / (nf * mf);
    let exx = 2.0 * sx / (nf * nf);
    let eyy = 2.0 * sy / (mf * mf);
    nf * mf / (nf + mf) * (2.0 * exy - exx - eyy)
}

/// Two-sample energy-distance permutation test for scalar samples, O(n log n) per permutation.
pub fn energy_test_1d<R: Rng>(x: &[f64], y: &[f64], permutations: usize, rng: &mut R) -> TestOutcome {
    let mut pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut scratch = Vec::with_capacity(pooled.len());
    let observed = energy_statistic_1d(&pooled, x.len(), &mut scratch);
    let mut at_least = 0usize;
    for _ in 0..permutations {
        pooled.shuffle(rng);
        if energy_statistic_1d(&pooled, x.len(), &mut scratch) >= observed {
            at_least += 1;
        }
    }
    TestOutcome {
        statistic: observed,
        p_value: (1 + at_least) as f64 / (1 + permutations) as f64,
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn energy_statistic_nd(points: &[Vec<f64>], labels: &[bool]) -> f64 {
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = euclid(&points[i], &points[j]);
            match (labels[i], labels[j]) {
                (true, true) => sxx += d,
                (false, false) => syy += d,
                _ => sxy += d,
            }
        }
    }
    let n = labels.iter().filter(|&&l| l).count() as f64;
    let m = labels.len() as f64 - n;
    let exy = sxy / (n * m);
    let exx = 2.0 * sxx / (n * n);
    let eyy = 2.0 * syy / (m * m);
    n * m / (n + m) * (2.0 * exy - exx - eyy)
}

/// Two-sample energy-distance permutation test for vector samples, O(n²) per permutation.
pub fn energy_test<R: Rng>(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    permutations: usize,
    rng: &mut R,
) -> TestOutcome {
    if x.first().is_some_and(|p| p.len() == 1) {
        let xs: Vec<f64> = x.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = y.iter().map(|p| p[0]).collect();
        return energy_test_1d(&xs, &ys, permutations, rng);
    }
    let points: Vec<Vec<f64>> = x.iter().chain(y).cloned().collect();
    let mut labels: Vec<bool> = (0..points.len()).map(|i| i < x.len()).collect();
    let observed = energy_statistic_nd(&points, &labels);
    let mut at_least = 0usize;
    for _ in 0..permutations {
        labels.shuffle(rng);
        if energy_statistic_nd(&points, &labels) >= observed {
            at_least += 1;
        }
    }
    TestOutcome {
        statistic: observed,
        p_value: (1 + at_least) as f64 / (1 + permutations) as f64,
    }
}

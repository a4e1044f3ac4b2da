//! The default verification suite and its configuration.

use super::{
    check_flow_ancestral_ratio, check_flow_optimality, check_g_anchor, check_realism, check_smoothness_monotone,
    check_theorem1, Rival, TheoremReport,
};
use crate::codec::{AnalyticSource, DiffusionSchedule, SchedulePreset, SmoothedLaplace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TheoremId {
    RateBound,
    FlowAncestralRatio,
    FlowOptimality,
    Smoothness,
    GAnchors,
    Realism,
}

impl TheoremId {
    pub const ALL: [TheoremId; 6] = [
        TheoremId::RateBound,
        TheoremId::FlowAncestralRatio,
        TheoremId::FlowOptimality,
        TheoremId::Smoothness,
        TheoremId::GAnchors,
        TheoremId::Realism,
    ];

    pub fn id(self) -> &'static str {
        match self {
            TheoremId::RateBound => "1",
            TheoremId::FlowAncestralRatio => "2",
            TheoremId::FlowOptimality => "3",
            TheoremId::Smoothness => "lemma1",
            TheoremId::GAnchors => "g",
            TheoremId::Realism => "realism",
        }
    }

    pub fn parse(s: &str) -> Result<Vec<TheoremId>> {
        if s == "all" {
            return Ok(Self::ALL.to_vec());
        }
        s.split(',')
            .map(|part| {
                let part = part.trim();
                Self::ALL
                    .iter()
                    .copied()
                    .find(|t| t.id() == part)
                    .ok_or_else(|| Error::Config(format!("unknown theorem id {part:?} (expected 1, 2, 3, lemma1, g, realism or all)")))
            })
            .collect()
    }
}

/// Defaults reproduce the acceptance settings.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Replaces every per-check sample count when set.
    pub samples: Option<usize>,
    /// Source for the ratio, optimality, smoothness and realism checks.
    pub source: AnalyticSource,
    pub rate_bound_sources: Vec<(String, AnalyticSource)>,
    pub rate_bound_sigmas: Vec<f64>,
    pub rate_bound_samples: usize,
    pub ratio_sigmas: Vec<f64>,
    pub ratio_samples: usize,
    pub optimality_sigma: f64,
    pub optimality_samples: usize,
    pub optimality_probes: usize,
    pub schedule: DiffusionSchedule,
    pub smoothness_grid: Vec<usize>,
    pub smoothness_samples: usize,
    pub g_anchors: Vec<GAnchor>,
    pub g_samples: usize,
    pub realism_sigmas: Vec<f64>,
    pub realism_samples: usize,
}

pub const LAPLACE_SMOOTHING: f64 = 1e-6;

/// A source with a known per-dimension `G`.
#[derive(Debug, Clone, PartialEq)]
pub enum GAnchor {
    /// Standard normal, `G/M = 1` at every noise level.
    Normal { dim: usize, sigmas: Vec<f64> },
    /// Unit-variance Laplace, `G = 2` at zero noise.
    Laplace { smoothing: f64 },
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        let gmm = AnalyticSource::symmetric_pair(2.0, 0.25).expect("valid mixture");
        let schedule = DiffusionSchedule::new(SchedulePreset::Cosine, 100).expect("valid schedule");
        SuiteConfig {
            seed,
            samples: None,
            source: gmm.clone(),
            rate_bound_sources: vec![
                ("pair:2:0.25".into(), gmm),
                ("pair:0.1:0.25".into(), AnalyticSource::symmetric_pair(0.1, 0.25).expect("valid mixture")),
                ("normal".into(), AnalyticSource::standard_normal(1)),
            ],
            rate_bound_sigmas: vec![0.1, 0.5, 0.9],
            rate_bound_samples: 100_000,
            ratio_sigmas: vec![0.02, 0.2, 0.5],
            ratio_samples: 1_000_000,
            optimality_sigma: 0.5,
            optimality_samples: 100_000,
            optimality_probes: 1000,
            schedule,
            smoothness_grid: (0..10).map(|k| 1 + 11 * k).collect(),
            smoothness_samples: 100_000,
            g_anchors: vec![
                GAnchor::Normal { dim: 4, sigmas: vec![0.0, 0.5, 0.99] },
                GAnchor::Laplace { smoothing: LAPLACE_SMOOTHING },
            ],
            g_samples: 100_000,
            realism_sigmas: vec![0.1, 0.5, 0.9],
            realism_samples: 10_000,
        }
    }

    fn n(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }
}

pub fn run_one(config: &SuiteConfig, theorem: TheoremId) -> Result<Vec<TheoremReport>> {
    let seed = config.seed;
    Ok(match theorem {
        TheoremId::RateBound => config
            .rate_bound_sources
            .iter()
            .map(|(name, src)| {
                let mut r = check_theorem1(src, &config.rate_bound_sigmas, config.n(config.rate_bound_samples), seed)?;
                for a in &mut r.assertions {
                    a.condition = format!("{} for {name}", a.condition);
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?,
        TheoremId::FlowAncestralRatio => vec![check_flow_ancestral_ratio(
            &config.source,
            &config.ratio_sigmas,
            config.n(config.ratio_samples),
            seed,
        )?],
        TheoremId::FlowOptimality => vec![check_flow_optimality(
            &config.source,
            config.optimality_sigma,
            config.n(config.optimality_samples),
            config.optimality_probes,
            &Rival::ALL,
            seed,
        )?],
        TheoremId::Smoothness => vec![check_smoothness_monotone(
            &config.source,
            &config.schedule,
            &config.smoothness_grid,
            config.n(config.smoothness_samples),
            seed,
        )?],
        TheoremId::GAnchors => {
            let n = config.n(config.g_samples);
            let mut reports = Vec::new();
            for anchor in &config.g_anchors {
                match anchor {
                    GAnchor::Normal { dim, sigmas } => {
                        let normal = AnalyticSource::standard_normal(*dim);
                        for &sigma in sigmas {
                            reports.push(check_g_anchor("normal", &normal, sigma, 1.0, n, seed)?);
                        }
                    }
                    GAnchor::Laplace { smoothing } => {
                        let laplace = SmoothedLaplace::unit_variance(*smoothing);
                        reports.push(check_g_anchor("laplace", &laplace, 0.0, 2.0, n, seed)?);
                    }
                }
            }
            reports
        }
        TheoremId::Realism => vec![check_realism(
            &config.source,
            &config.realism_sigmas,
            config.n(config.realism_samples),
            seed,
        )?],
    })
}

pub fn run_suite(config: &SuiteConfig, theorems: &[TheoremId]) -> Result<Vec<TheoremReport>> {
    let mut out = Vec::new();
    for &t in theorems {
        out.extend(run_one(config, t)?);
    }
    Ok(out)
}

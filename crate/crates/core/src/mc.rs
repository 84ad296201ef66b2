//! Population Monte Carlo: draw two devices per sample, tune them, compute
//! the swapped fidelity and collect the distribution.
//!
//! Sample `i` always uses the random stream `(seed, i)`, and every reduction
//! runs sequentially over the ordered sample vector, so a run is
//! bit-identical for any number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device_stats::ParamDistributions;
use crate::error::{invalid, Error, Result};
use crate::rng::sample_rng;
use crate::scenarios::{scenario_preset, Scenario};
use crate::swap::{swap_fidelity_analytic, SwapModelConfig};

pub const DEFAULT_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_BINS: usize = 200;
/// Histogram support.
pub const FIDELITY_RANGE: (f64, f64) = (0.5, 1.0);
/// Percentiles reported in the summary.
pub const PERCENTILES: [f64; 6] = [1.0, 5.0, 25.0, 75.0, 95.0, 99.0];

// values this far outside the support are roundoff, anything beyond is a bug
const SUPPORT_SLACK: f64 = 1e-12;

fn default_samples() -> u64 {
    DEFAULT_SAMPLES
}
fn default_bins() -> usize {
    DEFAULT_BINS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_samples")]
    pub n_samples: u64,
    pub seed: u64,
    pub scenario: Scenario,
    #[serde(default)]
    pub dists_a: ParamDistributions,
    #[serde(default)]
    pub dists_b: ParamDistributions,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub swap: SwapModelConfig,
}

impl McConfig {
    /// Defaults for a preset scenario.
    pub fn preset(scenario_id: u8, seed: u64) -> Result<Self> {
        Ok(Self {
            n_samples: DEFAULT_SAMPLES,
            seed,
            scenario: scenario_preset(scenario_id)?,
            dists_a: ParamDistributions::default(),
            dists_b: ParamDistributions::default(),
            bins: DEFAULT_BINS,
            swap: SwapModelConfig::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1 {
            return Err(invalid("n_samples", "must be >= 1"));
        }
        if self.bins < 2 {
            return Err(invalid("bins", format!("must be >= 2, got {}", self.bins)));
        }
        self.scenario.validate()?;
        self.scenario.distributions(&self.dists_a).validate()?;
        self.scenario.distributions(&self.dists_b).validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: McConfig,
    pub version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// `(p, value)` for each entry of [`PERCENTILES`].
    pub percentiles: [(f64, f64); 6],
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    pub samples: u64,
}

impl Summary {
    pub fn percentile(&self, p: f64) -> Option<f64> {
        self.percentiles
            .iter()
            .find(|(q, _)| *q == p)
            .map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityHistogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    /// Probability density per bin, integrating to one.
    pub densities: Vec<f64>,
    pub summary: Summary,
    pub provenance: Provenance,
}

impl FidelityHistogram {
    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.edges[self.edges.len() - 1] - self.edges[0]) / self.bins() as f64
    }

    /// `Σ density·width`.
    pub fn total_mass(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }

    /// Indices of bins with nonzero density.
    pub fn occupied_bins(&self) -> Vec<usize> {
        (0..self.bins())
            .filter(|&i| self.densities[i] > 0.0)
            .collect()
    }

    /// Bins ordered by edge, as `(lo, hi, density)`.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.edges
            .windows(2)
            .zip(&self.densities)
            .map(|(e, &d)| (e[0], e[1], d))
    }

    pub fn from_samples(samples: &[f64], bins: usize, provenance: Provenance) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        if bins < 2 {
            return Err(invalid("bins", format!("must be >= 2, got {bins}")));
        }
        let (lo, hi) = FIDELITY_RANGE;
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
            .collect();
        let mut counts = vec![0u64; bins];
        for &f in samples {
            if !f.is_finite() || f < lo - SUPPORT_SLACK || f > hi + SUPPORT_SLACK {
                return Err(Error::Numeric(format!("fidelity {f} outside [{lo}, {hi}]")));
            }
            let k = (((f - lo) / width).floor().max(0.0) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let n = samples.len() as f64;
        let densities = counts.iter().map(|&c| c as f64 / (n * width)).collect();
        Ok(Self {
            edges,
            densities,
            summary: summarize_samples(samples)?,
            provenance,
        })
    }
}

/// Linear-interpolation percentile of ascending data, `p` in percent.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

pub fn summarize_samples(samples: &[f64]) -> Result<Summary> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(Summary {
        mean,
        median: percentile_sorted(&sorted, 50.0),
        percentiles: PERCENTILES.map(|p| (p, percentile_sorted(&sorted, p))),
        std_dev: var.sqrt(),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        samples: samples.len() as u64,
    })
}

/// Fidelity of sample `index`.
pub fn sample_fidelity(
    cfg: &McConfig,
    dists_a: &ParamDistributions,
    dists_b: &ParamDistributions,
    index: u64,
) -> Result<f64> {
    let mut rng = sample_rng(cfg.seed, index);
    let a = dists_a.sample(&mut rng);
    let b = dists_b.sample(&mut rng);
    let pair = cfg.scenario.apply(&a, &b)?;
    swap_fidelity_analytic(&pair.a, &pair.b, pair.detuning_uev, &cfg.swap)
}

/// All per-sample fidelities in index order, on the current rayon pool.
pub fn run_samples(cfg: &McConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let da = cfg.scenario.distributions(&cfg.dists_a);
    let db = cfg.scenario.distributions(&cfg.dists_b);
    (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| sample_fidelity(cfg, &da, &db, i))
        .collect()
}

fn provenance(cfg: &McConfig) -> Provenance {
    Provenance {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

pub fn run(cfg: &McConfig) -> Result<FidelityHistogram> {
    let samples = run_samples(cfg)?;
    FidelityHistogram::from_samples(&samples, cfg.bins, provenance(cfg))
}

/// [`run`] on a dedicated pool of `threads` workers (`None`: rayon default).
pub fn run_with_threads(cfg: &McConfig, threads: Option<usize>) -> Result<FidelityHistogram> {
    let (hist, _) = run_with_samples(cfg, threads)?;
    Ok(hist)
}

/// Histogram plus the raw samples, for exact re-binning.
pub fn run_with_samples(
    cfg: &McConfig,
    threads: Option<usize>,
) -> Result<(FidelityHistogram, Vec<f64>)> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(invalid("threads", "must be >= 1"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    let samples = pool.install(|| run_samples(cfg))?;
    let hist = FidelityHistogram::from_samples(&samples, cfg.bins, provenance(cfg))?;
    Ok((hist, samples))
}

/// Probability mass in `[lo, hi]`: exact integral of the piecewise-constant
/// density. Ranges are clipped to the support; an empty range gives 0.
pub fn summarize(h: &FidelityHistogram, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    h.rows()
        .map(|(a, b, d)| {
            let overlap = b.min(hi) - a.max(lo);
            if overlap > 0.0 {
                d * overlap
            } else {
                0.0
            }
        })
        .sum()
}

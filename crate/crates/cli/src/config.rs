//! JSON run configuration. Every key carries its unit (`_nm`, `_uev`,
//! `_ns`); unknown keys are rejected and values are validated on load.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use qdswap_core::device_stats::{GaussianSpec, ParamDistributions};
use qdswap_core::scenarios::Scenario;
use qdswap_core::swap::SwapModelConfig;
use qdswap_core::tomography::MeasurementBasis;
use qdswap_core::{BellKind, QdParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Inclusive linear grid `start:stop:points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => vec![],
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    fn validate(&self, name: &str) -> Result<(), CliError> {
        if !self.start.is_finite() || !self.stop.is_finite() || self.points == 0 {
            return Err(CliError::Config(format!(
                "{name}: grid needs finite bounds and points >= 1"
            )));
        }
        Ok(())
    }
}

impl FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("expected start:stop:points, got '{s}'"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"));
        Ok(Grid {
            start: num(a)?,
            stop: num(b)?,
            points: n.trim().parse().map_err(|e| format!("'{n}': {e}"))?,
        })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fss_uev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1x_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2star_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<BellKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwapSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_a: Option<QdParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_b: Option<QdParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_uev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SwapModelConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_a_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_b_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_a_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_b_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_a_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_b_nm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Preset 1..=6; ignored when `scenario` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_id: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dists_a: Option<ParamDistributions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dists_b: Option<ParamDistributions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SwapModelConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fss_uev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1x_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2star_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<MeasurementBasis>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// FSS grid (µeV) for the swap surface, used for both sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fss_uev: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gates_ns: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_mu_nm: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_nm: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_nm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swap: Option<SwapSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonance: Option<ResonanceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub montecarlo: Option<MonteCarloSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tomography: Option<TomographySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn positive(name: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => {
            Err(CliError::Config(format!("{name} must be > 0, got {x}")))
        }
        _ => Ok(()),
    }
}

fn non_negative(name: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(x >= 0.0 && x.is_finite()) => {
            Err(CliError::Config(format!("{name} must be >= 0, got {x}")))
        }
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = &self.pair {
            non_negative("pair.fss_uev", p.fss_uev)?;
            positive("pair.t1x_ns", p.t1x_ns)?;
            positive("pair.t2star_ns", p.t2star_ns)?;
            positive("pair.gate_ns", p.gate_ns)?;
        }
        if let Some(s) = &self.swap {
            for q in [&s.source_a, &s.source_b].into_iter().flatten() {
                q.validate()?;
            }
            if let Some(d) = s.detuning_uev {
                if !d.is_finite() {
                    return Err(CliError::Config("swap.detuning_uev must be finite".into()));
                }
            }
        }
        if let Some(r) = &self.resonance {
            non_negative("resonance.sigma_a_nm", r.sigma_a_nm)?;
            non_negative("resonance.sigma_b_nm", r.sigma_b_nm)?;
            non_negative("resonance.tune_a_nm", r.tune_a_nm)?;
            non_negative("resonance.tune_b_nm", r.tune_b_nm)?;
            positive("resonance.mu_a_nm", r.mu_a_nm)?;
            positive("resonance.mu_b_nm", r.mu_b_nm)?;
        }
        if let Some(m) = &self.montecarlo {
            if m.n_samples == Some(0) {
                return Err(CliError::Config("montecarlo.n_samples must be >= 1".into()));
            }
            if matches!(m.bins, Some(b) if b < 2) {
                return Err(CliError::Config("montecarlo.bins must be >= 2".into()));
            }
            if let Some(id) = m.scenario_id {
                qdswap_core::scenarios::scenario_preset(id)?;
            }
            if let Some(s) = &m.scenario {
                s.validate()?;
            }
            for d in [&m.dists_a, &m.dists_b].into_iter().flatten() {
                d.validate()?;
            }
        }
        if let Some(t) = &self.tomography {
            non_negative("tomography.fss_uev", t.fss_uev)?;
            positive("tomography.t1x_ns", t.t1x_ns)?;
            positive("tomography.t2star_ns", t.t2star_ns)?;
            positive("tomography.gate_ns", t.gate_ns)?;
        }
        if let Some(s) = &self.sweep {
            for (name, g) in [
                ("sweep.fss_uev", &s.fss_uev),
                ("sweep.delta_mu_nm", &s.delta_mu_nm),
                ("sweep.sigma_nm", &s.sigma_nm),
            ] {
                if let Some(g) = g {
                    g.validate(name)?;
                }
            }
            for &g in s.gates_ns.iter().flatten() {
                positive("sweep.gates_ns", Some(g))?;
            }
            non_negative("sweep.tune_nm", s.tune_nm)?;
        }
        Ok(())
    }
}

/// Default truncation for a fitted parameter column, keyed by config name.
pub fn fitted_spec(name: &str, mu: f64, sigma: f64) -> GaussianSpec {
    match name {
        "fss_uev" => GaussianSpec::truncated(mu, sigma, Some(0.0), None),
        "t1x_ns" | "t1xx_ns" | "t2star_ns" => qdswap_core::device_stats::positive_spec(mu, sigma),
        _ => GaussianSpec::new(mu, sigma),
    }
}

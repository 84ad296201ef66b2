//! Device-population statistics: (truncated) Gaussian parameter
//! distributions, Gaussian fits and the probability of tuning two randomly
//! picked dots into resonance.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::cascade::QdParams;
use crate::error::{invalid, Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Normal distribution, optionally truncated to `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub mu: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

// Below this retained mass rejection sampling gets slow; switch to inverse CDF.
const REJECTION_MIN_MASS: f64 = 0.2;

impl GaussianSpec {
    pub fn new(mu: f64, sigma: f64) -> Self {
        Self {
            mu,
            sigma,
            lower: None,
            upper: None,
        }
    }

    pub fn truncated(mu: f64, sigma: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        Self {
            mu,
            sigma,
            lower,
            upper,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(invalid("mu", format!("must be finite, got {}", self.mu)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(invalid(
                "sigma",
                format!("must be finite and >= 0, got {}", self.sigma),
            ));
        }
        if let (Some(lo), Some(hi)) = (self.lower, self.upper) {
            if !(lo < hi) {
                return Err(invalid(
                    "lower",
                    format!("lower bound {lo} must be below upper {hi}"),
                ));
            }
        }
        let (lo, hi) = self.bounds();
        if self.sigma == 0.0 {
            if !(lo..=hi).contains(&self.mu) {
                return Err(invalid(
                    "mu",
                    format!(
                        "degenerate distribution at {} lies outside its bounds",
                        self.mu
                    ),
                ));
            }
        } else if !(self.mass() > 0.0) {
            return Err(invalid(
                "lower",
                "truncation interval carries no probability mass",
            ));
        }
        Ok(())
    }

    pub fn bounds(&self) -> (f64, f64) {
        (
            self.lower.unwrap_or(f64::NEG_INFINITY),
            self.upper.unwrap_or(f64::INFINITY),
        )
    }

    fn standardized_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.bounds();
        ((lo - self.mu) / self.sigma, (hi - self.mu) / self.sigma)
    }

    /// Probability mass of the parent normal inside the truncation interval.
    pub fn mass(&self) -> f64 {
        if self.sigma == 0.0 {
            return 1.0;
        }
        let (a, b) = self.standardized_bounds();
        // evaluate in the upper tail when both bounds sit there
        if a > 0.0 {
            std_normal_cdf(-a) - std_normal_cdf(-b)
        } else {
            std_normal_cdf(b) - std_normal_cdf(a)
        }
    }

    /// Probability density, renormalized over the truncation interval.
    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if x < lo || x > hi || self.sigma == 0.0 {
            return 0.0;
        }
        std_normal_pdf((x - self.mu) / self.sigma) / (self.sigma * self.mass())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if x < lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        if self.sigma == 0.0 {
            return if x >= self.mu { 1.0 } else { 0.0 };
        }
        let (a, _) = self.standardized_bounds();
        let z = (x - self.mu) / self.sigma;
        ((std_normal_cdf(z) - std_normal_cdf(a)) / self.mass()).clamp(0.0, 1.0)
    }

    /// `P(X > x)`
    pub fn survival(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if x >= hi {
            return 0.0;
        }
        if x < lo {
            return 1.0;
        }
        if self.sigma == 0.0 {
            return if x < self.mu { 1.0 } else { 0.0 };
        }
        let (_, b) = self.standardized_bounds();
        let z = (x - self.mu) / self.sigma;
        ((std_normal_cdf(-z) - std_normal_cdf(-b)) / self.mass()).clamp(0.0, 1.0)
    }

    /// Mean of the truncated distribution.
    pub fn mean(&self) -> f64 {
        if self.sigma == 0.0 {
            return self.mu;
        }
        let (a, b) = self.standardized_bounds();
        let pa = if a.is_finite() {
            std_normal_pdf(a)
        } else {
            0.0
        };
        let pb = if b.is_finite() {
            std_normal_pdf(b)
        } else {
            0.0
        };
        self.mu + self.sigma * (pa - pb) / self.mass()
    }

    /// Draws one value, respecting the truncation exactly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return self.mu;
        }
        let (lo, hi) = self.bounds();
        if self.mass() >= REJECTION_MIN_MASS {
            loop {
                let z: f64 = rng.sample(StandardNormal);
                let x = self.mu + self.sigma * z;
                if x >= lo && x <= hi {
                    return x;
                }
            }
        }
        let (a, b) = self.standardized_bounds();
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
        let u: f64 = rng.random();
        let x = self.mu + self.sigma * unit.inverse_cdf(pa + u * (pb - pa));
        x.clamp(lo, hi)
    }

    /// Same distribution with zero spread.
    pub fn collapsed(&self) -> Self {
        Self {
            sigma: 0.0,
            ..*self
        }
    }
}

/// Maximum-likelihood Gaussian fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedGaussian {
    pub spec: GaussianSpec,
    pub count: usize,
}

/// Untruncated maximum-likelihood fit; `sigma` uses the population
/// convention (divide by `n`).
pub fn fit_gaussian(samples: &[f64]) -> Result<FittedGaussian> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(invalid("samples", format!("non-finite value {bad}")));
    }
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    Ok(FittedGaussian {
        spec: GaussianSpec::new(mu, var.sqrt()),
        count: samples.len(),
    })
}

/// Probability that two dots drawn from `a` and `b` can be brought into
/// resonance when each can be tuned by up to `tune_a`/`tune_b`:
/// `P(|λ_A − λ_B| ≤ δ_A + δ_B)` with `λ_A − λ_B ~ N(Δμ, σ_A² + σ_B²)`.
///
/// Truncation bounds of the specs are ignored.
pub fn resonance_probability(
    a: &GaussianSpec,
    b: &GaussianSpec,
    tune_a: f64,
    tune_b: f64,
) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    for (name, t) in [("tune_a", tune_a), ("tune_b", tune_b)] {
        if !(t >= 0.0) {
            return Err(invalid(name, format!("must be >= 0, got {t}")));
        }
    }
    let delta = tune_a + tune_b;
    let dmu = a.mu - b.mu;
    let sd = a.sigma.hypot(b.sigma);
    if sd == 0.0 {
        return Ok(if dmu.abs() <= delta { 1.0 } else { 0.0 });
    }
    if delta.is_infinite() {
        return Ok(1.0);
    }
    let hi = (delta - dmu) / sd;
    let lo = (-delta - dmu) / sd;
    // difference of CDFs taken on the side that avoids cancellation
    let p = if lo > 0.0 {
        std_normal_cdf(-lo) - std_normal_cdf(-hi)
    } else {
        std_normal_cdf(hi) - std_normal_cdf(lo)
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Rows `(Δμ, σ, P)` for equal-width populations with means `Δμ` apart.
pub fn resonance_sweep(
    dmu_values: &[f64],
    sigma_values: &[f64],
    tune: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::with_capacity(dmu_values.len() * sigma_values.len());
    for &dmu in dmu_values {
        for &sigma in sigma_values {
            let a = GaussianSpec::new(dmu, sigma);
            let b = GaussianSpec::new(0.0, sigma);
            rows.push((dmu, sigma, resonance_probability(&a, &b, tune, tune)?));
        }
    }
    Ok(rows)
}

/// Parameter distributions of one device population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDistributions {
    pub wavelength_x_nm: GaussianSpec,
    pub fss_uev: GaussianSpec,
    pub t1x_ns: GaussianSpec,
    pub t1xx_ns: GaussianSpec,
    pub t2star_ns: GaussianSpec,
}

/// Lower truncation for strictly positive quantities, as a fraction of the mean.
pub const POSITIVE_FLOOR_FRACTION: f64 = 0.01;

/// Spec for a positive-definite quantity, truncated at 1% of its mean.
pub fn positive_spec(mu: f64, sigma: f64) -> GaussianSpec {
    GaussianSpec::truncated(mu, sigma, Some(POSITIVE_FLOOR_FRACTION * mu), None)
}

impl Default for ParamDistributions {
    fn default() -> Self {
        Self {
            wavelength_x_nm: GaussianSpec::new(777.85, 2.19),
            fss_uev: GaussianSpec::truncated(11.0, 6.5, Some(0.0), None),
            t1x_ns: positive_spec(0.300, 0.050),
            t1xx_ns: positive_spec(0.150, 0.025),
            t2star_ns: positive_spec(0.5, 0.25),
        }
    }
}

impl ParamDistributions {
    pub fn validate(&self) -> Result<()> {
        self.wavelength_x_nm.validate()?;
        self.fss_uev.validate()?;
        self.t1x_ns.validate()?;
        self.t1xx_ns.validate()?;
        self.t2star_ns.validate()?;
        if !(self.wavelength_x_nm.mu > 0.0) {
            return Err(invalid("wavelength_x_nm", "mean must be > 0"));
        }
        let positive = [
            ("t1x_ns", &self.t1x_ns),
            ("t1xx_ns", &self.t1xx_ns),
            ("t2star_ns", &self.t2star_ns),
        ];
        for (name, spec) in positive {
            let lo = spec.bounds().0;
            let ok = if spec.sigma == 0.0 {
                spec.mu > 0.0
            } else {
                lo > 0.0
            };
            if !ok {
                return Err(invalid(
                    name,
                    "needs a positive lower bound (or zero sigma with positive mean)",
                ));
            }
        }
        let fss_ok = if self.fss_uev.sigma == 0.0 {
            self.fss_uev.mu >= 0.0
        } else {
            self.fss_uev.bounds().0 >= 0.0
        };
        if !fss_ok {
            return Err(invalid("fss_uev", "needs a lower bound >= 0"));
        }
        Ok(())
    }

    /// Every spread set to zero: each parameter sits at its mean.
    pub fn collapsed(&self) -> Self {
        Self {
            wavelength_x_nm: self.wavelength_x_nm.collapsed(),
            fss_uev: self.fss_uev.collapsed(),
            t1x_ns: self.t1x_ns.collapsed(),
            t1xx_ns: self.t1xx_ns.collapsed(),
            t2star_ns: self.t2star_ns.collapsed(),
        }
    }

    /// Draws one dot. The draw order is fixed: wavelength, FSS, T1_X,
    /// T1_XX, T2★.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> QdParams {
        QdParams {
            wavelength_x_nm: self.wavelength_x_nm.sample(rng),
            fss_uev: self.fss_uev.sample(rng),
            t1x_ns: self.t1x_ns.sample(rng),
            t1xx_ns: self.t1xx_ns.sample(rng),
            t2star_ns: self.t2star_ns.sample(rng),
            on_fraction: 1.0,
        }
    }
}

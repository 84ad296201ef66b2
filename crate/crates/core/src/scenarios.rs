//! Tuning mechanisms applied to a sampled pair of dots, and the cumulative
//! preset scenarios 1–6.

use serde::{Deserialize, Serialize};

use crate::cascade::{wavelength_gap_to_energy, QdParams};
use crate::device_stats::{positive_spec, GaussianSpec, ParamDistributions};
use crate::error::{invalid, Result};

/// Full temperature tuning range of the exciton line (nm).
pub const TEMPERATURE_MAX_SHIFT_NM: f64 = 0.445;
/// Coherence-time reduction after using the full temperature range.
pub const TEMPERATURE_T2_FACTOR: f64 = 3.0;
pub const STRAIN_FSS_MAGNITUDE_UEV: f64 = 50.0;
pub const PURCELL_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TuningSpec {
    /// Thermal shift of up to `max_shift_nm` per device; pure dephasing
    /// degrades linearly to `1/full_range_t2_factor` at full range.
    Temperature {
        max_shift_nm: f64,
        full_range_t2_factor: f64,
    },
    /// Brings both devices into exact resonance, nothing else changes.
    StrainWavelength,
    /// Reduces the splitting by up to `magnitude_uev`.
    StrainFss { magnitude_uev: f64 },
    /// Selective Purcell enhancement of the XX transition.
    PurcellXx { factor: f64 },
}

impl TuningSpec {
    pub fn temperature() -> Self {
        TuningSpec::Temperature {
            max_shift_nm: TEMPERATURE_MAX_SHIFT_NM,
            full_range_t2_factor: TEMPERATURE_T2_FACTOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TuningSpec::Temperature {
                max_shift_nm,
                full_range_t2_factor,
            } => {
                if !(max_shift_nm >= 0.0) || !max_shift_nm.is_finite() {
                    return Err(invalid(
                        "max_shift_nm",
                        format!("must be >= 0, got {max_shift_nm}"),
                    ));
                }
                if !(full_range_t2_factor >= 1.0) || !full_range_t2_factor.is_finite() {
                    return Err(invalid(
                        "full_range_t2_factor",
                        format!("must be >= 1, got {full_range_t2_factor}"),
                    ));
                }
            }
            TuningSpec::StrainWavelength => {}
            TuningSpec::StrainFss { magnitude_uev } => {
                if !(magnitude_uev >= 0.0) {
                    return Err(invalid(
                        "magnitude_uev",
                        format!("must be >= 0, got {magnitude_uev}"),
                    ));
                }
            }
            TuningSpec::PurcellXx { factor } => {
                if !(factor >= 1.0) || !factor.is_finite() {
                    return Err(invalid(
                        "factor",
                        format!("Purcell factor must be >= 1, got {factor}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Two dots after tuning, with the XX–XX detuning left over (µeV).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedPair {
    pub a: QdParams,
    pub b: QdParams,
    pub detuning_uev: f64,
}

impl TunedPair {
    /// Untuned pair; detuning follows from the wavelength gap.
    pub fn new(a: QdParams, b: QdParams) -> Self {
        let gap = a.wavelength_x_nm - b.wavelength_x_nm;
        let mean = 0.5 * (a.wavelength_x_nm + b.wavelength_x_nm);
        Self {
            a,
            b,
            detuning_uev: wavelength_gap_to_energy(gap, mean),
        }
    }
}

/// Thermal tuning with the default range (0.445 nm, threefold T2★ loss).
pub fn apply_temperature_tuning(a: &QdParams, b: &QdParams) -> Result<TunedPair> {
    temperature_tuning(a, b, TEMPERATURE_MAX_SHIFT_NM, TEMPERATURE_T2_FACTOR)
}

/// Moves the two lines towards each other, each by at most `max_shift_nm`.
/// The bluer device redshifts first; the other closes what is left. A
/// device using fraction `u` of its range has its T2★ divided by
/// `1 + (factor − 1)·u`.
pub fn temperature_tuning(
    a: &QdParams,
    b: &QdParams,
    max_shift_nm: f64,
    t2_factor: f64,
) -> Result<TunedPair> {
    TuningSpec::Temperature {
        max_shift_nm,
        full_range_t2_factor: t2_factor,
    }
    .validate()?;
    let (mut a, mut b) = (*a, *b);
    let a_is_blue = a.wavelength_x_nm <= b.wavelength_x_nm;
    let (blue, red) = if a_is_blue {
        (&mut a, &mut b)
    } else {
        (&mut b, &mut a)
    };
    let gap = red.wavelength_x_nm - blue.wavelength_x_nm;
    let blue_shift = gap.min(max_shift_nm);
    let red_shift = (gap - blue_shift).min(max_shift_nm);
    let residual = gap - blue_shift - red_shift;
    blue.wavelength_x_nm += blue_shift;
    red.wavelength_x_nm -= red_shift;
    for (dev, shift) in [(blue, blue_shift), (red, red_shift)] {
        let used = if max_shift_nm > 0.0 {
            shift / max_shift_nm
        } else {
            0.0
        };
        dev.t2star_ns /= 1.0 + (t2_factor - 1.0) * used;
    }
    let mean = 0.5 * (a.wavelength_x_nm + b.wavelength_x_nm);
    Ok(TunedPair {
        a,
        b,
        detuning_uev: wavelength_gap_to_energy(residual, mean),
    })
}

/// Ideal wavelength tuning: residual detuning zero, parameters untouched.
pub fn apply_strain_wavelength(a: &QdParams, b: &QdParams) -> TunedPair {
    TunedPair {
        a: *a,
        b: *b,
        detuning_uev: 0.0,
    }
}

pub fn apply_strain_fss(params: &QdParams, magnitude_uev: f64) -> Result<QdParams> {
    TuningSpec::StrainFss { magnitude_uev }.validate()?;
    Ok(QdParams {
        fss_uev: (params.fss_uev - magnitude_uev).max(0.0),
        ..*params
    })
}

/// Shortens only the XX lifetime by `f_p`.
pub fn apply_purcell(params: &QdParams, f_p: f64) -> Result<QdParams> {
    TuningSpec::PurcellXx { factor: f_p }.validate()?;
    Ok(QdParams {
        t1xx_ns: params.t1xx_ns / f_p,
        ..*params
    })
}

/// A stack of tuning mechanisms plus population overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub tuning: Vec<TuningSpec>,
    /// Replaces the T2★ distribution of both populations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2star_override: Option<GaussianSpec>,
    /// Removes all parameter spread.
    #[serde(default)]
    pub zero_sigma: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        for t in &self.tuning {
            t.validate()?;
        }
        if let Some(spec) = &self.t2star_override {
            spec.validate()?;
        }
        Ok(())
    }

    /// Population actually sampled under this scenario.
    pub fn distributions(&self, base: &ParamDistributions) -> ParamDistributions {
        let mut d = *base;
        if let Some(t2) = self.t2star_override {
            d.t2star_ns = t2;
        }
        if self.zero_sigma {
            d = d.collapsed();
        }
        d
    }

    /// Applies the stack in order to a freshly drawn pair.
    pub fn apply(&self, a: &QdParams, b: &QdParams) -> Result<TunedPair> {
        let mut pair = TunedPair::new(*a, *b);
        for t in &self.tuning {
            pair = match *t {
                TuningSpec::Temperature {
                    max_shift_nm,
                    full_range_t2_factor,
                } => temperature_tuning(&pair.a, &pair.b, max_shift_nm, full_range_t2_factor)?,
                TuningSpec::StrainWavelength => apply_strain_wavelength(&pair.a, &pair.b),
                TuningSpec::StrainFss { magnitude_uev } => TunedPair {
                    a: apply_strain_fss(&pair.a, magnitude_uev)?,
                    b: apply_strain_fss(&pair.b, magnitude_uev)?,
                    ..pair
                },
                TuningSpec::PurcellXx { factor } => TunedPair {
                    a: apply_purcell(&pair.a, factor)?,
                    b: apply_purcell(&pair.b, factor)?,
                    ..pair
                },
            };
        }
        Ok(pair)
    }
}

/// Preset scenarios, each adding to the previous one:
/// 1. temperature tuning only;
/// 2. ideal wavelength tuning;
/// 3. plus 50 µeV splitting tuning;
/// 4. plus XX Purcell factor 10;
/// 5. plus T2★ raised to 4 ± 2 ns;
/// 6. scenario 5 without any parameter spread.
pub fn scenario_preset(id: u8) -> Result<Scenario> {
    let strain = [
        TuningSpec::StrainWavelength,
        TuningSpec::StrainFss {
            magnitude_uev: STRAIN_FSS_MAGNITUDE_UEV,
        },
    ];
    let purcell = TuningSpec::PurcellXx {
        factor: PURCELL_FACTOR,
    };
    let (tuning, t2star_override, zero_sigma) = match id {
        1 => (vec![TuningSpec::temperature()], None, false),
        2 => (vec![TuningSpec::StrainWavelength], None, false),
        3 => (strain.to_vec(), None, false),
        4 => ([&strain[..], &[purcell]].concat(), None, false),
        5 | 6 => (
            [&strain[..], &[purcell]].concat(),
            Some(positive_spec(4.0, 2.0)),
            id == 6,
        ),
        _ => {
            return Err(invalid(
                "scenario",
                format!("preset id must be 1..=6, got {id}"),
            ))
        }
    };
    Ok(Scenario {
        name: format!("preset-{id}"),
        tuning,
        t2star_override,
        zero_sigma,
    })
}

//! Entanglement swapping between two cascade sources.
//!
//! Photons 1,2 come from source A (X, XX) and photons 3,4 from source B
//! (XX, X). The XX photons 2 and 3 are projected on a Bell state; the
//! remaining photons 1 and 4 carry the swapped entanglement. Because the
//! beam splitter erases which source fed which BSM detector, two phase
//! assignments are possible and the swapped state is their equal mixture.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{
    angular_frequency, coherence_factor_dephased, hom_visibility, pair_state_with_phase, QdParams,
};
use crate::error::{invalid, Error, Result};
use crate::polarization::{bell_state, fidelity, project, BellKind, DensityMatrix, Ket};
use crate::rng::{sample_rng, REDUCE_CHUNK};

/// Detection times of one four-photon event (ns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventTimes {
    /// X photon of source A.
    pub t1: f64,
    /// X photon of source B.
    pub t4: f64,
    pub t_bsm1: f64,
    pub t_bsm2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseVariant {
    /// BSM detector 1 saw the photon of source A.
    Primed,
    /// BSM detector 1 saw the photon of source B.
    DoublePrimed,
}

/// Pair phases implied by one assignment of BSM detections to sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseAssignment {
    pub alpha: f64,
    pub beta: f64,
    pub variant: PhaseVariant,
    pub times: EventTimes,
}

impl PhaseAssignment {
    pub fn new(fss_a: f64, fss_b: f64, times: EventTimes, variant: PhaseVariant) -> Self {
        let (wa, wb) = (angular_frequency(fss_a), angular_frequency(fss_b));
        let (bsm_a, bsm_b) = match variant {
            PhaseVariant::Primed => (times.t_bsm1, times.t_bsm2),
            PhaseVariant::DoublePrimed => (times.t_bsm2, times.t_bsm1),
        };
        Self {
            alpha: -wa * (times.t1 - bsm_a),
            beta: -wb * (times.t4 - bsm_b),
            variant,
            times,
        }
    }
}

/// How the two XX detection times at the BSM relate in the sampling oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BsmTiming {
    /// Both XX photons are registered in the same time bin; the two phase
    /// assignments coincide.
    #[default]
    Coincident,
    /// Each XX photon is detected at its own emission time, so the wrong
    /// assignment carries an extra phase `(ω_A+ω_B)(t_bsm1 − t_bsm2)`.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwapModelConfig {
    /// Force unit two-photon interference visibility at the BSM.
    pub ideal_bsm: bool,
    /// Include the cascade timing-jitter limit in the visibility.
    pub include_cascade: bool,
    /// Weight the pair coherence by `e^{−t/T2★}` over the exciton lifetime.
    pub pair_cross_dephasing: bool,
    pub bsm_timing: BsmTiming,
    pub target: BellKind,
}

impl Default for SwapModelConfig {
    fn default() -> Self {
        Self {
            ideal_bsm: false,
            include_cascade: true,
            pair_cross_dephasing: false,
            bsm_timing: BsmTiming::Coincident,
            target: BellKind::PsiMinus,
        }
    }
}

impl SwapModelConfig {
    pub fn ideal() -> Self {
        Self {
            ideal_bsm: true,
            ..Self::default()
        }
    }
}

/// `½(|HH⟩+e^{iα}|VV⟩)₁₂ ⊗ (|HH⟩+e^{iβ}|VV⟩)₃₄`
pub fn four_photon_state(alpha: f64, beta: f64) -> Ket {
    pair_state_with_phase(alpha)
        .tensor(&pair_state_with_phase(beta))
        .expect("4 x 4 = 16")
}

/// Normalized state of photons (1,4) after projecting (2,3) on `Ψ⁻`.
pub fn swapped_state(alpha: f64, beta: f64) -> Result<Ket> {
    let bell = bell_state(BellKind::PsiMinus);
    project(&bell, &four_photon_state(alpha, beta), (2, 3))?.normalize()
}

/// Equal-weight mixture of the swapped states of both phase assignments.
pub fn swapped_mixture(fss_a: f64, fss_b: f64, times: &EventTimes) -> Result<DensityMatrix> {
    let parts = [PhaseVariant::Primed, PhaseVariant::DoublePrimed]
        .into_iter()
        .map(|v| {
            let pa = PhaseAssignment::new(fss_a, fss_b, *times, v);
            Ok((0.5, swapped_state(pa.alpha, pa.beta)?.outer()))
        })
        .collect::<Result<Vec<_>>>()?;
    DensityMatrix::mixture(&parts)
}

/// Interference visibility used to weight the swapped state.
pub fn bsm_visibility(
    a: &QdParams,
    b: &QdParams,
    detuning_uev: f64,
    cfg: &SwapModelConfig,
) -> Result<f64> {
    if cfg.ideal_bsm {
        a.validate()?;
        b.validate()?;
        Ok(1.0)
    } else {
        hom_visibility(a, b, detuning_uev, cfg.include_cascade)
    }
}

fn pair_coherence(p: &QdParams, cfg: &SwapModelConfig) -> Result<Complex64> {
    let t2 = cfg.pair_cross_dephasing.then_some(p.t2star_ns);
    coherence_factor_dephased(p.fss_uev, p.t1x_ns, None, t2)
}

/// Characteristic function `E[e^{−ik(t_A − t_B)}]` of the XX emission-time
/// difference.
fn bsm_offset_factor(a: &QdParams, b: &QdParams) -> Complex64 {
    let k = angular_frequency(a.fss_uev) + angular_frequency(b.fss_uev);
    let i = Complex64::i();
    1.0 / ((1.0 + i * k * a.t1xx_ns) * (1.0 - i * k * b.t1xx_ns))
}

/// Closed-form swapped-state fidelity with `Ψ⁻`:
/// `F = 1/2 + (V/2)·Re[C_A C_B*]` for coincident BSM timing, where `C_i`
/// are the emission-averaged pair coherences and `V` the BSM visibility.
/// Independent BSM timing averages the two assignments,
/// `F = 1/2 + (V/4)·Re[C_A C_B* (1 + K)]`, with `K` the characteristic
/// function of the XX emission-time difference.
pub fn swap_fidelity_analytic(
    a: &QdParams,
    b: &QdParams,
    detuning_uev: f64,
    cfg: &SwapModelConfig,
) -> Result<f64> {
    let v = bsm_visibility(a, b, detuning_uev, cfg)?;
    swap_fidelity_at_visibility(a, b, v, cfg)
}

/// Closed-form fidelity for a given BSM visibility `v ∈ [0, 1]`.
pub fn swap_fidelity_at_visibility(
    a: &QdParams,
    b: &QdParams,
    v: f64,
    cfg: &SwapModelConfig,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid("visibility", format!("must be in [0, 1], got {v}")));
    }
    let ca = pair_coherence(a, cfg)?;
    let cb = pair_coherence(b, cfg)?;
    let mut overlap = ca * cb.conj();
    if cfg.bsm_timing == BsmTiming::Independent {
        overlap = overlap * (1.0 + bsm_offset_factor(a, b)) * 0.5;
    }
    let sign = match cfg.target {
        BellKind::PsiMinus => 1.0,
        BellKind::PsiPlus => -1.0,
        // the swapped state has no HH/VV support
        BellKind::PhiPlus | BellKind::PhiMinus => return Ok(0.0),
    };
    let f = 0.5 + sign * 0.5 * v * overlap.re;
    Ok(f.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Draws the event times of one emission from both sources.
fn draw_times<R: Rng>(
    rng: &mut R,
    a: &QdParams,
    b: &QdParams,
    timing: BsmTiming,
) -> (EventTimes, f64, f64) {
    let tau_a = a.t1x_ns * rng.sample::<f64, _>(Exp1);
    let tau_b = b.t1x_ns * rng.sample::<f64, _>(Exp1);
    let xx_a = a.t1xx_ns * rng.sample::<f64, _>(Exp1);
    let xx_b = b.t1xx_ns * rng.sample::<f64, _>(Exp1);
    let times = match timing {
        BsmTiming::Coincident => EventTimes {
            t1: xx_a + tau_a,
            t4: xx_a + tau_b,
            t_bsm1: xx_a,
            t_bsm2: xx_a,
        },
        BsmTiming::Independent => EventTimes {
            t1: xx_a + tau_a,
            t4: xx_b + tau_b,
            t_bsm1: xx_a,
            t_bsm2: xx_b,
        },
    };
    (times, tau_a, tau_b)
}

/// Fidelity of one sampled swapping event, built through the four-photon
/// state, the Bell projection and the phase-assignment mixture.
fn sample_fidelity<R: Rng>(
    rng: &mut R,
    a: &QdParams,
    b: &QdParams,
    visibility: f64,
    cfg: &SwapModelConfig,
    target: &Ket,
) -> Result<f64> {
    let (times, tau_a, tau_b) = draw_times(rng, a, b, cfg.bsm_timing);
    let mut rho = swapped_mixture(a.fss_uev, b.fss_uev, &times)?;
    if cfg.pair_cross_dephasing {
        rho = rho.dephase((-tau_a / a.t2star_ns - tau_b / b.t2star_ns).exp());
    }
    if visibility < 1.0 {
        rho = DensityMatrix::mixture(&[
            (visibility, rho.clone()),
            (1.0 - visibility, rho.dephase(0.0)),
        ])?;
    }
    fidelity(&rho, target)
}

/// Sampling estimate of the swapped fidelity, the independent check of
/// [`swap_fidelity_analytic`]. Deterministic for a given `seed`.
pub fn swap_fidelity_mc(
    a: &QdParams,
    b: &QdParams,
    detuning_uev: f64,
    cfg: &SwapModelConfig,
    n: u64,
    seed: u64,
) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let visibility = bsm_visibility(a, b, detuning_uev, cfg)?;
    let target = bell_state(cfg.target);
    let chunks = n.div_ceil(REDUCE_CHUNK as u64);
    let partials = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * REDUCE_CHUNK as u64;
            let hi = (lo + REDUCE_CHUNK as u64).min(n);
            let (mut s, mut s2) = (0.0, 0.0);
            for i in lo..hi {
                let mut rng = sample_rng(seed, i);
                let f = sample_fidelity(&mut rng, a, b, visibility, cfg, &target)?;
                s += f;
                s2 += f * f;
            }
            Ok((s, s2))
        })
        .collect::<Result<Vec<_>>>()?;
    let (s, s2) = partials
        .iter()
        .fold((0.0, 0.0), |(s, s2), (a, b)| (s + a, s2 + b));
    let nf = n as f64;
    let mean = s / nf;
    let var = if n > 1 {
        ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        stderr: (var / nf).sqrt(),
        samples: n,
    })
}

/// Fidelity surface over a grid of splittings for two otherwise equal
/// sources; rows are `(fss_a, fss_b, fidelity)`.
pub fn fidelity_surface(
    base: &QdParams,
    fss_values: &[f64],
    cfg: &SwapModelConfig,
) -> Result<Vec<(f64, f64, f64)>> {
    if !(base.t1x_ns > 0.0) {
        return Err(invalid("t1x_ns", "must be > 0"));
    }
    let mut rows = Vec::with_capacity(fss_values.len() * fss_values.len());
    for &sa in fss_values {
        for &sb in fss_values {
            let a = QdParams {
                fss_uev: sa,
                ..*base
            };
            let b = QdParams {
                fss_uev: sb,
                ..*base
            };
            rows.push((sa, sb, swap_fidelity_analytic(&a, &b, 0.0, cfg)?));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::Pol;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn qd(fss: f64) -> QdParams {
        QdParams {
            fss_uev: fss,
            ..QdParams::default()
        }
    }

    #[test]
    fn four_photon_zero_phase_is_product_of_phi_plus() {
        let phi = bell_state(BellKind::PhiPlus);
        let expect = phi.tensor(&phi).unwrap();
        let got = four_photon_state(0.0, 0.0);
        assert!((got.as_vector() - expect.as_vector()).norm() < 1e-15);
    }

    #[test]
    fn projection_reproduces_relative_phase() {
        let (alpha, beta) = (1.3, 0.4);
        let k = swapped_state(alpha, beta).unwrap();
        let hv = k.amplitude(1);
        let vh = k.amplitude(2);
        let ratio = vh / hv;
        let expect = -Complex64::from_polar(1.0, alpha - beta);
        assert!((ratio - expect).norm() < 1e-14);
        assert_abs_diff_eq!(hv.norm(), FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn phase_difference_pi_gives_psi_plus() {
        let k = swapped_state(PI, 0.0).unwrap();
        let psi_p = bell_state(BellKind::PsiPlus);
        assert_abs_diff_eq!(k.inner(&psi_p).unwrap().norm(), 1.0, epsilon = 1e-14);
        let hv = Ket::basis(&[Pol::H, Pol::V]).unwrap();
        assert_abs_diff_eq!(k.inner(&hv).unwrap().norm(), FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn phase_assignment_variants() {
        let times = EventTimes {
            t1: 1.0,
            t4: 1.5,
            t_bsm1: 0.2,
            t_bsm2: 0.6,
        };
        let p = PhaseAssignment::new(2.0, 3.0, times, PhaseVariant::Primed);
        let q = PhaseAssignment::new(2.0, 3.0, times, PhaseVariant::DoublePrimed);
        let (wa, wb) = (2.0 / crate::PHYS.hbar, 3.0 / crate::PHYS.hbar);
        assert_abs_diff_eq!(p.alpha, -wa * 0.8, epsilon = 1e-14);
        assert_abs_diff_eq!(p.beta, -wb * 0.9, epsilon = 1e-14);
        assert_abs_diff_eq!(q.alpha, -wa * 0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(q.beta, -wb * 1.3, epsilon = 1e-14);
    }

    #[test]
    fn mixture_cases() {
        let psi = bell_state(BellKind::PsiMinus);
        let times = EventTimes {
            t1: 0.7,
            t4: 0.3,
            t_bsm1: 0.1,
            t_bsm2: 0.25,
        };
        let rho = swapped_mixture(0.0, 0.0, &times).unwrap();
        assert_abs_diff_eq!(fidelity(&rho, &psi).unwrap(), 1.0, epsilon = 1e-14);

        let same = EventTimes {
            t_bsm2: 0.1,
            ..times
        };
        let rho = swapped_mixture(9.0, 5.0, &same).unwrap();
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-12);

        let rho = swapped_mixture(10.0, 10.0, &times).unwrap();
        assert!(fidelity(&rho, &psi).unwrap() < 1.0);
        assert!(rho.purity() < 1.0);
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
        for e in rho.eigenvalues() {
            assert!((-1e-12..=1.0 + 1e-12).contains(&e));
        }
    }

    #[test]
    fn analytic_anchors() {
        let ideal = SwapModelConfig::ideal();
        assert_eq!(
            swap_fidelity_analytic(&qd(0.0), &qd(0.0), 0.0, &ideal).unwrap(),
            1.0
        );
        let f = swap_fidelity_analytic(&qd(2.0), &qd(2.0), 0.0, &ideal).unwrap();
        assert_abs_diff_eq!(f, 0.7731, epsilon = 5e-5);
        let f = swap_fidelity_analytic(&qd(4.0), &qd(0.0), 0.0, &ideal).unwrap();
        assert_abs_diff_eq!(f, 0.6156, epsilon = 5e-5);
        // closed form of Re[C_A C_B*]
        let (sa, sb) = (3.0 * 0.3 / crate::PHYS.hbar, 7.0 * 0.3 / crate::PHYS.hbar);
        let expect = 0.5 + 0.5 * (1.0 + sa * sb) / ((1.0 + sa * sa) * (1.0 + sb * sb));
        let f = swap_fidelity_analytic(&qd(3.0), &qd(7.0), 0.0, &ideal).unwrap();
        assert_abs_diff_eq!(f, expect, epsilon = 1e-14);
    }

    #[test]
    fn fully_dephased_floor() {
        let cfg = SwapModelConfig::default();
        let mut a = qd(0.0);
        a.t2star_ns = 1e-12;
        for s in [0.0, 3.0, 30.0] {
            let b = qd(s);
            let f = swap_fidelity_analytic(&a, &b, 0.0, &cfg).unwrap();
            assert_abs_diff_eq!(f, 0.5, epsilon = 1e-9);
        }
        // detuned far away
        let f = swap_fidelity_analytic(&qd(0.0), &qd(0.0), 1e12, &cfg).unwrap();
        assert_abs_diff_eq!(f, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_strictly_decreasing() {
        let ideal = SwapModelConfig::ideal();
        let mut prev = f64::INFINITY;
        for i in 0..=80 {
            let s = i as f64 * 0.25;
            let f = swap_fidelity_analytic(&qd(s), &qd(s), 0.0, &ideal).unwrap();
            assert!(f < prev);
            prev = f;
        }
    }

    #[test]
    fn symmetric_under_source_exchange() {
        let cfg = SwapModelConfig {
            pair_cross_dephasing: true,
            bsm_timing: BsmTiming::Independent,
            ..SwapModelConfig::default()
        };
        let a = QdParams {
            fss_uev: 3.0,
            t1x_ns: 0.25,
            t1xx_ns: 0.1,
            t2star_ns: 0.7,
            ..QdParams::default()
        };
        let b = QdParams {
            fss_uev: 8.0,
            t1x_ns: 0.35,
            t1xx_ns: 0.2,
            t2star_ns: 0.4,
            ..QdParams::default()
        };
        for cfg in [cfg, SwapModelConfig::default()] {
            let ab = swap_fidelity_analytic(&a, &b, 12.0, &cfg).unwrap();
            let ba = swap_fidelity_analytic(&b, &a, -12.0, &cfg).unwrap();
            assert_abs_diff_eq!(ab, ba, epsilon = 1e-14);
        }
    }

    #[test]
    fn mc_zero_fss_is_exact() {
        let est =
            swap_fidelity_mc(&qd(0.0), &qd(0.0), 0.0, &SwapModelConfig::ideal(), 5000, 1).unwrap();
        assert_abs_diff_eq!(est.mean, 1.0, epsilon = 1e-12);
        assert!(est.stderr < 1e-12);
        assert_eq!(
            swap_fidelity_mc(&qd(0.0), &qd(0.0), 0.0, &SwapModelConfig::ideal(), 0, 1).unwrap_err(),
            Error::InsufficientSamples { needed: 1, got: 0 }
        );
    }

    #[test]
    fn mc_is_deterministic() {
        let cfg = SwapModelConfig::default();
        let a = swap_fidelity_mc(&qd(5.0), &qd(2.0), 3.0, &cfg, 20_000, 99).unwrap();
        let b = swap_fidelity_mc(&qd(5.0), &qd(2.0), 3.0, &cfg, 20_000, 99).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    fn agrees(a: &QdParams, b: &QdParams, det: f64, cfg: &SwapModelConfig, n: u64) {
        let exact = swap_fidelity_analytic(a, b, det, cfg).unwrap();
        let est = swap_fidelity_mc(a, b, det, cfg, n, 2024).unwrap();
        assert!(
            (exact - est.mean).abs() <= 3.0 * est.stderr + 1e-12,
            "{cfg:?}: analytic {exact} vs mc {} ± {}",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn mc_matches_analytic_across_options() {
        let a = QdParams {
            fss_uev: 6.0,
            t1x_ns: 0.28,
            t1xx_ns: 0.12,
            t2star_ns: 0.6,
            ..QdParams::default()
        };
        let b = QdParams {
            fss_uev: 2.5,
            t1x_ns: 0.33,
            t1xx_ns: 0.17,
            t2star_ns: 0.9,
            ..QdParams::default()
        };
        for timing in [BsmTiming::Coincident, BsmTiming::Independent] {
            for cross in [false, true] {
                for ideal in [false, true] {
                    let cfg = SwapModelConfig {
                        ideal_bsm: ideal,
                        pair_cross_dephasing: cross,
                        bsm_timing: timing,
                        ..SwapModelConfig::default()
                    };
                    agrees(&a, &b, 4.0, &cfg, 200_000);
                }
            }
        }
    }

    #[test]
    fn independent_timing_costs_fidelity() {
        let coincident = SwapModelConfig::ideal();
        let independent = SwapModelConfig {
            bsm_timing: BsmTiming::Independent,
            ..coincident
        };
        let f0 = swap_fidelity_analytic(&qd(2.0), &qd(2.0), 0.0, &coincident).unwrap();
        let f1 = swap_fidelity_analytic(&qd(2.0), &qd(2.0), 0.0, &independent).unwrap();
        assert!(f1 < f0);
        assert_eq!(
            swap_fidelity_analytic(&qd(0.0), &qd(0.0), 0.0, &independent).unwrap(),
            1.0
        );
    }

    #[test]
    fn surface_shape() {
        let values: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let rows =
            fidelity_surface(&QdParams::default(), &values, &SwapModelConfig::ideal()).unwrap();
        assert_eq!(rows.len(), 25);
        assert_eq!(rows[0], (0.0, 0.0, 1.0));
    }

    #[test]
    fn visibility_endpoints() {
        let a = QdParams {
            fss_uev: 3.0,
            ..QdParams::default()
        };
        let b = QdParams {
            fss_uev: 7.0,
            ..QdParams::default()
        };
        let cfg = SwapModelConfig::default();
        assert_eq!(swap_fidelity_at_visibility(&a, &b, 0.0, &cfg).unwrap(), 0.5);
        assert_eq!(
            swap_fidelity_at_visibility(&a, &b, 1.0, &cfg).unwrap(),
            swap_fidelity_analytic(&a, &b, 0.0, &SwapModelConfig::ideal()).unwrap()
        );
        assert!(swap_fidelity_at_visibility(&a, &b, 1.5, &cfg).is_err());
    }
}

//! Single-dot biexciton–exciton cascade: pair state, emission-time averaged
//! coherence, pair fidelity, photon indistinguishability and blinking.
//!
//! Units throughout: energies in µeV, times in ns, wavelengths in nm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::polarization::{bell_state, fidelity, BellKind, DensityMatrix, Ket};

/// Physical constants in the crate's unit system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysConstants {
    /// ħ in µeV·ns
    pub hbar: f64,
    /// h·c in µeV·nm
    pub hc: f64,
}

pub const PHYS: PhysConstants = PhysConstants {
    hbar: 0.658_211_956_9,
    hc: 1.239_841_98e9,
};

/// Energy detuning (µeV) corresponding to a wavelength gap `delta_nm` around `lambda_nm`.
pub fn wavelength_gap_to_energy(delta_nm: f64, lambda_nm: f64) -> f64 {
    PHYS.hc * delta_nm.abs() / (lambda_nm * lambda_nm)
}

/// Angular frequency (rad/ns) of an energy (µeV).
pub fn angular_frequency(energy_uev: f64) -> f64 {
    energy_uev / PHYS.hbar
}

/// Physical parameters of one quantum-dot source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QdParams {
    pub wavelength_x_nm: f64,
    /// Exciton fine-structure splitting S.
    pub fss_uev: f64,
    pub t1x_ns: f64,
    pub t1xx_ns: f64,
    /// Pure dephasing time, shared by the X and XX transitions.
    pub t2star_ns: f64,
    #[serde(default = "one")]
    pub on_fraction: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for QdParams {
    /// Mean values of the default device population.
    fn default() -> Self {
        Self {
            wavelength_x_nm: 777.85,
            fss_uev: 11.0,
            t1x_ns: 0.300,
            t1xx_ns: 0.150,
            t2star_ns: 0.5,
            on_fraction: 1.0,
        }
    }
}

impl QdParams {
    pub fn validate(&self) -> Result<()> {
        positive("wavelength_x_nm", self.wavelength_x_nm)?;
        positive("t1x_ns", self.t1x_ns)?;
        positive("t1xx_ns", self.t1xx_ns)?;
        if !(self.t2star_ns > 0.0) {
            return Err(invalid(
                "t2star_ns",
                format!("must be > 0, got {}", self.t2star_ns),
            ));
        }
        if !(self.fss_uev >= 0.0) || !self.fss_uev.is_finite() {
            return Err(invalid(
                "fss_uev",
                format!("must be >= 0, got {}", self.fss_uev),
            ));
        }
        if !(0.0..=1.0).contains(&self.on_fraction) {
            return Err(invalid(
                "on_fraction",
                format!("must lie in [0, 1], got {}", self.on_fraction),
            ));
        }
        Ok(())
    }

    /// Exciton coherence time from `1/T2 = 1/(2 T1) + 1/T2★`.
    pub fn t2_x(&self) -> f64 {
        coherence_time(self.t1x_ns, self.t2star_ns)
    }

    pub fn t2_xx(&self) -> f64 {
        coherence_time(self.t1xx_ns, self.t2star_ns)
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

fn coherence_time(t1: f64, t2star: f64) -> f64 {
    1.0 / (0.5 / t1 + 1.0 / t2star)
}

/// `(|HH⟩ + e^{−iSt/ħ}|VV⟩)/√2` for an exciton that lived `t` ns.
pub fn pair_state(fss_uev: f64, t_ns: f64) -> Result<Ket> {
    if !(t_ns >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t_ns}")));
    }
    Ok(pair_state_with_phase(-angular_frequency(fss_uev) * t_ns))
}

/// `(|HH⟩ + e^{iφ}|VV⟩)/√2`
pub fn pair_state_with_phase(phase: f64) -> Ket {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let zero = Complex64::new(0.0, 0.0);
    Ket::new(vec![
        Complex64::new(r, 0.0),
        zero,
        zero,
        Complex64::from_polar(r, phase),
    ])
    .expect("dimension 4 is valid")
}

// e^w − 1 without cancellation for small |w|.
fn expm1_c(w: Complex64) -> Complex64 {
    if w.norm() < 1e-5 {
        w * (1.0 + w / 2.0 * (1.0 + w / 3.0 * (1.0 + w / 4.0)))
    } else {
        w.exp() - 1.0
    }
}

/// Probability that the exciton decays within the gate window.
pub fn gate_acceptance(t1x_ns: f64, gate_ns: Option<f64>) -> f64 {
    match gate_ns {
        None => 1.0,
        Some(g) => -(-g / t1x_ns).exp_m1(),
    }
}

/// Mean of `e^{−iSt/ħ}` over the exciton emission time `t ~ Exp(T1_X)`,
/// optionally conditioned on `t ≤ gate`.
///
/// Ungated this is `1/(1 + i s)` with `s = S·T1/ħ`; gating multiplies by
/// `[1 − e^{−(1+is)x}]/[1 − e^{−x}]`, `x = gate/T1`.
pub fn coherence_factor(fss_uev: f64, t1x_ns: f64, gate_ns: Option<f64>) -> Result<Complex64> {
    coherence_factor_dephased(fss_uev, t1x_ns, gate_ns, None)
}

/// As [`coherence_factor`], additionally weighting each emission with the
/// pair-coherence decay `e^{−t/T2★}` when `t2star_ns` is given.
pub fn coherence_factor_dephased(
    fss_uev: f64,
    t1x_ns: f64,
    gate_ns: Option<f64>,
    t2star_ns: Option<f64>,
) -> Result<Complex64> {
    positive("t1x_ns", t1x_ns)?;
    if let Some(g) = gate_ns {
        if !(g > 0.0) {
            return Err(invalid("gate_ns", format!("must be > 0, got {g}")));
        }
    }
    if let Some(t2) = t2star_ns {
        if !(t2 > 0.0) {
            return Err(invalid("t2star_ns", format!("must be > 0, got {t2}")));
        }
    }
    let s = angular_frequency(fss_uev) * t1x_ns;
    let damping = 1.0 + t2star_ns.map_or(0.0, |t2| t1x_ns / t2);
    let z = Complex64::new(damping, s);
    let ungated = 1.0 / z;
    let c = match gate_ns {
        Some(g) if g.is_finite() => {
            let x = g / t1x_ns;
            let num = -expm1_c(-z * x);
            let den = -(-x).exp_m1();
            ungated * num / den
        }
        _ => ungated,
    };
    // |C| <= 1 exactly; trim roundoff
    let n = c.norm();
    Ok(if n > 1.0 { c / n } else { c })
}

/// Emission-averaged two-photon polarization state of one cascade.
pub fn pair_density_matrix(
    fss_uev: f64,
    t1x_ns: f64,
    gate_ns: Option<f64>,
    t2star_ns: Option<f64>,
) -> Result<DensityMatrix> {
    let c = coherence_factor_dephased(fss_uev, t1x_ns, gate_ns, t2star_ns)?;
    let half = Complex64::new(0.5, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    #[rustfmt::skip]
    let m = nalgebra::DMatrix::from_row_slice(4, 4, &[
        half,          zero, zero, 0.5 * c.conj(),
        zero,          zero, zero, zero,
        zero,          zero, zero, zero,
        0.5 * c,       zero, zero, half,
    ]);
    DensityMatrix::from_matrix(m)
}

/// Fidelity of the emitted pair with a Bell state; for `PhiPlus` this is
/// `1/2 + Re(C)/2`.
pub fn pair_fidelity(params: &QdParams, gate_ns: Option<f64>, target: BellKind) -> Result<f64> {
    params.validate()?;
    let rho = pair_density_matrix(params.fss_uev, params.t1x_ns, gate_ns, None)?;
    fidelity(&rho, &bell_state(target))
}

/// Single-source indistinguishability `T2/(2 T1)`.
pub fn indistinguishability(t1_ns: f64, t2star_ns: f64) -> Result<f64> {
    positive("t1", t1_ns)?;
    if !(t2star_ns > 0.0) {
        return Err(invalid(
            "t2star_ns",
            format!("must be > 0, got {t2star_ns}"),
        ));
    }
    Ok(coherence_time(t1_ns, t2star_ns) / (2.0 * t1_ns))
}

/// Timing-jitter ceiling on the indistinguishability of cascade photons,
/// `T1_X/(T1_X + T1_XX)`.
pub fn cascade_limit(t1x_ns: f64, t1xx_ns: f64) -> Result<f64> {
    positive("t1x_ns", t1x_ns)?;
    if !(t1xx_ns >= 0.0) {
        return Err(invalid("t1xx_ns", format!("must be >= 0, got {t1xx_ns}")));
    }
    Ok(t1x_ns / (t1x_ns + t1xx_ns))
}

/// Two-photon interference visibility of the XX photons of two sources.
///
/// Exponential wavepackets with decay rates `Γ_i = 1/T1_XX,i`, combined
/// pure dephasing `γ★ = 1/T2★_A + 1/T2★_B` and detuning `Δ` (µeV):
///
/// `V = Γ_A Γ_B (Γ̄+γ★) / [Γ̄ ((Γ̄+γ★)² + Δ²/ħ²)]`, `Γ̄ = (Γ_A+Γ_B)/2`.
///
/// With `include_cascade` the result is scaled by `√(c_A c_B)` where `c_i`
/// is the [`cascade_limit`] of each source.
pub fn hom_visibility(
    a: &QdParams,
    b: &QdParams,
    detuning_uev: f64,
    include_cascade: bool,
) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let ga = 1.0 / a.t1xx_ns;
    let gb = 1.0 / b.t1xx_ns;
    let gbar = 0.5 * (ga + gb);
    let gstar = 1.0 / a.t2star_ns + 1.0 / b.t2star_ns;
    let delta = angular_frequency(detuning_uev);
    let width = gbar + gstar;
    let mut v = ga * gb * width / (gbar * (width * width + delta * delta));
    if include_cascade {
        let ca = cascade_limit(a.t1x_ns, a.t1xx_ns)?;
        let cb = cascade_limit(b.t1x_ns, b.t1xx_ns)?;
        v *= (ca * cb).sqrt();
    }
    Ok(v.clamp(0.0, 1.0))
}

/// On-fraction of a blinking emitter whose autocorrelation carries a
/// bunching envelope `1 + a·e^{−|τ|/τ_b}`.
pub fn on_fraction_from_bunching(bunching_amplitude: f64) -> Result<f64> {
    if !(bunching_amplitude >= 0.0) || !bunching_amplitude.is_finite() {
        return Err(invalid(
            "bunching_amplitude",
            format!("must be finite and >= 0, got {bunching_amplitude}"),
        ));
    }
    Ok(1.0 / (1.0 + bunching_amplitude))
}

/// Fraction of time both sources are on together, `√(β_A β_B)`.
pub fn interference_efficiency(beta_a: f64, beta_b: f64) -> Result<f64> {
    for (name, b) in [("beta_a", beta_a), ("beta_b", beta_b)] {
        if !(0.0..=1.0).contains(&b) {
            return Err(invalid(name, format!("must lie in [0, 1], got {b}")));
        }
    }
    Ok((beta_a * beta_b).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn qd(fss: f64, t1x: f64, t1xx: f64, t2star: f64) -> QdParams {
        QdParams {
            fss_uev: fss,
            t1x_ns: t1x,
            t1xx_ns: t1xx,
            t2star_ns: t2star,
            ..QdParams::default()
        }
    }

    #[test]
    fn pair_state_phases() {
        let phi = bell_state(BellKind::PhiPlus);
        for (s, t) in [(7.3, 0.0), (0.0, 5.0)] {
            let k = pair_state(s, t).unwrap();
            assert_abs_diff_eq!(k.inner(&phi).unwrap().norm(), 1.0, epsilon = 1e-15);
        }
        let k = pair_state(PHYS.hbar * PI, 1.0).unwrap();
        let phi_m = bell_state(BellKind::PhiMinus);
        assert_abs_diff_eq!(k.inner(&phi_m).unwrap().norm(), 1.0, epsilon = 1e-14);
        assert!(pair_state(1.0, -0.1).is_err());
    }

    #[test]
    fn coherence_factor_values() {
        assert_eq!(
            coherence_factor(0.0, 0.3, None).unwrap(),
            Complex64::new(1.0, 0.0)
        );
        let c = coherence_factor(4.22, 0.3, None).unwrap();
        let s = 4.22 * 0.3 / PHYS.hbar;
        assert_abs_diff_eq!(s, 1.9234, epsilon = 1e-4);
        assert_abs_diff_eq!(c.norm_sqr(), 1.0 / (1.0 + s * s), epsilon = 1e-14);
        let tiny = coherence_factor(4.22, 0.3, Some(1e-12)).unwrap();
        assert_abs_diff_eq!(tiny.re, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(tiny.im, 0.0, epsilon = 1e-9);
        let huge = coherence_factor(4.22, 0.3, Some(1e6)).unwrap();
        assert!((huge - c).norm() < 1e-14);
        assert!(coherence_factor(1.0, 0.0, None).is_err());
        assert!(coherence_factor(1.0, 0.3, Some(0.0)).is_err());
    }

    #[test]
    fn gated_factor_matches_quadrature() {
        // Simpson's rule on E[e^{-iωt} | t < g], independent of the closed form.
        let (fss, t1, g) = (4.22, 0.3, 0.5);
        let w = fss / PHYS.hbar;
        let n = 20_000;
        let h = g / n as f64;
        let (mut re, mut im, mut norm) = (0.0, 0.0, 0.0);
        for i in 0..=n {
            let t = i as f64 * h;
            let wt = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let p = (-t / t1).exp();
            re += wt * p * (w * t).cos();
            im -= wt * p * (w * t).sin();
            norm += wt * p;
        }
        let c = coherence_factor(fss, t1, Some(g)).unwrap();
        assert_abs_diff_eq!(c.re, re / norm, epsilon = 1e-10);
        assert_abs_diff_eq!(c.im, im / norm, epsilon = 1e-10);
    }

    #[test]
    fn pair_fidelity_values() {
        let p = qd(0.0, 0.3, 0.15, 0.5);
        assert_abs_diff_eq!(
            pair_fidelity(&p, None, BellKind::PhiPlus).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let p = qd(4.22, 0.3, 0.15, 0.5);
        let ungated = pair_fidelity(&p, None, BellKind::PhiPlus).unwrap();
        assert_abs_diff_eq!(ungated, 0.6064, epsilon = 5e-5);
        let gated = pair_fidelity(&p, Some(0.5), BellKind::PhiPlus).unwrap();
        assert!(gated > ungated);
        let minus = pair_fidelity(&p, None, BellKind::PhiMinus).unwrap();
        assert_abs_diff_eq!(ungated + minus, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn coherence_matches_monte_carlo() {
        for &(fss, t1) in &[(4.22, 0.3), (11.0, 0.25), (0.7, 0.4)] {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let w = fss / PHYS.hbar;
            let n = 1_000_000;
            let (mut sr, mut sr2, mut si, mut si2) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..n {
                let u: f64 = rng.random();
                let t = -t1 * (1.0 - u).ln();
                let (c, s) = ((w * t).cos(), -(w * t).sin());
                sr += c;
                sr2 += c * c;
                si += s;
                si2 += s * s;
            }
            let nf = n as f64;
            let (mr, mi) = (sr / nf, si / nf);
            let er = ((sr2 / nf - mr * mr) / nf).sqrt();
            let ei = ((si2 / nf - mi * mi) / nf).sqrt();
            let c = coherence_factor(fss, t1, None).unwrap();
            assert!((c.re - mr).abs() <= 3.0 * er, "re {} vs {mr} ± {er}", c.re);
            assert!((c.im - mi).abs() <= 3.0 * ei, "im {} vs {mi} ± {ei}", c.im);
        }
    }

    #[test]
    fn coherence_bounds_and_gate_monotonicity() {
        for i in 0..=50 {
            let fss = i as f64;
            let t1 = 0.3;
            let c = coherence_factor(fss, t1, None).unwrap().norm();
            assert!(c <= 1.0);
            if fss == 0.0 {
                assert_eq!(c, 1.0);
            } else {
                assert!(c < 1.0);
            }
            // beyond ~2·T1 the conditional mean can recover slightly, see below
            let grid = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
            let mut prev = f64::INFINITY;
            for x in grid.into_iter().chain([5.0, 10.0]) {
                let g = coherence_factor(fss, t1, Some(x * t1)).unwrap().norm();
                assert!(g <= 1.0 + 1e-15, "S={fss} x={x} |C|={g}");
                if x <= 2.0 {
                    assert!(g <= prev + 1e-12, "S={fss} x={x}: {g} > {prev}");
                    prev = g;
                }
            }
        }
    }

    #[test]
    fn gated_coherence_is_not_monotone_everywhere() {
        // S = 7 µeV, T1 = 0.3 ns: widening the gate from 2·T1 to 5·T1 adds
        // phasors that partly realign, so |C| grows. Checked by quadrature.
        let quad = |g: f64| {
            let w = 7.0 / PHYS.hbar;
            let n = 200_000;
            let h = g / n as f64;
            let (mut re, mut im, mut norm) = (0.0, 0.0, 0.0);
            for i in 0..n {
                let t = (i as f64 + 0.5) * h;
                let p = (-t / 0.3).exp();
                re += p * (w * t).cos();
                im += p * (w * t).sin();
                norm += p;
            }
            (re * re + im * im).sqrt() / norm
        };
        let (q2, q5) = (quad(0.6), quad(1.5));
        let c2 = coherence_factor(7.0, 0.3, Some(0.6)).unwrap().norm();
        let c5 = coherence_factor(7.0, 0.3, Some(1.5)).unwrap().norm();
        assert_abs_diff_eq!(c2, q2, epsilon = 1e-8);
        assert_abs_diff_eq!(c5, q5, epsilon = 1e-8);
        assert!(c5 > c2);
    }

    #[test]
    fn pair_fidelity_range() {
        for s in [0.0, 0.5, 3.0, 20.0, 100.0] {
            for t1 in [0.05, 0.3, 1.0] {
                let f = pair_fidelity(&qd(s, t1, 0.15, 0.5), None, BellKind::PhiPlus).unwrap();
                assert!((0.5..=1.0).contains(&f), "{f}");
                // a short gate can land on the Φ⁻ side of the precession
                for gate in [0.1, 2.0] {
                    let f = pair_fidelity(&qd(s, t1, 0.15, 0.5), Some(gate), BellKind::PhiPlus)
                        .unwrap();
                    assert!((0.0..=1.0).contains(&f), "{f}");
                }
            }
        }
    }

    #[test]
    fn indistinguishability_values() {
        assert_abs_diff_eq!(
            indistinguishability(0.15, 0.5).unwrap(),
            0.625,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            indistinguishability(0.3, 0.5).unwrap(),
            0.454_545,
            epsilon = 1e-6
        );
        assert_eq!(indistinguishability(0.3, f64::INFINITY).unwrap(), 1.0);
        assert!(indistinguishability(0.3, 0.0).is_err());
    }

    #[test]
    fn cascade_limit_values() {
        let c = cascade_limit(1.0, 0.67).unwrap();
        assert_abs_diff_eq!(c, 0.5988, epsilon = 1e-4);
        assert_abs_diff_eq!(0.264 * c, 0.158, epsilon = 1e-3);
        assert_eq!(cascade_limit(0.3, 0.3).unwrap(), 0.5);
        assert_abs_diff_eq!(cascade_limit(0.3, 1e-9).unwrap(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn hom_visibility_limits() {
        let a = qd(0.0, 0.3, 0.15, 0.5);
        assert_abs_diff_eq!(
            hom_visibility(&a, &a, 0.0, false).unwrap(),
            0.625,
            epsilon = 1e-12
        );
        let de = wavelength_gap_to_energy(0.0156, 777.85);
        assert_abs_diff_eq!(de, 31.97, epsilon = 0.01);
        assert_abs_diff_eq!(
            hom_visibility(&a, &a, de, false).unwrap(),
            0.0287,
            epsilon = 1e-4
        );
        let dephased = qd(0.0, 0.3, 0.15, 1e-9);
        assert!(hom_visibility(&dephased, &dephased, 0.0, false).unwrap() < 1e-6);
        let with = hom_visibility(&a, &a, 0.0, true).unwrap();
        assert_abs_diff_eq!(with, 0.625 * 0.3 / 0.45, epsilon = 1e-12);
    }

    #[test]
    fn hom_visibility_monotone() {
        let a = qd(0.0, 0.3, 0.15, 0.5);
        let b = qd(0.0, 0.28, 0.12, 0.8);
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let v = hom_visibility(&a, &b, i as f64 * 2.5, true).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for i in 1..40 {
            let t2 = 5.0 / i as f64;
            let v = hom_visibility(&qd(0.0, 0.3, 0.15, t2), &b, 3.0, false).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn blinking() {
        assert_eq!(on_fraction_from_bunching(0.0).unwrap(), 1.0);
        assert_eq!(on_fraction_from_bunching(1.0).unwrap(), 0.5);
        assert!(on_fraction_from_bunching(-0.5).is_err());
        assert_eq!(interference_efficiency(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(interference_efficiency(0.25, 0.25).unwrap(), 0.25);
        assert_abs_diff_eq!(
            interference_efficiency(0.469, 0.511).unwrap(),
            0.4896,
            epsilon = 5e-4
        );
        assert!(interference_efficiency(1.2, 0.5).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(QdParams::default().validate().is_ok());
        let p = QdParams {
            fss_uev: -1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = QdParams {
            t1xx_ns: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = QdParams::default();
        assert!(p.t2_x() <= 2.0 * p.t1x_ns);
        assert!(p.t2_xx() <= 2.0 * p.t1xx_ns);
    }
}

//! Two-photon polarization tomography: simulated coincidence counts from a
//! (gated) cascade source and linear-inversion reconstruction.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::cascade::{gate_acceptance, pair_density_matrix};
use crate::error::{invalid, Error, Result};
use crate::polarization::{fidelity, DensityMatrix, Ket};
use crate::rng::sample_rng;
use crate::BellKind;

/// Single-photon polarization analyzer settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Analyzer {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Analyzer {
    pub const ALL: [Analyzer; 6] = [
        Analyzer::H,
        Analyzer::V,
        Analyzer::D,
        Analyzer::A,
        Analyzer::R,
        Analyzer::L,
    ];

    /// Jones vector; `D = (H+V)/√2`, `R = (H−iV)/√2`.
    pub fn jones(self) -> [Complex64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match self {
            Analyzer::H => [c(1.0, 0.0), c(0.0, 0.0)],
            Analyzer::V => [c(0.0, 0.0), c(1.0, 0.0)],
            Analyzer::D => [c(s, 0.0), c(s, 0.0)],
            Analyzer::A => [c(s, 0.0), c(-s, 0.0)],
            Analyzer::R => [c(s, 0.0), c(0.0, -s)],
            Analyzer::L => [c(s, 0.0), c(0.0, s)],
        }
    }

    /// Bloch vector `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` with `Z = |H⟩⟨H| − |V⟩⟨V|`.
    fn stokes(self) -> [f64; 4] {
        let [h, v] = self.jones();
        let x = 2.0 * (h.conj() * v).re;
        let y = 2.0 * (h.conj() * v).im;
        let z = h.norm_sqr() - v.norm_sqr();
        [1.0, x, y, z]
    }

    fn as_char(self) -> char {
        match self {
            Analyzer::H => 'H',
            Analyzer::V => 'V',
            Analyzer::D => 'D',
            Analyzer::A => 'A',
            Analyzer::R => 'R',
            Analyzer::L => 'L',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_char() == c.to_ascii_uppercase())
    }
}

/// A product projector `|ab⟩⟨ab|`, photon 1 first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Projector(pub Analyzer, pub Analyzer);

impl Projector {
    pub fn ket(&self) -> Ket {
        let [a0, a1] = self.0.jones();
        let [b0, b1] = self.1.jones();
        Ket::new(vec![a0 * b0, a0 * b1, a1 * b0, a1 * b1]).expect("two-photon ket")
    }

    /// `Tr(Π ρ)`.
    pub fn probability(&self, rho: &DensityMatrix) -> Result<f64> {
        let psi = self.ket();
        if rho.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                actual: rho.dim(),
            });
        }
        let v = psi.as_vector();
        let p = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
        Ok(p.max(0.0))
    }

    /// `Tr(Π σ_μ⊗σ_ν)` for the 16 two-qubit Pauli products, `k = 4μ + ν`.
    fn pauli_row(&self) -> [f64; 16] {
        let (a, b) = (self.0.stokes(), self.1.stokes());
        std::array::from_fn(|k| a[k / 4] * b[k % 4])
    }
}

impl fmt::Display for Projector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0.as_char(), self.1.as_char())
    }
}

impl FromStr for Projector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.trim().chars().collect();
        match chars[..] {
            [a, b] => match (Analyzer::from_char(a), Analyzer::from_char(b)) {
                (Some(a), Some(b)) => Ok(Projector(a, b)),
                _ => Err(Error::UnknownBasis(s.to_string())),
            },
            _ => Err(Error::UnknownBasis(s.to_string())),
        }
    }
}

impl Serialize for Projector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Projector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementBasis {
    /// The 16 settings of the standard two-qubit tomography sequence.
    #[default]
    Minimal16,
    /// All 36 combinations of {H,V,D,A,R,L}.
    Full36,
}

const MINIMAL_16: [&str; 16] = [
    "HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH", "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL",
];

impl MeasurementBasis {
    pub fn projectors(self) -> Vec<Projector> {
        match self {
            MeasurementBasis::Minimal16 => MINIMAL_16
                .iter()
                .map(|s| s.parse().expect("static label"))
                .collect(),
            MeasurementBasis::Full36 => Analyzer::ALL
                .into_iter()
                .flat_map(|a| Analyzer::ALL.into_iter().map(move |b| Projector(a, b)))
                .collect(),
        }
    }
}

/// Source parameters of the measured pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSource {
    pub fss_uev: f64,
    pub t1x_ns: f64,
    /// Cross-dephasing of the pair coherence; `None` disables it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2star_ns: Option<f64>,
}

impl PairSource {
    pub fn density_matrix(&self, gate_ns: Option<f64>) -> Result<DensityMatrix> {
        pair_density_matrix(self.fss_uev, self.t1x_ns, gate_ns, self.t2star_ns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub basis: Projector,
    pub expected_rate: f64,
    /// Equal to `expected_rate` without noise, a Poisson draw with noise.
    pub counts: f64,
    /// `None` for an ungated measurement.
    pub gate_ns: Option<f64>,
}

/// Expected and (optionally Poisson-noisy) coincidence counts per
/// projector, `shots·Tr(Π ρ(t_g))·P(t ≤ t_g)`.
pub fn forward_counts(
    source: &PairSource,
    gate_ns: Option<f64>,
    shots: u64,
    noise: bool,
    seed: u64,
    basis: MeasurementBasis,
) -> Result<Vec<CoincidenceRecord>> {
    let rho = source.density_matrix(gate_ns)?;
    let accepted = shots as f64 * gate_acceptance(source.t1x_ns, gate_ns);
    basis
        .projectors()
        .into_iter()
        .enumerate()
        .map(|(i, proj)| {
            let rate = accepted * proj.probability(&rho)?;
            let counts = if noise && rate > 0.0 {
                let poisson = Poisson::new(rate).map_err(|e| Error::Numeric(e.to_string()))?;
                poisson.sample(&mut sample_rng(seed, i as u64)).round()
            } else {
                rate
            };
            Ok(CoincidenceRecord {
                basis: proj,
                expected_rate: rate,
                counts,
                gate_ns,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// Physical estimate: Hermitian, unit trace, PSD.
    pub rho: DensityMatrix,
    /// Spectrum of the raw inversion (after Hermitizing and trace
    /// normalization, before clipping), ascending.
    pub raw_eigenvalues: Vec<f64>,
}

impl Reconstruction {
    pub fn min_raw_eigenvalue(&self) -> f64 {
        self.raw_eigenvalues[0]
    }

    pub fn fidelity(&self, target: BellKind) -> Result<f64> {
        fidelity(&self.rho, &crate::polarization::bell_state(target))
    }
}

fn pauli(k: usize) -> DMatrix<Complex64> {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    let m = match k {
        0 => [l, o, o, l],
        1 => [o, l, l, o],
        2 => [o, -i, i, o],
        _ => [l, o, o, -l],
    };
    DMatrix::from_row_slice(2, 2, &m)
}

/// Linear inversion on the two-qubit Pauli basis; least squares when the
/// projector set is over-complete. The raw estimate is Hermitized,
/// trace-normalized, clipped to non-negative eigenvalues and renormalized.
pub fn reconstruct(records: &[CoincidenceRecord]) -> Result<Reconstruction> {
    if records.is_empty() {
        return Err(Error::IncompleteBasis { rank: 0 });
    }
    for r in records {
        if !(r.counts >= 0.0) || !r.counts.is_finite() {
            return Err(invalid(
                "counts",
                format!("{} has invalid counts {}", r.basis, r.counts),
            ));
        }
    }
    let a = DMatrix::from_fn(records.len(), 16, |i, k| records[i].basis.pauli_row()[k]);
    let n = DVector::from_iterator(records.len(), records.iter().map(|r| r.counts));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax)
        .count();
    if rank < 16 {
        return Err(Error::IncompleteBasis { rank });
    }
    if n.iter().sum::<f64>() <= 0.0 {
        return Err(Error::ZeroCounts);
    }
    let y = svd
        .solve(&n, 1e-12)
        .map_err(|e| Error::Numeric(e.to_string()))?;
    let mut raw = DMatrix::<Complex64>::zeros(4, 4);
    for k in 0..16 {
        raw += pauli(k / 4).kronecker(&pauli(k % 4)) * Complex64::new(y[k], 0.0);
    }
    let trace = raw.trace().re;
    if !(trace > 0.0) {
        return Err(Error::ZeroCounts);
    }
    let raw = (&raw + raw.adjoint()) * Complex64::new(0.5 / trace, 0.0);
    let eig = raw.clone().symmetric_eigen();
    let mut raw_eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    raw_eigenvalues.sort_by(f64::total_cmp);
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let total: f64 = clipped.sum();
    if !(total > 0.0) {
        return Err(Error::Numeric(
            "reconstruction has no positive eigenvalue".into(),
        ));
    }
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&clipped.map(|l| Complex64::new(l / total, 0.0)));
    let rho = v * d * v.adjoint();
    let rho = DensityMatrix::from_matrix((&rho + rho.adjoint()) * Complex64::new(0.5, 0.0))?;
    Ok(Reconstruction {
        rho,
        raw_eigenvalues,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatePoint {
    pub gate_ns: Option<f64>,
    /// Reconstructed fidelity with the target Bell state.
    pub fidelity: f64,
    /// Sum of counts over all recorded projectors.
    pub accepted_counts: f64,
}

/// Fidelity/counts trade-off over gate windows; point `i` uses seed
/// stream `seed + i` when noise is on.
#[allow(clippy::too_many_arguments)]
pub fn gate_sweep(
    source: &PairSource,
    gates_ns: &[Option<f64>],
    shots: u64,
    noise: bool,
    seed: u64,
    basis: MeasurementBasis,
    target: BellKind,
) -> Result<Vec<GatePoint>> {
    gates_ns
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let recs = forward_counts(source, g, shots, noise, seed.wrapping_add(i as u64), basis)?;
            let rec = reconstruct(&recs)?;
            Ok(GatePoint {
                gate_ns: g,
                fidelity: rec.fidelity(target)?,
                accepted_counts: recs.iter().map(|r| r.counts).sum(),
            })
        })
        .collect()
}

/// Random physical two-qubit state, for round-trip checks.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, rank: usize) -> Result<DensityMatrix> {
    let rank = rank.clamp(1, 4);
    let g = DMatrix::from_fn(4, rank, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::from_matrix(m * Complex64::new(1.0 / tr, 0.0))
}

/// Noiseless expected counts for an arbitrary state.
pub fn counts_for_state(
    rho: &DensityMatrix,
    shots: f64,
    basis: MeasurementBasis,
) -> Result<Vec<CoincidenceRecord>> {
    basis
        .projectors()
        .into_iter()
        .map(|proj| {
            let rate = shots * proj.probability(rho)?;
            Ok(CoincidenceRecord {
                basis: proj,
                expected_rate: rate,
                counts: rate,
                gate_ns: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{pair_fidelity, QdParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn source(fss: f64) -> PairSource {
        PairSource {
            fss_uev: fss,
            t1x_ns: 0.3,
            t2star_ns: None,
        }
    }

    fn max_diff(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        (a.matrix() - b.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn labels() {
        let p: Projector = "rl".parse().unwrap();
        assert_eq!(p, Projector(Analyzer::R, Analyzer::L));
        assert_eq!(p.to_string(), "RL");
        assert!("HX".parse::<Projector>().is_err());
        assert!("HVH".parse::<Projector>().is_err());
        assert_eq!(MeasurementBasis::Minimal16.projectors().len(), 16);
        assert_eq!(MeasurementBasis::Full36.projectors().len(), 36);
    }

    #[test]
    fn projectors_are_rank_one_unit_trace() {
        for p in MeasurementBasis::Full36.projectors() {
            let pi = p.ket().outer();
            assert_abs_diff_eq!(pi.trace().re, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(pi.purity(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn phi_plus_statistics() {
        let recs = forward_counts(
            &source(0.0),
            None,
            1000,
            false,
            0,
            MeasurementBasis::Minimal16,
        )
        .unwrap();
        let get = |l: &str| {
            recs.iter()
                .find(|r| r.basis.to_string() == l)
                .unwrap()
                .counts
        };
        assert_abs_diff_eq!(get("HH"), 500.0, epsilon = 1e-9);
        assert_abs_diff_eq!(get("VV"), 500.0, epsilon = 1e-9);
        assert_abs_diff_eq!(get("HV"), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(get("DD"), 500.0, epsilon = 1e-9);
        assert_abs_diff_eq!(get("RL"), 500.0, epsilon = 1e-9);
        let rec = reconstruct(&recs).unwrap();
        assert!(rec.fidelity(BellKind::PhiPlus).unwrap() >= 1.0 - 1e-9);
    }

    #[test]
    fn zero_shots() {
        let recs = forward_counts(
            &source(4.22),
            Some(0.5),
            0,
            true,
            1,
            MeasurementBasis::Minimal16,
        )
        .unwrap();
        assert!(recs.iter().all(|r| r.counts == 0.0));
        assert!(matches!(reconstruct(&recs), Err(Error::ZeroCounts)));
    }

    #[test]
    fn incomplete_basis() {
        let recs = forward_counts(
            &source(0.0),
            None,
            100,
            false,
            0,
            MeasurementBasis::Minimal16,
        )
        .unwrap();
        assert!(matches!(
            reconstruct(&recs[..15]),
            Err(Error::IncompleteBasis { .. })
        ));
        let diag: Vec<_> = recs
            .iter()
            .filter(|r| "HH HV VH VV".contains(&r.basis.to_string()))
            .copied()
            .collect();
        assert!(matches!(
            reconstruct(&diag),
            Err(Error::IncompleteBasis { rank: 4 })
        ));
    }

    #[test]
    fn ungated_reference_value() {
        let recs = forward_counts(
            &source(4.22),
            None,
            1_000_000,
            false,
            0,
            MeasurementBasis::Minimal16,
        )
        .unwrap();
        let f = reconstruct(&recs)
            .unwrap()
            .fidelity(BellKind::PhiPlus)
            .unwrap();
        let p = QdParams {
            fss_uev: 4.22,
            t1x_ns: 0.3,
            ..QdParams::default()
        };
        let direct = pair_fidelity(&p, None, BellKind::PhiPlus).unwrap();
        assert_abs_diff_eq!(f, direct, epsilon = 1e-12);
        assert_abs_diff_eq!(f, 0.6064, epsilon = 1e-4);
        // 1/2 + 1/(2(1+s²)), s = S·T1/ħ
        let s = 4.22 * 0.3 / crate::PHYS.hbar;
        assert_abs_diff_eq!(f, 0.5 + 0.5 / (1.0 + s * s), epsilon = 1e-12);
    }

    #[test]
    fn gating_trade_off() {
        let gates = [0.1, 0.25, 0.5, 1.0, 2.0, 3.0].map(Some);
        let pts = gate_sweep(
            &source(4.22),
            &gates,
            1_000_000,
            false,
            0,
            MeasurementBasis::Minimal16,
            BellKind::PhiPlus,
        )
        .unwrap();
        for w in pts.windows(2) {
            assert!(w[1].fidelity < w[0].fidelity, "{w:?}");
            assert!(w[1].accepted_counts > w[0].accepted_counts, "{w:?}");
        }
    }

    #[test]
    fn small_gate_approaches_phi_plus() {
        let recs = forward_counts(
            &source(4.22),
            Some(0.01),
            1_000_000,
            false,
            0,
            MeasurementBasis::Minimal16,
        )
        .unwrap();
        let rho = reconstruct(&recs).unwrap().rho;
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert_abs_diff_eq!(rho.entry(i, j).re, 0.5, epsilon = 5e-3);
        }
        assert_abs_diff_eq!(rho.entry(1, 1).re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn poisson_noise_is_small_and_seeded() {
        let noiseless = reconstruct(
            &forward_counts(
                &source(4.22),
                None,
                1_000_000,
                false,
                0,
                MeasurementBasis::Minimal16,
            )
            .unwrap(),
        )
        .unwrap()
        .fidelity(BellKind::PhiPlus)
        .unwrap();
        for seed in 0..5 {
            let recs = forward_counts(
                &source(4.22),
                None,
                1_000_000,
                true,
                seed,
                MeasurementBasis::Minimal16,
            )
            .unwrap();
            assert!(recs.iter().all(|r| r.counts.fract() == 0.0));
            let rec = reconstruct(&recs).unwrap();
            let f = rec.fidelity(BellKind::PhiPlus).unwrap();
            assert!(
                (f - noiseless).abs() <= 0.01,
                "seed {seed}: {f} vs {noiseless}"
            );
            assert!(rec.rho.is_physical(1e-12, 1e-12, 1e-12));
            let again = forward_counts(
                &source(4.22),
                None,
                1_000_000,
                true,
                seed,
                MeasurementBasis::Minimal16,
            )
            .unwrap();
            assert_eq!(recs, again);
        }
    }

    #[test]
    fn clipping_reports_raw_spectrum() {
        // HV is never populated; noisy counts there push the raw estimate
        // negative
        let recs = forward_counts(
            &source(0.0),
            None,
            1000,
            true,
            3,
            MeasurementBasis::Minimal16,
        )
        .unwrap();
        let rec = reconstruct(&recs).unwrap();
        assert!(rec.min_raw_eigenvalue() < 0.0);
        assert!(rec.rho.min_eigenvalue() >= -1e-12);
        assert_abs_diff_eq!(rec.rho.trace().re, 1.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip_model_states(fss in 0.0f64..60.0, t1 in 0.05f64..1.0, gate in prop::option::of(0.01f64..5.0), t2 in prop::option::of(0.1f64..5.0), full in any::<bool>()) {
            let src = PairSource { fss_uev: fss, t1x_ns: t1, t2star_ns: t2 };
            let basis = if full { MeasurementBasis::Full36 } else { MeasurementBasis::Minimal16 };
            let recs = forward_counts(&src, gate, 1_000_000, false, 0, basis).unwrap();
            let rec = reconstruct(&recs).unwrap();
            let truth = src.density_matrix(gate).unwrap();
            prop_assert!(max_diff(&rec.rho, &truth) <= 1e-9);
        }

        #[test]
        fn round_trip_random_states(seed in any::<u64>(), rank in 2usize..=4) {
            let truth = random_density_matrix(&mut sample_rng(seed, 0), rank).unwrap();
            let recs = counts_for_state(&truth, 5000.0, MeasurementBasis::Minimal16).unwrap();
            let rec = reconstruct(&recs).unwrap();
            prop_assert!(max_diff(&rec.rho, &truth) <= 1e-9);
            prop_assert!(rec.min_raw_eigenvalue() >= -1e-9);
        }
    }
}

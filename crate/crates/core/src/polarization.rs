//! Dense polarization-qubit algebra for up to four photons.
//!
//! Basis ordering is fixed for the whole crate: each photon contributes one
//! bit, `H = 0` and `V = 1`, and photon 1 is the most significant bit. Two
//! photons therefore enumerate as `HH, HV, VH, VV`, and a four-photon index
//! reads `p1 p2 p3 p4` from the high bit down.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Largest Hilbert-space dimension handled here (four photons).
pub const MAX_DIM: usize = 16;

/// Single-photon polarization label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub fn bit(self) -> usize {
        match self {
            Pol::H => 0,
            Pol::V => 1,
        }
    }
}

/// Index of a computational basis state, photon 1 first.
pub fn basis_index(pols: &[Pol]) -> usize {
    pols.iter().fold(0, |acc, p| (acc << 1) | p.bit())
}

fn photons_for_dim(dim: usize) -> Result<usize> {
    match dim {
        2 => Ok(1),
        4 => Ok(2),
        16 => Ok(4),
        _ => Err(Error::InvalidDimension(dim)),
    }
}

/// State vector over 1, 2 or 4 photons. Not necessarily normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amps: DVector<Complex64>,
}

impl Ket {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        photons_for_dim(amplitudes.len())?;
        Ok(Self {
            amps: DVector::from_vec(amplitudes),
        })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Product basis state, e.g. `Ket::basis(&[Pol::H, Pol::V])` is `|HV⟩`.
    pub fn basis(pols: &[Pol]) -> Result<Self> {
        let dim = 1usize << pols.len();
        photons_for_dim(dim)?;
        let mut amps = vec![C0; dim];
        amps[basis_index(pols)] = C1;
        Self::new(amps)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn photons(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.amps.as_slice()
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn as_vector(&self) -> &DVector<Complex64> {
        &self.amps
    }

    /// Squared norm; for a projected state this is the projection probability.
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Numeric("cannot normalize a zero-norm ket".into()));
        }
        Ok(Self {
            amps: self.amps.unscale(n),
        })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            amps: &self.amps * factor,
        }
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Ket) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// Kronecker product, `self` occupying the leading photons.
    pub fn tensor(&self, other: &Ket) -> Result<Ket> {
        let dim = self.dim() * other.dim();
        if dim > MAX_DIM {
            return Err(Error::DimensionOverflow(dim));
        }
        photons_for_dim(dim)?;
        Ok(Ket {
            amps: self.amps.kronecker(&other.amps),
        })
    }

    /// `|ψ⟩⟨ψ|` without normalizing.
    pub fn outer(&self) -> DensityMatrix {
        DensityMatrix {
            m: &self.amps * self.amps.adjoint(),
        }
    }
}

/// The four two-photon Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "phi_plus",
            BellKind::PhiMinus => "phi_minus",
            BellKind::PsiPlus => "psi_plus",
            BellKind::PsiMinus => "psi_minus",
        }
    }
}

impl fmt::Display for BellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BellKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "phi_plus" | "phi+" => Ok(BellKind::PhiPlus),
            "phi_minus" | "phi_" => Ok(BellKind::PhiMinus),
            "psi_plus" | "psi+" => Ok(BellKind::PsiPlus),
            "psi_minus" | "psi_" => Ok(BellKind::PsiMinus),
            other => Err(format!("unknown Bell state `{other}`")),
        }
    }
}

pub fn bell_state(kind: BellKind) -> Ket {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match kind {
        BellKind::PhiPlus => [r, 0.0, 0.0, r],
        BellKind::PhiMinus => [r, 0.0, 0.0, -r],
        BellKind::PsiPlus => [0.0, r, r, 0.0],
        BellKind::PsiMinus => [0.0, r, -r, 0.0],
    };
    Ket::from_real(&amps).expect("dimension 4 is valid")
}

/// Partial inner product of a two-photon `bell` ket with the photons at
/// `slots` (1-based, ordered) of a four-photon `state`.
///
/// The result lives on the two remaining photons in ascending order and is
/// returned un-normalized: it is the projection amplitude, so its squared
/// norm is the probability of the projection. For the pair product state
/// `½(|HH⟩+e^{iα}|VV⟩)(|HH⟩+e^{iβ}|VV⟩)` projected on `Ψ⁻` at slots (2,3)
/// this gives `e^{iβ}(|HV⟩ − e^{i(α−β)}|VH⟩)/(2√2)`.
pub fn project(bell: &Ket, state: &Ket, slots: (usize, usize)) -> Result<Ket> {
    check_dim(4, bell.dim())?;
    check_dim(16, state.dim())?;
    let (a, b) = slots;
    if a == b || !(1..=4).contains(&a) || !(1..=4).contains(&b) {
        return Err(Error::UnsupportedSlots(a, b));
    }
    let bit = |photon: usize| 4 - photon;
    let rest: Vec<usize> = (1..=4).filter(|p| *p != a && *p != b).collect();

    let mut out = vec![C0; 4];
    for (idx, amp) in state.amplitudes().iter().enumerate() {
        if *amp == C0 {
            continue;
        }
        let pa = (idx >> bit(a)) & 1;
        let pb = (idx >> bit(b)) & 1;
        let bell_amp = bell.amplitude((pa << 1) | pb);
        if bell_amp == C0 {
            continue;
        }
        let r0 = (idx >> bit(rest[0])) & 1;
        let r1 = (idx >> bit(rest[1])) & 1;
        out[(r0 << 1) | r1] += bell_amp.conj() * amp;
    }
    Ket::new(out)
}

/// Square complex matrix on 4 or 16 dimensions (2 also accepted for single
/// photons).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        photons_for_dim(m.nrows())?;
        Ok(Self { m })
    }

    /// Normalized projector onto `ket`.
    pub fn pure(ket: &Ket) -> Result<Self> {
        Ok(ket.normalize()?.outer())
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        photons_for_dim(dim)?;
        Ok(Self {
            m: DMatrix::identity(dim, dim).unscale(dim as f64),
        })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.m[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            m: self.m.scale(factor),
        }
    }

    pub fn add(&self, other: &DensityMatrix) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self {
            m: &self.m + &other.m,
        })
    }

    /// Weighted sum `Σ wᵢ ρᵢ`.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        let (first, rest) = parts
            .split_first()
            .ok_or_else(|| Error::Numeric("empty mixture".into()))?;
        let mut acc = first.1.scale(first.0);
        for (w, rho) in rest {
            acc = acc.add(&rho.scale(*w))?;
        }
        Ok(acc)
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace().re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::Numeric(format!("cannot normalize trace {tr}")));
        }
        Ok(self.scale(1.0 / tr))
    }

    /// Keeps the diagonal and multiplies every coherence by `factor`.
    pub fn dephase(&self, factor: f64) -> Self {
        let mut m = self.m.clone();
        let n = self.dim();
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    m[(r, c)] *= factor;
                }
            }
        }
        Self { m }
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        let dim = self.dim() * other.dim();
        if dim > MAX_DIM {
            return Err(Error::DimensionOverflow(dim));
        }
        photons_for_dim(dim)?;
        Ok(Self {
            m: self.m.kronecker(&other.m),
        })
    }

    pub fn hermitian_error(&self) -> f64 {
        (&self.m - self.m.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `(ρ + ρ†)/2`
    pub fn hermitized(&self) -> Self {
        Self {
            m: (&self.m + self.m.adjoint()).unscale(2.0),
        }
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = self.hermitized().m.symmetric_eigenvalues();
        let mut v: Vec<f64> = eig.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Checks Hermiticity, unit trace and positivity at the given tolerances.
    pub fn is_physical(&self, hermitian_tol: f64, trace_tol: f64, psd_tol: f64) -> bool {
        let tr = self.trace();
        self.hermitian_error() <= hermitian_tol
            && (tr.re - 1.0).abs() <= trace_tol
            && tr.im.abs() <= trace_tol
            && self.min_eigenvalue() >= -psd_tol
    }

    /// `Tr(ρ²)`
    pub fn purity(&self) -> f64 {
        (&self.m * &self.m).trace().re
    }
}

/// `⟨target|ρ|target⟩`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, target: &Ket) -> Result<f64> {
    check_dim(rho.dim(), target.dim())?;
    let n = target.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::UnnormalizedTarget(n));
    }
    let v = target.as_vector();
    let f = v.dotc(&(rho.matrix() * v)).re;
    if !f.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&f) {
        return Err(Error::Numeric(format!("fidelity {f} outside [0, 1]")));
    }
    Ok(f.clamp(0.0, 1.0))
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

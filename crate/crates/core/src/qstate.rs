//! Density matrices for single polarization qubits and signal–idler photon
//! pairs, the noise channels used by the memory model, and the three-basis
//! coincidence estimator of Bell-state fidelity.
//!
//! Qubit ordering for two-qubit states is `signal ⊗ idler`, with the
//! computational basis `|H⟩ = |0⟩`, `|V⟩ = |1⟩`. Memory channels always act
//! on the *last* tensor factor, so the same channel code serves a stored
//! single qubit and the stored idler half of a pair.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, TAU};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on Hermiticity and unit trace.
pub const STATE_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted as round-off.
pub const EIGEN_FLOOR: f64 = -1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A pure polarization state `cos θ |H⟩ + e^{iφ} sin θ |V⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polarization {
    theta: f64,
    phi: f64,
}

impl Polarization {
    pub const H: Polarization = Polarization { theta: 0.0, phi: 0.0 };
    pub const V: Polarization = Polarization { theta: FRAC_PI_2, phi: 0.0 };
    pub const PLUS: Polarization = Polarization { theta: FRAC_PI_4, phi: 0.0 };
    pub const L: Polarization = Polarization { theta: FRAC_PI_4, phi: FRAC_PI_2 };

    /// `theta` must lie in `[0, π/2]`; `phi` is wrapped into `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() || !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(Error::OutOfRange(format!(
                "polarization angles (θ={theta}, φ={phi}) outside θ ∈ [0, π/2]"
            )));
        }
        let phi = phi.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2π for tiny negative inputs
        let phi = if phi >= TAU { 0.0 } else { phi };
        Ok(Self { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Amplitudes `(a, b)` on `|H⟩, |V⟩`.
    pub fn ket(&self) -> [Complex64; 2] {
        // exact zeros at the poles keep H and V diagonal
        let (sin, cos) = if self.theta == FRAC_PI_2 { (1.0, 0.0) } else { self.theta.sin_cos() };
        [Complex64::new(cos, 0.0), Complex64::from_polar(sin, self.phi)]
    }

    /// The canonical label when this is exactly one of H, V, +, L.
    pub fn label(&self) -> Option<PolLabel> {
        PolLabel::ALL.into_iter().find(|l| l.polarization() == *self)
    }
}

impl From<PolLabel> for Polarization {
    fn from(label: PolLabel) -> Self {
        label.polarization()
    }
}

/// The four input states used throughout the characterization runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolLabel {
    H,
    V,
    #[serde(rename = "+")]
    Plus,
    L,
}

impl PolLabel {
    pub const ALL: [PolLabel; 4] = [PolLabel::H, PolLabel::V, PolLabel::Plus, PolLabel::L];

    pub fn polarization(self) -> Polarization {
        match self {
            PolLabel::H => Polarization::H,
            PolLabel::V => Polarization::V,
            PolLabel::Plus => Polarization::PLUS,
            PolLabel::L => Polarization::L,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            PolLabel::H => "H",
            PolLabel::V => "V",
            PolLabel::Plus => "+",
            PolLabel::L => "L",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "H" => Some(PolLabel::H),
            "V" => Some(PolLabel::V),
            "+" => Some(PolLabel::Plus),
            "L" => Some(PolLabel::L),
            _ => None,
        }
    }
}

impl fmt::Display for PolLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix of dimension 2 or 4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawMatrix", try_from = "RawMatrix")]
pub struct DensityMatrix {
    m: DMatrix<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix(Vec<Vec<Complex64>>);

impl From<DensityMatrix> for RawMatrix {
    fn from(rho: DensityMatrix) -> Self {
        let n = rho.dim();
        RawMatrix((0..n).map(|i| (0..n).map(|j| rho.m[(i, j)]).collect()).collect())
    }
}

impl TryFrom<RawMatrix> for DensityMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        let n = raw.0.len();
        if raw.0.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidState("matrix is not square".into()));
        }
        DensityMatrix::new(DMatrix::from_fn(n, n, |i, j| raw.0[i][j]))
    }
}

impl DensityMatrix {
    /// Validates and wraps a matrix.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self { m };
        rho.check()?;
        Ok(rho)
    }

    /// Wraps a matrix without validation. Channel outputs go through here;
    /// debug builds still assert validity.
    pub(crate) fn from_matrix_unchecked(m: DMatrix<Complex64>) -> Self {
        let rho = Self { m };
        debug_assert!(rho.check().is_ok(), "{:?}", rho.check());
        rho
    }

    /// Projector onto a normalized ket. The ket is normalized here.
    pub fn pure(ket: &[Complex64]) -> Result<Self> {
        let n = ket.len();
        if n != 2 && n != 4 {
            return Err(Error::DimensionMismatch { expected: 2, got: n });
        }
        let norm = ket.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite ket".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| ket[i] * ket[j].conj() / (norm * norm));
        Ok(Self::from_matrix_unchecked(m))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_matrix_unchecked(DMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    /// Real eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.m.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn check(&self) -> Result<()> {
        let n = self.m.nrows();
        if n != self.m.ncols() || (n != 2 && n != 4) {
            return Err(Error::InvalidState(format!(
                "shape {}×{} (expected 2×2 or 4×4)",
                self.m.nrows(),
                self.m.ncols()
            )));
        }
        if self.m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        for i in 0..n {
            for j in i..n {
                if (self.m[(i, j)] - self.m[(j, i)].conj()).norm() > STATE_TOL {
                    return Err(Error::InvalidState(format!("not Hermitian at ({i},{j})")));
                }
            }
        }
        let tr = self.m.trace();
        if (tr - ONE).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} ≠ 1")));
        }
        let min = self.eigenvalues()[0];
        if min < EIGEN_FLOOR {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Nearest physical state: Hermitian part, negative eigenvalues clipped,
    /// trace renormalized. Only for callers that knowingly hold noisy input.
    pub fn project_physical(m: &DMatrix<Complex64>) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() || (n != 2 && n != 4) {
            return Err(Error::InvalidState("projection needs a 2×2 or 4×4 matrix".into()));
        }
        let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidState("no positive spectrum to project onto".into()));
        }
        let mut out = DMatrix::<Complex64>::zeros(n, n);
        for (k, &l) in clipped.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            let v = eig.eigenvectors.column(k);
            out += (v * v.adjoint()) * Complex64::new(l / total, 0.0);
        }
        Self::new(symmetrize(out))
    }

    /// Reduced state of the first qubit of a pair.
    pub fn reduce_to_first(&self) -> Result<DensityMatrix> {
        if self.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: self.dim() });
        }
        let m = DMatrix::from_fn(2, 2, |i, j| self.m[(2 * i, 2 * j)] + self.m[(2 * i + 1, 2 * j + 1)]);
        Ok(Self::from_matrix_unchecked(m))
    }

    /// Frobenius distance, mostly for tests.
    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        (&self.m - &other.m).norm()
    }
}

fn symmetrize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn polarization_to_density(p: Polarization) -> DensityMatrix {
    // ket from a valid Polarization is already normalized
    DensityMatrix::pure(&p.ket()).expect("polarization ket is normalized")
}

/// Overlap `⟨ψ|ρ|ψ⟩` with a (normalized here) target ket.
pub fn fidelity_to_pure(rho: &DensityMatrix, target: &[Complex64]) -> Result<f64> {
    let n = rho.dim();
    if target.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: target.len() });
    }
    let norm2: f64 = target.iter().map(|a| a.norm_sqr()).sum();
    if norm2 == 0.0 {
        return Err(Error::InvalidState("zero target ket".into()));
    }
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += target[i].conj() * rho.m[(i, j)] * target[j];
        }
    }
    Ok((acc.re / norm2).clamp(0.0, 1.0))
}

/// `ρ' = (1 − p) ρ + p I/d` on the whole state.
pub fn apply_depolarizing(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_probability(p)?;
    let d = rho.dim();
    let id = DMatrix::<Complex64>::identity(d, d) / Complex64::new(d as f64, 0.0);
    Ok(DensityMatrix::from_matrix_unchecked(
        &rho.m * Complex64::new(1.0 - p, 0.0) + id * Complex64::new(p, 0.0),
    ))
}

/// Depolarizing channel acting on the last qubit only:
/// `ρ' = (1 − p) ρ + p Tr_last(ρ) ⊗ I/2`. For a single qubit this is
/// [`apply_depolarizing`].
pub fn depolarize_last_qubit(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_probability(p)?;
    if rho.dim() == 2 {
        return apply_depolarizing(rho, p);
    }
    let first = rho.reduce_to_first()?;
    let mixed = DMatrix::from_fn(4, 4, |i, j| {
        if i % 2 == j % 2 {
            first.m[(i / 2, j / 2)] * 0.5
        } else {
            ZERO
        }
    });
    Ok(DensityMatrix::from_matrix_unchecked(
        &rho.m * Complex64::new(1.0 - p, 0.0) + mixed * Complex64::new(p, 0.0),
    ))
}

/// Applies `K` to the last qubit (`I ⊗ K` for pairs), then renormalizes the
/// trace. `K` must not annihilate the state.
pub fn apply_last_qubit_operator(rho: &DensityMatrix, k: &[[Complex64; 2]; 2]) -> Result<DensityMatrix> {
    let d = rho.dim();
    let op = if d == 2 {
        DMatrix::from_fn(2, 2, |i, j| k[i][j])
    } else {
        DMatrix::from_fn(4, 4, |i, j| if i / 2 == j / 2 { k[i % 2][j % 2] } else { ZERO })
    };
    let out = &op * &rho.m * op.adjoint();
    let tr = out.trace().re;
    if tr <= 1e-300 || !tr.is_finite() {
        return Err(Error::InvalidState("operator annihilates the state".into()));
    }
    Ok(DensityMatrix::from_matrix_unchecked(symmetrize(out / Complex64::new(tr, 0.0))))
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// `|Ψ⁺⟩ = (|HV⟩ + |VH⟩)/√2`.
pub fn psi_plus() -> [Complex64; 4] {
    let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
    [ZERO, a, a, ZERO]
}

/// Werner state `(1 − p)|Ψ⁺⟩⟨Ψ⁺| + p I/4` with overlap `fidelity` to `|Ψ⁺⟩`.
pub fn werner_state(fidelity: f64) -> Result<DensityMatrix> {
    if !(0.25..=1.0).contains(&fidelity) {
        return Err(Error::OutOfRange(format!("Werner fidelity {fidelity} outside [1/4, 1]")));
    }
    let p = 4.0 * (1.0 - fidelity) / 3.0;
    apply_depolarizing(&DensityMatrix::pure(&psi_plus())?, p)
}

/// Joint measurement basis for a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliBasis {
    Xx,
    Yy,
    Zz,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::Xx, PauliBasis::Yy, PauliBasis::Zz];

    /// Single-qubit eigenvectors for outcomes `+1` and `−1`.
    fn eigenvectors(self) -> [[Complex64; 2]; 2] {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let i = Complex64::new(0.0, FRAC_1_SQRT_2);
        match self {
            PauliBasis::Xx => [[s, s], [s, -s]],
            PauliBasis::Yy => [[s, i], [s, -i]],
            PauliBasis::Zz => [[ONE, ZERO], [ZERO, ONE]],
        }
    }

    /// Probabilities of `(++, +−, −+, −−)` for a two-qubit state.
    pub fn outcome_probabilities(self, rho: &DensityMatrix) -> Result<[f64; 4]> {
        if rho.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: rho.dim() });
        }
        let ev = self.eigenvectors();
        let mut probs = [0.0; 4];
        for (k, (a, b)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
            let ket: Vec<Complex64> =
                (0..4).map(|idx| ev[a][idx / 2] * ev[b][idx % 2]).collect();
            probs[k] = fidelity_to_pure(rho, &ket)?;
        }
        Ok(probs)
    }
}

/// Coincidence counts from one basis setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauliBasisCounts {
    pub basis: PauliBasis,
    pub n_pp: u64,
    pub n_pm: u64,
    pub n_mp: u64,
    pub n_mm: u64,
}

impl PauliBasisCounts {
    pub fn total(&self) -> u64 {
        self.n_pp + self.n_pm + self.n_mp + self.n_mm
    }
}

/// Correlation coefficient `(n₊₊ + n₋₋ − n₊₋ − n₋₊) / N`.
pub fn pauli_coefficient(counts: &PauliBasisCounts) -> Result<f64> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::OutOfRange("no coincidences recorded".into()));
    }
    let same = (counts.n_pp + counts.n_mm) as f64;
    let diff = (counts.n_pm + counts.n_mp) as f64;
    Ok((same - diff) / total as f64)
}

/// Bell-state fidelity estimate. `clamped` is set when the raw value left `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellFidelity {
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

/// `F = (1 + ρ_xx + ρ_yy − ρ_zz) / 4` against `|Ψ⁺⟩`.
pub fn bell_fidelity(rho_xx: f64, rho_yy: f64, rho_zz: f64) -> BellFidelity {
    let raw = (1.0 + rho_xx + rho_yy - rho_zz) / 4.0;
    let value = raw.clamp(0.0, 1.0);
    BellFidelity { value, raw, clamped: value != raw }
}

/// Multinomial sample of `shots` coincidences in one basis.
pub fn sample_coincidences<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    basis: PauliBasis,
    shots: u64,
    rng: &mut R,
) -> Result<PauliBasisCounts> {
    if shots == 0 {
        return Err(Error::OutOfRange("shots must be at least 1".into()));
    }
    let probs = basis.outcome_probabilities(rho)?;
    let total_p: f64 = probs.iter().sum();
    // conditional binomial chain
    let mut counts = [0u64; 4];
    let mut remaining = shots;
    let mut mass = total_p;
    for k in 0..3 {
        if remaining == 0 {
            break;
        }
        let q = if mass > 0.0 { (probs[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let n = Binomial::new(remaining, q)
            .map_err(|e| Error::OutOfRange(e.to_string()))?
            .sample(rng);
        counts[k] = n;
        remaining -= n;
        mass -= probs[k];
    }
    counts[3] = remaining;
    Ok(PauliBasisCounts { basis, n_pp: counts[0], n_pm: counts[1], n_mp: counts[2], n_mm: counts[3] })
}

/// Samples all three bases and combines them into a fidelity estimate.
pub fn estimate_bell_fidelity<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    shots_per_basis: u64,
    rng: &mut R,
) -> Result<BellFidelity> {
    let mut coeff = [0.0; 3];
    for (c, basis) in coeff.iter_mut().zip(PauliBasis::ALL) {
        *c = pauli_coefficient(&sample_coincidences(rho, basis, shots_per_basis, rng)?)?;
    }
    Ok(bell_fidelity(coeff[0], coeff[1], coeff[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_close(a: &DensityMatrix, b: &DensityMatrix, tol: f64) {
        assert!(a.distance(b) < tol, "{a:?}\n vs\n{b:?}");
    }

    #[test]
    fn canonical_projectors() {
        let h = polarization_to_density(Polarization::H);
        assert_close(&h, &DensityMatrix::new(DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)])).unwrap(), 1e-15);
        let v = polarization_to_density(Polarization::V);
        assert!((v.get(1, 1).re - 1.0).abs() < 1e-15 && v.get(0, 0).norm() < 1e-15);
        let l = polarization_to_density(Polarization::L);
        let expect = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(0., -0.5), c(0., 0.5), c(0.5, 0.)]);
        assert!((l.matrix() - expect).norm() < 1e-15);
    }

    #[test]
    fn polarization_validation_and_labels() {
        assert!(Polarization::new(-0.1, 0.0).is_err());
        assert!(Polarization::new(2.0, 0.0).is_err());
        let p = Polarization::new(0.3, -1.0).unwrap();
        assert!((p.phi() - (TAU - 1.0)).abs() < 1e-15);
        assert_eq!(Polarization::L.label(), Some(PolLabel::L));
        assert_eq!(Polarization::new(0.3, 0.0).unwrap().label(), None);
        for l in PolLabel::ALL {
            assert_eq!(PolLabel::from_symbol(l.symbol()), Some(l));
        }
    }

    #[test]
    fn fidelity_examples() {
        let h = polarization_to_density(Polarization::H);
        assert!((fidelity_to_pure(&h, &Polarization::H.ket()).unwrap() - 1.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(2);
        for p in [Polarization::V, Polarization::PLUS, Polarization::new(0.4, 2.0).unwrap()] {
            assert!((fidelity_to_pure(&mixed, &p.ket()).unwrap() - 0.5).abs() < 1e-12);
        }
        let w = werner_state(1.0 - 0.75 * 0.2).unwrap();
        assert!((fidelity_to_pure(&w, &psi_plus()).unwrap() - 0.85).abs() < 1e-12);
        assert!(matches!(
            fidelity_to_pure(&h, &psi_plus()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn depolarizing_examples() {
        let h = polarization_to_density(Polarization::H);
        assert_close(&apply_depolarizing(&h, 0.0).unwrap(), &h, 1e-15);
        assert_close(&apply_depolarizing(&h, 1.0).unwrap(), &DensityMatrix::maximally_mixed(2), 1e-15);
        let f = fidelity_to_pure(&apply_depolarizing(&h, 0.02).unwrap(), &Polarization::H.ket()).unwrap();
        assert!((f - 0.99).abs() < 1e-12);
        assert!(apply_depolarizing(&h, 1.5).is_err());
        assert!(apply_depolarizing(&h, -0.1).is_err());
    }

    #[test]
    fn last_qubit_depolarizing_leaves_first_factor() {
        let w = werner_state(0.94).unwrap();
        let out = depolarize_last_qubit(&w, 0.3).unwrap();
        assert_close(&out.reduce_to_first().unwrap(), &w.reduce_to_first().unwrap(), 1e-14);
        // (1-p)F + p/4 for a Werner input
        let f = fidelity_to_pure(&out, &psi_plus()).unwrap();
        assert!((f - (0.7 * 0.94 + 0.3 / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn pauli_coefficient_examples() {
        let mk = |a, b, c2, d| PauliBasisCounts { basis: PauliBasis::Zz, n_pp: a, n_pm: b, n_mp: c2, n_mm: d };
        assert_eq!(pauli_coefficient(&mk(50, 0, 0, 50)).unwrap(), 1.0);
        assert_eq!(pauli_coefficient(&mk(25, 25, 25, 25)).unwrap(), 0.0);
        assert!((pauli_coefficient(&mk(30, 10, 10, 50)).unwrap() - 0.6).abs() < 1e-15);
        assert!(pauli_coefficient(&mk(0, 0, 0, 0)).is_err());
    }

    #[test]
    fn bell_fidelity_examples() {
        assert_eq!(bell_fidelity(1.0, 1.0, -1.0).value, 1.0);
        assert_eq!(bell_fidelity(0.0, 0.0, 0.0).value, 0.25);
        assert!((bell_fidelity(0.8, 0.8, -0.8).value - 0.85).abs() < 1e-15);
        let c = bell_fidelity(1.0, 1.0, -1.2);
        assert!(c.clamped && c.value == 1.0 && c.raw > 1.0);
        assert!(!bell_fidelity(0.5, 0.5, -0.5).clamped);
    }

    #[test]
    fn coincidences_on_bell_state() {
        let mut rng = rng_from_seed(7);
        let bell = DensityMatrix::pure(&psi_plus()).unwrap();
        let zz = sample_coincidences(&bell, PauliBasis::Zz, 1_000_000, &mut rng).unwrap();
        assert!(((zz.n_pp + zz.n_mm) as f64) / 1e6 <= 1e-3);
        let est = estimate_bell_fidelity(&bell, 100_000, &mut rng).unwrap();
        assert!((est.value - 1.0).abs() <= 0.005, "{est:?}");
    }

    #[test]
    fn coincidences_on_mixed_state_are_uniform() {
        let mut rng = rng_from_seed(11);
        let n = 1_000_000u64;
        let xx = sample_coincidences(&DensityMatrix::maximally_mixed(4), PauliBasis::Xx, n, &mut rng).unwrap();
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for k in [xx.n_pp, xx.n_pm, xx.n_mp, xx.n_mm] {
            assert!((k as f64 - 250_000.0).abs() < 3.0 * sigma, "{xx:?}");
        }
        assert_eq!(xx.total(), n);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let w = werner_state(0.85).unwrap();
        let a = sample_coincidences(&w, PauliBasis::Yy, 5000, &mut rng_from_seed(3)).unwrap();
        let b = sample_coincidences(&w, PauliBasis::Yy, 5000, &mut rng_from_seed(3)).unwrap();
        assert_eq!(a, b);
        assert!(sample_coincidences(&w, PauliBasis::Yy, 0, &mut rng_from_seed(3)).is_err());
    }

    #[test]
    fn werner_estimate_tracks_exact_value() {
        let w = werner_state(0.85).unwrap();
        let est = estimate_bell_fidelity(&w, 100_000, &mut rng_from_seed(5)).unwrap();
        assert!((est.value - 0.85).abs() < 0.01);
    }

    #[test]
    fn invalid_matrices_rejected() {
        let not_herm = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(0.1, 0.), c(0.2, 0.), c(0.5, 0.)]);
        assert!(DensityMatrix::new(not_herm).is_err());
        let bad_trace = DMatrix::from_row_slice(2, 2, &[c(0.6, 0.), c(0., 0.), c(0., 0.), c(0.5, 0.)]);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let negative = DMatrix::from_row_slice(2, 2, &[c(1.2, 0.), c(0., 0.), c(0., 0.), c(-0.2, 0.)]);
        assert!(DensityMatrix::new(negative.clone()).is_err());
        let fixed = DensityMatrix::project_physical(&negative).unwrap();
        assert!((fixed.get(0, 0).re - 1.0).abs() < 1e-12);
        assert!(DensityMatrix::new(DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let w = werner_state(0.9).unwrap();
        let s = serde_json::to_string(&w).unwrap();
        let back: DensityMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<DensityMatrix>("[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]]").is_err());
    }

    fn valid(rho: &DensityMatrix) -> bool {
        rho.check().is_ok()
    }

    fn arb_pol() -> impl Strategy<Value = Polarization> {
        (0.0..=FRAC_PI_2, 0.0..TAU).prop_map(|(t, p)| Polarization::new(t, p).unwrap())
    }

    proptest! {
        #[test]
        fn channels_preserve_validity(pol in arb_pol(), p in 0.0..=1.0f64, q in 0.0..=1.0f64, phase in -3.2..3.2f64, r in 0.2..5.0f64) {
            let rho = polarization_to_density(pol);
            prop_assert!(valid(&apply_depolarizing(&rho, p).unwrap()));
            let k = [[ONE, ZERO], [ZERO, Complex64::from_polar(r, phase)]];
            prop_assert!(valid(&apply_last_qubit_operator(&rho, &k).unwrap()));
            let w = werner_state(0.25 + 0.75 * q).unwrap();
            prop_assert!(valid(&depolarize_last_qubit(&w, p).unwrap()));
            prop_assert!(valid(&apply_last_qubit_operator(&w, &k).unwrap()));
        }

        #[test]
        fn depolarizing_composes(pol in arb_pol(), p1 in 0.0..=1.0f64, p2 in 0.0..=1.0f64) {
            let rho = polarization_to_density(pol);
            let two = apply_depolarizing(&apply_depolarizing(&rho, p1).unwrap(), p2).unwrap();
            let one = apply_depolarizing(&rho, 1.0 - (1.0 - p1) * (1.0 - p2)).unwrap();
            prop_assert!(two.distance(&one) < 1e-12);
        }

        #[test]
        fn coefficient_scale_invariant(a in 0u64..1000, b in 0u64..1000, c2 in 0u64..1000, d in 1u64..1000, k in 1u64..50) {
            let base = PauliBasisCounts { basis: PauliBasis::Xx, n_pp: a, n_pm: b, n_mp: c2, n_mm: d };
            let scaled = PauliBasisCounts { basis: PauliBasis::Xx, n_pp: a * k, n_pm: b * k, n_mp: c2 * k, n_mm: d * k };
            prop_assert!((pauli_coefficient(&base).unwrap() - pauli_coefficient(&scaled).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn pure_fidelity_is_unity(pol in arb_pol()) {
            let f = fidelity_to_pure(&polarization_to_density(pol), &pol.ket()).unwrap();
            prop_assert!((f - 1.0).abs() < 1e-12);
        }
    }
}

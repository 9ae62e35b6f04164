//! Basis definitions, pure states and density operators for two photons that
//! each carry a polarization qubit and a frequency qubit.
//!
//! Two state spaces are used:
//!
//! * the **DEPS sector** (16 dimensions) before wavelength conversion, indexed
//!   by `(pol_a, freq_a, pol_b, freq_b)` with flat index
//!   `8·pol_a + 4·freq_a + 2·pol_b + freq_b`, where `H = 0, V = 1`,
//!   `ωs = 0, ωs′ = 1` for photon a and `ωi = 0, ωi′ = 1` for photon b;
//! * the **Bell sector** (4 dimensions) after conversion, where the common
//!   frequency ω carries no information and the flat index is `2·pol_a + pol_b`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};

/// Tolerance for algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance on the smallest eigenvalue of a density operator.
pub const EIGEN_TOL: f64 = 1e-10;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Photon {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn bit(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            Polarization::H
        } else {
            Polarization::V
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

/// Frequency label of a single photon.
///
/// Photon a carries `Signal` (ωs) or `SignalPrime` (ωs′), photon b carries
/// `Idler` (ωi) or `IdlerPrime` (ωi′). `Converted` is the common frequency ω
/// both photons share after wavelength conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrequencyLabel {
    Signal,
    SignalPrime,
    Idler,
    IdlerPrime,
    Converted,
}

impl FrequencyLabel {
    /// Unprimed/primed bit of a pre-conversion label for the given photon.
    pub fn bit_for(self, photon: Photon) -> Result<usize> {
        match (photon, self) {
            (Photon::A, FrequencyLabel::Signal) | (Photon::B, FrequencyLabel::Idler) => Ok(0),
            (Photon::A, FrequencyLabel::SignalPrime) | (Photon::B, FrequencyLabel::IdlerPrime) => {
                Ok(1)
            }
            _ => Err(Error::FrequencyMismatch {
                photon,
                freq: self,
            }),
        }
    }

    pub fn from_bit(photon: Photon, bit: usize) -> Self {
        match (photon, bit) {
            (Photon::A, 0) => FrequencyLabel::Signal,
            (Photon::A, _) => FrequencyLabel::SignalPrime,
            (Photon::B, 0) => FrequencyLabel::Idler,
            (Photon::B, _) => FrequencyLabel::IdlerPrime,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    /// Two photons, polarization ⊗ frequency each: 16 dimensions.
    Deps,
    /// Two photons, polarization only: 4 dimensions.
    Bell,
}

impl Sector {
    pub const fn dim(self) -> usize {
        match self {
            Sector::Deps => 16,
            Sector::Bell => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Bit-flip family of a DEPS class: which photons carry a polarization flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Phi,
    Psi,
    Gamma,
    Upsilon,
}

impl Family {
    pub fn flips_a(self) -> bool {
        matches!(self, Family::Gamma | Family::Upsilon)
    }

    pub fn flips_b(self) -> bool {
        matches!(self, Family::Psi | Family::Upsilon)
    }

    pub fn from_flips(flip_a: bool, flip_b: bool) -> Self {
        match (flip_a, flip_b) {
            (false, false) => Family::Phi,
            (false, true) => Family::Psi,
            (true, false) => Family::Gamma,
            (true, true) => Family::Upsilon,
        }
    }
}

/// The eight labeled two-photon DEPS basis states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DepsClass {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
    GammaPlus,
    GammaMinus,
    UpsilonPlus,
    UpsilonMinus,
}

impl DepsClass {
    pub const ALL: [DepsClass; 8] = [
        DepsClass::PhiPlus,
        DepsClass::PhiMinus,
        DepsClass::PsiPlus,
        DepsClass::PsiMinus,
        DepsClass::GammaPlus,
        DepsClass::GammaMinus,
        DepsClass::UpsilonPlus,
        DepsClass::UpsilonMinus,
    ];

    pub fn new(family: Family, sign: Sign) -> Self {
        use DepsClass::*;
        match (family, sign) {
            (Family::Phi, Sign::Plus) => PhiPlus,
            (Family::Phi, Sign::Minus) => PhiMinus,
            (Family::Psi, Sign::Plus) => PsiPlus,
            (Family::Psi, Sign::Minus) => PsiMinus,
            (Family::Gamma, Sign::Plus) => GammaPlus,
            (Family::Gamma, Sign::Minus) => GammaMinus,
            (Family::Upsilon, Sign::Plus) => UpsilonPlus,
            (Family::Upsilon, Sign::Minus) => UpsilonMinus,
        }
    }

    pub fn family(self) -> Family {
        use DepsClass::*;
        match self {
            PhiPlus | PhiMinus => Family::Phi,
            PsiPlus | PsiMinus => Family::Psi,
            GammaPlus | GammaMinus => Family::Gamma,
            UpsilonPlus | UpsilonMinus => Family::Upsilon,
        }
    }

    pub fn sign(self) -> Sign {
        use DepsClass::*;
        match self {
            PhiPlus | PsiPlus | GammaPlus | UpsilonPlus => Sign::Plus,
            _ => Sign::Minus,
        }
    }

    /// The two basis terms `(pol_a, freq_a, pol_b, freq_b)` of the class, with
    /// the relative sign carried by the second term.
    ///
    /// The first term always has unprimed frequencies, the second primed ones;
    /// in the flip-free Φ family the first term is `HH` and the second `VV`.
    pub fn terms(self) -> [BasisTerm; 2] {
        let family = self.family();
        let pa = |bit: usize| Polarization::from_bit(bit ^ usize::from(family.flips_a()));
        let pb = |bit: usize| Polarization::from_bit(bit ^ usize::from(family.flips_b()));
        [
            BasisTerm {
                pol_a: pa(0),
                freq_a: FrequencyLabel::Signal,
                pol_b: pb(0),
                freq_b: FrequencyLabel::Idler,
            },
            BasisTerm {
                pol_a: pa(1),
                freq_a: FrequencyLabel::SignalPrime,
                pol_b: pb(1),
                freq_b: FrequencyLabel::IdlerPrime,
            },
        ]
    }

    pub fn symbol(self) -> &'static str {
        use DepsClass::*;
        match self {
            PhiPlus => "Φ+",
            PhiMinus => "Φ−",
            PsiPlus => "Ψ+",
            PsiMinus => "Ψ−",
            GammaPlus => "Γ+",
            GammaMinus => "Γ−",
            UpsilonPlus => "Υ+",
            UpsilonMinus => "Υ−",
        }
    }
}

impl fmt::Display for DepsClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// One product basis vector of the DEPS sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisTerm {
    pub pol_a: Polarization,
    pub freq_a: FrequencyLabel,
    pub pol_b: Polarization,
    pub freq_b: FrequencyLabel,
}

impl BasisTerm {
    pub fn index(&self) -> Result<usize> {
        Ok(deps_index(
            self.pol_a,
            self.freq_a.bit_for(Photon::A)?,
            self.pol_b,
            self.freq_b.bit_for(Photon::B)?,
        ))
    }
}

/// Flat DEPS index of `(pol_a, freq_a, pol_b, freq_b)`.
pub fn deps_index(pol_a: Polarization, freq_a: usize, pol_b: Polarization, freq_b: usize) -> usize {
    8 * pol_a.bit() + 4 * freq_a + 2 * pol_b.bit() + freq_b
}

/// Flat Bell-sector index of `(pol_a, pol_b)`.
pub fn bell_index(pol_a: Polarization, pol_b: Polarization) -> usize {
    2 * pol_a.bit() + pol_b.bit()
}

/// The four polarization Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellClass {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellClass {
    pub const ALL: [BellClass; 4] = [
        BellClass::PhiPlus,
        BellClass::PhiMinus,
        BellClass::PsiPlus,
        BellClass::PsiMinus,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BellClass::PhiPlus => "Φ+",
            BellClass::PhiMinus => "Φ−",
            BellClass::PsiPlus => "Ψ+",
            BellClass::PsiMinus => "Ψ−",
        }
    }
}

impl fmt::Display for BellClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    sector: Sector,
    amplitudes: CVector,
}

impl PureState {
    pub fn new(sector: Sector, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != sector.dim() {
            return Err(Error::DimensionMismatch {
                expected: sector.dim(),
                found: amplitudes.len(),
            });
        }
        let norm_sqr = amplitudes.norm_squared();
        if (norm_sqr - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::NotNormalized(norm_sqr));
        }
        Ok(Self { sector, amplitudes })
    }

    /// Builds a state from an arbitrary nonzero vector, normalizing it.
    pub fn normalized(sector: Sector, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        Self::new(sector, amplitudes.unscale(norm))
    }

    pub(crate) fn from_raw(sector: Sector, amplitudes: CVector) -> Self {
        debug_assert_eq!(amplitudes.len(), sector.dim());
        Self { sector, amplitudes }
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        same_sector(self.sector, other.sector)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn projector(&self) -> DensityOperator {
        DensityOperator::from_raw(
            self.sector,
            &self.amplitudes * self.amplitudes.adjoint(),
        )
    }
}

/// Normalized two-term DEPS basis state of the given class.
pub fn make_basis_state(class: DepsClass) -> PureState {
    let mut amps = CVector::zeros(Sector::Deps.dim());
    let [first, second] = class.terms();
    let sign = class.sign().factor();
    amps[first.index().expect("class terms use photon-consistent labels")] +=
        Complex64::new(FRAC_1_SQRT_2, 0.0);
    amps[second.index().expect("class terms use photon-consistent labels")] +=
        Complex64::new(sign * FRAC_1_SQRT_2, 0.0);
    PureState::from_raw(Sector::Deps, amps)
}

/// Normalized polarization Bell state.
pub fn make_bell_state(class: BellClass) -> PureState {
    use Polarization::{H, V};
    let (first, second, sign) = match class {
        BellClass::PhiPlus => ((H, H), (V, V), 1.0),
        BellClass::PhiMinus => ((H, H), (V, V), -1.0),
        BellClass::PsiPlus => ((H, V), (V, H), 1.0),
        BellClass::PsiMinus => ((H, V), (V, H), -1.0),
    };
    let mut amps = CVector::zeros(Sector::Bell.dim());
    amps[bell_index(first.0, first.1)] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    amps[bell_index(second.0, second.1)] = Complex64::new(sign * FRAC_1_SQRT_2, 0.0);
    PureState::from_raw(Sector::Bell, amps)
}

/// Hermitian, unit-trace, positive semidefinite operator on one sector.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    sector: Sector,
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates all density-operator invariants.
    pub fn new(sector: Sector, matrix: CMatrix) -> Result<Self> {
        let rho = Self::try_from_matrix(sector, matrix)?;
        rho.check_invariants()?;
        Ok(rho)
    }

    fn try_from_matrix(sector: Sector, matrix: CMatrix) -> Result<Self> {
        let dim = sector.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { sector, matrix })
    }

    pub(crate) fn from_raw(sector: Sector, matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), sector.dim());
        Self { sector, matrix }
    }

    /// Rescales an unnormalized positive operator to unit trace.
    pub(crate) fn normalized_raw(sector: Sector, matrix: CMatrix) -> Option<(Self, f64)> {
        let weight = matrix.trace().re;
        if weight <= 0.0 {
            return None;
        }
        Some((Self::from_raw(sector, matrix.unscale(weight)), weight))
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        // tr(ρρ) = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest entry of `|ρ − ρ†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let diff = &self.matrix - self.matrix.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        let mut values: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn check_invariants(&self) -> Result<()> {
        let defect = self.hermiticity_defect();
        if defect >= ALGEBRAIC_TOL {
            return Err(Error::InvariantViolation(format!(
                "not Hermitian (defect {defect:e})"
            )));
        }
        let trace = self.trace();
        if (trace - 1.0).abs() >= ALGEBRAIC_TOL {
            return Err(Error::InvariantViolation(format!("trace {trace} != 1")));
        }
        let min = self.min_eigenvalue();
        if min < -EIGEN_TOL {
            return Err(Error::InvariantViolation(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(())
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &PureState) -> Result<f64> {
        same_sector(self.sector, psi.sector())?;
        let v = psi.amplitudes();
        Ok(v.dotc(&(&self.matrix * v)).re)
    }

    /// Weight of the state outside `span(basis)`; `basis` must be orthonormal.
    pub fn weight_outside(&self, basis: &[PureState]) -> Result<f64> {
        let mut inside = 0.0;
        for psi in basis {
            inside += self.expectation(psi)?;
        }
        Ok((self.trace() - inside).max(0.0))
    }

    /// `ρ ↦ U ρ U†`.
    pub(crate) fn conjugated(&self, op: &CMatrix) -> Self {
        Self::from_raw(self.sector, op * &self.matrix * op.adjoint())
    }
}

pub(crate) fn same_sector(expected: Sector, found: Sector) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: expected.dim(),
            found: found.dim(),
        })
    }
}

/// Werner mixture: weight `F` on Φ+ and `(1 − F)/7` on each of the seven
/// other DEPS classes.
pub fn werner_state(fidelity: f64) -> Result<DensityOperator> {
    check_unit_interval("F", fidelity)?;
    let error_weight = (1.0 - fidelity) / 7.0;
    let mut matrix = CMatrix::zeros(16, 16);
    for class in DepsClass::ALL {
        let weight = if class == DepsClass::PhiPlus {
            fidelity
        } else {
            error_weight
        };
        matrix += make_basis_state(class).projector().matrix.scale(weight);
    }
    Ok(DensityOperator::from_raw(Sector::Deps, matrix))
}

/// `⟨target|ρ|target⟩`, clamped to `[0, 1]` against rounding.
pub fn fidelity(rho: &DensityOperator, target: &PureState) -> Result<f64> {
    Ok(rho.expectation(target)?.clamp(0.0, 1.0))
}

/// Convex combination of pure-state projectors.
pub fn mix(components: &[(f64, PureState)]) -> Result<DensityOperator> {
    let Some((_, first)) = components.first() else {
        return Err(Error::InvalidWeights("empty mixture".into()));
    };
    let sector = first.sector();
    let mut total = 0.0;
    let mut matrix = CMatrix::zeros(sector.dim(), sector.dim());
    for (weight, state) in components {
        if weight.is_nan() || *weight < 0.0 {
            return Err(Error::InvalidWeights(format!("negative weight {weight}")));
        }
        same_sector(sector, state.sector())?;
        total += weight;
        matrix += state.projector().matrix.scale(*weight);
    }
    if (total - 1.0).abs() > ALGEBRAIC_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {total}")));
    }
    Ok(DensityOperator::from_raw(sector, matrix))
}

//! Optical elements and measurements as explicit maps on states.
//!
//! Step 1 routes each photon through a WDM and a PBS into one of two ports;
//! a half-wave plate on the lower port (3 for photon a, 4 for photon b)
//! flips the polarization back. Step 2 acts on polarization-only Bell pairs:
//! Hadamards, a PBS parity check across two pairs, and σx measurements.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{
    CMatrix, CVector, DensityOperator, DepsClass, FrequencyLabel,
    Photon, Polarization, PureState, Sector, ALGEBRAIC_TOL, EIGEN_TOL, FRAC_1_SQRT_2,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Output port of the step-1 device. Photon a leaves through 1 or 3, photon
/// b through 2 or 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PortId(u8);

impl PortId {
    pub const ONE: PortId = PortId(1);
    pub const TWO: PortId = PortId(2);
    pub const THREE: PortId = PortId(3);
    pub const FOUR: PortId = PortId(4);

    pub fn get(self) -> u8 {
        self.0
    }

    /// Lower spatial mode: a photon here has had its polarization flipped.
    pub fn is_lower(self) -> bool {
        self.0 >= 3
    }

    pub fn photon(self) -> Photon {
        if self.0 % 2 == 1 {
            Photon::A
        } else {
            Photon::B
        }
    }

    fn upper(photon: Photon) -> Self {
        match photon {
            Photon::A => PortId::ONE,
            Photon::B => PortId::TWO,
        }
    }

    fn lower(photon: Photon) -> Self {
        match photon {
            Photon::A => PortId::THREE,
            Photon::B => PortId::FOUR,
        }
    }

    pub fn all_for(photon: Photon) -> [PortId; 2] {
        [Self::upper(photon), Self::lower(photon)]
    }
}

impl TryFrom<u8> for PortId {
    type Error = u8;

    fn try_from(value: u8) -> std::result::Result<Self, u8> {
        if (1..=4).contains(&value) {
            Ok(PortId(value))
        } else {
            Err(value)
        }
    }
}

impl std::fmt::Display for PortId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Port a photon with the given polarization and frequency leaves through.
///
/// Upper ports collect `(H, unprimed)` and `(V, primed)`; lower ports collect
/// the bit-flipped combinations `(V, unprimed)` and `(H, primed)`.
pub fn port_of(photon: Photon, pol: Polarization, freq: FrequencyLabel) -> Result<PortId> {
    let freq_bit = freq.bit_for(photon)?;
    Ok(if pol.bit() == freq_bit {
        PortId::upper(photon)
    } else {
        PortId::lower(photon)
    })
}

/// Port pair triggered by a DEPS class.
pub fn port_signature(class: DepsClass) -> (PortId, PortId) {
    let mut signatures = class.terms().map(|t| {
        (
            port_of(Photon::A, t.pol_a, t.freq_a).expect("class term labels match photon a"),
            port_of(Photon::B, t.pol_b, t.freq_b).expect("class term labels match photon b"),
        )
    });
    let [first, second] = &mut signatures;
    assert_eq!(first, second, "both terms of {class} must route identically");
    *first
}

/// Projector onto the single-photon `(pol, freq)` states routed to one port.
#[derive(Debug, Clone, PartialEq)]
pub struct PortProjector {
    pub photon: Photon,
    pub port: PortId,
    pub subspace: [(Polarization, FrequencyLabel); 2],
}

impl PortProjector {
    pub fn new(port: PortId) -> Self {
        let photon = port.photon();
        let f = |bit| FrequencyLabel::from_bit(photon, bit);
        let subspace = if port.is_lower() {
            [(Polarization::V, f(0)), (Polarization::H, f(1))]
        } else {
            [(Polarization::H, f(0)), (Polarization::V, f(1))]
        };
        Self {
            photon,
            port,
            subspace,
        }
    }

    /// 4×4 projector on the photon's own `(pol, freq)` space, index `2·pol + freq`.
    pub fn local_matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros(4, 4);
        for (pol, freq) in self.subspace {
            let i = 2 * pol.bit() + freq.bit_for(self.photon).expect("subspace labels match photon");
            m[(i, i)] = ONE;
        }
        m
    }

    /// 16×16 projector on the DEPS sector.
    pub fn matrix(&self) -> CMatrix {
        embed_deps(&self.local_matrix(), self.photon)
    }
}

fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

fn hadamard() -> CMatrix {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    CMatrix::from_row_slice(2, 2, &[h, h, h, -h])
}

/// Lifts a 4×4 single-photon `(pol, freq)` operator to the DEPS sector.
fn embed_deps(local: &CMatrix, photon: Photon) -> CMatrix {
    let id = CMatrix::identity(4, 4);
    match photon {
        Photon::A => local.kronecker(&id),
        Photon::B => id.kronecker(local),
    }
}

/// Lifts a 2×2 polarization operator on one photon to the given sector.
fn polarization_operator(pol_op: &CMatrix, photon: Photon, sector: Sector) -> CMatrix {
    match sector {
        Sector::Deps => embed_deps(&pol_op.kronecker(&CMatrix::identity(2, 2)), photon),
        Sector::Bell => {
            let id = CMatrix::identity(2, 2);
            match photon {
                Photon::A => pol_op.kronecker(&id),
                Photon::B => id.kronecker(pol_op),
            }
        }
    }
}

/// States optical elements act on.
pub trait OpticalState: Sized {
    fn sector(&self) -> Sector;

    /// Applies a unitary (or isometry within the sector).
    fn apply_operator(&self, op: &CMatrix) -> Self;

    /// Applies the channel with the given Kraus operators.
    fn apply_kraus(&self, kraus: &[CMatrix]) -> Result<Self>;
}

impl OpticalState for PureState {
    fn sector(&self) -> Sector {
        PureState::sector(self)
    }

    fn apply_operator(&self, op: &CMatrix) -> Self {
        PureState::from_raw(self.sector(), op * self.amplitudes())
    }

    /// A pure state stays pure only when a single Kraus branch is populated.
    fn apply_kraus(&self, kraus: &[CMatrix]) -> Result<Self> {
        let mut branches = kraus
            .iter()
            .map(|k| k * self.amplitudes())
            .filter(|v| v.norm_squared() > ALGEBRAIC_TOL);
        match (branches.next(), branches.next()) {
            (Some(v), None) => PureState::normalized(self.sector(), v),
            (None, _) => Err(Error::NothingKept("kraus map")),
            (Some(_), Some(_)) => Err(Error::MixedPortSupport),
        }
    }
}

impl OpticalState for DensityOperator {
    fn sector(&self) -> Sector {
        DensityOperator::sector(self)
    }

    fn apply_operator(&self, op: &CMatrix) -> Self {
        self.conjugated(op)
    }

    fn apply_kraus(&self, kraus: &[CMatrix]) -> Result<Self> {
        let dim = self.sector().dim();
        let mut out = CMatrix::zeros(dim, dim);
        for k in kraus {
            out += k * self.matrix() * k.adjoint();
        }
        Ok(DensityOperator::from_raw(self.sector(), out))
    }
}

fn require_sector(op: &'static str, expected: Sector, found: Sector) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::WrongSector {
            op,
            expected,
            found,
        })
    }
}

/// Kraus operators of the step-1 device: one per port pair, each projecting
/// onto the pair's subspace and flipping the polarization of any photon found
/// in a lower port. The four operators satisfy `Σ K†K = 1`.
pub fn conditional_hwp_kraus() -> Vec<CMatrix> {
    let flip = pauli_x().kronecker(&CMatrix::identity(2, 2));
    let local = |port: PortId| {
        let proj = PortProjector::new(port).local_matrix();
        if port.is_lower() {
            &flip * proj
        } else {
            proj
        }
    };
    let mut kraus = Vec::with_capacity(4);
    for port_a in PortId::all_for(Photon::A) {
        for port_b in PortId::all_for(Photon::B) {
            kraus.push(local(port_a).kronecker(&local(port_b)));
        }
    }
    kraus
}

/// Routes the photons to their ports, flips the polarization of photons in
/// ports 3 and 4, and merges each port back onto its upper partner.
///
/// On density operators this is the trace-preserving channel over the four
/// port pairs. A pure state must lie within one port pair, otherwise
/// [`Error::MixedPortSupport`] is returned.
pub fn apply_conditional_hwp<S: OpticalState>(state: &S) -> Result<S> {
    require_sector("conditional HWP", Sector::Deps, state.sector())?;
    state.apply_kraus(&conditional_hwp_kraus())
}

/// Polarization Hadamard on one photon of a Bell-sector state.
pub fn apply_hadamard<S: OpticalState>(state: &S, photon: Photon) -> Result<S> {
    require_sector("Hadamard", Sector::Bell, state.sector())?;
    Ok(state.apply_operator(&polarization_operator(&hadamard(), photon, Sector::Bell)))
}

/// Hadamard on both photons.
pub fn apply_bilateral_hadamard<S: OpticalState>(state: &S) -> Result<S> {
    require_sector("Hadamard", Sector::Bell, state.sector())?;
    let h = hadamard();
    Ok(state.apply_operator(&h.kronecker(&h)))
}

/// `|V⟩ → −|V⟩` on one photon. Acts on either sector.
pub fn apply_phase_flip<S: OpticalState>(state: &S, photon: Photon) -> S {
    state.apply_operator(&polarization_operator(&pauli_z(), photon, state.sector()))
}

/// Basis of the correlated subspace (per photon: `(H, unprimed)` and
/// `(V, primed)`), the only support wavelength conversion is defined on.
fn correlated_indices() -> Vec<(usize, usize)> {
    // (deps index, bell index)
    let mut out = Vec::with_capacity(4);
    for pol_a in [Polarization::H, Polarization::V] {
        for pol_b in [Polarization::H, Polarization::V] {
            let deps = crate::qstate::deps_index(pol_a, pol_a.bit(), pol_b, pol_b.bit());
            out.push((deps, crate::qstate::bell_index(pol_a, pol_b)));
        }
    }
    out
}

/// Converts both photons to the common frequency ω.
///
/// Defined as the partial isometry `|H,ωs⟩ ↦ |H,ω⟩`, `|V,ωs′⟩ ↦ |V,ω⟩` on each
/// photon (likewise for b). Returns the Bell-sector state and the success
/// probability `η²` of converting both photons.
pub fn wavelength_convert(state: &DensityOperator, efficiency: f64) -> Result<(DensityOperator, f64)> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::Domain {
            name: "eta",
            value: efficiency,
            domain: "(0, 1]",
        });
    }
    require_sector("wavelength conversion", Sector::Deps, state.sector())?;
    let mut isometry = CMatrix::zeros(4, 16);
    for (deps, bell) in correlated_indices() {
        isometry[(bell, deps)] = ONE;
    }
    let converted = &isometry * state.matrix() * isometry.adjoint();
    let kept = converted.trace().re;
    let leak = state.trace() - kept;
    if leak > EIGEN_TOL {
        return Err(Error::SupportViolation {
            op: "wavelength conversion",
            leak,
        });
    }
    let (rho, _) = DensityOperator::normalized_raw(Sector::Bell, converted)
        .ok_or(Error::NothingKept("wavelength conversion"))?;
    Ok((rho, efficiency * efficiency))
}

/// Pure-state version of [`wavelength_convert`], without the efficiency factor.
pub fn wavelength_convert_pure(state: &PureState) -> Result<PureState> {
    require_sector("wavelength conversion", Sector::Deps, state.sector())?;
    let mut out = CVector::zeros(4);
    let mut kept = 0.0;
    for (deps, bell) in correlated_indices() {
        out[bell] = state.amplitude(deps);
        kept += state.amplitude(deps).norm_sqr();
    }
    let leak = 1.0 - kept;
    if leak > EIGEN_TOL {
        return Err(Error::SupportViolation {
            op: "wavelength conversion",
            leak,
        });
    }
    PureState::normalized(Sector::Bell, out)
}

/// Four photons from two Bell pairs, ordered `(a1, b1, a2, b2)`; flat index
/// `8·a1 + 4·b1 + 2·a2 + b2` over polarization bits.
#[derive(Debug, Clone, PartialEq)]
pub struct FourPhotonState {
    matrix: CMatrix,
}

impl FourPhotonState {
    pub fn product(pair1: &DensityOperator, pair2: &DensityOperator) -> Result<Self> {
        require_sector("four-photon product", Sector::Bell, pair1.sector())?;
        require_sector("four-photon product", Sector::Bell, pair2.sector())?;
        Ok(Self {
            matrix: pair1.matrix().kronecker(pair2.matrix()),
        })
    }

    pub fn from_pure(amplitudes: &CVector) -> Result<Self> {
        if amplitudes.len() != 16 {
            return Err(Error::DimensionMismatch {
                expected: 16,
                found: amplitudes.len(),
            });
        }
        let v = amplitudes.unscale(amplitudes.norm());
        Ok(Self {
            matrix: &v * v.adjoint(),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn expectation(&self, amplitudes: &CVector) -> f64 {
        amplitudes.dotc(&(&self.matrix * amplitudes)).re
    }
}

pub fn four_photon_index(a1: Polarization, b1: Polarization, a2: Polarization, b2: Polarization) -> usize {
    8 * a1.bit() + 4 * b1.bit() + 2 * a2.bit() + b2.bit()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityCheckResult {
    pub pass_probability: f64,
    /// Renormalized four-photon state of the coincidence event; `None` when
    /// the event never happens.
    pub kept_state: Option<FourPhotonState>,
}

/// Four-mode post-selection behind each party's PBS.
///
/// Alice's PBS combines a1 and a2, Bob's b1 and b2. One photon leaves each of
/// the four outputs exactly when a1, a2 share a polarization and b1, b2 share
/// a polarization.
pub fn parity_check_postselect(pair1: &DensityOperator, pair2: &DensityOperator) -> Result<ParityCheckResult> {
    let joint = FourPhotonState::product(pair1, pair2)?;
    let mut proj = CMatrix::zeros(16, 16);
    for i in 0..16 {
        let a1 = (i >> 3) & 1;
        let b1 = (i >> 2) & 1;
        let a2 = (i >> 1) & 1;
        let b2 = i & 1;
        if a1 == a2 && b1 == b2 {
            proj[(i, i)] = ONE;
        }
    }
    let kept = &proj * joint.matrix() * &proj;
    let pass_probability = kept.trace().re.max(0.0);
    let kept_state = (pass_probability > ALGEBRAIC_TOL).then(|| FourPhotonState {
        matrix: kept.unscale(pass_probability),
    });
    Ok(ParityCheckResult {
        pass_probability,
        kept_state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum XOutcome {
    Plus,
    Minus,
}

impl XOutcome {
    fn ket(self) -> [f64; 2] {
        match self {
            XOutcome::Plus => [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            XOutcome::Minus => [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
        }
    }
}

/// σx outcomes of the measured photons a2 (Alice) and b2 (Bob).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    pub alice: XOutcome,
    pub bob: XOutcome,
}

impl MeasurementOutcome {
    pub const ALL: [MeasurementOutcome; 4] = [
        MeasurementOutcome { alice: XOutcome::Plus, bob: XOutcome::Plus },
        MeasurementOutcome { alice: XOutcome::Plus, bob: XOutcome::Minus },
        MeasurementOutcome { alice: XOutcome::Minus, bob: XOutcome::Plus },
        MeasurementOutcome { alice: XOutcome::Minus, bob: XOutcome::Minus },
    ];

    pub fn parallel(&self) -> bool {
        self.alice == self.bob
    }
}

/// One outcome of the σx measurement, with the corrected kept pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBranch {
    pub outcome: MeasurementOutcome,
    pub probability: f64,
    /// Kept pair (a1, b1) after the conditional phase flip; `None` for a
    /// branch of zero probability.
    pub kept: Option<DensityOperator>,
}

/// Enumerates the four σx outcomes on (a2, b2). Antiparallel outcomes are
/// followed by a phase flip on a1.
pub fn sigma_x_branches(state: &FourPhotonState) -> [MeasurementBranch; 4] {
    let total = state.trace();
    MeasurementOutcome::ALL.map(|outcome| {
        let xa = outcome.alice.ket();
        let xb = outcome.bob.ket();
        // bra ⟨xa xb| on (a2, b2)
        let bra = DMatrix::from_fn(1, 4, |_, j| Complex64::new(xa[j >> 1] * xb[j & 1], 0.0));
        let reduce = CMatrix::identity(4, 4).kronecker(&bra);
        let unnormalized = &reduce * state.matrix() * reduce.adjoint();
        let weight = unnormalized.trace().re.max(0.0);
        let probability = weight / total;
        let kept = DensityOperator::normalized_raw(Sector::Bell, unnormalized)
            .filter(|_| probability > ALGEBRAIC_TOL)
            .map(|(rho, _)| {
                if outcome.parallel() {
                    rho
                } else {
                    apply_phase_flip(&rho, Photon::A)
                }
            });
        MeasurementBranch {
            outcome,
            probability,
            kept,
        }
    })
}

/// Samples one σx outcome and returns it with the corrected kept pair.
pub fn measure_sigma_x_and_correct<R: Rng + ?Sized>(
    state: &FourPhotonState,
    rng: &mut R,
) -> Result<(MeasurementOutcome, DensityOperator)> {
    let branches = sigma_x_branches(state);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for branch in branches {
        if branch.kept.is_none() {
            continue;
        }
        acc += branch.probability;
        let outcome = branch.outcome;
        let kept = branch.kept.expect("checked above");
        if u < acc {
            return Ok((outcome, kept));
        }
        last = Some((outcome, kept));
    }
    last.ok_or(Error::NothingKept("σx measurement"))
}

/// Probability-weighted kept-pair ensemble over all σx outcomes.
pub fn sigma_x_ensemble(state: &FourPhotonState) -> Result<DensityOperator> {
    let mut out = CMatrix::zeros(4, 4);
    for branch in sigma_x_branches(state) {
        if let Some(kept) = branch.kept {
            out += kept.matrix().scale(branch.probability);
        }
    }
    DensityOperator::normalized_raw(Sector::Bell, out)
        .map(|(rho, _)| rho)
        .ok_or(Error::NothingKept("σx measurement"))
}

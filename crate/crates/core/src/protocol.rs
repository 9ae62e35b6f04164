//! The two-step purification protocol, its closed-form recursions, the
//! iteration driver and the discard-only step-1 baseline.

use serde::Serialize;

use crate::error::{check_unit_interval, Error, Result};
use crate::optics::{
    apply_bilateral_hadamard, apply_conditional_hwp, parity_check_postselect, sigma_x_ensemble,
    wavelength_convert, PortId, PortProjector,
};
use crate::qstate::{
    fidelity, make_basis_state, make_bell_state, werner_state, BellClass, DensityOperator, DepsClass,
    Sector, EIGEN_TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Step1Result {
    pub state: DensityOperator,
    /// Fraction of pairs kept by the step.
    pub yield_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step2Result {
    /// Kept pair, canonicalized back to the {Φ+, Φ−} sector.
    pub state: DensityOperator,
    /// Probability of the four-mode coincidence.
    pub pass_probability: f64,
    /// Fidelity of `state` with Φ+.
    pub output_fidelity: f64,
}

fn require_deps(op: &'static str, rho: &DensityOperator) -> Result<()> {
    if rho.sector() == Sector::Deps {
        Ok(())
    } else {
        Err(Error::WrongSector {
            op,
            expected: Sector::Deps,
            found: rho.sector(),
        })
    }
}

/// Bit-flip correction: every pair is kept and photons leaving the lower
/// ports get their polarization flipped back.
pub fn step1_correct(rho: &DensityOperator) -> Result<Step1Result> {
    require_deps("step 1", rho)?;
    let state = apply_conditional_hwp(rho)?;
    Ok(Step1Result {
        state,
        // all four port pairs are retained
        yield_fraction: 1.0,
    })
}

/// Discard-only step 1: keeps the port-(1, 2) coincidences and drops every
/// pair with a bit flip.
pub fn xiao_step1_baseline(rho: &DensityOperator) -> Result<Step1Result> {
    require_deps("baseline step 1", rho)?;
    let proj = PortProjector::new(PortId::ONE).matrix() * PortProjector::new(PortId::TWO).matrix();
    let kept = &proj * rho.matrix() * &proj;
    let (state, yield_fraction) = DensityOperator::normalized_raw(Sector::Deps, kept)
        .filter(|(_, w)| *w > EIGEN_TOL)
        .ok_or(Error::NothingKept("baseline step 1"))?;
    Ok(Step1Result {
        state,
        yield_fraction,
    })
}

/// One purification round on a Bell-sector state supported on {Φ+, Φ−}:
/// bilateral Hadamards, parity check of two copies, σx measurement with
/// conditional phase flip, and bilateral Hadamards again.
pub fn step2_purify(rho: &DensityOperator) -> Result<Step2Result> {
    if rho.sector() != Sector::Bell {
        return Err(Error::WrongSector {
            op: "step 2",
            expected: Sector::Bell,
            found: rho.sector(),
        });
    }
    let sector_basis = [
        make_bell_state(BellClass::PhiPlus),
        make_bell_state(BellClass::PhiMinus),
    ];
    let leak = rho.weight_outside(&sector_basis)?;
    if leak > EIGEN_TOL {
        return Err(Error::SupportViolation { op: "step 2", leak });
    }

    let rotated = apply_bilateral_hadamard(rho)?;
    let parity = parity_check_postselect(&rotated, &rotated)?;
    let four = parity.kept_state.ok_or(Error::NothingKept("parity check"))?;
    let kept = sigma_x_ensemble(&four)?;
    let state = apply_bilateral_hadamard(&kept)?;
    let output_fidelity = fidelity(&state, &sector_basis[0])?;
    Ok(Step2Result {
        state,
        pass_probability: parity.pass_probability,
        output_fidelity,
    })
}

/// Fidelity with Φ+ after step 1 on a Werner input: `(4F + 3)/7`.
pub fn sector_fidelity(f: f64) -> Result<f64> {
    check_unit_interval("F", f)?;
    Ok((4.0 * f + 3.0) / 7.0)
}

/// One-round output fidelity for a Werner input of fidelity `F`:
/// `(4F + 3)² / (32F² − 8F + 25)`.
pub fn fidelity_recursion(f: f64) -> Result<f64> {
    check_unit_interval("F", f)?;
    let num = 4.0 * f + 3.0;
    // 32F² − 8F + 25 ≥ 24.5 on [0, 1]
    Ok(num * num / (32.0 * f * f - 8.0 * f + 25.0))
}

/// Per-round map on the {Φ+, Φ−} sector: `p ↦ p² / (p² + (1 − p)²)`.
pub fn sector_recursion(p: f64) -> Result<f64> {
    check_unit_interval("p", p)?;
    let q = 1.0 - p;
    Ok(p * p / (p * p + q * q))
}

/// Pass probability of one round on the {Φ+, Φ−} sector: `(p² + (1 − p)²)/2`.
pub fn sector_pass_probability(p: f64) -> Result<f64> {
    check_unit_interval("p", p)?;
    let q = 1.0 - p;
    Ok((p * p + q * q) / 2.0)
}

/// Input fidelity with its sector fidelity and one-round output fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecursionParams {
    pub input_fidelity: f64,
    pub sector_fidelity: f64,
    pub output_fidelity: f64,
}

impl RecursionParams {
    pub fn new(f: f64) -> Result<Self> {
        Ok(Self {
            input_fidelity: f,
            sector_fidelity: sector_fidelity(f)?,
            output_fidelity: fidelity_recursion(f)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Fidelity with Φ+ after this round.
    pub fidelity: f64,
    /// Round 0: conversion success `η²`; later rounds: coincidence probability.
    pub pass_probability: f64,
    /// Surviving pairs per initial pair.
    pub cumulative_yield: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurificationTrace {
    pub initial_fidelity: f64,
    pub efficiency: f64,
    pub rounds: Vec<RoundRecord>,
}

impl PurificationTrace {
    pub fn final_fidelity(&self) -> f64 {
        self.rounds.last().map_or(self.initial_fidelity, |r| r.fidelity)
    }
}

/// Werner state through step 1 and wavelength conversion. Returns the
/// Bell-sector state and the conversion success probability.
pub fn prepare_converted(f0: f64, efficiency: f64) -> Result<(DensityOperator, f64)> {
    let corrected = step1_correct(&werner_state(f0)?)?;
    let (state, conversion) = wavelength_convert(&corrected.state, efficiency)?;
    Ok((state, corrected.yield_fraction * conversion))
}

/// Runs step 1 and conversion (round 0) followed by `rounds` purification
/// rounds, each consuming two copies of the current state.
pub fn iterate(f0: f64, rounds: usize, efficiency: f64) -> Result<PurificationTrace> {
    let (mut state, conversion) = prepare_converted(f0, efficiency)?;
    let phi_plus = make_bell_state(BellClass::PhiPlus);
    let mut cumulative = conversion;
    let mut records = Vec::with_capacity(rounds + 1);
    records.push(RoundRecord {
        round: 0,
        fidelity: fidelity(&state, &phi_plus)?,
        pass_probability: conversion,
        cumulative_yield: cumulative,
    });
    for round in 1..=rounds {
        let step = step2_purify(&state)?;
        cumulative *= step.pass_probability / 2.0;
        records.push(RoundRecord {
            round,
            fidelity: step.output_fidelity,
            pass_probability: step.pass_probability,
            cumulative_yield: cumulative,
        });
        state = step.state;
    }
    Ok(PurificationTrace {
        initial_fidelity: f0,
        efficiency,
        rounds: records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageSummary {
    pub yield_fraction: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeComparison {
    pub f0: f64,
    pub modified: StageSummary,
    pub baseline: StageSummary,
}

/// Step-1 yield and fidelity of the correcting scheme versus the
/// discard-only baseline, both from the exact circuits.
pub fn compare_schemes(f0: f64) -> Result<SchemeComparison> {
    let werner = werner_state(f0)?;
    let phi_plus = make_basis_state(DepsClass::PhiPlus);
    let summarize = |r: Step1Result| -> Result<StageSummary> {
        Ok(StageSummary {
            yield_fraction: r.yield_fraction,
            fidelity: fidelity(&r.state, &phi_plus)?,
        })
    };
    Ok(SchemeComparison {
        f0,
        modified: summarize(step1_correct(&werner)?)?,
        baseline: summarize(xiao_step1_baseline(&werner)?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{mix, ALGEBRAIC_TOL};
    use approx::assert_abs_diff_eq;

    fn phi_weights(rho: &DensityOperator) -> (f64, f64) {
        (
            rho.expectation(&make_basis_state(DepsClass::PhiPlus)).unwrap(),
            rho.expectation(&make_basis_state(DepsClass::PhiMinus)).unwrap(),
        )
    }

    #[test]
    fn step1_at_half() {
        let r = step1_correct(&werner_state(0.5).unwrap()).unwrap();
        let (plus, minus) = phi_weights(&r.state);
        assert_abs_diff_eq!(plus, 5.0 / 7.0, epsilon = ALGEBRAIC_TOL);
        assert_abs_diff_eq!(minus, 2.0 / 7.0, epsilon = ALGEBRAIC_TOL);
        assert_eq!(r.yield_fraction, 1.0);
    }

    #[test]
    fn step1_pure_input() {
        let r = step1_correct(&werner_state(1.0).unwrap()).unwrap();
        let (plus, _) = phi_weights(&r.state);
        assert_abs_diff_eq!(plus, 1.0, epsilon = ALGEBRAIC_TOL);
        assert_eq!(r.yield_fraction, 1.0);
    }

    #[test]
    fn step1_rejects_bell_sector() {
        let bell = make_bell_state(BellClass::PhiPlus).projector();
        assert!(matches!(step1_correct(&bell), Err(Error::WrongSector { .. })));
        assert!(matches!(xiao_step1_baseline(&bell), Err(Error::WrongSector { .. })));
    }

    #[test]
    fn baseline_at_half() {
        let r = xiao_step1_baseline(&werner_state(0.5).unwrap()).unwrap();
        assert_abs_diff_eq!(r.yield_fraction, 4.0 / 7.0, epsilon = ALGEBRAIC_TOL);
        let (plus, minus) = phi_weights(&r.state);
        assert_abs_diff_eq!(plus, 7.0 / 8.0, epsilon = ALGEBRAIC_TOL);
        assert_abs_diff_eq!(minus, 1.0 / 8.0, epsilon = ALGEBRAIC_TOL);
        let r = xiao_step1_baseline(&werner_state(1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(r.yield_fraction, 1.0, epsilon = ALGEBRAIC_TOL);
    }

    #[test]
    fn baseline_with_nothing_in_kept_ports() {
        let rho = make_basis_state(DepsClass::UpsilonPlus).projector();
        assert!(matches!(xiao_step1_baseline(&rho), Err(Error::NothingKept(_))));
    }

    #[test]
    fn recursion_examples() {
        assert_abs_diff_eq!(fidelity_recursion(1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity_recursion(0.125).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity_recursion(0.5).unwrap(), 25.0 / 29.0, epsilon = 1e-15);
        assert!(fidelity_recursion(1.5).is_err());
        assert_eq!(sector_recursion(0.5).unwrap(), 0.5);
        assert_eq!(sector_recursion(0.0).unwrap(), 0.0);
        assert_eq!(sector_recursion(1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(sector_recursion(5.0 / 7.0).unwrap(), 25.0 / 29.0, epsilon = 1e-15);
        assert!(sector_recursion(-0.1).is_err());
        let params = RecursionParams::new(0.5).unwrap();
        assert_abs_diff_eq!(params.sector_fidelity, 5.0 / 7.0, epsilon = 1e-15);
    }

    #[test]
    fn step2_examples() {
        let rho = |p: f64| {
            mix(&[
                (p, make_bell_state(BellClass::PhiPlus)),
                (1.0 - p, make_bell_state(BellClass::PhiMinus)),
            ])
            .unwrap()
        };
        let r = step2_purify(&rho(5.0 / 7.0)).unwrap();
        assert_abs_diff_eq!(r.output_fidelity, 25.0 / 29.0, epsilon = ALGEBRAIC_TOL);
        assert_abs_diff_eq!(r.pass_probability, 29.0 / 98.0, epsilon = ALGEBRAIC_TOL);
        let r = step2_purify(&rho(1.0)).unwrap();
        assert_abs_diff_eq!(r.output_fidelity, 1.0, epsilon = ALGEBRAIC_TOL);
        assert_abs_diff_eq!(r.pass_probability, 0.5, epsilon = ALGEBRAIC_TOL);
        let r = step2_purify(&rho(0.5)).unwrap();
        assert_abs_diff_eq!(r.output_fidelity, 0.5, epsilon = ALGEBRAIC_TOL);
        r.state.check_invariants().unwrap();
    }

    #[test]
    fn step2_rejects_out_of_sector_input() {
        let psi = make_bell_state(BellClass::PsiPlus).projector();
        assert!(matches!(step2_purify(&psi), Err(Error::SupportViolation { .. })));
        let deps = werner_state(0.5).unwrap();
        assert!(matches!(step2_purify(&deps), Err(Error::WrongSector { .. })));
    }

    #[test]
    fn iterate_perfect_input() {
        let trace = iterate(1.0, 3, 1.0).unwrap();
        assert_eq!(trace.rounds.len(), 4);
        for r in &trace.rounds[1..] {
            assert_abs_diff_eq!(r.fidelity, 1.0, epsilon = ALGEBRAIC_TOL);
            assert_abs_diff_eq!(r.pass_probability, 0.5, epsilon = ALGEBRAIC_TOL);
        }
    }

    #[test]
    fn iterate_below_threshold_decreases() {
        let trace = iterate(0.1, 5, 1.0).unwrap();
        for w in trace.rounds.windows(2) {
            assert!(w[1].fidelity < w[0].fidelity);
        }
    }

    #[test]
    fn iterate_efficiency_scales_yield_only() {
        let ideal = iterate(0.3, 2, 1.0).unwrap();
        let lossy = iterate(0.3, 2, 0.9).unwrap();
        for (a, b) in ideal.rounds.iter().zip(&lossy.rounds) {
            assert_abs_diff_eq!(a.fidelity, b.fidelity, epsilon = ALGEBRAIC_TOL);
            assert_abs_diff_eq!(b.cumulative_yield, 0.81 * a.cumulative_yield, epsilon = ALGEBRAIC_TOL);
        }
        assert!(iterate(0.3, 2, 0.0).is_err());
    }

    #[test]
    fn compare_examples() {
        let c = compare_schemes(0.5).unwrap();
        assert_eq!(c.modified.yield_fraction, 1.0);
        assert_abs_diff_eq!(c.modified.fidelity, 5.0 / 7.0, epsilon = ALGEBRAIC_TOL);
        assert_abs_diff_eq!(c.baseline.yield_fraction, 4.0 / 7.0, epsilon = ALGEBRAIC_TOL);
        assert_abs_diff_eq!(c.baseline.fidelity, 7.0 / 8.0, epsilon = ALGEBRAIC_TOL);
        let c = compare_schemes(1.0).unwrap();
        assert_abs_diff_eq!(c.baseline.yield_fraction, 1.0, epsilon = ALGEBRAIC_TOL);
        assert_abs_diff_eq!(c.baseline.fidelity, 1.0, epsilon = ALGEBRAIC_TOL);
        assert!(compare_schemes(-1.0).is_err());
    }
}

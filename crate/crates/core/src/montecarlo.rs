//! Trajectory sampling of the protocol.
//!
//! Every ensemble the protocol produces is diagonal in a known basis, so a
//! trajectory only tracks class labels: the Werner class of each pair, the
//! ports it triggers, and the Φ± class it ends up in. Step-2 branch
//! probabilities come from the exact optics enumeration.
//!
//! Randomness is drawn from a ChaCha stream selected by `(round, index)` under
//! a master seed, so results do not depend on how trials are scheduled.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_unit_interval, Error, Result};
use crate::optics::{
    apply_bilateral_hadamard, parity_check_postselect, port_of, port_signature, sigma_x_branches,
    MeasurementOutcome, PortId,
};
use crate::qstate::{
    make_bell_state, BellClass, DepsClass, Family, Photon, Sign, ALGEBRAIC_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SeedSpec {
    pub master: u64,
}

impl SeedSpec {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    /// Independent stream for trial (or pair) `index` of `round`.
    pub fn stream(&self, round: u32, index: u64) -> ChaCha8Rng {
        debug_assert!(index < 1 << 48);
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream((u64::from(round) << 48) | index);
        rng
    }
}

/// Draws a Werner class: Φ+ with probability `F`, each other class with
/// probability `(1 − F)/7`.
pub fn sample_class<R: Rng + ?Sized>(f: f64, rng: &mut R) -> Result<DepsClass> {
    check_unit_interval("F", f)?;
    let u: f64 = rng.random();
    if u < f {
        return Ok(DepsClass::PhiPlus);
    }
    let k = (((u - f) / (1.0 - f)) * 7.0) as usize;
    Ok(DepsClass::ALL[1 + k.min(6)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Step1Trajectory {
    pub ports: (PortId, PortId),
    /// Φ+ or Φ−, carrying the sign of the input class.
    pub corrected: DepsClass,
}

/// Routes a class through the step-1 device classically.
pub fn run_step1_trajectory(class: DepsClass) -> Step1Trajectory {
    let [term, _] = class.terms();
    let port_a = port_of(Photon::A, term.pol_a, term.freq_a).expect("photon a label");
    let port_b = port_of(Photon::B, term.pol_b, term.freq_b).expect("photon b label");
    // the HWP on a lower port undoes that photon's flip
    let pol_a = if port_a.is_lower() { term.pol_a.flipped() } else { term.pol_a };
    let pol_b = if port_b.is_lower() { term.pol_b.flipped() } else { term.pol_b };
    let family = Family::from_flips(pol_a.bit() == 1, pol_b.bit() == 1);
    Step1Trajectory {
        ports: (port_a, port_b),
        corrected: DepsClass::new(family, class.sign()),
    }
}

#[derive(Debug, Clone)]
struct Branch {
    outcome: MeasurementOutcome,
    probability: f64,
    kept: BellClass,
}

#[derive(Debug, Clone)]
struct PairEntry {
    pass_probability: f64,
    branches: Vec<Branch>,
}

/// Exact step-2 statistics for each pair of {Φ+, Φ−} inputs.
#[derive(Debug, Clone)]
pub struct Step2Table {
    entries: [[PairEntry; 2]; 2],
}

fn phase_index(class: BellClass) -> Result<usize> {
    match class {
        BellClass::PhiPlus => Ok(0),
        BellClass::PhiMinus => Ok(1),
        other => Err(Error::InvalidClass(other.to_string())),
    }
}

impl Step2Table {
    pub fn build() -> Result<Self> {
        let classes = [BellClass::PhiPlus, BellClass::PhiMinus];
        let targets = classes.map(make_bell_state);
        let entry = |c1: BellClass, c2: BellClass| -> Result<PairEntry> {
            let r1 = apply_bilateral_hadamard(&make_bell_state(c1).projector())?;
            let r2 = apply_bilateral_hadamard(&make_bell_state(c2).projector())?;
            let parity = parity_check_postselect(&r1, &r2)?;
            let mut branches = Vec::new();
            if let Some(four) = parity.kept_state.as_ref() {
                for b in sigma_x_branches(four) {
                    let Some(kept) = b.kept else { continue };
                    let kept = apply_bilateral_hadamard(&kept)?;
                    let mut found = None;
                    for (class, target) in classes.iter().zip(&targets) {
                        if (kept.expectation(target)? - 1.0).abs() < 1e-9 {
                            found = Some(*class);
                        }
                    }
                    let kept = found.ok_or_else(|| {
                        Error::InvalidClass(format!("branch of {c1}⊗{c2} is not a Φ± state"))
                    })?;
                    branches.push(Branch {
                        outcome: b.outcome,
                        probability: b.probability,
                        kept,
                    });
                }
            }
            Ok(PairEntry {
                pass_probability: if parity.pass_probability > ALGEBRAIC_TOL {
                    parity.pass_probability
                } else {
                    0.0
                },
                branches,
            })
        };
        Ok(Self {
            entries: [
                [entry(classes[0], classes[0])?, entry(classes[0], classes[1])?],
                [entry(classes[1], classes[0])?, entry(classes[1], classes[1])?],
            ],
        })
    }

    pub fn pass_probability(&self, c1: BellClass, c2: BellClass) -> Result<f64> {
        Ok(self.entries[phase_index(c1)?][phase_index(c2)?].pass_probability)
    }

    /// Samples one purification round on a pair of classes.
    pub fn sample<R: Rng + ?Sized>(&self, c1: BellClass, c2: BellClass, rng: &mut R) -> Result<PairRecord> {
        let entry = &self.entries[phase_index(c1)?][phase_index(c2)?];
        let u: f64 = rng.random();
        let mut record = PairRecord {
            classes: (c1, c2),
            passed: false,
            outcome: None,
            kept: None,
        };
        if u >= entry.pass_probability {
            return Ok(record);
        }
        let v: f64 = rng.random();
        let mut acc = 0.0;
        for branch in &entry.branches {
            acc += branch.probability;
            record.outcome = Some(branch.outcome);
            record.kept = Some(branch.kept);
            if v < acc {
                break;
            }
        }
        record.passed = record.kept.is_some();
        Ok(record)
    }
}

fn shared_table() -> &'static Step2Table {
    static TABLE: OnceLock<Step2Table> = OnceLock::new();
    TABLE.get_or_init(|| Step2Table::build().expect("step-2 table from exact optics"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairRecord {
    pub classes: (BellClass, BellClass),
    pub passed: bool,
    pub outcome: Option<MeasurementOutcome>,
    pub kept: Option<BellClass>,
}

/// One purification round on two Φ± pairs.
pub fn run_step2_trajectory<R: Rng + ?Sized>(c1: BellClass, c2: BellClass, rng: &mut R) -> Result<PairRecord> {
    shared_table().sample(c1, c2, rng)
}

/// Step-1 history of a single sampled pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub index: u64,
    pub sampled: DepsClass,
    pub ports: (PortId, PortId),
    pub corrected: DepsClass,
    /// Both photons survived wavelength conversion.
    pub converted: bool,
}

impl TrialRecord {
    pub fn bell_class(&self) -> BellClass {
        match self.corrected.sign() {
            Sign::Plus => BellClass::PhiPlus,
            Sign::Minus => BellClass::PhiMinus,
        }
    }
}

fn check_efficiency(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "eta",
            value: eta,
            domain: "(0, 1]",
        })
    }
}

/// Samples Werner pairs and routes each through step 1 and conversion.
pub fn run_step1_trials(f0: f64, trials: u64, seed: SeedSpec, eta: f64) -> Result<Vec<TrialRecord>> {
    check_unit_interval("F", f0)?;
    check_efficiency(eta)?;
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    (0..trials)
        .into_par_iter()
        .map(|index| {
            let mut rng = seed.stream(0, index);
            let sampled = sample_class(f0, &mut rng)?;
            let traj = run_step1_trajectory(sampled);
            let a_ok = rng.random::<f64>() < eta;
            let b_ok = rng.random::<f64>() < eta;
            Ok(TrialRecord {
                index,
                sampled,
                ports: traj.ports,
                corrected: traj.corrected,
                converted: a_ok && b_ok,
            })
        })
        .collect()
}

/// Per-round Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McStatistics {
    pub round: usize,
    /// Round 0: sampled pairs. Later rounds: pairs of pairs attempted.
    pub trials: u64,
    /// Pairs surviving the round.
    pub kept: u64,
    /// Fraction of kept pairs in Φ+; NaN when nothing is kept.
    pub fidelity_estimate: f64,
    /// `sqrt(f̂(1 − f̂)/kept)`.
    pub standard_error: f64,
    pub pass_rate: f64,
    /// Kept pairs per initial pair.
    pub cumulative_yield: f64,
}

impl McStatistics {
    fn from_counts(round: usize, trials: u64, kept: u64, phi_plus: u64, initial: u64) -> Self {
        let (fidelity_estimate, standard_error) = if kept == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let f = phi_plus as f64 / kept as f64;
            (f, (f * (1.0 - f) / kept as f64).sqrt())
        };
        let pass_rate = if trials == 0 {
            f64::NAN
        } else {
            kept as f64 / trials as f64
        };
        Self {
            round,
            trials,
            kept,
            fidelity_estimate,
            standard_error,
            pass_rate,
            cumulative_yield: kept as f64 / initial as f64,
        }
    }
}

/// Full Monte Carlo run: round 0 is step 1 plus conversion, each later round
/// pairs survivors `(2i, 2i + 1)` and purifies them.
pub fn run_experiment(
    f0: f64,
    rounds: usize,
    trials: u64,
    seed: SeedSpec,
    eta: f64,
) -> Result<Vec<McStatistics>> {
    let records = run_step1_trials(f0, trials, seed, eta)?;
    let mut survivors: Vec<BellClass> = records
        .iter()
        .filter(|r| r.converted)
        .map(TrialRecord::bell_class)
        .collect();
    let count_plus = |v: &[BellClass]| v.iter().filter(|c| **c == BellClass::PhiPlus).count() as u64;
    let mut stats = Vec::with_capacity(rounds + 1);
    stats.push(McStatistics::from_counts(
        0,
        trials,
        survivors.len() as u64,
        count_plus(&survivors),
        trials,
    ));
    let table = shared_table();
    for round in 1..=rounds {
        let pairs: Vec<PairRecord> = survivors
            .par_chunks_exact(2)
            .enumerate()
            .map(|(i, pair)| {
                let mut rng = seed.stream(round as u32, i as u64);
                table.sample(pair[0], pair[1], &mut rng)
            })
            .collect::<Result<_>>()?;
        survivors = pairs.iter().filter_map(|p| p.kept).collect();
        stats.push(McStatistics::from_counts(
            round,
            pairs.len() as u64,
            survivors.len() as u64,
            count_plus(&survivors),
            trials,
        ));
    }
    Ok(stats)
}

/// Discard-only step 1 sampled: a pair is kept iff it triggers ports (1, 2).
pub fn run_baseline_experiment(f0: f64, trials: u64, seed: SeedSpec) -> Result<McStatistics> {
    let records = run_step1_trials(f0, trials, seed, 1.0)?;
    let upper = (PortId::ONE, PortId::TWO);
    let kept: Vec<_> = records.iter().filter(|r| r.ports == upper).collect();
    let phi_plus = kept.iter().filter(|r| r.sampled == DepsClass::PhiPlus).count() as u64;
    Ok(McStatistics::from_counts(0, trials, kept.len() as u64, phi_plus, trials))
}

/// True when every record's ports agree with the class's port signature.
pub fn ports_consistent(records: &[TrialRecord]) -> bool {
    records.iter().all(|r| r.ports == port_signature(r.sampled))
}

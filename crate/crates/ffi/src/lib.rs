//! C ABI over `deps_purify`.
//!
//! Every fallible call returns a [`DpStatus`] and writes results through out
//! pointers. States, traces and Monte Carlo runs are opaque handles owned by
//! the caller and released with the matching `*_free`. On failure the message
//! is kept per thread and read back with [`dp_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

use deps_purify::montecarlo::{run_experiment, McStatistics, SeedSpec};
use deps_purify::protocol::{
    compare_schemes, fidelity_recursion, iterate, sector_fidelity, sector_recursion, step1_correct,
    xiao_step1_baseline, PurificationTrace,
};
use deps_purify::{
    fidelity, make_basis_state, make_bell_state, werner_state, BellClass, DensityOperator,
    DepsClass, Error, Sector,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpStatus {
    Ok = 0,
    NullPointer = 1,
    /// Parameter outside its allowed range.
    Domain = 2,
    /// Operation applied to a state of the wrong sector or shape.
    Sector = 3,
    /// State has weight outside the subspace an operation accepts.
    Support = 4,
    /// Post-selection kept nothing.
    NothingKept = 5,
    /// Index past the end of a trace or run.
    OutOfRange = 6,
    InvalidState = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> DpStatus {
    match err {
        Error::Domain { .. } | Error::ZeroTrials => DpStatus::Domain,
        Error::DimensionMismatch { .. }
        | Error::WrongSector { .. }
        | Error::FrequencyMismatch { .. }
        | Error::InvalidClass(_) => DpStatus::Sector,
        Error::SupportViolation { .. } | Error::MixedPortSupport => DpStatus::Support,
        Error::NothingKept(_) => DpStatus::NothingKept,
        Error::NotNormalized(_) | Error::InvalidWeights(_) | Error::InvariantViolation(_) => {
            DpStatus::InvalidState
        }
    }
}

fn fail(status: DpStatus, msg: impl Into<String>) -> DpStatus {
    set_last_error(msg);
    status
}

/// Runs `f`, recording errors and turning panics into [`DpStatus::Panic`].
fn guarded<F>(f: F) -> DpStatus
where
    F: FnOnce() -> Result<(), DpStatus> + UnwindSafe,
{
    match catch_unwind(f) {
        Ok(Ok(())) => DpStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(DpStatus::Panic, "panic inside deps_purify"),
    }
}

fn lift<T>(r: deps_purify::Result<T>) -> Result<T, DpStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, DpStatus> {
    p.as_mut().ok_or_else(|| fail(DpStatus::NullPointer, format!("{name} is null")))
}

unsafe fn in_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, DpStatus> {
    p.as_ref().ok_or_else(|| fail(DpStatus::NullPointer, format!("{name} is null")))
}

/// Last error message on this thread, or null. Valid until the next failing
/// call on the same thread.
#[no_mangle]
pub extern "C" fn dp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// F ↦ F' for Werner input fidelity `f`.
///
/// # Safety
/// `out` must be null or point to writable storage for one `double`.
#[no_mangle]
pub unsafe extern "C" fn dp_fidelity_recursion(f: f64, out: *mut f64) -> DpStatus {
    guarded(|| {
        let out = out_ref(out, "out")?;
        *out = lift(fidelity_recursion(f))?;
        Ok(())
    })
}

/// p ↦ p²/(p² + (1 − p)²) on the two-state sector.
///
/// # Safety
/// `out` must be null or point to writable storage for one `double`.
#[no_mangle]
pub unsafe extern "C" fn dp_sector_recursion(p: f64, out: *mut f64) -> DpStatus {
    guarded(|| {
        let out = out_ref(out, "out")?;
        *out = lift(sector_recursion(p))?;
        Ok(())
    })
}

/// Φ+ weight after step 1, `(4F + 3)/7`.
///
/// # Safety
/// `out` must be null or point to writable storage for one `double`.
#[no_mangle]
pub unsafe extern "C" fn dp_sector_fidelity(f: f64, out: *mut f64) -> DpStatus {
    guarded(|| {
        let out = out_ref(out, "out")?;
        *out = lift(sector_fidelity(f))?;
        Ok(())
    })
}

/// Density operator in either the 16-dim DEPS sector or the 4-dim Bell sector.
pub struct DpDensity(DensityOperator);

/// # Safety
/// `out` must be null or point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn dp_werner_new(f: f64, out: *mut *mut DpDensity) -> DpStatus {
    guarded(|| {
        let out = out_ref(out, "out")?;
        let rho = lift(werner_state(f))?;
        *out = Box::into_raw(Box::new(DpDensity(rho)));
        Ok(())
    })
}

/// # Safety
/// `rho` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn dp_density_free(rho: *mut DpDensity) {
    if !rho.is_null() {
        drop(Box::from_raw(rho));
    }
}

/// Hilbert-space dimension, 16 or 4. Zero for a null handle.
///
/// # Safety
/// `rho` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dp_density_dim(rho: *const DpDensity) -> usize {
    rho.as_ref().map_or(0, |r| r.0.sector().dim())
}

/// # Safety
/// `rho` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn dp_density_trace(rho: *const DpDensity, out: *mut f64) -> DpStatus {
    guarded(|| {
        let rho = in_ref(rho, "rho")?;
        *out_ref(out, "out")? = rho.0.trace();
        Ok(())
    })
}

/// Overlap with Φ+ of the handle's own sector.
///
/// # Safety
/// `rho` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn dp_density_fidelity(rho: *const DpDensity, out: *mut f64) -> DpStatus {
    guarded(|| {
        let rho = in_ref(rho, "rho")?;
        let out = out_ref(out, "out")?;
        let target = match rho.0.sector() {
            Sector::Deps => make_basis_state(DepsClass::PhiPlus),
            Sector::Bell => make_bell_state(BellClass::PhiPlus),
        };
        *out = lift(fidelity(&rho.0, &target))?;
        Ok(())
    })
}

unsafe fn run_step1(
    rho: *const DpDensity,
    out: *mut *mut DpDensity,
    yield_fraction: *mut f64,
    step: fn(&DensityOperator) -> deps_purify::Result<deps_purify::protocol::Step1Result>,
) -> Result<(), DpStatus> {
    let rho = in_ref(rho, "rho")?;
    let out = out_ref(out, "out")?;
    let r = lift(step(&rho.0))?;
    if let Some(y) = yield_fraction.as_mut() {
        *y = r.yield_fraction;
    }
    *out = Box::into_raw(Box::new(DpDensity(r.state)));
    Ok(())
}

/// Bit-flip correction. Writes a new handle to `out`; `yield_fraction` may be
/// null.
///
/// # Safety
/// `rho` must be a live DEPS-sector handle; pointers null or writable.
#[no_mangle]
pub unsafe extern "C" fn dp_step1_correct(
    rho: *const DpDensity,
    out: *mut *mut DpDensity,
    yield_fraction: *mut f64,
) -> DpStatus {
    guarded(|| run_step1(rho, out, yield_fraction, step1_correct))
}

/// Discard-only variant keeping the port-(1,2) block.
///
/// # Safety
/// Same as [`dp_step1_correct`].
#[no_mangle]
pub unsafe extern "C" fn dp_step1_baseline(
    rho: *const DpDensity,
    out: *mut *mut DpDensity,
    yield_fraction: *mut f64,
) -> DpStatus {
    guarded(|| run_step1(rho, out, yield_fraction, xiao_step1_baseline))
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DpRoundRecord {
    pub round: usize,
    pub fidelity: f64,
    pub pass_probability: f64,
    pub cumulative_yield: f64,
}

pub struct DpTrace(PurificationTrace);

/// Exact iteration: round 0 is step 1 plus conversion, then `rounds`
/// step-2 rounds.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn dp_iterate(f0: f64, rounds: usize, eta: f64, out: *mut *mut DpTrace) -> DpStatus {
    guarded(|| {
        let out = out_ref(out, "out")?;
        let trace = lift(iterate(f0, rounds, eta))?;
        *out = Box::into_raw(Box::new(DpTrace(trace)));
        Ok(())
    })
}

/// Number of records, `rounds + 1`. Zero for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dp_trace_len(trace: *const DpTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.rounds.len())
}

/// # Safety
/// `trace` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn dp_trace_round(trace: *const DpTrace, index: usize, out: *mut DpRoundRecord) -> DpStatus {
    guarded(|| {
        let trace = in_ref(trace, "trace")?;
        let out = out_ref(out, "out")?;
        let r = trace.0.rounds.get(index).ok_or_else(|| {
            fail(DpStatus::OutOfRange, format!("round {index} of {}", trace.0.rounds.len()))
        })?;
        *out = DpRoundRecord {
            round: r.round,
            fidelity: r.fidelity,
            pass_probability: r.pass_probability,
            cumulative_yield: r.cumulative_yield,
        };
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a handle from [`dp_iterate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dp_trace_free(trace: *mut DpTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DpComparison {
    pub f0: f64,
    pub modified_yield: f64,
    pub modified_fidelity: f64,
    pub baseline_yield: f64,
    pub baseline_fidelity: f64,
}

/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn dp_compare_schemes(f0: f64, out: *mut DpComparison) -> DpStatus {
    guarded(|| {
        let out = out_ref(out, "out")?;
        let c = lift(compare_schemes(f0))?;
        *out = DpComparison {
            f0: c.f0,
            modified_yield: c.modified.yield_fraction,
            modified_fidelity: c.modified.fidelity,
            baseline_yield: c.baseline.yield_fraction,
            baseline_fidelity: c.baseline.fidelity,
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DpMcStats {
    pub round: usize,
    pub trials: u64,
    pub kept: u64,
    /// NaN when `kept` is zero.
    pub fidelity_estimate: f64,
    pub standard_error: f64,
    pub pass_rate: f64,
    pub cumulative_yield: f64,
}

pub struct DpMcRun(Vec<McStatistics>);

/// Monte Carlo run with `trials` initial pairs. Same seed, same numbers.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn dp_run_experiment(
    f0: f64,
    rounds: usize,
    trials: u64,
    seed: u64,
    eta: f64,
    out: *mut *mut DpMcRun,
) -> DpStatus {
    guarded(|| {
        let out = out_ref(out, "out")?;
        let stats = lift(run_experiment(f0, rounds, trials, SeedSpec::new(seed), eta))?;
        *out = Box::into_raw(Box::new(DpMcRun(stats)));
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dp_mc_len(run: *const DpMcRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.len())
}

/// # Safety
/// `run` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn dp_mc_round(run: *const DpMcRun, index: usize, out: *mut DpMcStats) -> DpStatus {
    guarded(|| {
        let run = in_ref(run, "run")?;
        let out = out_ref(out, "out")?;
        let s = run
            .0
            .get(index)
            .ok_or_else(|| fail(DpStatus::OutOfRange, format!("round {index} of {}", run.0.len())))?;
        *out = DpMcStats {
            round: s.round,
            trials: s.trials,
            kept: s.kept,
            fidelity_estimate: s.fidelity_estimate,
            standard_error: s.standard_error,
            pass_rate: s.pass_rate,
            cumulative_yield: s.cumulative_yield,
        };
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle from [`dp_run_experiment`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dp_mc_free(run: *mut DpMcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

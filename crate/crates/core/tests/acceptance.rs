//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any fail.
//!
//! Run with `cargo test -p deps-purify --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use deps_purify::montecarlo::{run_baseline_experiment, run_experiment, SeedSpec};
use deps_purify::optics::{
    apply_bilateral_hadamard, apply_conditional_hwp, apply_phase_flip, parity_check_postselect,
    sigma_x_branches, wavelength_convert,
};
use deps_purify::protocol::{
    compare_schemes, fidelity_recursion, iterate, prepare_converted, step1_correct, step2_purify,
    xiao_step1_baseline,
};
use deps_purify::qstate::{Photon, ALGEBRAIC_TOL};
use deps_purify::{make_basis_state, make_bell_state, werner_state, BellClass, DensityOperator, DepsClass};

const F_GRID: [f64; 7] = [0.0, 0.125, 0.2, 0.5, 0.8, 0.95, 1.0];
const MC_TRIALS: u64 = 100_000;
const MC_SEED: u64 = 42;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<Duration, String> {
    let elapsed = start.elapsed();
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))?;
    Ok(elapsed)
}

fn criterion_1_step1_weights() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for f in F_GRID {
        let r = step1_correct(&werner_state(f).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure(r.yield_fraction == 1.0, || format!("F={f}: yield {}", r.yield_fraction))?;
        let plus = r.state.expectation(&make_basis_state(DepsClass::PhiPlus)).unwrap();
        let minus = r.state.expectation(&make_basis_state(DepsClass::PhiMinus)).unwrap();
        let err = (plus - (4.0 * f + 3.0) / 7.0).abs().max((minus - 4.0 * (1.0 - f) / 7.0).abs());
        worst = worst.max(err);
        ensure(err < 1e-12, || format!("F={f}: weight error {err:e}"))?;
    }
    let t = within_time(start, Duration::from_secs(1))?;
    Ok(format!("max weight error {worst:.1e}, yield 1, {t:?}"))
}

fn criterion_2_step2_formula() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for f in F_GRID {
        let (state, _) = prepare_converted(f, 1.0).map_err(|e| e.to_string())?;
        let step = step2_purify(&state).map_err(|e| e.to_string())?;
        let num = 4.0 * f + 3.0;
        let formula = num * num / (32.0 * f * f - 8.0 * f + 25.0);
        let err = (step.output_fidelity - formula).abs();
        worst = worst.max(err);
        ensure(err < 1e-12, || format!("F={f}: circuit {} vs formula {formula}", step.output_fidelity))?;
    }
    let t = within_time(start, Duration::from_secs(1))?;
    Ok(format!("max deviation {worst:.1e}, {t:?}"))
}

fn criterion_3_threshold() -> Outcome {
    let sector = |f: f64| (4.0 * f + 3.0) / 7.0;
    for f in [0.13, 0.2, 0.5] {
        let fp = fidelity_recursion(f).unwrap();
        ensure(fp > sector(f), || format!("F={f}: F'={fp} not above {}", sector(f)))?;
    }
    for f in [0.05, 0.1] {
        let fp = fidelity_recursion(f).unwrap();
        ensure(fp < sector(f), || format!("F={f}: F'={fp} not below {}", sector(f)))?;
    }
    let at = fidelity_recursion(0.125).unwrap();
    ensure((at - sector(0.125)).abs() < 1e-12, || format!("F=1/8: F'={at}"))?;

    // independent scalar iteration
    let mut p = 3.8 / 7.0;
    let mut oracle = vec![p];
    for _ in 0..6 {
        p = p * p / (p * p + (1.0 - p) * (1.0 - p));
        oracle.push(p);
    }
    let trace = iterate(0.2, 6, 1.0).map_err(|e| e.to_string())?;
    for (r, o) in trace.rounds.iter().zip(&oracle) {
        ensure((r.fidelity - o).abs() < 1e-12, || format!("round {}: {} vs {o}", r.round, r.fidelity))?;
    }
    let first = trace
        .rounds
        .iter()
        .find(|r| r.fidelity > 0.99)
        .map(|r| r.round)
        .ok_or("never exceeds 0.99")?;
    ensure(first <= 6, || format!("exceeds 0.99 only at round {first}"))?;
    Ok(format!("F' vs (4F+3)/7 ordered as expected; F0=0.2 passes 0.99 at round {first}"))
}

fn criterion_4_crossed_pairs() -> Outcome {
    let rotated = |c| apply_bilateral_hadamard(&make_bell_state(c).projector()).unwrap();
    let plus = rotated(BellClass::PhiPlus);
    let minus = rotated(BellClass::PhiMinus);
    let crossed = parity_check_postselect(&plus, &minus).unwrap().pass_probability;
    ensure(crossed.abs() < 1e-12, || format!("crossed pass probability {crossed:e}"))?;
    for (name, r) in [("Φ+⊗Φ+", &plus), ("Φ−⊗Φ−", &minus)] {
        let same = parity_check_postselect(r, r).unwrap().pass_probability;
        ensure((same - 0.5).abs() < 1e-12, || format!("{name}: pass probability {same}"))?;
    }
    Ok(format!("crossed {crossed:.1e}, same-class 1/2"))
}

fn criterion_5_monte_carlo() -> Outcome {
    let start = Instant::now();
    let stats = run_experiment(0.5, 1, MC_TRIALS, SeedSpec::new(MC_SEED), 1.0).map_err(|e| e.to_string())?;
    let round1 = stats[1];
    let target = 25.0 / 29.0;
    let dev = (round1.fidelity_estimate - target).abs();
    ensure(dev <= 3.0 * round1.standard_error, || {
        format!("fidelity {} vs {target}, 3σ = {}", round1.fidelity_estimate, 3.0 * round1.standard_error)
    })?;
    let q = 29.0 / 98.0;
    let sigma = (q * (1.0 - q) / round1.trials as f64).sqrt();
    let pass_dev = (round1.pass_rate - q).abs();
    ensure(pass_dev <= 3.0 * sigma, || format!("pass rate {} vs {q}, 3σ = {}", round1.pass_rate, 3.0 * sigma))?;
    let t = within_time(start, Duration::from_secs(10))?;
    Ok(format!(
        "fidelity {:.6} ({:.2}σ), pass rate {:.6} ({:.2}σ), {t:?}",
        round1.fidelity_estimate,
        dev / round1.standard_error,
        round1.pass_rate,
        pass_dev / sigma
    ))
}

fn criterion_6_efficiency() -> Outcome {
    for f in F_GRID {
        let c = compare_schemes(f).map_err(|e| e.to_string())?;
        ensure(c.modified.yield_fraction == 1.0, || format!("F={f}: modified yield {}", c.modified.yield_fraction))?;
        let expected = f + (1.0 - f) / 7.0;
        ensure((c.baseline.yield_fraction - expected).abs() < 1e-12, || {
            format!("F={f}: baseline yield {} vs {expected}", c.baseline.yield_fraction)
        })?;
    }
    let half = compare_schemes(0.5).unwrap().baseline.yield_fraction;
    ensure((half - 0.571429).abs() < 5e-7, || format!("baseline at 0.5 = {half}"))?;

    let mut worst_sigma: f64 = 0.0;
    for f in [0.2, 0.5, 0.8] {
        let mc = run_baseline_experiment(f, MC_TRIALS, SeedSpec::new(MC_SEED)).map_err(|e| e.to_string())?;
        let y = f + (1.0 - f) / 7.0;
        let sigma = (y * (1.0 - y) / MC_TRIALS as f64).sqrt();
        let dev = (mc.pass_rate - y).abs();
        worst_sigma = worst_sigma.max(dev / sigma);
        ensure(dev <= 3.0 * sigma, || format!("F={f}: MC baseline {} vs {y}", mc.pass_rate))?;
        let modified = run_experiment(f, 0, MC_TRIALS, SeedSpec::new(MC_SEED), 1.0).unwrap();
        ensure(modified[0].kept == MC_TRIALS, || format!("F={f}: MC modified kept {}", modified[0].kept))?;
    }
    Ok(format!("baseline(0.5) = {half:.6}; MC baseline within {worst_sigma:.2}σ"))
}

fn check_rho(stage: &str, f: f64, rho: &DensityOperator) -> Result<(), String> {
    rho.check_invariants().map_err(|e| format!("F={f} {stage}: {e}"))
}

fn criterion_7_invariants() -> Outcome {
    let mut checked = 0;
    for f in F_GRID {
        let werner = werner_state(f).unwrap();
        check_rho("werner", f, &werner)?;
        let step1 = step1_correct(&werner).unwrap().state;
        check_rho("step 1", f, &step1)?;
        let baseline = xiao_step1_baseline(&werner).unwrap().state;
        check_rho("baseline", f, &baseline)?;
        let (converted, _) = wavelength_convert(&step1, 1.0).unwrap();
        check_rho("conversion", f, &converted)?;
        let rotated = apply_bilateral_hadamard(&converted).unwrap();
        check_rho("hadamard", f, &rotated)?;
        ensure((rotated.purity() - converted.purity()).abs() < ALGEBRAIC_TOL, || format!("F={f}: Hadamard purity"))?;
        let flipped = apply_phase_flip(&converted, Photon::B);
        ensure((flipped.purity() - converted.purity()).abs() < ALGEBRAIC_TOL, || format!("F={f}: phase flip purity"))?;
        let parity = parity_check_postselect(&rotated, &rotated).unwrap();
        let four = parity.kept_state.ok_or_else(|| format!("F={f}: parity check keeps nothing"))?;
        let branches = sigma_x_branches(&four);
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        ensure((total - 1.0).abs() < 1e-12, || format!("F={f}: branch probabilities sum to {total}"))?;
        for b in &branches {
            if let Some(kept) = &b.kept {
                check_rho("σx branch", f, kept)?;
            }
        }
        let trace = iterate(f, 4, 1.0).unwrap();
        ensure(trace.rounds.iter().all(|r| (0.0..=1.0).contains(&r.fidelity)), || format!("F={f}: fidelity range"))?;
        let mut state = converted;
        for _ in 0..4 {
            let step = step2_purify(&state).unwrap();
            check_rho("purification round", f, &step.state)?;
            state = step.state;
        }
        checked += 1;
    }
    for class in DepsClass::ALL {
        let rho = make_basis_state(class).projector();
        let out = apply_conditional_hwp(&rho).unwrap();
        ensure((out.purity() - 1.0).abs() < ALGEBRAIC_TOL, || format!("HWP purity on {class}"))?;
    }
    Ok(format!("{checked} grid points, every stage valid"))
}

fn simulate_bytes(threads: &str, path: &std::path::Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_deps-purify"))
        .args([
            "simulate", "--f0", "0.5", "--rounds", "3", "--engine", "both", "--trials", "100000",
            "--seed", "42", "--threads", threads, "--out",
        ])
        .arg(path)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    std::fs::read(path).map_err(|e| e.to_string())
}

fn criterion_8_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = simulate_bytes("4", &dir.path().join("a.csv"))?;
    let b = simulate_bytes("4", &dir.path().join("b.csv"))?;
    let c = simulate_bytes("1", &dir.path().join("c.csv"))?;
    ensure(a == b, || "two runs differ".into())?;
    ensure(a == c, || "1 thread and 4 threads differ".into())?;
    Ok(format!("{} identical bytes across runs and thread counts", a.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 step-1 weights (4F+3)/7, 4(1-F)/7; yield 1", criterion_1_step1_weights),
        ("2 step-2 circuit equals (4F+3)^2/(32F^2-8F+25)", criterion_2_step2_formula),
        ("3 threshold F > 1/8 and iteration from 0.2", criterion_3_threshold),
        ("4 crossed-pair exclusion", criterion_4_crossed_pairs),
        ("5 Monte Carlo agreement at F0 = 0.5", criterion_5_monte_carlo),
        ("6 efficiency comparison with discard baseline", criterion_6_efficiency),
        ("7 density-operator invariants at every stage", criterion_7_invariants),
        ("8 simulate output determinism", criterion_8_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

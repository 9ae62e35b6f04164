//! Command-line experiment runner.
//!
//! Subcommands `recursion`, `simulate` and `compare` share one flag set; a
//! JSON config file may supply any of them and explicit flags win. Exit codes:
//! 0 on success, 2 for configuration errors (always detected before any
//! computation), 1 for runtime failures such as I/O.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::montecarlo::{run_experiment, McStatistics, SeedSpec};
use crate::protocol::{compare_schemes, iterate, sector_fidelity, fidelity_recursion};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const DEFAULT_ROUNDS: usize = 5;
pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_ETA: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 0;

/// Column order of `simulate` output.
pub const SIMULATE_COLUMNS: [&str; 7] = [
    "f0",
    "round",
    "fidelity_exact",
    "fidelity_mc",
    "mc_stderr",
    "pass_prob",
    "cumulative_yield",
];
pub const RECURSION_COLUMNS: [&str; 4] = ["f0", "sector_fidelity", "f_prime", "verdict"];
pub const COMPARE_COLUMNS: [&str; 5] = [
    "f0",
    "modified_yield",
    "modified_fidelity",
    "baseline_yield",
    "baseline_fidelity",
];

const THRESHOLD: f64 = 0.125;
const THRESHOLD_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "deps-purify", version, about = "Two-step purification of doubly entangled photon pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One-round output fidelity and threshold verdict per input fidelity.
    Recursion(RunArgs),
    /// Exact and/or Monte Carlo simulation, one row per round.
    Simulate(RunArgs),
    /// Step-1 yield and fidelity against the discard-only baseline.
    Compare(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    Mc,
    Both,
}

impl Engine {
    fn exact(self) -> bool {
        matches!(self, Engine::Exact | Engine::Both)
    }

    fn mc(self) -> bool {
        matches!(self, Engine::Mc | Engine::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Initial Werner fidelity.
    #[arg(long, allow_negative_numbers = true)]
    pub f0: Option<f64>,
    /// Comma-separated list of initial fidelities.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub sweep: Option<Vec<f64>>,
    /// Purification rounds after step 1.
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    /// Monte Carlo trials (initial pairs).
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Wavelength-conversion efficiency per photon.
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Worker threads for Monte Carlo trials.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with any of the above keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub f0: Option<f64>,
    pub sweep: Option<Vec<f64>>,
    pub rounds: Option<usize>,
    pub engine: Option<Engine>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub eta: Option<f64>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub f0: Option<f64>,
    pub sweep: Option<Vec<f64>>,
    pub rounds: usize,
    pub engine: Engine,
    pub trials: u64,
    pub seed: u64,
    pub eta: f64,
    pub threads: Option<usize>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn in_unit_interval(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl ExperimentConfig {
    /// Merges flags over the optional config file and validates the result.
    pub fn resolve(args: &RunArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => load_config_file(path)?,
            None => FileConfig::default(),
        };
        // a flag for either input form replaces both from the file
        let (f0, sweep) = if args.f0.is_some() || args.sweep.is_some() {
            (args.f0, args.sweep.clone())
        } else {
            (file.f0, file.sweep)
        };
        let config = Self {
            f0,
            sweep,
            rounds: args.rounds.or(file.rounds).unwrap_or(DEFAULT_ROUNDS),
            engine: args.engine.or(file.engine).unwrap_or(Engine::Both),
            trials: args.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS),
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            eta: args.eta.or(file.eta).unwrap_or(DEFAULT_ETA),
            threads: args.threads.or(file.threads),
            format: args.format.or(file.format).unwrap_or_default(),
            out: args.out.clone().or(file.out),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        match (&self.f0, &self.sweep) {
            (Some(_), Some(_)) => return bad("give either --f0 or --sweep, not both".into()),
            (None, None) => return bad("an initial fidelity is required (--f0 or --sweep)".into()),
            (Some(f), None) if !in_unit_interval(*f) => {
                return bad(format!("f0 = {f} is outside [0, 1]"))
            }
            (None, Some(list)) => {
                if list.is_empty() {
                    return bad("sweep list is empty".into());
                }
                if let Some(f) = list.iter().find(|f| !in_unit_interval(**f)) {
                    return bad(format!("sweep value {f} is outside [0, 1]"));
                }
            }
            _ => {}
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta = {} is outside (0, 1]", self.eta));
        }
        if self.engine.mc() && self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }

    pub fn inputs(&self) -> Vec<f64> {
        match (&self.f0, &self.sweep) {
            (Some(f), _) => vec![*f],
            (None, Some(list)) => list.clone(),
            (None, None) => Vec::new(),
        }
    }
}

fn load_config_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
}

/// Formats with 12 significant digits, trailing zeros trimmed (like `%.12g`).
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn num_or_empty(x: Option<f64>) -> Self {
        match x {
            Some(v) if v.is_finite() => Cell::Num(v),
            _ => Cell::Empty,
        }
    }

    fn csv_text(&self) -> String {
        match self {
            Cell::Num(x) => format_sig12(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => {
                let rounded: f64 = format_sig12(*x).parse().expect("formatted float parses");
                serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
            }
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let io = |e: csv::Error| CliError::Runtime(e.to_string());
                w.write_record(&self.columns).map_err(io)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv_text)).map_err(io)?;
                }
                let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
                String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = self
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(k, v)| (k.to_string(), v.json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                let mut text = serde_json::to_string_pretty(&Value::Array(rows))
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                text.push('\n');
                Ok(text)
            }
        }
    }
}

pub fn threshold_verdict(f: f64) -> &'static str {
    if (f - THRESHOLD).abs() <= THRESHOLD_TOL {
        "at threshold"
    } else if f > THRESHOLD {
        "above threshold"
    } else {
        "below threshold"
    }
}

pub fn cmd_recursion(config: &ExperimentConfig) -> Result<Table, CliError> {
    let mut table = Table::new(&RECURSION_COLUMNS);
    for f in config.inputs() {
        table.rows.push(vec![
            Cell::Num(f),
            Cell::Num(sector_fidelity(f)?),
            Cell::Num(fidelity_recursion(f)?),
            Cell::Text(threshold_verdict(f).into()),
        ]);
    }
    Ok(table)
}

pub fn cmd_compare(config: &ExperimentConfig) -> Result<Table, CliError> {
    let mut table = Table::new(&COMPARE_COLUMNS);
    for f in config.inputs() {
        let c = compare_schemes(f)?;
        table.rows.push(vec![
            Cell::Num(f),
            Cell::Num(c.modified.yield_fraction),
            Cell::Num(c.modified.fidelity),
            Cell::Num(c.baseline.yield_fraction),
            Cell::Num(c.baseline.fidelity),
        ]);
    }
    Ok(table)
}

fn run_mc(config: &ExperimentConfig, f0: f64) -> Result<Vec<McStatistics>, CliError> {
    let run = || run_experiment(f0, config.rounds, config.trials, SeedSpec::new(config.seed), config.eta);
    let stats = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(run),
        None => run(),
    };
    Ok(stats?)
}

pub fn cmd_simulate(config: &ExperimentConfig) -> Result<Table, CliError> {
    let mut table = Table::new(&SIMULATE_COLUMNS);
    for f0 in config.inputs() {
        let exact = if config.engine.exact() {
            Some(iterate(f0, config.rounds, config.eta)?)
        } else {
            None
        };
        let mc = if config.engine.mc() {
            Some(run_mc(config, f0)?)
        } else {
            None
        };
        for round in 0..=config.rounds {
            let e = exact.as_ref().map(|t| t.rounds[round]);
            let m = mc.as_ref().map(|s| s[round]);
            let pass = e.map(|r| r.pass_probability).or(m.map(|s| s.pass_rate));
            let cumulative = e.map(|r| r.cumulative_yield).or(m.map(|s| s.cumulative_yield));
            table.rows.push(vec![
                Cell::Num(f0),
                Cell::Int(round as u64),
                Cell::num_or_empty(e.map(|r| r.fidelity)),
                Cell::num_or_empty(m.map(|s| s.fidelity_estimate)),
                Cell::num_or_empty(m.map(|s| s.standard_error)),
                Cell::num_or_empty(pass),
                Cell::num_or_empty(cumulative),
            ]);
        }
    }
    Ok(table)
}

type Runner = fn(&ExperimentConfig) -> Result<Table, CliError>;

fn execute(command: &Command) -> Result<(String, Option<PathBuf>), CliError> {
    let (args, run): (&RunArgs, Runner) = match command {
        Command::Recursion(a) => (a, cmd_recursion),
        Command::Simulate(a) => (a, cmd_simulate),
        Command::Compare(a) => (a, cmd_compare),
    };
    let config = ExperimentConfig::resolve(args)?;
    let table = run(&config)?;
    Ok((table.render(config.format)?, config.out))
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = execute(&cli.command).and_then(|(text, out)| {
        match out {
            Some(path) => fs::write(&path, text)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
            None => stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Runtime(e.to_string())),
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

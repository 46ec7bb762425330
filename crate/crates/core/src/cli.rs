//! Command-line front end.
//!
//! Exit statuses: 0 success, 1 I/O or runtime failure (including a failing
//! oracle suite), 2 failed validation gate or inadmissible argument,
//! 3 no convergence within `max_iters`, 4 unreadable or malformed input.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::checks;
use crate::config::{ExperimentConfig, StepSpec};
use crate::diagnostics::write_csv;
use crate::engine::{Engine, EngineError, Trajectory};
use crate::polytope::{OperatorConfig, PolytopeError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_PARSE: i32 = 4;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "COREREACH_OUT";

/// Largest window length tried when certifying connectivity.
pub const MAX_Q: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "corereach", version, about = "Distributed CORE allocation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a configuration against every assumption gate.
    Validate {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Run one experiment and write `<name>.csv` and `<name>.summary.json`.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        /// Output directory; falls back to the config, then $COREREACH_OUT, then `.`.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Run even if forceable gates fail.
        #[arg(long)]
        force: bool,
    },
    /// Run one experiment per parameter value.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values; `harmonic` is accepted for alpha.
        #[arg(long)]
        values: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
        /// Normalized distance used for the iterations-to-threshold column.
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
    },
    /// Run the seeded oracle suites.
    Oracle {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Alpha,
    Beta,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: &'static str,
    pub passed: bool,
    /// `--force` may override a failure of this gate.
    pub forceable: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub gates: Vec<Gate>,
    /// Claimed or derived lower bound on positive matrix entries.
    pub gamma: Option<f64>,
    /// Smallest certified connectivity window up to [`MAX_Q`].
    pub smallest_q: Option<usize>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Gate> {
        self.gates.iter().filter(|g| !g.passed)
    }

    /// True when every failing gate may be overridden.
    pub fn forceable(&self) -> bool {
        self.failures().all(|g| g.forceable)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.gates {
            let status = if g.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{status} {:<14} {}", g.name, g.detail)?;
        }
        write!(f, "{}", if self.passed() { "all gates pass" } else { "validation failed" })
    }
}

fn gate(name: &'static str, forceable: bool, result: Result<String, String>) -> Gate {
    let (passed, detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Gate {
        name,
        passed,
        forceable,
        detail,
    }
}

/// Checks every modelling assumption the iteration relies on.
///
/// The config must have parsed, so the game and schedule are well formed.
pub fn validate(cfg: &ExperimentConfig) -> ValidationReport {
    let game = cfg.game().expect("parsed config has a valid game");
    let sched = cfg.schedule().expect("parsed config has a valid schedule");
    let n = game.n_agents();
    let mut gates = Vec::new();

    let dims = if sched.dim() != n {
        Err(format!("matrices are {0}x{0}, game has {n} agents", sched.dim()))
    } else if cfg.initial_state(&game).is_none() {
        Err(format!("initial blocks do not form {n} blocks of length {n}"))
    } else {
        Ok(format!("{n} agents"))
    };
    gates.push(gate("dimensions", false, dims));

    let finite = sched
        .family()
        .iter()
        .all(|m| m.rows().iter().flatten().all(|v| v.is_finite()));
    gates.push(gate(
        "finite family",
        true,
        if finite {
            Ok(format!("{} matrices", sched.family().len()))
        } else {
            Err("non-finite matrix entry".into())
        },
    ));

    let gamma = cfg.graphs.gamma.or_else(|| sched.gamma());
    let matrices = match gamma {
        Some(g) if g > 0.0 && g <= 1.0 => {
            let problems: Vec<String> = sched
                .family()
                .iter()
                .enumerate()
                .flat_map(|(i, m)| {
                    m.validate(g)
                        .violations
                        .into_iter()
                        .map(move |v| format!("matrix {i}: {v}"))
                })
                .collect();
            if problems.is_empty() {
                Ok(format!("doubly stochastic, gamma = {g}"))
            } else {
                Err(problems.join("; "))
            }
        }
        Some(g) => Err(format!("gamma = {g} is outside (0, 1]")),
        None => Err("no positive entries".into()),
    };
    gates.push(gate("matrices", true, matrices));

    let smallest_q = sched.smallest_q(MAX_Q);
    gates.push(gate(
        "connectivity",
        true,
        match smallest_q {
            Some(q) => Ok(format!("Q = {q}")),
            None => Err(format!("no window of length at most {MAX_Q} is strongly connected")),
        },
    ));

    let steps = cfg.step_schedule();
    gates.push(gate(
        "steps",
        false,
        steps.check().map(|_| format!("{steps:?}")).map_err(|e| e.to_string()),
    ));
    gates.push(gate(
        "beta",
        false,
        OperatorConfig::new(cfg.beta)
            .map(|_| format!("beta = {}", cfg.beta))
            .map_err(|e| e.to_string()),
    ));
    gates.push(gate(
        "engine",
        false,
        cfg.engine_config()
            .map(|c| format!("max_iters = {}, stop_tol = {:e}", c.max_iters, c.stop_tol))
            .map_err(|e| e.to_string()),
    ));
    gates.push(gate(
        "core",
        true,
        if game.core_nonempty() {
            Ok("nonempty".into())
        } else {
            Err("CORE is empty".into())
        },
    ));

    ValidationReport {
        gates,
        gamma,
        smallest_q,
    }
}

/// Written next to each trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_k: usize,
    pub final_dist: f64,
    /// Block mean of the final state.
    pub final_allocation: Vec<f64>,
    pub converged: bool,
}

impl RunSummary {
    pub fn of(traj: &Trajectory) -> Self {
        let row = traj.final_row();
        RunSummary {
            final_k: row.k,
            final_dist: row.dist_core_consensus,
            final_allocation: traj.final_state().block_mean(),
            converged: traj.converged,
        }
    }
}

/// Runs a config that already passed (or was forced past) validation.
pub fn execute(cfg: &ExperimentConfig) -> Result<Trajectory, EngineError> {
    let game = cfg.game().expect("parsed config has a valid game");
    let sched = cfg.schedule().expect("parsed config has a valid schedule");
    let poly = game.core_polyhedron();
    let w0 = cfg
        .initial_state(&game)
        .ok_or_else(|| EngineError::InvalidConfig("initial state has the wrong shape".into()))?;
    Engine::new(&poly, &sched, cfg.engine_config()?)?
        .with_budget(game.grand_value())
        .run(&w0)
}

/// Writes `<label>.csv` and `<label>.summary.json` into `dir`.
pub fn write_outputs(dir: &Path, label: &str, traj: &Trajectory) -> io::Result<RunSummary> {
    fs::create_dir_all(dir)?;
    let mut csv = Vec::new();
    write_csv(&traj.rows, &mut csv)?;
    fs::write(dir.join(format!("{label}.csv")), csv)?;
    let summary = RunSummary::of(traj);
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(dir.join(format!("{label}.summary.json")), json)?;
    Ok(summary)
}

/// `-o`, then the config's `output_dir`, then `$COREREACH_OUT`, then `.`.
pub fn resolve_output_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn label_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn engine_exit(e: &EngineError) -> i32 {
    match e {
        EngineError::Polytope(PolytopeError::Empty) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

fn load(path: &Path, err: &mut dyn Write) -> Result<ExperimentConfig, i32> {
    ExperimentConfig::from_path(path).map_err(|e| {
        let _ = writeln!(err, "error: {e}");
        EXIT_PARSE
    })
}

/// Validates and reports; `Err` carries the exit status when the run must
/// not go ahead.
fn gatekeep(cfg: &ExperimentConfig, force: bool, err: &mut dyn Write) -> Result<(), i32> {
    let report = validate(cfg);
    if report.passed() {
        return Ok(());
    }
    if force && report.forceable() {
        for g in report.failures() {
            log::warn!("forced past failing gate `{}`: {}", g.name, g.detail);
        }
        return Ok(());
    }
    let _ = writeln!(err, "{report}");
    Err(EXIT_VALIDATION)
}

/// Dispatches a parsed command line. Reports go to `out`, errors to `err`.
pub fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Validate { config } => cmd_validate(&config, out, err),
        Command::Run { config, out: dir, force } => cmd_run(&config, dir.as_deref(), force, out, err),
        Command::Sweep {
            config,
            param,
            values,
            out: dir,
            force,
            threshold,
        } => cmd_sweep(&config, param, &values, dir.as_deref(), force, threshold, out, err),
        Command::Oracle { seed, trials } => cmd_oracle(seed, trials, out, err),
    };
    result.unwrap_or_else(|code| code)
}

fn io_fail(err: &mut dyn Write, what: &str, e: impl fmt::Display) -> i32 {
    let _ = writeln!(err, "error: {what}: {e}");
    EXIT_RUNTIME
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, i32> {
    let cfg = load(path, err)?;
    let report = validate(&cfg);
    writeln!(out, "{report}").map_err(|e| io_fail(err, "stdout", e))?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_VALIDATION })
}

pub fn cmd_run(
    path: &Path,
    dir: Option<&Path>,
    force: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, i32> {
    let cfg = load(path, err)?;
    gatekeep(&cfg, force, err)?;
    let traj = execute(&cfg).map_err(|e| {
        let _ = writeln!(err, "error: {e}");
        engine_exit(&e)
    })?;
    let dir = resolve_output_dir(dir, &cfg);
    let label = label_for(path);
    let summary = write_outputs(&dir, &label, &traj).map_err(|e| io_fail(err, "writing outputs", e))?;
    writeln!(
        out,
        "{label}: final_k={} final_dist={:e} converged={}",
        summary.final_k, summary.final_dist, summary.converged
    )
    .map_err(|e| io_fail(err, "stdout", e))?;
    Ok(if summary.converged { EXIT_OK } else { EXIT_NONCONVERGENCE })
}

/// Applies one sweep token to a copy of `base`.
fn sweep_variant(base: &ExperimentConfig, param: SweepParam, token: &str) -> Result<ExperimentConfig, String> {
    let mut cfg = base.clone();
    match param {
        SweepParam::Beta => {
            cfg.beta = token.parse().map_err(|_| format!("`{token}` is not a number"))?;
        }
        SweepParam::Alpha if token == "harmonic" => cfg.steps = StepSpec::Harmonic,
        SweepParam::Alpha => {
            let alpha = token
                .parse()
                .map_err(|_| format!("`{token}` is neither a number nor `harmonic`"))?;
            cfg.steps = StepSpec::Fixed { alpha };
        }
    }
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_sweep(
    path: &Path,
    param: SweepParam,
    values: &str,
    dir: Option<&Path>,
    force: bool,
    threshold: f64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, i32> {
    let base = load(path, err)?;
    let tokens: Vec<&str> = values.split(',').map(str::trim).collect();
    let mut variants = Vec::with_capacity(tokens.len());
    for (i, token) in tokens.iter().enumerate() {
        let cfg = sweep_variant(&base, param, token).map_err(|m| {
            let _ = writeln!(err, "error: at `--values[{i}]`: {m}");
            EXIT_PARSE
        })?;
        let admissible = match param {
            SweepParam::Beta => cfg.operator().map(|_| ()),
            SweepParam::Alpha => cfg.step_schedule().check(),
        };
        if let Err(e) = admissible {
            let _ = writeln!(err, "error: {param} = {token} rejected: {e}");
            return Err(EXIT_VALIDATION);
        }
        variants.push(cfg);
    }
    for cfg in &variants {
        gatekeep(cfg, force, err)?;
    }

    let results: Vec<Result<Trajectory, EngineError>> = std::thread::scope(|s| {
        let handles: Vec<_> = variants.iter().map(|cfg| s.spawn(move || execute(cfg))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let dir = resolve_output_dir(dir, &base);
    let stem = label_for(path);
    let mut table = String::from("value,iterations_to_threshold,final_k,final_dist,converged\n");
    let mut all_converged = true;
    for (token, result) in tokens.iter().zip(results) {
        let traj = result.map_err(|e| {
            let _ = writeln!(err, "error: {param} = {token}: {e}");
            engine_exit(&e)
        })?;
        let label = format!("{stem}_{param}_{token}");
        let summary =
            write_outputs(&dir, &label, &traj).map_err(|e| io_fail(err, "writing outputs", e))?;
        all_converged &= summary.converged;
        let reached = traj
            .iterations_to(threshold)
            .map_or(String::new(), |k| k.to_string());
        table.push_str(&format!(
            "{token},{reached},{},{:e},{}\n",
            summary.final_k, summary.final_dist, summary.converged
        ));
    }
    fs::write(dir.join(format!("{stem}_{param}_sweep.csv")), &table)
        .map_err(|e| io_fail(err, "writing sweep summary", e))?;
    write!(out, "{table}").map_err(|e| io_fail(err, "stdout", e))?;
    Ok(if all_converged { EXIT_OK } else { EXIT_NONCONVERGENCE })
}

pub fn cmd_oracle(seed: u64, trials: usize, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, i32> {
    if trials == 0 {
        let _ = writeln!(err, "error: trials must be at least 1");
        return Err(EXIT_VALIDATION);
    }
    let report = checks::run_all(seed, trials).map_err(|e| {
        let _ = writeln!(err, "error: {e}");
        EXIT_RUNTIME
    })?;
    writeln!(out, "{report}").map_err(|e| io_fail(err, "stdout", e))?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_RUNTIME })
}

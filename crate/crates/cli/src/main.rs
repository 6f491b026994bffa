//! Command-line harness: single solves, convergence traces, tradeoff sweeps
//! and solver cross-checks.

mod config;

use clap::{Args, Parser, Subcommand};
use relay_mec::experiment::{
    compare_solvers, compare_with_oracle, run_convergence, run_tradeoff_sweep, write_csv, CompareRow,
    ExperimentConfig, OracleComparison, ScenarioError,
};
use relay_mec::model::evaluate_metrics;
use relay_mec::scenario::Scenario;
use relay_mec::{kkt_residual, solve_bcd, Metrics, ModelError, SolveStatus, SolveTrace, SolverError};
use serde::Serialize;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

/// BCD and SCA final objectives must agree to this relative tolerance.
const SCA_AGREEMENT: f64 = 0.01;
/// BCD may trail the grid oracle by at most this, relative...
const ORACLE_GAP: f64 = 0.02;
/// ...on at least this share of draws.
const ORACLE_SHARE: f64 = 0.9;

#[derive(Parser)]
#[command(name = "relay-mec", version, about = "Resource allocation for relay-assisted edge computing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[command(next_help_heading = "Settings")]
struct Common {
    /// Key-value (TOML) file with system, solver and experiment settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Delay weight in J/s.
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Result bits per task bit.
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    /// Log-sum-exp smoothing factor.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    bandwidth_hz: Option<f64>,
    /// Number of channel draws.
    #[arg(long)]
    draws: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel draw and print the result as JSON.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        draw: u64,
        /// Include the per-iteration trace.
        #[arg(long)]
        trace: bool,
    },
    /// Per-iteration CSV of BCD and the SCA baseline on one draw.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        draw: u64,
        /// Also write both full traces as JSON to this file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Mean energy and delay over draws for every (gamma, f_edge_max) pair.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        gamma_list: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        f_edge_max_list: Option<Vec<f64>>,
    },
    /// Multi-start BCD against the grid oracle on every draw.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// BCD starts per draw.
        #[arg(long)]
        starts: Option<usize>,
    },
    /// BCD against the SCA baseline (and the grid oracle) on every draw.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        skip_oracle: bool,
        /// Exit with status 3 unless the agreement checks pass.
        #[arg(long)]
        check: bool,
    },
}

enum Failure {
    Config(String),
    Solver(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Check(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Check(m) => m,
        }
    }
}

fn is_config_error(e: &SolverError) -> bool {
    matches!(e, SolverError::InvalidConfig(_) | SolverError::Model(ModelError::InvalidParam { .. }))
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        if is_config_error(&e) {
            Failure::Config(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        if is_config_error(&e.source) {
            Failure::Config(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Solver(format!("output failed: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Solver(format!("output failed: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Solver(format!("output failed: {e}"))
    }
}

impl Common {
    /// File values first, then flags on top.
    fn experiment(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => config::load(path).map_err(|e| Failure::Config(e.to_string()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(gamma) = self.gamma {
            cfg.base.gamma = gamma;
        }
        if let Some(rho) = self.rho {
            cfg.base.compress_ratio = rho;
        }
        if let Some(beta) = self.beta {
            cfg.solver.beta = beta;
        }
        if let Some(w) = self.bandwidth_hz {
            cfg.base.bandwidth_hz = w;
        }
        if let Some(draws) = self.draws {
            cfg.draws = draws;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn output(&self) -> Result<Box<dyn Write>, Failure> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(io::stdout().lock()),
        })
    }
}

#[derive(Serialize)]
struct SolveOutput {
    scenario: Scenario,
    status: SolveStatus,
    iterations: usize,
    wall_s: f64,
    kkt_residual: f64,
    allocation: relay_mec::Allocation,
    metrics: Metrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<SolveTrace>,
}

fn solve(common: &Common, draw: u64, with_trace: bool) -> Result<(), Failure> {
    let cfg = common.experiment()?;
    let scenario = cfg.scenario(draw);
    let p = &scenario.params;
    let res = solve_bcd(p, &cfg.solver, None).map_err(|source| ScenarioError { seed: cfg.seed, draw_index: draw, source })?;
    let out = SolveOutput {
        scenario,
        status: res.status,
        iterations: res.iterations(),
        wall_s: res.trace.wall_s(),
        kkt_residual: kkt_residual(&res.allocation, p, &cfg.solver),
        allocation: res.allocation,
        metrics: evaluate_metrics(&res.allocation, p, cfg.solver.beta).map_err(SolverError::from)?,
        trace: with_trace.then_some(res.trace),
    };
    let mut w = common.output()?;
    serde_json::to_writer_pretty(&mut w, &out)?;
    writeln!(w)?;
    Ok(())
}

fn convergence(common: &Common, draw: u64, json: Option<&PathBuf>) -> Result<(), Failure> {
    let cfg = common.experiment()?;
    let report = run_convergence(&cfg.scenario(draw), &cfg.solver, &cfg.sca)?;
    write_csv(common.output()?, &report.rows())?;
    if let Some(path) = json {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &report)?;
        w.flush()?;
    }
    Ok(())
}

fn sweep(common: &Common, gammas: Option<&Vec<f64>>, speeds: Option<&Vec<f64>>) -> Result<(), Failure> {
    let mut cfg = common.experiment()?;
    if let Some(g) = gammas {
        cfg.gamma_list = g.clone();
    }
    if let Some(f) = speeds {
        cfg.f_edge_max_list = f.clone();
    }
    let cells = run_tradeoff_sweep(&cfg)?;
    for cell in &cells {
        for failure in &cell.failures {
            eprintln!("gamma {} f_edge_max {}: {failure}", cell.row.gamma, cell.row.f_edge_max);
        }
    }
    let rows: Vec<_> = cells.into_iter().map(|c| c.row).collect();
    write_csv(common.output()?, &rows)?;
    Ok(())
}

fn oracle(common: &Common, starts: Option<usize>) -> Result<(), Failure> {
    let mut cfg = common.experiment()?;
    if let Some(s) = starts {
        cfg.starts = s;
        cfg.validate()?;
    }
    let mut rows: Vec<OracleComparison> = Vec::with_capacity(cfg.draws);
    for draw in 0..cfg.draws as u64 {
        let (cmp, _, _) = compare_with_oracle(&cfg, &cfg.scenario(draw))?;
        if !cmp.within(ORACLE_GAP) {
            eprintln!("draw {draw}: BCD {:.6e} vs oracle {:.6e} ({:+.2}%)", cmp.bcd_objective, cmp.oracle_objective, 100.0 * cmp.rel_gap);
        }
        rows.push(cmp);
    }
    let within = rows.iter().filter(|r| r.within(ORACLE_GAP)).count();
    eprintln!("{within}/{} draws within {}% of the oracle", rows.len(), 100.0 * ORACLE_GAP);
    write_csv(common.output()?, &rows)?;
    Ok(())
}

fn check_rows(rows: &[CompareRow]) -> Vec<String> {
    let mut problems = Vec::new();
    for r in rows {
        if r.bcd_sca_rel_gap > SCA_AGREEMENT {
            problems.push(format!("draw {}: BCD and SCA differ by {:.3}%", r.draw_index, 100.0 * r.bcd_sca_rel_gap));
        }
        if !(r.bcd_wall_ms < r.sca_wall_ms) {
            problems.push(format!("draw {}: BCD took {:.3} ms, SCA {:.3} ms", r.draw_index, r.bcd_wall_ms, r.sca_wall_ms));
        }
    }
    let with_oracle: Vec<_> = rows.iter().filter_map(|r| r.oracle_objective.map(|o| (r.bcd_objective - o) / o)).collect();
    if !with_oracle.is_empty() {
        let within = with_oracle.iter().filter(|g| g.abs() <= ORACLE_GAP).count();
        if (within as f64) < ORACLE_SHARE * with_oracle.len() as f64 {
            problems.push(format!("only {within}/{} draws within {}% of the oracle", with_oracle.len(), 100.0 * ORACLE_GAP));
        }
    }
    problems
}

fn compare(common: &Common, skip_oracle: bool, check: bool) -> Result<(), Failure> {
    let cfg = common.experiment()?;
    let mut rows = Vec::with_capacity(cfg.draws);
    for draw in 0..cfg.draws as u64 {
        rows.push(compare_solvers(&cfg, &cfg.scenario(draw), !skip_oracle)?);
    }
    write_csv(common.output()?, &rows)?;
    if check {
        let problems = check_rows(&rows);
        if !problems.is_empty() {
            return Err(Failure::Check(problems.join("\n")));
        }
        eprintln!("all checks passed on {} draws", rows.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Solve { common, draw, trace } => solve(common, *draw, *trace),
        Command::Convergence { common, draw, json } => convergence(common, *draw, json.as_ref()),
        Command::Sweep { common, gamma_list, f_edge_max_list } => sweep(common, gamma_list.as_ref(), f_edge_max_list.as_ref()),
        Command::Oracle { common, starts } => oracle(common, *starts),
        Command::Compare { common, skip_oracle, check } => compare(common, *skip_oracle, *check),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

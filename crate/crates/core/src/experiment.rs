//! Convergence traces, tradeoff sweeps and solver cross-checks over seeded
//! channel draws, with CSV output.

use crate::error::SolverError;
use crate::model::{evaluate_metrics, SystemParams};
use crate::oracle::{grid_oracle, GridSpec, OracleResult};
use crate::sca::{sca_baseline, ScaConfig};
use crate::scenario::{channel_rng, random_feasible_allocation, Scenario};
use crate::solver::{solve_bcd, SolveResult, SolveTrace, SolverConfig};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Stream id of the multi-start RNG; channel draws use streams `0..draws`.
const START_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Parameters shared by every draw; channel gains are overwritten.
    pub base: SystemParams,
    pub solver: SolverConfig,
    pub sca: ScaConfig,
    pub grid: GridSpec,
    pub gamma_list: Vec<f64>,
    pub f_edge_max_list: Vec<f64>,
    pub draws: usize,
    /// BCD starts per instance in oracle cross-checks (the first is the
    /// default initial point, the rest are random feasible points).
    pub starts: usize,
    /// Solver wall times in comparisons are the minimum over this many runs.
    pub timing_repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            base: SystemParams::default(),
            solver: SolverConfig::default(),
            sca: ScaConfig::default(),
            grid: GridSpec::default(),
            gamma_list: vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0],
            f_edge_max_list: vec![3e8, 6e8, 1.2e9],
            draws: 50,
            starts: 10,
            timing_repeats: 3,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |what: &str| Err(SolverError::InvalidConfig(what.to_string()));
        if self.gamma_list.is_empty() || self.f_edge_max_list.is_empty() {
            return bad("gamma_list and f_edge_max_list must be nonempty");
        }
        if !self.gamma_list.iter().all(|g| *g >= 0.0 && g.is_finite()) {
            return bad("every gamma must be finite and nonnegative");
        }
        if !self.f_edge_max_list.iter().all(|f| *f > 0.0 && f.is_finite()) {
            return bad("every f_edge_max must be finite and positive");
        }
        if self.draws == 0 || self.starts == 0 || self.timing_repeats == 0 {
            return bad("draws, starts and timing_repeats must be at least 1");
        }
        self.base.validate()?;
        self.solver.validate(&self.base)?;
        self.sca.validate()?;
        self.grid.validate()
    }

    pub fn scenario(&self, draw_index: u64) -> Scenario {
        Scenario::sample(self.seed, draw_index, &self.base)
    }
}

/// A solver failure on an identified scenario.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("seed {seed}, draw {draw_index}: {source}")]
pub struct ScenarioError {
    pub seed: u64,
    pub draw_index: u64,
    pub source: SolverError,
}

impl ScenarioError {
    fn wrap(s: &Scenario) -> impl FnOnce(SolverError) -> Self + '_ {
        move |source| Self { seed: s.seed, draw_index: s.draw_index, source }
    }
}

/// Best of `starts` BCD runs by final `f_beta`; ties keep the earlier start.
pub fn multi_start_bcd(scenario: &Scenario, cfg: &SolverConfig, starts: usize) -> Result<SolveResult, SolverError> {
    let p = &scenario.params;
    let mut rng = channel_rng(scenario.seed, START_STREAM + scenario.draw_index);
    let mut best = solve_bcd(p, cfg, None)?;
    for _ in 1..starts {
        let init = random_feasible_allocation(&mut rng, p);
        let run = match solve_bcd(p, cfg, Some(init)) {
            Ok(run) => run,
            Err(SolverError::Unsolvable) => continue,
            Err(e) => return Err(e),
        };
        if final_smoothed(&run) < final_smoothed(&best) {
            best = run;
        }
    }
    Ok(best)
}

fn final_smoothed(r: &SolveResult) -> f64 {
    r.trace.last().map_or(f64::INFINITY, |row| row.smoothed_objective)
}

fn final_objective(r: &SolveResult) -> f64 {
    r.trace.last().map_or(f64::INFINITY, |row| row.objective)
}

/// One row of the convergence CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub iter: usize,
    pub f_beta: f64,
    pub true_objective: f64,
    pub kkt_residual: f64,
    pub wall_ms: f64,
    pub method: String,
}

pub fn convergence_rows(method: &str, trace: &SolveTrace) -> Vec<ConvergenceRow> {
    trace
        .rows
        .iter()
        .map(|r| ConvergenceRow {
            iter: r.iter,
            f_beta: r.smoothed_objective,
            true_objective: r.objective,
            kkt_residual: r.kkt_residual,
            wall_ms: r.wall_s * 1e3,
            method: method.to_string(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scenario: Scenario,
    pub bcd: SolveResult,
    pub sca: SolveResult,
}

impl ConvergenceReport {
    pub fn rows(&self) -> Vec<ConvergenceRow> {
        let mut rows = convergence_rows("bcd", &self.bcd.trace);
        rows.extend(convergence_rows("sca", &self.sca.trace));
        rows
    }
}

/// Runs BCD and the SCA baseline from the same start on one scenario.
pub fn run_convergence(
    scenario: &Scenario,
    solver: &SolverConfig,
    sca: &ScaConfig,
) -> Result<ConvergenceReport, ScenarioError> {
    let bcd = solve_bcd(&scenario.params, solver, None).map_err(ScenarioError::wrap(scenario))?;
    let sca = sca_baseline(&scenario.params, solver, sca, None).map_err(ScenarioError::wrap(scenario))?;
    Ok(ConvergenceReport { scenario: *scenario, bcd, sca })
}

/// One cell of the tradeoff sweep, averaged over the successful draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub f_edge_max: f64,
    #[serde(rename = "mean_energy_J")]
    pub mean_energy_j: f64,
    pub mean_delay_s: f64,
    pub mean_objective: f64,
    pub n_draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub row: SweepRow,
    pub failures: Vec<ScenarioError>,
}

/// Averages the final `(E_sys, t_sys)` of single-start BCD over the
/// configured draws for every `(gamma, f_edge_max)` pair. Cells come out
/// sorted by `(gamma, f_edge_max)`; failed draws are recorded and skipped.
pub fn run_tradeoff_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepCell>, SolverError> {
    cfg.validate()?;
    let mut gammas = cfg.gamma_list.clone();
    let mut speeds = cfg.f_edge_max_list.clone();
    gammas.sort_by(f64::total_cmp);
    speeds.sort_by(f64::total_cmp);
    let mut cells = Vec::with_capacity(gammas.len() * speeds.len());
    for &gamma in &gammas {
        for &f_edge_max in &speeds {
            let base = SystemParams { gamma, f_edge_max, ..cfg.base };
            let mut failures = Vec::new();
            let (mut energy, mut delay, mut objective, mut n) = (0.0, 0.0, 0.0, 0usize);
            for draw in 0..cfg.draws as u64 {
                let scenario = Scenario::sample(cfg.seed, draw, &base);
                match solve_bcd(&scenario.params, &cfg.solver, None) {
                    Ok(res) => {
                        let m = evaluate_metrics(&res.allocation, &scenario.params, cfg.solver.beta)?;
                        energy += m.e_sys;
                        delay += m.t_sys;
                        objective += m.objective;
                        n += 1;
                    }
                    Err(source) => failures.push(ScenarioError { seed: cfg.seed, draw_index: draw, source }),
                }
            }
            let mean = |s: f64| if n == 0 { f64::NAN } else { s / n as f64 };
            let row = SweepRow {
                gamma,
                f_edge_max,
                mean_energy_j: mean(energy),
                mean_delay_s: mean(delay),
                mean_objective: mean(objective),
                n_draws: n,
            };
            cells.push(SweepCell { row, failures });
        }
    }
    Ok(cells)
}

/// BCD (best of several starts) against the grid oracle on one draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub draw_index: u64,
    pub bcd_objective: f64,
    pub bcd_smoothed_objective: f64,
    pub oracle_objective: f64,
    pub oracle_smoothed_objective: f64,
    /// `(bcd - oracle) / oracle` on the true objective.
    pub rel_gap: f64,
}

impl OracleComparison {
    pub fn within(&self, tol: f64) -> bool {
        self.rel_gap.abs() <= tol
    }
}

pub fn compare_with_oracle(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<(OracleComparison, SolveResult, OracleResult), ScenarioError> {
    let bcd = multi_start_bcd(scenario, &cfg.solver, cfg.starts).map_err(ScenarioError::wrap(scenario))?;
    let oracle = grid_oracle(&scenario.params, &cfg.grid, &cfg.solver).map_err(ScenarioError::wrap(scenario))?;
    let last = bcd.trace.last().expect("trace holds the starting row");
    let cmp = OracleComparison {
        draw_index: scenario.draw_index,
        bcd_objective: last.objective,
        bcd_smoothed_objective: last.smoothed_objective,
        oracle_objective: oracle.objective,
        oracle_smoothed_objective: oracle.smoothed_objective,
        rel_gap: (last.objective - oracle.objective) / oracle.objective,
    };
    Ok((cmp, bcd, oracle))
}

/// One row of the solver comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub draw_index: u64,
    pub bcd_objective: f64,
    pub sca_objective: f64,
    pub bcd_iters: usize,
    pub sca_iters: usize,
    pub bcd_wall_ms: f64,
    pub sca_wall_ms: f64,
    /// `|bcd - sca| / sca` on the true objective.
    pub bcd_sca_rel_gap: f64,
    pub oracle_objective: Option<f64>,
}

fn min_wall(mut run: impl FnMut() -> Result<SolveResult, SolverError>, repeats: usize) -> Result<(SolveResult, f64), SolverError> {
    let first = run()?;
    let mut wall = first.trace.wall_s();
    for _ in 1..repeats {
        wall = wall.min(run()?.trace.wall_s());
    }
    Ok((first, wall))
}

/// BCD and SCA from the default start, plus optionally the grid oracle.
pub fn compare_solvers(cfg: &ExperimentConfig, scenario: &Scenario, with_oracle: bool) -> Result<CompareRow, ScenarioError> {
    let p = &scenario.params;
    let wrap = ScenarioError::wrap(scenario);
    let run = || -> Result<CompareRow, SolverError> {
        let (bcd, bcd_wall) = min_wall(|| solve_bcd(p, &cfg.solver, None), cfg.timing_repeats)?;
        let (sca, sca_wall) = min_wall(|| sca_baseline(p, &cfg.solver, &cfg.sca, None), cfg.timing_repeats)?;
        let oracle = if with_oracle { Some(grid_oracle(p, &cfg.grid, &cfg.solver)?.objective) } else { None };
        let (fb, fs) = (final_objective(&bcd), final_objective(&sca));
        Ok(CompareRow {
            draw_index: scenario.draw_index,
            bcd_objective: fb,
            sca_objective: fs,
            bcd_iters: bcd.iterations(),
            sca_iters: sca.iterations(),
            bcd_wall_ms: bcd_wall * 1e3,
            sca_wall_ms: sca_wall * 1e3,
            bcd_sca_rel_gap: (fb - fs).abs() / fs,
            oracle_objective: oracle,
        })
    };
    run().map_err(wrap)
}

/// Writes `rows` as CSV with a header row.
pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_header_matches_columns() {
        let row = SweepRow { gamma: 0.01, f_edge_max: 6e8, mean_energy_j: 1.0, mean_delay_s: 2.0, mean_objective: 3.0, n_draws: 4 };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "gamma,f_edge_max,mean_energy_J,mean_delay_s,mean_objective,n_draws");
    }

    #[test]
    fn convergence_header_matches_columns() {
        let scenario = Scenario::sample(1, 0, &SystemParams::default());
        let report = run_convergence(&scenario, &SolverConfig::default(), &ScaConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &report.rows()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "iter,f_beta,true_objective,kkt_residual,wall_ms,method");
        assert!(text.contains(",bcd") && text.contains(",sca"));
    }

    #[test]
    fn rejects_empty_lists() {
        let cfg = ExperimentConfig { gamma_list: vec![], ..ExperimentConfig::default() };
        assert!(run_tradeoff_sweep(&cfg).is_err());
        let cfg = ExperimentConfig { draws: 0, ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn multi_start_is_no_worse_than_single_start() {
        let scenario = Scenario::sample(5, 2, &SystemParams::default());
        let cfg = SolverConfig::default();
        let single = solve_bcd(&scenario.params, &cfg, None).unwrap();
        let multi = multi_start_bcd(&scenario, &cfg, 4).unwrap();
        assert!(final_smoothed(&multi) <= final_smoothed(&single));
    }
}

//! End-to-end runs: scenario in, certified solution and artifacts out.

pub mod certify;
pub mod metrics;
pub mod plot;
pub mod sweep;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dynamics::{idx, Limit};
use crate::error::HarnessError;
use crate::scenario::{validate_scenario, CrossingSolution, Scenario, SolverDiagnostics};
use crate::solver::{solve, SolveOutcome, SolverConfig};
use crate::transcription::{transcribe, NlpProblem, TranscriptionConfig};

pub use certify::{certify, CertificationReport, Closest, Shortfall, ShortfallKind, Violation, CERTIFY_SLACK};
pub use metrics::{metrics, Metrics};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub transcription: TranscriptionConfig,
    pub solver: SolverConfig,
    /// Seed of the starting-point perturbation; always recorded.
    pub seed: u64,
    /// Standard deviation of the pose perturbation of the analytic guess (m, rad).
    pub perturbation: f64,
    /// Re-solves allowed after a failed certificate, each with tighter
    /// constraints at the nodes around the failing samples.
    pub retighten: usize,
    /// Smallest clearance increase per re-solve (m).
    pub margin_step: f64,
    /// Data-parallel evaluation, when compiled in.
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            transcription: TranscriptionConfig::default(),
            solver: SolverConfig::default(),
            seed: 0,
            perturbation: 0.0,
            retighten: 6,
            margin_step: 0.05,
            parallel: true,
        }
    }
}

/// Everything a solve produced, certified or not.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// Decision vector of the final solve.
    pub x: Vec<f64>,
    pub solution: CrossingSolution,
    pub outcome: SolveOutcome,
    pub certification: CertificationReport,
    pub metrics: Metrics,
    /// Largest clearance added at any node by retightening (m).
    pub extra_clearance: f64,
    /// Solver outcomes of every attempt, in order.
    pub attempts: Vec<SolveOutcome>,
}

impl RunResult {
    /// Total solver wall time over all attempts (s).
    pub fn wall_time(&self) -> f64 {
        self.attempts.iter().map(|o| o.wall_time).sum()
    }

    /// Iteration logs of every attempt, each preceded by a comment line.
    pub fn log(&self) -> String {
        log_attempts(&self.attempts)
    }
}

/// Solver failure with the outcomes that led to it.
#[derive(Debug)]
pub struct SolveFailure {
    pub error: HarnessError,
    pub attempts: Vec<SolveOutcome>,
}

fn log_attempts(attempts: &[SolveOutcome]) -> String {
    let mut s = String::new();
    for (i, o) in attempts.iter().enumerate() {
        let _ = writeln!(s, "# attempt {} status {} iterations {} wall {:.3} s", i + 1, o.status, o.iterations, o.wall_time);
        s.push_str(&o.log());
    }
    s
}

fn diagnostics(o: &SolveOutcome, seed: u64) -> SolverDiagnostics {
    SolverDiagnostics {
        status: o.status.as_str().into(),
        iterations: o.iterations,
        objective: o.objective,
        stationarity: o.stationarity,
        primal_infeasibility: o.primal_infeasibility,
        complementarity: o.complementarity,
        seed,
    }
}

fn row_name(p: &NlpProblem, row: usize) -> String {
    p.element_summaries()
        .into_iter()
        .find(|(_, r)| r.contains(&row))
        .map(|(name, r)| format!("row {row} ({name}, offset {})", row - r.start))
        .unwrap_or_else(|| format!("row {row}"))
}

fn failure_message(p: &NlpProblem, o: &SolveOutcome) -> String {
    let mut msg = format!(
        "status {} after {} iterations, primal infeasibility {:.3e}",
        o.status, o.iterations, o.primal_infeasibility
    );
    if let Some(r) = o.offending_constraint {
        msg += &format!(", worst constraint {}", row_name(p, r));
    }
    if !o.message.is_empty() {
        msg += &format!(": {}", o.message);
    }
    msg
}

/// Tighten the constraints at the two nodes around every failing sample.
///
/// In round `k` a clearance shortfall `s` raises the required clearance of
/// that pair or vehicle by `k (2 s + step)`; the factor `k` matters when the
/// bodies pass through each other between nodes and the oracle only sees
/// zero distance. A limit excursion `e` pulls the state bound in by `2 e`.
/// Each node takes the largest request over its samples.
fn retighten(p: &mut NlpProblem, sol: &CrossingSolution, rep: &CertificationReport, step: f64, round: usize) {
    let span = sol.t_f - sol.t0;
    let internal = |i: usize| p.vehicle_index(&sol.cavs[i].id).expect("solution ids come from the problem");
    let last = p.layout.final_node();
    let grow = round as f64;
    // (tag, first, second, node) -> increase
    let mut raise: BTreeMap<(u8, usize, usize, usize), f64> = BTreeMap::new();
    for s in &rep.shortfalls {
        let (key, amount) = match s.kind {
            ShortfallKind::Pair(i, j) => ((0, internal(i), internal(j)), grow * (2.0 * s.amount + step)),
            ShortfallKind::Road(i) => ((1, internal(i), 0), grow * (2.0 * s.amount + step)),
            ShortfallKind::Limit(i, limit) => {
                let q = match limit {
                    Limit::YawRate => idx::R,
                    Limit::Sideslip => idx::BETA,
                    Limit::SpeedMin | Limit::SpeedMax => idx::V,
                    // inputs are constant per interval, so the node bounds already hold
                    Limit::Acceleration | Limit::Steering => continue,
                };
                ((2, internal(i), q), (2.0 * s.amount).max(1e-6))
            }
        };
        for n in p.bracketing_nodes((s.time - sol.t0) / span) {
            // the end poses are fixed, so clearance there cannot move
            if key.0 < 2 && (n == 0 || n == last) {
                continue;
            }
            let slot = raise.entry((key.0, key.1, key.2, n)).or_insert(0.0);
            *slot = slot.max(amount);
        }
    }
    for ((tag, a, b, n), amount) in raise {
        match tag {
            0 => p.raise_pair_clearance(a, b, n, amount),
            1 => p.raise_road_clearance(a, n, amount),
            _ => p.pull_state_bound(a, n, b, amount),
        }
    }
}

/// Transcribe, solve and certify `sc`.
///
/// A failed certificate tightens the constraints around the failing
/// samples and re-solves from the previous solution, up to `retighten`
/// times. The last result is returned whether or not it certifies; a solver
/// failure is an error.
pub fn solve_scenario(sc: &Scenario, cfg: &RunConfig) -> Result<RunResult, SolveFailure> {
    let fail = |error: HarnessError, attempts: Vec<SolveOutcome>| SolveFailure { error, attempts };
    let report = validate_scenario(sc);
    if !report.is_valid() {
        return Err(fail(crate::error::ScenarioError::Invalid(report.errors.join("; ")).into(), vec![]));
    }
    let mut scfg = cfg.solver.clone();
    scfg.seed = Some(cfg.seed);
    let mut attempts = Vec::new();
    let mut p = transcribe(sc, &cfg.transcription).map_err(|e| fail(e.into(), vec![]))?;
    p.set_parallel(cfg.parallel);
    let mut x0 = p.perturbed(&p.initial_guess(), cfg.perturbation, cfg.seed);
    loop {
        let (x, outcome) = solve(&p, &x0, &scfg).map_err(|e| fail(e.into(), attempts.clone()))?;
        attempts.push(outcome.clone());
        if !outcome.status.is_success() {
            let msg = failure_message(&p, &outcome);
            return Err(fail(HarnessError::Solver(msg), attempts));
        }
        let solution = p
            .extract_solution(&x, diagnostics(&outcome, cfg.seed))
            .map_err(|e| fail(e.into(), attempts.clone()))?;
        let certification = certify(&solution, sc);
        let retry = attempts.len() <= cfg.retighten;
        if certification.pass || !retry {
            let m = metrics(&solution);
            return Ok(RunResult {
                x,
                solution,
                outcome,
                certification,
                metrics: m,
                extra_clearance: p.max_extra_clearance(),
                attempts,
            });
        }
        retighten(&mut p, &solution, &certification, cfg.margin_step, attempts.len());
        x0 = x;
    }
}

/// Outcome of [`run`]: the exit code and where the artifacts went.
#[derive(Debug)]
pub struct RunSummary {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub result: Option<RunResult>,
    pub error: Option<HarnessError>,
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), HarnessError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| HarnessError::Io { context: format!("writing {}", path.display()), source })
}

/// Dense trajectories as CSV: one row per sample and vehicle.
pub fn trajectories_csv(sol: &CrossingSolution) -> String {
    let mut s = String::from("t,id,x,y,theta,V,r,beta,a,delta\n");
    for (k, t) in sol.times.iter().enumerate() {
        for c in &sol.cavs {
            let st = c.states[k];
            let u = c.inputs[k];
            let _ = writeln!(
                s,
                "{t:.2},{},{},{},{},{},{},{},{},{}",
                c.id,
                st[idx::X],
                st[idx::Y],
                st[idx::THETA],
                st[idx::V],
                st[idx::R],
                st[idx::BETA],
                u[0],
                u[1]
            );
        }
    }
    s
}

/// Write every artifact of a finished solve into `dir`.
pub fn write_artifacts(dir: &Path, sc: &Scenario, res: &RunResult) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io { context: format!("creating {}", dir.display()), source })?;
    write(dir, "solution.json", &res.solution.to_json())?;
    write(dir, "trajectories.csv", &trajectories_csv(&res.solution))?;
    write(dir, "metrics.json", &serde_json::to_string_pretty(&res.metrics).expect("metrics serialize"))?;
    write(dir, "certification.json", &serde_json::to_string_pretty(&res.certification).expect("report serializes"))?;
    let layout = sc.intersection()?;
    let bodies: Vec<(f64, f64)> = res
        .solution
        .cavs
        .iter()
        .map(|c| {
            let spec = sc.cavs.iter().find(|s| s.id == c.id).expect("solution ids come from the scenario");
            (0.5 * spec.params.length, 0.5 * spec.params.width)
        })
        .collect();
    write(dir, "plot.svg", &plot::trajectory_svg(&res.solution, &layout, &bodies))?;
    write(dir, "iterations.log", &res.log())
}

/// Load, solve, certify and write artifacts; never panics on bad input.
pub fn run(path: &Path, out_dir: &Path, cfg: &RunConfig) -> RunSummary {
    let summary = |exit_code, result, error| RunSummary { exit_code, out_dir: out_dir.to_path_buf(), result, error };
    let sc = match Scenario::load(path) {
        Ok(sc) => sc,
        Err(e) => {
            let e = HarnessError::from(e);
            return summary(e.exit_code(), None, Some(e));
        }
    };
    match solve_scenario(&sc, cfg) {
        Err(f) => {
            if !f.attempts.is_empty() {
                let _ = fs::create_dir_all(out_dir);
                let _ = write(out_dir, "iterations.log", &log_attempts(&f.attempts));
            }
            summary(f.error.exit_code(), None, Some(f.error))
        }
        Ok(res) => {
            if let Err(e) = write_artifacts(out_dir, &sc, &res) {
                return summary(e.exit_code(), Some(res), Some(e));
            }
            if res.certification.pass {
                summary(0, Some(res), None)
            } else {
                let e = HarnessError::Certification(res.certification.summary());
                summary(e.exit_code(), Some(res), Some(e))
            }
        }
    }
}

#[cfg(test)]
mod tests;

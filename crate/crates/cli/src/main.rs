use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lanefree::error::HarnessError;
use lanefree::harness::sweep::{sweep, SweepConfig};
use lanefree::harness::{certify, run, RunConfig};
use lanefree::scenario::{validate_scenario, CrossingSolution, Scenario};

#[derive(Parser)]
#[command(name = "lanefree", version, about = "Minimum-time lane-free intersection crossing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write its artifacts.
    Solve {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Check a solution against a scenario's clearances and limits.
    Certify { solution: PathBuf, scenario: PathBuf },
    /// Time solves of the first N vehicles of a template.
    Sweep {
        template: PathBuf,
        /// Vehicle counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Cells solved at once.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
    },
}

#[derive(Args)]
struct SolveOpts {
    /// Collocation intervals.
    #[arg(long)]
    np: Option<usize>,
    /// Collocation points per interval.
    #[arg(long)]
    degree: Option<usize>,
    /// Solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Seed of the starting-point perturbation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the starting-point perturbation.
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Re-solves allowed after a failed certificate.
    #[arg(long)]
    retighten: Option<usize>,
    /// Extra clearance imposed at the collocation nodes (m).
    #[arg(long)]
    node_margin: Option<f64>,
    /// Evaluate constraints on one thread.
    #[arg(long)]
    sequential: bool,
}

impl SolveOpts {
    fn config(&self) -> RunConfig {
        let mut cfg = RunConfig { seed: self.seed, perturbation: self.perturb, parallel: !self.sequential, ..RunConfig::default() };
        if let Some(np) = self.np {
            cfg.transcription.intervals = np;
        }
        if let Some(d) = self.degree {
            cfg.transcription.degree = d;
        }
        if let Some(t) = self.tol {
            cfg.solver.tol = t;
            cfg.solver.constr_tol = t;
        }
        if let Some(m) = self.max_iter {
            cfg.solver.max_iter = m;
        }
        if let Some(m) = self.node_margin {
            cfg.transcription.node_margin = m;
        }
        if let Some(r) = self.retighten {
            cfg.retighten = r;
        }
        cfg
    }
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn load_scenario(path: &PathBuf) -> Result<Scenario, HarnessError> {
    let sc = Scenario::load(path)?;
    let rep = validate_scenario(&sc);
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    if !rep.is_valid() {
        return Err(lanefree::error::ScenarioError::Invalid(rep.errors.join("; ")).into());
    }
    Ok(sc)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { scenario, out, opts } => {
            let s = run(&scenario, &out, &opts.config());
            if let Some(r) = &s.result {
                println!(
                    "status {} in {} iterations, {:.3} s",
                    r.outcome.status,
                    r.attempts.iter().map(|o| o.iterations).sum::<usize>(),
                    r.wall_time()
                );
                println!("crossing time {:.6} s, largest added clearance {:.3} m", r.metrics.min_crossing_time, r.extra_clearance);
                println!("certificate {}", r.certification.summary());
                println!("artifacts in {}", s.out_dir.display());
            }
            match &s.error {
                Some(e) => fail(e),
                None => ExitCode::SUCCESS,
            }
        }
        Command::Certify { solution, scenario } => {
            let sc = match load_scenario(&scenario) {
                Ok(sc) => sc,
                Err(e) => return fail(&e),
            };
            let text = match std::fs::read_to_string(&solution) {
                Ok(t) => t,
                Err(e) => return fail(&lanefree::error::ScenarioError::from(e).into()),
            };
            let sol = match CrossingSolution::from_json(&text) {
                Ok(s) => s,
                Err(e) => return fail(&e.into()),
            };
            if let Some(c) = sol.cavs.iter().find(|c| !sc.cavs.iter().any(|s| s.id == c.id)) {
                return fail(&lanefree::error::ScenarioError::Invalid(format!("solution vehicle {} is not in the scenario", c.id)).into());
            }
            let rep = certify(&sol, &sc);
            println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
            if rep.pass {
                ExitCode::SUCCESS
            } else {
                fail(&HarnessError::Certification(rep.summary()))
            }
        }
        Command::Sweep { template, n, reps, workers, out, opts } => {
            let sc = match load_scenario(&template) {
                Ok(sc) => sc,
                Err(e) => return fail(&e),
            };
            if let Some(&bad) = n.iter().find(|&&k| k == 0 || k > sc.cavs.len()) {
                let msg = format!("vehicle count {bad} outside 1..={}", sc.cavs.len());
                return fail(&lanefree::error::ScenarioError::Invalid(msg).into());
            }
            let cfg = SweepConfig { counts: n, reps, workers, run: opts.config() };
            let rep = sweep(&sc, &cfg, Some(&out));
            print!("{}", rep.summary_csv());
            if let Some(f) = rep.fit {
                println!("ln(time) fit: slope {:.4} per vehicle, intercept {:.4}, R^2 {:.4}", f.slope, f.intercept, f.r_squared);
            }
            match rep.write(&out) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            }
        }
    }
}

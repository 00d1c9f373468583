//! Wall time against vehicle count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::mean_std;
use super::{plot, solve_scenario, write_artifacts, RunConfig};
use crate::error::HarnessError;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub counts: Vec<usize>,
    pub reps: usize,
    /// Concurrent cells. One keeps the timings free of contention.
    pub workers: usize,
    pub run: RunConfig,
}

/// One solve of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    /// Wall time of the whole cell, retightening included (s).
    pub wall_time: f64,
    pub status: String,
    pub iterations: usize,
    pub certified: bool,
    pub crossing_time: Option<f64>,
    pub average_speed: Option<f64>,
    pub speed_std: Option<f64>,
    pub throughput_per_s: Option<f64>,
    pub error: Option<String>,
}

impl Cell {
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.certified
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub runs: usize,
    pub failures: usize,
    pub mean_wall_time: f64,
    pub std_wall_time: f64,
    pub mean_crossing_time: f64,
    pub std_crossing_time: f64,
    pub average_speed: f64,
    pub speed_std: f64,
    pub throughput_per_s: f64,
}

/// Least-squares line `ln(time) = intercept + slope N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<Cell>,
    pub summary: Vec<SummaryRow>,
    /// `None` with fewer than two vehicle counts that have successful runs.
    pub fit: Option<ExponentialFit>,
}

/// Ordinary least squares of `y` on `x`; `None` for fewer than two
/// distinct abscissae.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<ExponentialFit> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(ExponentialFit { slope, intercept, r_squared })
}

fn run_cell(template: &Scenario, n: usize, rep: usize, cfg: &SweepConfig, out: Option<&Path>) -> Cell {
    let sc = template.truncated(n);
    let start = Instant::now();
    let res = solve_scenario(&sc, &cfg.run);
    let wall_time = start.elapsed().as_secs_f64();
    let mut cell = Cell {
        n,
        rep,
        seed: cfg.run.seed,
        wall_time,
        status: String::new(),
        iterations: 0,
        certified: false,
        crossing_time: None,
        average_speed: None,
        speed_std: None,
        throughput_per_s: None,
        error: None,
    };
    match res {
        Ok(r) => {
            cell.status = r.outcome.status.as_str().into();
            cell.iterations = r.attempts.iter().map(|o| o.iterations).sum();
            cell.certified = r.certification.pass;
            cell.crossing_time = Some(r.metrics.min_crossing_time);
            cell.average_speed = Some(r.metrics.average_speed);
            cell.speed_std = Some(r.metrics.speed_std);
            cell.throughput_per_s = Some(r.metrics.throughput_per_s);
            if !r.certification.pass {
                cell.error = Some(format!("certification failed: {}", r.certification.summary()));
            }
            if let Some(dir) = out {
                if let Err(e) = write_artifacts(&dir.join(format!("n{n}-rep{rep}")), &sc, &r) {
                    cell.error = Some(e.to_string());
                }
            }
        }
        Err(f) => {
            cell.status = f.attempts.last().map_or("error".into(), |o| o.status.as_str().into());
            cell.iterations = f.attempts.iter().map(|o| o.iterations).sum();
            cell.error = Some(f.error.to_string());
        }
    }
    cell
}

/// Solve the first `N` vehicles of `template` for every `N` in
/// `cfg.counts`, `cfg.reps` times each. A failing cell is recorded and the
/// sweep carries on. With `out`, each cell writes its artifacts to its own
/// directory.
pub fn sweep(template: &Scenario, cfg: &SweepConfig, out: Option<&Path>) -> SweepReport {
    let jobs: Vec<(usize, usize)> = cfg.counts.iter().flat_map(|&n| (0..cfg.reps).map(move |r| (n, r))).collect();
    let next = AtomicUsize::new(0);
    let cells = Mutex::new(Vec::with_capacity(jobs.len()));
    std::thread::scope(|s| {
        for _ in 0..cfg.workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(n, rep)) = jobs.get(k) else { break };
                let cell = run_cell(template, n, rep, cfg, out);
                cells.lock().expect("no worker panics while holding the lock").push(cell);
            });
        }
    });
    let mut cells = cells.into_inner().expect("workers finished");
    cells.sort_by_key(|c| (c.n, c.rep));
    let summary = summarize(&cfg.counts, &cells);
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        summary.iter().filter(|r| r.runs > r.failures).map(|r| (r.n as f64, r.mean_wall_time.ln())).unzip();
    SweepReport { fit: fit_line(&xs, &ys), cells, summary }
}

fn summarize(counts: &[usize], cells: &[Cell]) -> Vec<SummaryRow> {
    let mut ns: Vec<usize> = counts.to_vec();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let all: Vec<&Cell> = cells.iter().filter(|c| c.n == n).collect();
            let ok: Vec<&Cell> = all.iter().copied().filter(|c| c.succeeded()).collect();
            let col = |f: fn(&Cell) -> Option<f64>| ok.iter().filter_map(|c| f(c)).collect::<Vec<f64>>();
            let (mw, sw) = mean_std(&ok.iter().map(|c| c.wall_time).collect::<Vec<_>>());
            let (mt, st) = mean_std(&col(|c| c.crossing_time));
            SummaryRow {
                n,
                runs: all.len(),
                failures: all.len() - ok.len(),
                mean_wall_time: mw,
                std_wall_time: sw,
                mean_crossing_time: mt,
                std_crossing_time: st,
                average_speed: mean_std(&col(|c| c.average_speed)).0,
                speed_std: mean_std(&col(|c| c.speed_std)).0,
                throughput_per_s: mean_std(&col(|c| c.throughput_per_s)).0,
            }
        })
        .collect()
}

impl SweepReport {
    pub fn cells_csv(&self) -> String {
        let mut s = String::from("n,rep,seed,wall_time,status,iterations,certified,crossing_time,average_speed,speed_std,throughput_per_s,error\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},\"{}\"",
                c.n,
                c.rep,
                c.seed,
                c.wall_time,
                c.status,
                c.iterations,
                c.certified,
                opt(c.crossing_time),
                opt(c.average_speed),
                opt(c.speed_std),
                opt(c.throughput_per_s),
                c.error.as_deref().unwrap_or("").replace('"', "\"\"")
            );
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "n,runs,failures,mean_wall_time,std_wall_time,mean_crossing_time,std_crossing_time,average_speed,speed_std,throughput_per_s\n",
        );
        for r in &self.summary {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.runs,
                r.failures,
                r.mean_wall_time,
                r.std_wall_time,
                r.mean_crossing_time,
                r.std_crossing_time,
                r.average_speed,
                r.speed_std,
                r.throughput_per_s
            );
        }
        s
    }

    pub fn timing_svg(&self) -> String {
        let points: Vec<(usize, f64, f64)> =
            self.summary.iter().filter(|r| r.runs > r.failures).map(|r| (r.n, r.mean_wall_time, r.std_wall_time)).collect();
        plot::timing_svg(&points, self.fit.map(|f| (f.slope, f.intercept)))
    }

    /// Write `cells.csv`, `summary.csv`, `summary.json` and `timing.svg`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        let io = |context: String| move |source| HarnessError::Io { context, source };
        fs::create_dir_all(dir).map_err(io(format!("creating {}", dir.display())))?;
        for (name, text) in [
            ("cells.csv", self.cells_csv()),
            ("summary.csv", self.summary_csv()),
            ("summary.json", serde_json::to_string_pretty(self).expect("report serializes")),
            ("timing.svg", self.timing_svg()),
        ] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(io(format!("writing {}", path.display())))?;
        }
        Ok(())
    }
}

//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; the process fails if any
//! criterion fails.

use std::ops::Range;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use lanefree::geometry::{min_distance_oracle, ConvexPolytope, Pose};
use lanefree::harness::sweep::{sweep, SweepConfig};
use lanefree::harness::{run, solve_scenario, RunConfig, RunResult};
use lanefree::scenario::{bundled, Scenario, BUNDLED};
use lanefree::solver::{check_derivatives, solve, Nlp, SolveStatus, SolverConfig};
use lanefree::transcription::{transcribe, NodeTrajectories, Scheme, TranscriptionConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and limits.
const TF_BAND: (f64, f64) = (4.268, 4.8);
const TF_BOUND: f64 = 4.27;
const Q_SCALES: [f64; 3] = [1.0, 0.9, 0.85];
const C1_RUNTIME: Duration = Duration::from_secs(60);
const DUAL_PAIRS: usize = 200;
const DUAL_TOL: f64 = 1e-6;
const C2_RUNTIME: Duration = Duration::from_secs(10);
const MIN_PAIR: f64 = 0.1;
const MIN_ROAD: f64 = 0.1;
const CERT_SLACK: f64 = 1e-6;
const N_SPREAD: f64 = 0.05;
const DERIV_TOL: f64 = 1e-6;
const PERMUTE_TOL: f64 = 1e-6;
const COLLOC_TOL: f64 = 1e-8;
const SWEEP_N: Range<usize> = 1..5;
const SWEEP_REPS: usize = 3;

type Outcome = Result<String, String>;

fn solved(sc: &Scenario) -> Result<RunResult, String> {
    solve_scenario(sc, &RunConfig::default()).map_err(|f| f.error.to_string())
}

fn multi_vehicle() -> Vec<(&'static str, Scenario)> {
    BUNDLED
        .iter()
        .map(|(name, _)| (*name, bundled(name).unwrap()))
        .filter(|(_, sc)| sc.cavs.len() > 1)
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let base = bundled("straight-70m-single").unwrap();
    let mut tfs = Vec::new();
    for k in Q_SCALES {
        let mut sc = base.clone();
        sc.gains = sc.gains.with_q_scale(k);
        let r = solved(&sc)?;
        if r.outcome.status != SolveStatus::Optimal {
            return Err(format!("Q scale {k}: status {}", r.outcome.status));
        }
        tfs.push(r.solution.crossing_time());
    }
    let elapsed = start.elapsed();
    let listing = Q_SCALES.iter().zip(&tfs).map(|(k, t)| format!("{k}: {t:.4} s")).collect::<Vec<_>>().join(", ");
    let in_band = tfs.iter().all(|t| (TF_BAND.0..=TF_BAND.1).contains(t));
    let toward = tfs.windows(2).all(|w| (w[1] - TF_BOUND).abs() < (w[0] - TF_BOUND).abs());
    let msg = format!("t_f by Q scale {listing}; {:.1} s", elapsed.as_secs_f64());
    if in_band && toward && elapsed <= C1_RUNTIME {
        Ok(msg)
    } else {
        Err(format!("{msg}; in band {in_band}, monotone toward {TF_BOUND} {toward}"))
    }
}

/// Maximise the dual distance bound of two polygons with the in-repo
/// interior-point solver. Variables `[lambda, mu, s]`.
struct DualGap<'a> {
    p: &'a ConvexPolytope,
    q: &'a ConvexPolytope,
}

impl DualGap<'_> {
    fn sizes(&self) -> (usize, usize) {
        (self.p.face_count(), self.q.face_count())
    }
}

impl Nlp for DualGap<'_> {
    fn num_variables(&self) -> usize {
        let (a, b) = self.sizes();
        a + b + 2
    }

    fn num_constraints(&self) -> usize {
        5
    }

    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.sizes();
        let mut lo = vec![0.0; a + b + 2];
        lo[a + b] = f64::NEG_INFINITY;
        lo[a + b + 1] = f64::NEG_INFINITY;
        (lo, vec![f64::INFINITY; a + b + 2])
    }

    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0, 0.0, 0.0, 0.0, f64::NEG_INFINITY], vec![0.0, 0.0, 0.0, 0.0, 1.0])
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let (a, _) = self.sizes();
        let bp = self.p.offsets().iter().zip(&x[..a]).map(|(b, l)| b * l).sum::<f64>();
        let bq = self.q.offsets().iter().zip(&x[a..]).map(|(b, l)| b * l).sum::<f64>();
        bp + bq
    }

    fn gradient(&self, _x: &[f64], grad: &mut [f64]) {
        let (a, b) = self.sizes();
        grad[..a].copy_from_slice(self.p.offsets());
        grad[a..a + b].copy_from_slice(self.q.offsets());
        grad[a + b] = 0.0;
        grad[a + b + 1] = 0.0;
    }

    fn constraints(&self, x: &[f64], g: &mut [f64]) {
        let (a, b) = self.sizes();
        let s = [x[a + b], x[a + b + 1]];
        for k in 0..2 {
            g[k] = self.p.normals().iter().zip(&x[..a]).map(|(n, l)| n[k] * l).sum::<f64>() + s[k];
            g[2 + k] = self.q.normals().iter().zip(&x[a..a + b]).map(|(n, l)| n[k] * l).sum::<f64>() - s[k];
        }
        g[4] = s[0] * s[0] + s[1] * s[1];
    }

    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        let (a, b) = self.sizes();
        let mut out = Vec::new();
        for k in 0..2 {
            out.extend((0..a).map(|i| (k, i)));
            out.push((k, a + b + k));
            out.extend((0..b).map(|i| (2 + k, a + i)));
            out.push((2 + k, a + b + k));
        }
        out.push((4, a + b));
        out.push((4, a + b + 1));
        out
    }

    fn jacobian_values(&self, x: &[f64], vals: &mut [f64]) {
        let (a, b) = self.sizes();
        let mut i = 0;
        for k in 0..2 {
            for n in self.p.normals() {
                vals[i] = n[k];
                i += 1;
            }
            vals[i] = 1.0;
            i += 1;
            for n in self.q.normals() {
                vals[i] = n[k];
                i += 1;
            }
            vals[i] = -1.0;
            i += 1;
        }
        vals[i] = 2.0 * x[a + b];
        vals[i + 1] = 2.0 * x[a + b + 1];
    }

    fn hessian_structure(&self) -> Vec<(usize, usize)> {
        let (a, b) = self.sizes();
        vec![(a + b, a + b), (a + b + 1, a + b + 1)]
    }

    fn hessian_values(&self, _x: &[f64], _sigma: f64, y: &[f64], vals: &mut [f64]) {
        vals[0] = 2.0 * y[4];
        vals[1] = 2.0 * y[4];
    }
}

fn random_disjoint_rectangles(rng: &mut ChaCha8Rng) -> (ConvexPolytope, ConvexPolytope) {
    loop {
        let a = ConvexPolytope::rectangle(rng.gen_range(0.5..3.0), rng.gen_range(0.3..1.5)).unwrap();
        let b = ConvexPolytope::rectangle(rng.gen_range(0.5..3.0), rng.gen_range(0.3..1.5)).unwrap();
        let p = a.at_pose(&Pose::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-3.2..3.2)));
        let q = b.at_pose(&Pose::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-3.2..3.2)));
        if min_distance_oracle(&p, &q) > 1e-3 {
            return (p, q);
        }
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = SolverConfig { tol: 1e-10, constr_tol: 1e-10, ..SolverConfig::default() };
    let mut worst = 0.0f64;
    for k in 0..DUAL_PAIRS {
        let (p, q) = random_disjoint_rectangles(&mut rng);
        let nlp = DualGap { p: &p, q: &q };
        let n = nlp.num_variables();
        let (x, out) = solve(&nlp, &vec![0.5; n], &cfg).map_err(|e| format!("pair {k}: {e}"))?;
        if !out.status.is_success() {
            return Err(format!("pair {k}: dual solve ended {}", out.status));
        }
        // multipliers may sit up to the bound relaxation below zero
        if let Some(v) = x[..n - 2].iter().find(|v| **v < -1e-8) {
            return Err(format!("pair {k}: negative multiplier {v}"));
        }
        let mut x = x;
        for v in &mut x[..n - 2] {
            *v = v.max(0.0);
        }
        // take s exactly from the first body's equality and charge what is
        // left of the second against the extent of that body: for p in P and
        // q in Q, -b'l - c'm <= s'(p - q) - r'q <= |s| |p - q| + |r| max|q|
        let mut g = [0.0; 5];
        nlp.constraints(&x, &mut g);
        x[n - 2] -= g[0];
        x[n - 1] -= g[1];
        nlp.constraints(&x, &mut g);
        let r = g[2].hypot(g[3]);
        if r > 1e-6 {
            return Err(format!("pair {k}: dual equalities violated by {r:.2e}"));
        }
        let reach = q.vertices().iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        let s_norm = x[n - 2].hypot(x[n - 1]);
        if s_norm <= 0.0 {
            return Err(format!("pair {k}: zero separating direction"));
        }
        let certified = (-nlp.objective(&x) - r * reach) / s_norm;
        let oracle = min_distance_oracle(&p, &q);
        if certified > oracle + 1e-12 {
            return Err(format!("pair {k}: dual bound {certified} above distance {oracle}"));
        }
        worst = worst.max((certified - oracle).abs());
    }
    let elapsed = start.elapsed();
    let msg = format!("{DUAL_PAIRS} pairs, max |dual - oracle| {worst:.2e}; {:.2} s", elapsed.as_secs_f64());
    if worst <= DUAL_TOL && elapsed <= C2_RUNTIME {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_3(results: &[(&str, Result<RunResult, String>)]) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, r) in results {
        let r = match r {
            Ok(r) if r.outcome.status == SolveStatus::Optimal => r,
            Ok(r) => {
                lines.push(format!("{name}: {} (not optimal, skipped)", r.outcome.status));
                continue;
            }
            Err(e) => {
                lines.push(format!("{name}: solve error {e} (skipped)"));
                continue;
            }
        };
        let c = &r.certification;
        let pair = c.min_pair.as_ref().map_or(f64::INFINITY, |m| m.distance);
        let road = c.min_road.as_ref().map_or(f64::INFINITY, |m| m.distance);
        let pass = c.pass && pair >= MIN_PAIR - CERT_SLACK && road >= MIN_ROAD - CERT_SLACK;
        ok &= pass;
        lines.push(format!("{name}: pair {pair:.3} m, road {road:.3} m{}", if pass { "" } else { " FAIL" }));
    }
    let certified = results.iter().filter(|(_, r)| r.as_ref().is_ok_and(|r| r.outcome.status == SolveStatus::Optimal)).count();
    let msg = format!("{certified} optimal scenarios certified at 10 ms; {}", lines.join("; "));
    if ok && certified > 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4(results: &[(&str, Result<RunResult, String>)]) -> Outcome {
    let tf = |name: &str| -> Result<f64, String> {
        let r = results.iter().find(|(n, _)| *n == name).ok_or(format!("{name} missing"))?;
        r.1.as_ref().map(|r| r.solution.crossing_time()).map_err(|e| format!("{name}: {e}"))
    };
    let (t2, t4) = (tf("symmetric-2")?, tf("four-symmetric")?);
    let spread = (t4 - t2).abs() / t2;
    let msg = format!("N=2 {t2:.4} s, N=4 {t4:.4} s, relative difference {:.2}%", 100.0 * spread);
    if spread < N_SPREAD {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_5(results: &[(&str, Result<RunResult, String>)], single: &Result<RunResult, String>) -> Outcome {
    let mut worst: (f64, String) = (0.0, String::new());
    for (name, _) in BUNDLED {
        let sc = bundled(name).unwrap();
        let p = transcribe(&sc, &TranscriptionConfig::default()).map_err(|e| e.to_string())?;
        let mut points = vec![("guess", p.initial_guess())];
        let r = if *name == "straight-70m-single" { Some(single) } else { results.iter().find(|(n, _)| n == name).map(|(_, r)| r) };
        match r {
            Some(Ok(r)) => points.push(("solution", r.x.clone())),
            _ => return Err(format!("{name}: no solution to check")),
        }
        for (at, x) in points {
            let e = check_derivatives(&p, &x).max_rel_error();
            if e > worst.0 || worst.1.is_empty() {
                worst = (e, format!("{name} at {at}"));
            }
        }
    }
    let msg = format!("{} scenarios at guess and solution, max relative error {:.2e} ({})", BUNDLED.len(), worst.0, worst.1);
    if worst.0 <= DERIV_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_6(results: &[(&str, Result<RunResult, String>)]) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("two-crossing.json");
    std::fs::write(&path, bundled("two-crossing").unwrap().to_json()).map_err(|e| e.to_string())?;
    let mut texts = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let s = run(&path, &out, &RunConfig::default());
        if s.exit_code != 0 {
            return Err(format!("run {k} exited {}: {:?}", s.exit_code, s.error.map(|e| e.to_string())));
        }
        texts.push(std::fs::read(out.join("solution.json")).map_err(|e| e.to_string())?);
    }
    let identical = texts[0] == texts[1];

    let name = "four-symmetric";
    let base = results.iter().find(|(n, _)| *n == name).unwrap().1.as_ref().map_err(|e| e.clone())?;
    let mut permuted = bundled(name).unwrap();
    permuted.cavs.reverse();
    permuted.cavs.swap(0, 1);
    let other = solved(&permuted)?;
    let dt = (other.solution.crossing_time() - base.solution.crossing_time()).abs();
    let mut traj = 0.0f64;
    for c in &base.solution.cavs {
        let d = other.solution.cav(&c.id).ok_or("vehicle lost in permutation")?;
        for (a, b) in c.states.iter().zip(&d.states) {
            traj = a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(traj, f64::max);
        }
    }
    let msg = format!("solution.json byte-identical {identical}; permuted {name}: |dt_f| {dt:.2e}, max state difference {traj:.2e}");
    if identical && dt <= PERMUTE_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_7() -> Outcome {
    let sc = bundled("straight-70m-single").unwrap();
    let (v0, acc, t_f) = (sc.cavs[0].v0, 1.5, 4.0);
    let (x0, y0) = (sc.cavs[0].z0.x, sc.cavs[0].z0.y);
    let exact = |t: f64| [0.0, 0.0, v0 + acc * t, x0 + v0 * t + 0.5 * acc * t * t, y0, 0.0];
    let mut worst: (f64, String) = (0.0, String::new());
    for (scheme, degree) in [(Scheme::Radau, 5), (Scheme::Radau, 3), (Scheme::Legendre, 3)] {
        let cfg = TranscriptionConfig { scheme, degree, ..TranscriptionConfig::default() };
        let p = transcribe(&sc, &cfg).map_err(|e| e.to_string())?;
        let l = &p.layout;
        let traj = NodeTrajectories {
            t_f,
            states: vec![p.node_tau.iter().map(|tau| exact(tau * t_f)).collect()],
            inputs: vec![vec![[acc, 0.0]; l.intervals]],
        };
        let x = p.pack(&traj);
        let mut g = vec![0.0; p.num_constraints()];
        p.constraints(&x, &mut g);
        for (block, rows) in p.row_blocks() {
            if block.ends_with("dynamics") || block.ends_with("continuity") || block.ends_with("initial") {
                let e = g[rows].iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if e >= worst.0 {
                    worst = (e, format!("{scheme:?} d={degree} {block}"));
                }
            }
        }
        for k in 0..=400 {
            let tau = k as f64 / 400.0;
            let s = p.state_at_tau(&x, 0, tau);
            let e = s.iter().zip(exact(tau * t_f)).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if e >= worst.0 {
                worst = (e, format!("{scheme:?} d={degree} interpolation"));
            }
        }
    }
    let msg = format!("max defect or interpolation error {:.2e} ({})", worst.0, worst.1);
    if worst.0 <= COLLOC_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_8() -> Outcome {
    let template = bundled("four-symmetric").unwrap();
    let cfg = SweepConfig { counts: SWEEP_N.collect(), reps: SWEEP_REPS, workers: 1, run: RunConfig::default() };
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-sweep");
    let rep = sweep(&template, &cfg, None);
    rep.write(&out).map_err(|e| e.to_string())?;
    let failed = rep.cells.iter().filter(|c| !c.succeeded()).count();
    let means = rep.summary.iter().map(|r| format!("N={} {:.3} s", r.n, r.mean_wall_time)).collect::<Vec<_>>().join(", ");
    match rep.fit {
        Some(f) if failed == 0 && rep.cells.len() == SWEEP_N.len() * SWEEP_REPS => Ok(format!(
            "{} solves, mean wall {means}; ln(time) slope {:.3} per vehicle, R^2 {:.3}; written to {}",
            rep.cells.len(),
            f.slope,
            f.r_squared,
            out.display()
        )),
        _ => Err(format!("{} cells, {failed} failed, fit {:?}", rep.cells.len(), rep.fit)),
    }
}

fn report(n: usize, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or("panic".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match res {
        Ok(msg) => {
            println!("criterion {n}: PASS ({secs:.1} s) {msg}");
            true
        }
        Err(msg) => {
            println!("criterion {n}: FAIL ({secs:.1} s) {msg}");
            false
        }
    }
}

fn main() {
    // Shared solves, used by criteria 3 to 6.
    let start = Instant::now();
    let results: Vec<(&str, Result<RunResult, String>)> = multi_vehicle().into_iter().map(|(n, sc)| (n, solved(&sc))).collect();
    let single = solved(&bundled("straight-70m-single").unwrap());
    println!("solved {} bundled scenarios in {:.1} s", results.len() + 1, start.elapsed().as_secs_f64());

    let outcomes = [
        report(1, criterion_1),
        report(2, criterion_2),
        report(3, || criterion_3(&results)),
        report(4, || criterion_4(&results)),
        report(5, || criterion_5(&results, &single)),
        report(6, || criterion_6(&results)),
        report(7, criterion_7),
        report(8, criterion_8),
    ];
    let passed = outcomes.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", outcomes.len());
    if passed != outcomes.len() {
        std::process::exit(1);
    }
}

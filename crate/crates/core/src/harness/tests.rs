use approx::assert_relative_eq;
use proptest::prelude::*;

use super::sweep::{fit_line, sweep, SweepConfig};
use super::*;
use crate::scenario::{bundled, CavTrajectory};
use crate::solver::SolveStatus;

fn diag() -> SolverDiagnostics {
    SolverDiagnostics {
        status: "optimal".into(),
        iterations: 0,
        objective: 0.0,
        stationarity: 0.0,
        primal_infeasibility: 0.0,
        complementarity: 0.0,
        seed: 0,
    }
}

/// Solution on a 10 ms grid over `span` seconds; `pose(c, t)` gives
/// `(x, y, theta, V)` of vehicle `c`.
fn synthetic(ids: &[&str], span: f64, pose: impl Fn(usize, f64) -> (f64, f64, f64, f64)) -> CrossingSolution {
    let steps = (span / 0.01).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * 0.01).collect();
    let cavs = ids
        .iter()
        .enumerate()
        .map(|(c, id)| CavTrajectory {
            id: id.to_string(),
            states: times
                .iter()
                .map(|&t| {
                    let (x, y, th, v) = pose(c, t);
                    [0.0, 0.0, v, x, y, th]
                })
                .collect(),
            inputs: vec![[0.0, 0.0]; times.len()],
            node_states: vec![],
        })
        .collect();
    CrossingSolution {
        t0: 0.0,
        t_f: span,
        times,
        node_tau: vec![],
        node_weights: vec![],
        cavs,
        pair_duals: vec![],
        road_duals: vec![],
        diagnostics: diag(),
    }
}

/// East vehicle along its lane, north vehicle waiting far south.
fn clear_pair(overlap_from: Option<f64>) -> CrossingSolution {
    synthetic(&["east", "north"], 2.0, move |c, t| {
        let east = (-20.0 + 10.0 * t, -2.5, 0.0, 10.0);
        match c {
            0 => east,
            _ if overlap_from.is_some_and(|t0| t >= t0 - 1e-9) => (east.0 + 1.0, -2.5, 0.0, 10.0),
            _ => (2.5, -30.0, std::f64::consts::FRAC_PI_2, 10.0),
        }
    })
}

#[test]
fn constant_speed_metrics() {
    let sol = synthetic(&["a", "b", "c"], 3.0, |c, t| (10.0 * t, 3.0 * c as f64, 0.0, 10.0));
    let m = metrics(&sol);
    assert_relative_eq!(m.average_speed, 10.0, epsilon = 1e-12);
    assert_relative_eq!(m.speed_std, 0.0, epsilon = 1e-12);
    assert_eq!(m.n_cavs, 3);
    assert_relative_eq!(m.min_crossing_time, 3.0);
}

#[test]
fn two_speed_metrics() {
    let sol = synthetic(&["slow", "fast"], 2.0, |c, _| (0.0, 0.0, 0.0, if c == 0 { 10.0 } else { 20.0 }));
    let m = metrics(&sol);
    assert_relative_eq!(m.average_speed, 15.0, epsilon = 1e-12);
    assert_relative_eq!(m.speed_std, 5.0, epsilon = 1e-12);
}

#[test]
fn throughput_of_twelve_in_four_point_six() {
    let ids: Vec<String> = (0..12).map(|i| format!("v{i}")).collect();
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let mut sol = synthetic(&refs, 4.6, |_, _| (0.0, 0.0, 0.0, 10.0));
    sol.t_f = 4.6;
    let m = metrics(&sol);
    assert_relative_eq!(m.throughput_per_s, 12.0 / 4.6, epsilon = 1e-12);
    assert!((m.throughput_per_s - 2.609).abs() < 1e-3);
    assert_relative_eq!(m.throughput_per_h, 3600.0 * 12.0 / 4.6, epsilon = 1e-9);
}

proptest! {
    #[test]
    fn metrics_ignore_labels(speeds in proptest::collection::vec(0.5f64..25.0, 2..6), shift in 1usize..5) {
        let n = speeds.len();
        let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let base = synthetic(&refs, 0.5, |c, t| (t, c as f64, 0.0, speeds[c] + t));
        // rotate the vehicle order and rename them so the id order changes too
        let mut relabeled = base.clone();
        relabeled.cavs.rotate_left(shift % n);
        for (k, c) in relabeled.cavs.iter_mut().enumerate() {
            c.id = format!("w{}", n - k);
        }
        let (a, b) = (metrics(&base), metrics(&relabeled));
        prop_assert_eq!(a.n_cavs, b.n_cavs);
        prop_assert!((a.average_speed - b.average_speed).abs() <= 1e-12 * a.average_speed);
        prop_assert!((a.speed_std - b.speed_std).abs() <= 1e-9);
        prop_assert_eq!(a.throughput_per_s, b.throughput_per_s);
    }
}

#[test]
fn certify_passes_separated_vehicles() {
    let sc = bundled("two-crossing").unwrap();
    let rep = certify(&clear_pair(None), &sc);
    assert!(rep.pass, "{}", rep.summary());
    assert_eq!(rep.samples, 201);
    let pair = rep.min_pair.unwrap();
    assert!(pair.distance > 20.0);
    let road = rep.min_road.unwrap();
    assert_relative_eq!(road.distance, 1.5, epsilon = 1e-9);
}

#[test]
fn certify_reports_first_overlap() {
    let sc = bundled("two-crossing").unwrap();
    let rep = certify(&clear_pair(Some(0.5)), &sc);
    assert!(!rep.pass);
    let v = rep.first_violation().unwrap();
    assert_relative_eq!(v.time, 0.5, epsilon = 1e-9);
    assert_eq!(v.kind, "pair east/north");
    assert_eq!(rep.violation_count, 151);
    assert!(rep.min_pair.as_ref().unwrap().distance < sc.safety.d_min);
    assert!(rep.summary().contains("first violation at t = 0.50"));
}

#[test]
fn certify_rechecks_limits_on_the_grid() {
    let sc = bundled("two-crossing").unwrap();
    let mut sol = clear_pair(None);
    sol.cavs[1].states[120][idx::V] = 26.0;
    let rep = certify(&sol, &sc);
    assert!(!rep.pass);
    let v = rep.first_violation().unwrap();
    assert_eq!(v.kind, "limit north speed-max");
    assert_relative_eq!(v.time, 1.2, epsilon = 1e-9);
}

#[test]
fn single_vehicle_pair_section_is_vacuous() {
    let sc = bundled("straight-70m-single").unwrap();
    let sol = synthetic(&["east"], 1.0, |_, t| (-35.0 + 10.0 * t, -2.5, 0.0, 10.0));
    let rep = certify(&sol, &sc);
    assert!(rep.pass);
    assert!(rep.min_pair.is_none());
    assert!(rep.min_road.is_some());
}

#[test]
fn road_intrusion_fails() {
    let sc = bundled("straight-70m-single").unwrap();
    let sol = synthetic(&["east"], 1.0, |_, t| (-35.0 + 10.0 * t, -4.5, 0.0, 10.0));
    let rep = certify(&sol, &sc);
    assert!(!rep.pass);
    assert!(rep.first_violation().unwrap().kind.starts_with("road east/"));
    assert!(rep.clearance_deficit(&sc) >= sc.safety.d_rmin - 1e-12);
}

#[test]
fn trajectories_csv_has_a_row_per_sample_and_vehicle() {
    let sol = clear_pair(None);
    let csv = trajectories_csv(&sol);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,id,x,y,theta,V,r,beta,a,delta");
    assert_eq!(lines.len(), 1 + 2 * 201);
    assert!(lines[1].starts_with("0.00,east,-20,"));
}

#[test]
fn plot_has_fixed_viewport_and_one_trace_per_vehicle() {
    let sc = bundled("two-crossing").unwrap();
    let svg = plot::trajectory_svg(&clear_pair(None), &sc.intersection().unwrap(), &[(2.3, 1.0), (2.3, 1.0)]);
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains(r#"viewBox="0 0 1000 1000""#));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn exponential_fit_recovers_rate() {
    let ns: Vec<f64> = (1..=8).map(f64::from).collect();
    let ln_t: Vec<f64> = ns.iter().map(|n| (0.02 * (0.13 * n).exp()).ln()).collect();
    let fit = fit_line(&ns, &ln_t).unwrap();
    assert_relative_eq!(fit.slope, 0.13, epsilon = 1e-12);
    assert_relative_eq!(fit.intercept, 0.02f64.ln(), epsilon = 1e-12);
    assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
}

#[test]
fn fit_matches_normal_equations_with_noise() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [0.1, 0.35, 0.38, 0.6];
    let fit = fit_line(&x, &y).unwrap();
    // closed form for four points
    let slope = (4.0 * (0.1 + 0.7 + 1.14 + 2.4) - 10.0 * 1.43) / (4.0 * 30.0 - 100.0);
    assert_relative_eq!(fit.slope, slope, epsilon = 1e-12);
    assert!(fit.r_squared > 0.9 && fit.r_squared < 1.0);
    assert!(fit_line(&[2.0, 2.0], &[1.0, 3.0]).is_none());
    assert!(fit_line(&[1.0], &[1.0]).is_none());
}

#[test]
fn sweep_keeps_failed_cells() {
    let template = bundled("two-crossing").unwrap();
    let mut run = RunConfig::default();
    run.solver.max_iter = 2;
    run.transcription.intervals = 4;
    run.transcription.degree = 3;
    let cfg = SweepConfig { counts: vec![1, 2], reps: 2, workers: 2, run };
    let rep = sweep(&template, &cfg, None);
    assert_eq!(rep.cells.len(), 4);
    assert!(rep.cells.iter().all(|c| c.error.is_some()));
    assert!(rep.cells.iter().all(|c| c.status == SolveStatus::MaxIter.as_str()));
    assert_eq!(rep.summary.iter().map(|r| r.failures).sum::<usize>(), 4);
    assert!(rep.fit.is_none());
    assert_eq!(rep.cells_csv().lines().count(), 5);
}

#[test]
fn repeated_cells_give_identical_crossing_times() {
    let template = bundled("two-crossing").unwrap();
    let mut run = RunConfig::default();
    run.transcription.intervals = 6;
    run.transcription.degree = 3;
    let cfg = SweepConfig { counts: vec![1, 2], reps: 2, workers: 2, run };
    let dir = tempfile::tempdir().unwrap();
    let rep = sweep(&template, &cfg, Some(dir.path()));
    assert!(rep.cells.iter().all(|c| c.succeeded()), "{:?}", rep.cells);
    for row in &rep.summary {
        assert_eq!(row.std_crossing_time, 0.0);
        assert_eq!(row.failures, 0);
    }
    assert!(rep.fit.is_some());
    rep.write(dir.path()).unwrap();
    for f in ["cells.csv", "summary.csv", "summary.json", "timing.svg", "n2-rep1/solution.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn run_rejects_malformed_json_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"name\": \"x\",\n  \"cavs\": [\n}").unwrap();
    let s = run(&path, &dir.path().join("out"), &RunConfig::default());
    assert_eq!(s.exit_code, 2);
    let msg = s.error.unwrap().to_string();
    assert!(msg.contains("line 4"), "{msg}");
}

#[test]
fn run_reports_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let s = run(&dir.path().join("absent.json"), dir.path(), &RunConfig::default());
    assert_eq!(s.exit_code, 2);
}

#[test]
fn solver_failure_names_a_constraint_and_keeps_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sc.json");
    std::fs::write(&path, bundled("straight-70m-single").unwrap().to_json()).unwrap();
    let mut cfg = RunConfig::default();
    cfg.solver.max_iter = 1;
    let out = dir.path().join("out");
    let s = run(&path, &out, &cfg);
    assert_eq!(s.exit_code, 3);
    assert!(s.error.unwrap().to_string().contains("max-iter"));
    let log = std::fs::read_to_string(out.join("iterations.log")).unwrap();
    assert!(log.starts_with("# attempt 1"));
}

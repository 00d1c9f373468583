//! Primal safety certificate on the dense sampling grid.
//!
//! Distances come from the geometric oracle only; dual values in the
//! solution are ignored.

use serde::{Deserialize, Serialize};

use crate::dynamics::{check_limits_with_tolerance, idx, ControlInput, Limit, VehicleState};
use crate::geometry::{base_body_polytope, min_distance_oracle, ConvexPolytope, Pose, BOUNDARY_NAMES};
use crate::scenario::{CrossingSolution, Scenario};

/// Slack allowed below each clearance.
pub const CERTIFY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Closest {
    pub distance: f64,
    pub time: f64,
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub time: f64,
    pub kind: String,
    pub detail: String,
}

/// What fell short at a sample; indices are positions in the solution's
/// vehicle list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShortfallKind {
    Pair(usize, usize),
    Road(usize),
    Limit(usize, Limit),
}

/// One sample below a clearance or beyond a limit, by `amount`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shortfall {
    pub time: f64,
    pub kind: ShortfallKind,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub pass: bool,
    pub samples: usize,
    /// Closest vehicle pair over all samples; `None` with one vehicle.
    pub min_pair: Option<Closest>,
    /// Smallest vehicle-boundary clearance over all samples.
    pub min_road: Option<Closest>,
    /// Earliest violation of each kind, in time order.
    pub violations: Vec<Violation>,
    pub violation_count: usize,
    /// Every failing sample.
    #[serde(skip)]
    pub shortfalls: Vec<Shortfall>,
}

impl CertificationReport {
    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.first()
    }

    /// Largest shortfall of any clearance below its required value.
    pub fn clearance_deficit(&self, sc: &Scenario) -> f64 {
        let pair = self.min_pair.as_ref().map_or(0.0, |c| sc.safety.d_min - c.distance);
        let road = self.min_road.as_ref().map_or(0.0, |c| sc.safety.d_rmin - c.distance);
        pair.max(road).max(0.0)
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} ({} samples)", if self.pass { "pass" } else { "fail" }, self.samples);
        if let Some(c) = &self.min_pair {
            s += &format!("; min pair distance {:.6} m between {} and {} at t = {:.2} s", c.distance, c.first, c.second, c.time);
        }
        if let Some(c) = &self.min_road {
            s += &format!("; min road clearance {:.6} m for {} to {} at t = {:.2} s", c.distance, c.first, c.second, c.time);
        }
        if let Some(v) = self.first_violation() {
            s += &format!("; first violation at t = {:.2} s: {} {}", v.time, v.kind, v.detail);
        }
        s
    }
}

fn keep_min(slot: &mut Option<Closest>, distance: f64, time: f64, first: &str, second: &str) {
    if slot.as_ref().map_or(true, |c| distance < c.distance) {
        *slot = Some(Closest { distance, time, first: first.into(), second: second.into() });
    }
}

fn limit_name(l: Limit) -> &'static str {
    match l {
        Limit::SpeedMin => "speed-min",
        Limit::SpeedMax => "speed-max",
        Limit::Acceleration => "acceleration",
        Limit::Steering => "steering",
        Limit::YawRate => "yaw-rate",
        Limit::Sideslip => "sideslip",
    }
}

/// Check every sample of `sol` against the clearances and state/input
/// limits of `sc`.
pub fn certify(sol: &CrossingSolution, sc: &Scenario) -> CertificationReport {
    let boundaries = sc.intersection().map(|l| l.boundaries).unwrap_or_default();
    let specs: Vec<_> = sol
        .cavs
        .iter()
        .map(|c| sc.cavs.iter().find(|s| s.id == c.id).expect("solution ids come from the scenario"))
        .collect();
    let bases: Vec<ConvexPolytope> = specs.iter().map(|s| base_body_polytope(&s.params)).collect();
    let mut min_pair = None;
    let mut min_road = None;
    let mut violations: Vec<Violation> = Vec::new();
    let mut shortfalls = Vec::new();
    let mut record = |violations: &mut Vec<Violation>, s: Shortfall, kind: String, detail: String| {
        shortfalls.push(s);
        let time = s.time;
        if !violations.iter().any(|v| v.kind == kind) {
            violations.push(Violation { time, kind, detail });
        }
    };

    for (k, &t) in sol.times.iter().enumerate() {
        let bodies: Vec<ConvexPolytope> = sol
            .cavs
            .iter()
            .zip(&bases)
            .map(|(c, b)| {
                let s = &c.states[k];
                b.at_pose(&Pose::new(s[idx::X], s[idx::Y], s[idx::THETA]))
            })
            .collect();
        for i in 0..bodies.len() {
            for j in i + 1..bodies.len() {
                let d = min_distance_oracle(&bodies[i], &bodies[j]);
                let (a, b) = (&sol.cavs[i].id, &sol.cavs[j].id);
                keep_min(&mut min_pair, d, t, a, b);
                if d < sc.safety.d_min - CERTIFY_SLACK {
                    let s = Shortfall { time: t, kind: ShortfallKind::Pair(i, j), amount: sc.safety.d_min - d };
                    record(&mut violations, s, format!("pair {a}/{b}"), format!("distance {d:.6} m below {}", sc.safety.d_min));
                }
            }
            for (r, o) in boundaries.iter().enumerate() {
                let d = min_distance_oracle(&bodies[i], o);
                let id = &sol.cavs[i].id;
                keep_min(&mut min_road, d, t, id, BOUNDARY_NAMES[r]);
                if d < sc.safety.d_rmin - CERTIFY_SLACK {
                    record(
                        &mut violations,
                        Shortfall { time: t, kind: ShortfallKind::Road(i), amount: sc.safety.d_rmin - d },
                        format!("road {id}/{}", BOUNDARY_NAMES[r]),
                        format!("clearance {d:.6} m below {}", sc.safety.d_rmin),
                    );
                }
            }
            let s = VehicleState::from_array(&sol.cavs[i].states[k]);
            let u = sol.cavs[i].inputs[k];
            for v in check_limits_with_tolerance(&s, &ControlInput { a: u[0], delta: u[1] }, &specs[i].bounds, CERTIFY_SLACK) {
                record(
                    &mut violations,
                    Shortfall { time: t, kind: ShortfallKind::Limit(i, v.limit), amount: v.margin },
                    format!("limit {} {}", sol.cavs[i].id, limit_name(v.limit)),
                    format!("value {:.6} beyond {:.6}", v.value, v.bound),
                );
            }
        }
    }
    violations.sort_by(|a, b| a.time.total_cmp(&b.time));
    CertificationReport {
        pass: shortfalls.is_empty(),
        samples: sol.times.len(),
        min_pair,
        min_road,
        violations,
        violation_count: shortfalls.len(),
        shortfalls,
    }
}

//! Problem instances: layout, fleet, gains and safety margins, plus the
//! solution record and the crossing objective.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{StateBounds, VehicleParams, STATE_DIM};
use crate::error::ScenarioError;
use crate::geometry::{base_body_polytope, build_intersection, min_distance_oracle, IntersectionLayout, Pose, BOUNDARY_NAMES};
use crate::duality::DualBlock;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    /// Lane width (m); the road cross is `2 w` wide.
    pub w: f64,
    /// Arm length (m) beyond the central square.
    #[serde(rename = "L")]
    pub l: f64,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self { w: 5.0, l: 35.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    /// Weight on the squared crossing time.
    pub alpha: f64,
    /// Pose-deviation weight over `(x, y, theta)`.
    #[serde(rename = "Q")]
    pub q: [[f64; 3]; 3],
}

impl Default for Gains {
    fn default() -> Self {
        Self { alpha: 40.0, q: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.1]] }
    }
}

impl Gains {
    pub fn with_q_scale(&self, k: f64) -> Self {
        let mut g = *self;
        for row in g.q.iter_mut() {
            for v in row.iter_mut() {
                *v *= k;
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Safety {
    /// Minimum vehicle-vehicle distance (m).
    pub d_min: f64,
    /// Minimum vehicle-boundary distance (m).
    pub d_rmin: f64,
}

impl Default for Safety {
    fn default() -> Self {
        Self { d_min: 0.1, d_rmin: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavSpec {
    pub id: String,
    #[serde(default)]
    pub params: VehicleParams,
    pub z0: Pose,
    pub v0: f64,
    pub zf: Pose,
    #[serde(default)]
    pub bounds: StateBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub layout: LayoutSpec,
    #[serde(default)]
    pub gains: Gains,
    #[serde(default)]
    pub safety: Safety,
    #[serde(default)]
    pub t0: f64,
    pub cavs: Vec<CavSpec>,
}

impl Scenario {
    /// Parse a scenario document; malformed input reports line and column.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn intersection(&self) -> Result<IntersectionLayout, ScenarioError> {
        build_intersection(self.layout.w, self.layout.l).map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    /// The first `n` vehicles of this scenario.
    pub fn truncated(&self, n: usize) -> Scenario {
        let mut sc = self.clone();
        sc.cavs.truncate(n);
        sc
    }

    /// Load and reject anything that fails validation.
    pub fn load_valid(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let sc = Self::load(path)?;
        let report = validate_scenario(&sc);
        if !report.is_valid() {
            return Err(ScenarioError::Invalid(report.errors.join("; ")));
        }
        Ok(sc)
    }
}

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("straight-70m-single", include_str!("../scenarios/straight-70m-single.json")),
    ("two-crossing", include_str!("../scenarios/two-crossing.json")),
    ("symmetric-2", include_str!("../scenarios/symmetric-2.json")),
    ("four-symmetric", include_str!("../scenarios/four-symmetric.json")),
    ("mixed-right-turn", include_str!("../scenarios/mixed-right-turn.json")),
    ("tight", include_str!("../scenarios/tight.json")),
];

/// A bundled scenario by name.
pub fn bundled(name: &str) -> Option<Scenario> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_json(text).expect("bundled scenarios parse"))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

fn positive_semidefinite(q: &[[f64; 3]; 3]) -> bool {
    let sym = (0..3).all(|i| (0..3).all(|j| (q[i][j] - q[j][i]).abs() <= 1e-12 * (1.0 + q[i][j].abs())));
    if !sym {
        return false;
    }
    // every principal minor must be nonnegative
    let tol = -1e-12;
    let minor2 = |i: usize, j: usize| q[i][i] * q[j][j] - q[i][j] * q[j][i];
    let det = q[0][0] * minor2(1, 2) - q[0][1] * (q[1][0] * q[2][2] - q[1][2] * q[2][0])
        + q[0][2] * (q[1][0] * q[2][1] - q[1][1] * q[2][0]);
    (0..3).all(|i| q[i][i] >= tol) && minor2(0, 1) >= tol && minor2(0, 2) >= tol && minor2(1, 2) >= tol && det >= tol
}

/// Check every scenario invariant and report each violation.
pub fn validate_scenario(sc: &Scenario) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if sc.cavs.is_empty() {
        rep.errors.push("scenario has no vehicles".into());
    }
    if !sc.t0.is_finite() {
        rep.errors.push(format!("t0 = {} is not finite", sc.t0));
    }
    if !(sc.gains.alpha >= 0.0 && sc.gains.alpha.is_finite()) {
        rep.errors.push(format!("alpha = {} must be nonnegative", sc.gains.alpha));
    }
    if !positive_semidefinite(&sc.gains.q) {
        rep.errors.push("Q is not symmetric positive semidefinite".into());
    }
    if !(sc.safety.d_min >= 0.0 && sc.safety.d_rmin >= 0.0) {
        rep.errors.push(format!("safety margins must be nonnegative: {:?}", sc.safety));
    }
    let layout = match sc.intersection() {
        Ok(l) => Some(l),
        Err(e) => {
            rep.errors.push(e.to_string());
            None
        }
    };
    let mut ids = HashSet::new();
    let mut bodies = Vec::new();
    for cav in &sc.cavs {
        if !ids.insert(cav.id.as_str()) {
            rep.errors.push(format!("duplicate vehicle id '{}'", cav.id));
        }
        if let Err(e) = cav.params.validate() {
            rep.errors.push(format!("{}: {e}", cav.id));
            continue;
        }
        if let Err(e) = cav.bounds.validate() {
            rep.errors.push(format!("{}: {e}", cav.id));
            continue;
        }
        if !(cav.v0 >= cav.bounds.v_min && cav.v0 <= cav.bounds.v_max) {
            rep.errors.push(format!(
                "{}: initial speed {} outside [{}, {}]",
                cav.id, cav.v0, cav.bounds.v_min, cav.bounds.v_max
            ));
        }
        let poses = [cav.z0, cav.zf];
        if poses.iter().flat_map(|p| p.to_array()).any(|v| !v.is_finite()) {
            rep.errors.push(format!("{}: non-finite pose", cav.id));
            continue;
        }
        let base = base_body_polytope(&cav.params);
        let start = base.at_pose(&cav.z0);
        let goal = base.at_pose(&cav.zf);
        if let Some(layout) = &layout {
            for (r, o) in layout.boundaries.iter().enumerate() {
                let d0 = min_distance_oracle(&start, o);
                if d0 < sc.safety.d_rmin {
                    rep.errors.push(format!(
                        "{}: initial road clearance {:.4} m to {} block below {}",
                        cav.id, d0, BOUNDARY_NAMES[r], sc.safety.d_rmin
                    ));
                }
                if o.contains(cav.zf.position(), 0.0) {
                    rep.warnings.push(format!(
                        "{}: goal position lies inside the {} block; unreachable without a boundary violation",
                        cav.id, BOUNDARY_NAMES[r]
                    ));
                } else {
                    let df = min_distance_oracle(&goal, o);
                    if df < sc.safety.d_rmin {
                        rep.warnings.push(format!(
                            "{}: goal road clearance {:.4} m to {} block below {}",
                            cav.id, df, BOUNDARY_NAMES[r], sc.safety.d_rmin
                        ));
                    }
                }
            }
        }
        bodies.push((cav.id.as_str(), start, goal));
    }
    for i in 0..bodies.len() {
        for j in i + 1..bodies.len() {
            let d = min_distance_oracle(&bodies[i].1, &bodies[j].1);
            if d < sc.safety.d_min {
                rep.errors.push(format!(
                    "initial separation violated: {} and {} are {:.4} m apart (minimum {})",
                    bodies[i].0, bodies[j].0, d, sc.safety.d_min
                ));
            }
            let d = min_distance_oracle(&bodies[i].2, &bodies[j].2);
            if d < sc.safety.d_min {
                rep.warnings.push(format!(
                    "goal poses of {} and {} are {:.4} m apart (minimum {})",
                    bodies[i].0, bodies[j].0, d, sc.safety.d_min
                ));
            }
        }
    }
    rep
}

/// Sampled trajectory of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavTrajectory {
    pub id: String,
    /// States `[r, beta, V, x, y, theta]` on the dense grid.
    pub states: Vec<[f64; STATE_DIM]>,
    /// Inputs `[a, delta]` on the dense grid.
    pub inputs: Vec<[f64; 2]>,
    /// States at the collocation nodes.
    pub node_states: Vec<[f64; STATE_DIM]>,
}

/// Dual blocks of one avoidance pair at every collocation node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualTrajectory {
    /// First body (a vehicle id).
    pub first: String,
    /// Second body: a vehicle id or a boundary name.
    pub second: String,
    pub blocks: Vec<DualBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub status: String,
    pub iterations: usize,
    pub objective: f64,
    pub stationarity: f64,
    pub primal_infeasibility: f64,
    pub complementarity: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSolution {
    pub t0: f64,
    pub t_f: f64,
    /// Common dense time grid, `t0` to `t_f` inclusive.
    pub times: Vec<f64>,
    /// Normalized collocation node times in `[0, 1]`.
    pub node_tau: Vec<f64>,
    /// Quadrature weights over normalized time, one per node; they sum to 1.
    pub node_weights: Vec<f64>,
    /// Vehicles in scenario order.
    pub cavs: Vec<CavTrajectory>,
    pub pair_duals: Vec<DualTrajectory>,
    pub road_duals: Vec<DualTrajectory>,
    pub diagnostics: SolverDiagnostics,
}

impl CrossingSolution {
    pub fn crossing_time(&self) -> f64 {
        self.t_f - self.t0
    }

    pub fn cav(&self, id: &str) -> Option<&CavTrajectory> {
        self.cavs.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

/// `z^T Q z` for a pose error.
pub fn pose_cost(q: &[[f64; 3]; 3], dz: [f64; 3]) -> f64 {
    (0..3).map(|i| (0..3).map(|j| dz[i] * q[i][j] * dz[j]).sum::<f64>()).sum()
}

/// Crossing objective `alpha (t_f - t0)^2 + (1/N) sum_i int_0^1 |z_i - z_i^goal|_Q^2 dtau`,
/// integrated with the node quadrature stored in the solution.
pub fn objective_value(sol: &CrossingSolution, sc: &Scenario) -> f64 {
    let t = sol.t_f - sol.t0;
    let mut lagrange = 0.0;
    for cav in &sc.cavs {
        let Some(traj) = sol.cav(&cav.id) else { continue };
        let goal = cav.zf.to_array();
        let sum: f64 = traj
            .node_states
            .iter()
            .zip(&sol.node_weights)
            .map(|(s, w)| w * pose_cost(&sc.gains.q, [s[3] - goal[0], s[4] - goal[1], s[5] - goal[2]]))
            .sum();
        lagrange += sum;
    }
    let n = sc.cavs.len().max(1) as f64;
    sc.gains.alpha * t * t + lagrange / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcription::collocation::Collocation;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn cav(id: &str, z0: Pose, zf: Pose) -> CavSpec {
        CavSpec { id: id.into(), params: VehicleParams::default(), z0, v0: 10.0, zf, bounds: StateBounds::default() }
    }

    fn straight() -> Scenario {
        Scenario {
            name: None,
            layout: LayoutSpec::default(),
            gains: Gains::default(),
            safety: Safety::default(),
            t0: 0.0,
            cavs: vec![cav("a", Pose::new(2.5, -35.0, FRAC_PI_2), Pose::new(2.5, 35.0, FRAC_PI_2))],
        }
    }

    /// Solution whose poses follow `f(tau)` at Radau nodes (N_p = 15, d = 5).
    fn solution_from(sc: &Scenario, t_f: f64, f: impl Fn(usize, f64) -> [f64; 3]) -> CrossingSolution {
        let col = Collocation::radau(5).unwrap();
        let np = 15;
        let mut tau = vec![0.0];
        let mut w = vec![0.0];
        for k in 0..np {
            for j in 0..5 {
                tau.push((k as f64 + col.tau[j + 1]) / np as f64);
                w.push(col.weights[j] / np as f64);
            }
        }
        let cavs = sc
            .cavs
            .iter()
            .enumerate()
            .map(|(i, c)| CavTrajectory {
                id: c.id.clone(),
                states: vec![],
                inputs: vec![],
                node_states: tau
                    .iter()
                    .map(|t| {
                        let p = f(i, *t);
                        [0.0, 0.0, 10.0, p[0], p[1], p[2]]
                    })
                    .collect(),
            })
            .collect();
        CrossingSolution {
            t0: sc.t0,
            t_f,
            times: vec![],
            node_tau: tau,
            node_weights: w,
            cavs,
            pair_duals: vec![],
            road_duals: vec![],
            diagnostics: SolverDiagnostics {
                status: "optimal".into(),
                iterations: 0,
                objective: 0.0,
                stationarity: 0.0,
                primal_infeasibility: 0.0,
                complementarity: 0.0,
                seed: 0,
            },
        }
    }

    #[test]
    fn at_goal_costs_only_time() {
        let mut sc = straight();
        sc.gains.alpha = 1.0;
        let goal = sc.cavs[0].zf.to_array();
        let sol = solution_from(&sc, 1.0, |_, _| goal);
        assert_relative_eq!(objective_value(&sol, &sc), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_q_is_pure_time() {
        let mut sc = straight();
        sc.gains.q = [[0.0; 3]; 3];
        sc.gains.alpha = 2.5;
        let sol = solution_from(&sc, 4.2, |_, t| [t, t, t]);
        assert_eq!(objective_value(&sol, &sc), 2.5 * 4.2 * 4.2);
    }

    #[test]
    fn linear_interpolation_closed_form() {
        // closed form int_0^1 |(1 - tau) dz|^2 dtau = |dz|^2 / 3
        let mut sc = straight();
        sc.gains.alpha = 0.0;
        sc.gains.q = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        sc.cavs[0].z0 = Pose::new(2.5, -35.0, 0.3);
        let (a, b) = (sc.cavs[0].z0.to_array(), sc.cavs[0].zf.to_array());
        let sol = solution_from(&sc, 4.0, |_, t| std::array::from_fn(|k| a[k] + t * (b[k] - a[k])));
        let dz2: f64 = (0..3).map(|k| (b[k] - a[k]).powi(2)).sum();
        assert_relative_eq!(objective_value(&sol, &sc), dz2 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn quadrature_weights_sum_to_one() {
        let sc = straight();
        let sol = solution_from(&sc, 4.0, |_, _| [0.0; 3]);
        assert_relative_eq!(sol.node_weights.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn relabeling_keeps_objective() {
        let mut sc = straight();
        sc.cavs.push(cav("b", Pose::new(-30.0, -2.5, 0.0), Pose::new(35.0, -2.5, 0.0)));
        let f = |i: usize, t: f64| if i == 0 { [2.5, -35.0 + 70.0 * t, FRAC_PI_2] } else { [-30.0 + 65.0 * t, -2.5, 0.0] };
        let sol = solution_from(&sc, 4.5, f);
        let mut swapped = sc.clone();
        swapped.cavs.reverse();
        let mut sol2 = sol.clone();
        sol2.cavs.reverse();
        assert_relative_eq!(objective_value(&sol, &sc), objective_value(&sol2, &swapped), max_relative = 1e-15);
    }

    #[test]
    fn overlapped_start_is_reported() {
        let mut sc = straight();
        sc.cavs.push(cav("b", Pose::new(2.5, -33.0, FRAC_PI_2), Pose::new(2.5, 30.0, FRAC_PI_2)));
        let rep = validate_scenario(&sc);
        assert!(rep.errors.iter().any(|e| e.contains("initial separation violated")), "{rep:?}");
    }

    #[test]
    fn nominal_speed_passes() {
        let rep = validate_scenario(&straight());
        assert!(rep.is_valid(), "{rep:?}");
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn goal_inside_block_warns() {
        let mut sc = straight();
        sc.cavs[0].zf = Pose::new(20.0, 20.0, 0.0);
        let rep = validate_scenario(&sc);
        assert!(rep.is_valid());
        assert!(rep.warnings.iter().any(|w| w.contains("inside the NE block")), "{rep:?}");
    }

    #[test]
    fn invalid_entries() {
        let mut sc = straight();
        sc.cavs[0].v0 = 30.0;
        sc.gains.q[0][1] = 5.0;
        sc.gains.q[1][0] = 5.0;
        sc.cavs.push(sc.cavs[0].clone());
        let rep = validate_scenario(&sc);
        assert!(rep.errors.iter().any(|e| e.contains("initial speed")));
        assert!(rep.errors.iter().any(|e| e.contains("Q is not")));
        assert!(rep.errors.iter().any(|e| e.contains("duplicate")));
        let empty = Scenario { cavs: vec![], ..straight() };
        assert!(!validate_scenario(&empty).is_valid());
    }

    #[test]
    fn start_off_road_is_an_error() {
        let mut sc = straight();
        sc.cavs[0].z0 = Pose::new(4.5, -30.0, FRAC_PI_2);
        let rep = validate_scenario(&sc);
        assert!(rep.errors.iter().any(|e| e.contains("road clearance")), "{rep:?}");
    }

    #[test]
    fn json_round_trip_and_errors() {
        let sc = straight();
        let back = Scenario::from_json(&sc.to_json()).unwrap();
        assert_eq!(back, sc);
        let err = Scenario::from_json("{\n  \"cavs\": [\n    {\"id\": 3,}\n  ]\n}").unwrap_err();
        match err {
            ScenarioError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
        let unknown = sc.to_json().replacen("\"t0\"", "\"t_zero\"", 1);
        assert!(matches!(Scenario::from_json(&unknown), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn defaults_fill_optional_sections() {
        let text = r#"{"cavs": [{"id": "a", "z0": {"x": 2.5, "y": -35, "theta": 1.5707963267948966}, "v0": 10, "zf": {"x": 2.5, "y": 35, "theta": 1.5707963267948966}}]}"#;
        let sc = Scenario::from_json(text).unwrap();
        assert_eq!(sc.layout, LayoutSpec::default());
        assert_eq!(sc.safety.d_min, 0.1);
        assert_eq!(sc.cavs[0].bounds.a_max, 3.0);
    }

    #[test]
    fn psd_check() {
        assert!(positive_semidefinite(&Gains::default().q));
        assert!(positive_semidefinite(&[[0.0; 3]; 3]));
        assert!(!positive_semidefinite(&[[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]]));
        // leading minors nonnegative but not PSD
        assert!(!positive_semidefinite(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -1.0]]));
    }
}

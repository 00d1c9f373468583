//! Direct collocation of the free-final-time crossing problem.
//!
//! Physical time is `t = t0 + tau (t_f - t0)` with `tau` in `[0, 1]` split
//! into `N_p` equal intervals. Each interval carries a degree-`d` state
//! polynomial through its start point and `d` collocation points, and one
//! constant input. The dual avoidance blocks are imposed at every node.

pub mod collocation;
mod extract;
mod guess;
pub mod layout;
pub mod simulate;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::duality::{BlockEval, Side};
use crate::dynamics::{idx, VehicleModel, INPUT_DIM, RATE_HESSIAN_PATTERN, RATE_JACOBIAN_PATTERN, STATE_DIM};
use crate::error::TranscriptionError;
use crate::geometry::{base_body_polytope, ConvexPolytope, Pose};
use crate::par;
use crate::scenario::{validate_scenario, Scenario};
use crate::solver::Nlp;

pub use collocation::{Collocation, Scheme};
pub use extract::NodeTrajectories;
pub use layout::{Layout, TF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptionConfig {
    /// Number of intervals `N_p`.
    pub intervals: usize,
    /// Collocation points per interval `d`.
    pub degree: usize,
    pub scheme: Scheme,
    /// Extra clearance added to `d_min` and `d_rmin` at the nodes, covering
    /// the motion between nodes.
    pub node_margin: f64,
    /// Divide dynamics defects by the interval length so their rows are
    /// of the order of the state rates.
    pub scale_defects: bool,
    /// Bounds on `t_f - t0` (s).
    pub min_duration: f64,
    pub max_duration: f64,
}

impl Default for TranscriptionConfig {
    fn default() -> Self {
        Self {
            intervals: 15,
            degree: 5,
            scheme: Scheme::Radau,
            node_margin: 0.0,
            scale_defects: true,
            min_duration: 0.1,
            max_duration: 60.0,
        }
    }
}

impl TranscriptionConfig {
    pub fn validate(&self) -> Result<(), TranscriptionError> {
        if self.intervals == 0 {
            return Err(TranscriptionError::InvalidConfig("need at least one interval".into()));
        }
        if !(1..=9).contains(&self.degree) {
            return Err(TranscriptionError::InvalidConfig(format!("degree {} outside 1..=9", self.degree)));
        }
        if !(self.node_margin >= 0.0 && self.node_margin.is_finite()) {
            return Err(TranscriptionError::InvalidConfig(format!("node margin {}", self.node_margin)));
        }
        if !(self.min_duration > 0.0 && self.max_duration > self.min_duration) {
            return Err(TranscriptionError::InvalidConfig("duration bounds must satisfy 0 < min < max".into()));
        }
        Ok(())
    }
}

/// One vehicle as seen by the transcription.
#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: String,
    pub model: VehicleModel,
    pub base: ConvexPolytope,
    pub bounds: crate::dynamics::StateBounds,
    /// `[r, beta, V, x, y, theta]` at `t0`.
    pub init: [f64; STATE_DIM],
    pub goal: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Initial(usize),
    Dynamics(usize, usize),
    Continuity(usize, usize),
    Terminal(usize),
    Road(usize, usize, usize),
    Pair(usize, usize),
}

#[derive(Debug, Clone)]
struct Element {
    kind: Kind,
    rows: Range<usize>,
    jac: Range<usize>,
    hess: Range<usize>,
}

/// Dynamics-rate arguments that enter the Hessian (everything but `x`, `y`).
const RATE_ARGS: [usize; 6] = [idx::R, idx::BETA, idx::V, idx::THETA, idx::A, idx::DELTA];

pub struct NlpProblem {
    pub scenario: Scenario,
    pub config: TranscriptionConfig,
    pub layout: Layout,
    pub colloc: Collocation,
    /// Vehicles in internal (id-sorted) order.
    pub vehicles: Vec<Vehicle>,
    /// `order[c]` is the scenario index of internal vehicle `c`.
    pub order: Vec<usize>,
    pub boundaries: Vec<ConvexPolytope>,
    /// Normalized time of each node.
    pub node_tau: Vec<f64>,
    /// Quadrature weight of each node over normalized time.
    pub node_weight: Vec<f64>,
    elements: Vec<Element>,
    m: usize,
    jac_structure: Vec<(usize, usize)>,
    hess_structure: Vec<(usize, usize)>,
    obj_hess: Range<usize>,
    row_blocks: Vec<(String, Range<usize>)>,
    parallel: bool,
    first_road: usize,
    first_pair: usize,
    /// Clearance on top of `node_margin`, per element (zero off the avoidance blocks).
    extra_clearance: Vec<f64>,
    /// Inward shift of the `r`, `beta` and `V` bounds per vehicle and node.
    bound_pull: Vec<[f64; 3]>,
}

/// States whose node bounds can be pulled in, in `bound_pull` order.
const PULLED_STATES: [usize; 3] = [idx::R, idx::BETA, idx::V];

/// Build the NLP for a validated scenario.
pub fn transcribe(sc: &Scenario, cfg: &TranscriptionConfig) -> Result<NlpProblem, TranscriptionError> {
    NlpProblem::new(sc, cfg)
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a >= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl NlpProblem {
    pub fn new(sc: &Scenario, cfg: &TranscriptionConfig) -> Result<Self, TranscriptionError> {
        cfg.validate()?;
        if sc.cavs.is_empty() {
            return Err(TranscriptionError::NoVehicles);
        }
        let report = validate_scenario(sc);
        if !report.is_valid() {
            return Err(TranscriptionError::InvalidConfig(format!("scenario invalid: {}", report.errors.join("; "))));
        }
        let colloc = Collocation::new(cfg.scheme, cfg.degree)?;
        let layout_geom = sc.intersection().map_err(|e| TranscriptionError::InvalidConfig(e.to_string()))?;
        let mut order: Vec<usize> = (0..sc.cavs.len()).collect();
        order.sort_by(|a, b| sc.cavs[*a].id.cmp(&sc.cavs[*b].id));
        let vehicles: Vec<Vehicle> = order
            .iter()
            .map(|&i| {
                let c = &sc.cavs[i];
                Vehicle {
                    id: c.id.clone(),
                    model: VehicleModel::new(c.params, c.bounds.v_min),
                    base: base_body_polytope(&c.params),
                    bounds: c.bounds,
                    init: [0.0, 0.0, c.v0, c.z0.x, c.z0.y, c.z0.theta],
                    goal: c.zf.to_array(),
                }
            })
            .collect();
        let boundaries = layout_geom.boundaries;
        let layout = Layout::new(
            cfg.intervals,
            cfg.degree,
            colloc.ends_on_node(),
            vehicles.iter().map(|v| v.base.face_count()).collect(),
            boundaries.iter().map(|b| b.face_count()).collect(),
        );

        let mut node_tau = vec![0.0; layout.nodes];
        let mut node_weight = vec![0.0; layout.nodes];
        let np = cfg.intervals as f64;
        for k in 0..cfg.intervals {
            for j in 0..=cfg.degree {
                let n = layout.node(k, j);
                node_tau[n] = (k as f64 + colloc.tau[j]) / np;
                if j > 0 {
                    node_weight[n] = colloc.weights[j - 1] / np;
                }
            }
        }
        node_tau[layout.final_node()] = 1.0;

        let mut problem = Self {
            scenario: sc.clone(),
            config: *cfg,
            layout,
            colloc,
            vehicles,
            order,
            boundaries,
            node_tau,
            node_weight,
            elements: Vec::new(),
            m: 0,
            jac_structure: Vec::new(),
            hess_structure: Vec::new(),
            obj_hess: 0..0,
            row_blocks: Vec::new(),
            parallel: par::available(),
            first_road: 0,
            first_pair: 0,
            extra_clearance: Vec::new(),
            bound_pull: Vec::new(),
        };
        problem.build_structure();
        Ok(problem)
    }

    /// Toggle data-parallel evaluation (no effect without the `parallel` feature).
    pub fn set_parallel(&mut self, on: bool) {
        self.parallel = on && par::available();
    }

    pub fn is_parallel(&self) -> bool {
        self.parallel
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Internal index of vehicle `id`.
    pub fn vehicle_index(&self, id: &str) -> Option<usize> {
        self.vehicles.iter().position(|v| v.id == id)
    }

    /// The two nodes around normalized time `tau`.
    pub fn bracketing_nodes(&self, tau: f64) -> [usize; 2] {
        let last = self.layout.nodes - 1;
        let after = self.node_tau.partition_point(|t| *t <= tau).clamp(1, last);
        [after - 1, after]
    }

    /// Raise the clearance required of internal vehicles `a` and `b` at `node`.
    pub fn raise_pair_clearance(&mut self, a: usize, b: usize, node: usize, amount: f64) {
        if let Some(p) = self.layout.pairs.iter().position(|&(i, j)| (i, j) == (a, b) || (j, i) == (a, b)) {
            self.extra_clearance[self.first_pair + p * self.layout.nodes + node] += amount;
        }
    }

    /// Raise the boundary clearance required of internal vehicle `c` at `node`.
    pub fn raise_road_clearance(&mut self, c: usize, node: usize, amount: f64) {
        let nb = self.layout.n_boundaries();
        let first = self.first_road + (c * self.layout.nodes + node) * nb;
        for e in &mut self.extra_clearance[first..first + nb] {
            *e += amount;
        }
    }

    /// Pull both bounds of `state` (one of `r`, `beta`, `V`) of internal
    /// vehicle `c` at `node` inward; other states are ignored.
    pub fn pull_state_bound(&mut self, c: usize, node: usize, state: usize, amount: f64) {
        if let Some(q) = PULLED_STATES.iter().position(|s| *s == state) {
            self.bound_pull[c * self.layout.nodes + node][q] += amount;
        }
    }

    /// Largest clearance added on top of `node_margin`.
    pub fn max_extra_clearance(&self) -> f64 {
        self.extra_clearance.iter().copied().fold(0.0, f64::max)
    }

    fn element_rows(&self, kind: Kind) -> usize {
        match kind {
            Kind::Initial(_) | Kind::Continuity(..) => STATE_DIM,
            Kind::Dynamics(..) => STATE_DIM * self.layout.degree,
            Kind::Terminal(_) => 3,
            Kind::Road(..) | Kind::Pair(..) => crate::duality::ROWS,
        }
    }

    fn build_structure(&mut self) {
        let l = &self.layout;
        let mut kinds = Vec::new();
        let mut blocks: Vec<(String, Kind, Kind)> = Vec::new();
        for c in 0..l.n_cavs {
            let id = &self.vehicles[c].id;
            kinds.push(Kind::Initial(c));
            blocks.push((format!("{id}/initial"), Kind::Initial(c), Kind::Initial(c)));
            for k in 0..l.intervals {
                kinds.push(Kind::Dynamics(c, k));
            }
            blocks.push((format!("{id}/dynamics"), Kind::Dynamics(c, 0), Kind::Dynamics(c, l.intervals - 1)));
            if !l.ends_on_node {
                for k in 0..l.intervals {
                    kinds.push(Kind::Continuity(c, k));
                }
                blocks.push((
                    format!("{id}/continuity"),
                    Kind::Continuity(c, 0),
                    Kind::Continuity(c, l.intervals - 1),
                ));
            }
            kinds.push(Kind::Terminal(c));
            blocks.push((format!("{id}/terminal"), Kind::Terminal(c), Kind::Terminal(c)));
        }
        let first_road = kinds.len();
        for c in 0..l.n_cavs {
            for n in 0..l.nodes {
                for r in 0..l.n_boundaries() {
                    kinds.push(Kind::Road(c, n, r));
                }
            }
        }
        let first_pair = kinds.len();
        for p in 0..l.pairs.len() {
            for n in 0..l.nodes {
                kinds.push(Kind::Pair(p, n));
            }
        }

        let mut elements = Vec::with_capacity(kinds.len());
        let mut jac = Vec::new();
        let mut hess = Vec::new();
        let mut row = 0;
        for kind in kinds {
            let nrows = self.element_rows(kind);
            let j0 = jac.len();
            self.jacobian_pattern(kind, row, &mut jac);
            let h0 = hess.len();
            self.hessian_pattern(kind, &mut hess);
            elements.push(Element { kind, rows: row..row + nrows, jac: j0..jac.len(), hess: h0..hess.len() });
            row += nrows;
        }
        let o0 = hess.len();
        hess.push((TF, TF));
        for c in 0..l.n_cavs {
            for n in 0..l.nodes {
                if self.node_weight[n] == 0.0 {
                    continue;
                }
                let s = l.state(c, n) + idx::X;
                for a in 0..3 {
                    for b in 0..=a {
                        hess.push((s + a, s + b));
                    }
                }
            }
        }
        self.obj_hess = o0..hess.len();

        let find = |k: Kind| elements.iter().find(|e| e.kind == k).expect("element exists").rows.clone();
        let mut row_blocks: Vec<(String, Range<usize>)> =
            blocks.into_iter().map(|(name, a, b)| (name, find(a).start..find(b).end)).collect();
        if first_pair > first_road {
            row_blocks.push(("road".into(), elements[first_road].rows.start..elements[first_pair - 1].rows.end));
        }
        if elements.len() > first_pair {
            row_blocks.push(("pair".into(), elements[first_pair].rows.start..row));
        }
        self.elements = elements;
        self.m = row;
        self.jac_structure = jac;
        self.hess_structure = hess;
        self.row_blocks = row_blocks;
        self.first_road = first_road;
        self.first_pair = first_pair;
        self.extra_clearance = vec![0.0; self.elements.len()];
        self.bound_pull = vec![[0.0; 3]; l.n_cavs * l.nodes];
    }

    /// Global variable of slot `m` of the stacked `[state, input]` vector at
    /// collocation point `j` of interval `k`.
    fn rate_var(&self, c: usize, k: usize, j: usize, m: usize) -> usize {
        if m < STATE_DIM {
            self.layout.state(c, self.layout.node(k, j)) + m
        } else {
            self.layout.input(c, k) + m - STATE_DIM
        }
    }

    /// Local-to-global variable map of an avoidance block.
    fn block_map(&self, kind: Kind) -> Vec<usize> {
        let l = &self.layout;
        let mut map = Vec::new();
        match kind {
            Kind::Road(c, n, r) => {
                let s = l.state(c, n) + idx::X;
                map.extend(s..s + 3);
                let b = l.road_block(c, n, r);
                map.extend(b..b + l.road_block_len(c, r));
            }
            Kind::Pair(p, n) => {
                let (i, j) = l.pairs[p];
                let si = l.state(i, n) + idx::X;
                let sj = l.state(j, n) + idx::X;
                map.extend(si..si + 3);
                map.extend(sj..sj + 3);
                let b = l.pair_block(p, n);
                map.extend(b..b + l.pair_block_len(p));
            }
            _ => unreachable!("not an avoidance block"),
        }
        map
    }

    fn block_eval(&self, kind: Kind) -> BlockEval<'_> {
        match kind {
            Kind::Road(c, _, r) => BlockEval::new(
                Side::Moving { base: &self.vehicles[c].base, pose: Pose::default() },
                Side::Fixed(&self.boundaries[r]),
            ),
            Kind::Pair(p, _) => {
                let (i, j) = self.layout.pairs[p];
                BlockEval::new(
                    Side::Moving { base: &self.vehicles[i].base, pose: Pose::default() },
                    Side::Moving { base: &self.vehicles[j].base, pose: Pose::default() },
                )
            }
            _ => unreachable!("not an avoidance block"),
        }
    }

    fn jacobian_pattern(&self, kind: Kind, row0: usize, out: &mut Vec<(usize, usize)>) {
        let l = &self.layout;
        let d = l.degree;
        match kind {
            Kind::Initial(c) => out.extend((0..STATE_DIM).map(|q| (row0 + q, l.state(c, 0) + q))),
            Kind::Terminal(c) => {
                let s = l.state(c, l.final_node()) + idx::X;
                out.extend((0..3).map(|q| (row0 + q, s + q)));
            }
            Kind::Continuity(c, k) => {
                for q in 0..STATE_DIM {
                    out.push((row0 + q, l.state(c, l.node(k + 1, 0)) + q));
                    out.extend((0..=d).map(|b| (row0 + q, l.state(c, l.node(k, b)) + q)));
                }
            }
            Kind::Dynamics(c, k) => {
                for j in 1..=d {
                    for q in 0..STATE_DIM {
                        let row = row0 + (j - 1) * STATE_DIM + q;
                        out.extend((0..=d).map(|b| (row, l.state(c, l.node(k, b)) + q)));
                        out.extend(RATE_JACOBIAN_PATTERN[q].iter().map(|m| (row, self.rate_var(c, k, j, *m))));
                        out.push((row, TF));
                    }
                }
            }
            Kind::Road(..) | Kind::Pair(..) => {
                let map = self.block_map(kind);
                let pat = self.block_eval(kind).layout.jacobian_pattern();
                out.extend(pat.iter().map(|(r, lc)| (row0 + r, map[*lc])));
            }
        }
    }

    fn hessian_pattern(&self, kind: Kind, out: &mut Vec<(usize, usize)>) {
        match kind {
            Kind::Initial(_) | Kind::Terminal(_) | Kind::Continuity(..) => {}
            Kind::Dynamics(c, k) => {
                for j in 1..=self.layout.degree {
                    out.extend(
                        RATE_HESSIAN_PATTERN
                            .iter()
                            .map(|(a, b)| ordered(self.rate_var(c, k, j, *a), self.rate_var(c, k, j, *b))),
                    );
                    out.extend(RATE_ARGS.iter().map(|m| ordered(self.rate_var(c, k, j, *m), TF)));
                }
            }
            Kind::Road(..) | Kind::Pair(..) => {
                let map = self.block_map(kind);
                let pat = self.block_eval(kind).layout.hessian_pattern();
                out.extend(pat.iter().map(|(a, b)| ordered(map[*a], map[*b])));
            }
        }
    }

    pub fn duration(&self, x: &[f64]) -> f64 {
        x[TF] - self.scenario.t0
    }

    fn state_at(&self, x: &[f64], c: usize, n: usize) -> [f64; STATE_DIM] {
        let s = self.layout.state(c, n);
        std::array::from_fn(|q| x[s + q])
    }

    fn input_at(&self, x: &[f64], c: usize, k: usize) -> [f64; INPUT_DIM] {
        let s = self.layout.input(c, k);
        [x[s], x[s + 1]]
    }

    /// `(rho, rho * h)`: multipliers of the polynomial-derivative and rate
    /// terms in a defect row.
    fn defect_factors(&self) -> (f64, f64) {
        let h = 1.0 / self.layout.intervals as f64;
        if self.config.scale_defects {
            (1.0 / h, 1.0)
        } else {
            (1.0, h)
        }
    }

    fn eval_rows(&self, kind: Kind, x: &[f64], out: &mut [f64]) {
        let l = &self.layout;
        let d = l.degree;
        match kind {
            Kind::Initial(c) => {
                let s = self.state_at(x, c, 0);
                for q in 0..STATE_DIM {
                    out[q] = s[q] - self.vehicles[c].init[q];
                }
            }
            Kind::Terminal(c) => {
                let s = self.state_at(x, c, l.final_node());
                for q in 0..3 {
                    out[q] = s[idx::X + q] - self.vehicles[c].goal[q];
                }
            }
            Kind::Continuity(c, k) => {
                let next = self.state_at(x, c, l.node(k + 1, 0));
                for q in 0..STATE_DIM {
                    let mut v = next[q];
                    for b in 0..=d {
                        v -= self.colloc.end[b] * x[l.state(c, l.node(k, b)) + q];
                    }
                    out[q] = v;
                }
            }
            Kind::Dynamics(c, k) => {
                let (rho, rho_h) = self.defect_factors();
                let t = self.duration(x);
                let u = self.input_at(x, c, k);
                let model = &self.vehicles[c].model;
                for j in 1..=d {
                    let f = model.rate(&self.state_at(x, c, l.node(k, j)), &u);
                    for q in 0..STATE_DIM {
                        let mut poly = 0.0;
                        for b in 0..=d {
                            poly += self.colloc.diff[b][j - 1] * x[l.state(c, l.node(k, b)) + q];
                        }
                        out[(j - 1) * STATE_DIM + q] = rho * poly - rho_h * t * f[q];
                    }
                }
            }
            Kind::Road(..) | Kind::Pair(..) => {
                let local: Vec<f64> = self.block_map(kind).iter().map(|v| x[*v]).collect();
                out.copy_from_slice(&self.block_eval(kind).values(&local));
            }
        }
    }

    fn eval_jacobian(&self, kind: Kind, x: &[f64], out: &mut [f64]) {
        let l = &self.layout;
        let d = l.degree;
        match kind {
            Kind::Initial(_) | Kind::Terminal(_) => out.fill(1.0),
            Kind::Continuity(..) => {
                let mut i = 0;
                for _ in 0..STATE_DIM {
                    out[i] = 1.0;
                    i += 1;
                    for b in 0..=d {
                        out[i] = -self.colloc.end[b];
                        i += 1;
                    }
                }
            }
            Kind::Dynamics(c, k) => {
                let (rho, rho_h) = self.defect_factors();
                let t = self.duration(x);
                let u = self.input_at(x, c, k);
                let model = &self.vehicles[c].model;
                let mut i = 0;
                for j in 1..=d {
                    let s = self.state_at(x, c, l.node(k, j));
                    let f = model.rate(&s, &u);
                    let (jx, ju) = model.jacobians(&s, &u);
                    for q in 0..STATE_DIM {
                        for b in 0..=d {
                            out[i] = rho * self.colloc.diff[b][j - 1];
                            i += 1;
                        }
                        for m in RATE_JACOBIAN_PATTERN[q] {
                            let dm = if *m < STATE_DIM { jx[q][*m] } else { ju[q][*m - STATE_DIM] };
                            out[i] = -rho_h * t * dm;
                            i += 1;
                        }
                        out[i] = -rho_h * f[q];
                        i += 1;
                    }
                }
            }
            Kind::Road(..) | Kind::Pair(..) => {
                let local: Vec<f64> = self.block_map(kind).iter().map(|v| x[*v]).collect();
                let mut vals = Vec::with_capacity(out.len());
                self.block_eval(kind).jacobian(&local, &mut vals);
                out.copy_from_slice(&vals);
            }
        }
    }

    fn eval_hessian(&self, kind: Kind, x: &[f64], y: &[f64], out: &mut [f64]) {
        let l = &self.layout;
        match kind {
            Kind::Initial(_) | Kind::Terminal(_) | Kind::Continuity(..) => {}
            Kind::Dynamics(c, k) => {
                let (_, rho_h) = self.defect_factors();
                let t = self.duration(x);
                let u = self.input_at(x, c, k);
                let model = &self.vehicles[c].model;
                let mut i = 0;
                for j in 1..=l.degree {
                    let s = self.state_at(x, c, l.node(k, j));
                    let w: [f64; STATE_DIM] = std::array::from_fn(|q| y[(j - 1) * STATE_DIM + q]);
                    let h = model.weighted_hessian(&s, &u, &w);
                    for (a, b) in RATE_HESSIAN_PATTERN {
                        out[i] = -rho_h * t * h[a][b];
                        i += 1;
                    }
                    let (jx, ju) = model.jacobians(&s, &u);
                    for m in RATE_ARGS {
                        let mut v = 0.0;
                        for q in 0..STATE_DIM {
                            let dm = if m < STATE_DIM { jx[q][m] } else { ju[q][m - STATE_DIM] };
                            v += w[q] * dm;
                        }
                        out[i] = -rho_h * v;
                        i += 1;
                    }
                }
            }
            Kind::Road(..) | Kind::Pair(..) => {
                let local: Vec<f64> = self.block_map(kind).iter().map(|v| x[*v]).collect();
                let w: [f64; crate::duality::ROWS] = std::array::from_fn(|r| y[r]);
                let mut vals = Vec::with_capacity(out.len());
                self.block_eval(kind).hessian(&local, &w, &mut vals);
                out.copy_from_slice(&vals);
            }
        }
    }

    fn check_len(&self, x: &[f64]) -> Result<(), TranscriptionError> {
        if x.len() != self.layout.total {
            return Err(TranscriptionError::LayoutMismatch { got: x.len(), expected: self.layout.total });
        }
        Ok(())
    }

    /// Rows of every constraint element, for tests that inspect coupling.
    pub fn element_summaries(&self) -> Vec<(String, Range<usize>)> {
        self.elements.iter().map(|e| (format!("{:?}", e.kind), e.rows.clone())).collect()
    }
}

impl Nlp for NlpProblem {
    fn num_variables(&self) -> usize {
        self.layout.total
    }

    fn num_constraints(&self) -> usize {
        self.m
    }

    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let l = &self.layout;
        let n = l.total;
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        let t0 = self.scenario.t0;
        lo[TF] = t0 + self.config.min_duration;
        hi[TF] = t0 + self.config.max_duration;
        for (c, v) in self.vehicles.iter().enumerate() {
            let b = &v.bounds;
            // the initial node is pinned by equalities
            for node in 1..l.nodes {
                let s = l.state(c, node);
                let base = [(-b.r_max, b.r_max), (-b.beta_max, b.beta_max), (b.v_min, b.v_max)];
                for (i, (q, (a, z))) in PULLED_STATES.iter().zip(base).enumerate() {
                    // never pull past a quarter of the range
                    let pull = self.bound_pull[c * l.nodes + node][i].min(0.25 * (z - a));
                    lo[s + q] = a + pull;
                    hi[s + q] = z - pull;
                }
            }
            for k in 0..l.intervals {
                let s = l.input(c, k);
                lo[s] = -b.a_max;
                hi[s] = b.a_max;
                lo[s + 1] = -b.delta_max;
                hi[s + 1] = b.delta_max;
            }
        }
        for e in &self.elements {
            if matches!(e.kind, Kind::Road(..) | Kind::Pair(..)) {
                let map = self.block_map(e.kind);
                let lay = self.block_eval(e.kind).layout;
                for v in &map[lay.lambda_fwd()..lay.s()] {
                    lo[*v] = 0.0;
                }
            }
        }
        (lo, hi)
    }

    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![0.0; self.m];
        let mut hi = vec![0.0; self.m];
        let safety = &self.scenario.safety;
        for (e, extra) in self.elements.iter().zip(&self.extra_clearance) {
            let clearance = match e.kind {
                Kind::Road(..) => safety.d_rmin,
                Kind::Pair(..) => safety.d_min,
                _ => continue,
            };
            let r = e.rows.start;
            lo[r] = clearance + self.config.node_margin + extra;
            hi[r] = f64::INFINITY;
            lo[r + 5] = f64::NEG_INFINITY;
            hi[r + 5] = 1.0;
        }
        (lo, hi)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let t = self.duration(x);
        let q = &self.scenario.gains.q;
        let mut lagrange = 0.0;
        for (c, v) in self.vehicles.iter().enumerate() {
            let mut sum = 0.0;
            for n in 0..self.layout.nodes {
                let w = self.node_weight[n];
                if w == 0.0 {
                    continue;
                }
                let s = self.layout.state(c, n) + idx::X;
                let dz = [x[s] - v.goal[0], x[s + 1] - v.goal[1], x[s + 2] - v.goal[2]];
                sum += w * crate::scenario::pose_cost(q, dz);
            }
            lagrange += sum;
        }
        self.scenario.gains.alpha * t * t + lagrange / self.layout.n_cavs as f64
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        grad[TF] = 2.0 * self.scenario.gains.alpha * self.duration(x);
        let q = &self.scenario.gains.q;
        let scale = 2.0 / self.layout.n_cavs as f64;
        for (c, v) in self.vehicles.iter().enumerate() {
            for n in 0..self.layout.nodes {
                let w = self.node_weight[n];
                if w == 0.0 {
                    continue;
                }
                let s = self.layout.state(c, n) + idx::X;
                let dz = [x[s] - v.goal[0], x[s + 1] - v.goal[1], x[s + 2] - v.goal[2]];
                for a in 0..3 {
                    grad[s + a] = scale * w * (q[a][0] * dz[0] + q[a][1] * dz[1] + q[a][2] * dz[2]);
                }
            }
        }
    }

    fn constraints(&self, x: &[f64], g: &mut [f64]) {
        let chunks = par::split_by_ranges(g, self.elements.iter().map(|e| e.rows.clone()));
        par::for_each_with(self.parallel, &self.elements, chunks, |e, out| self.eval_rows(e.kind, x, out));
    }

    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        self.jac_structure.clone()
    }

    fn jacobian_values(&self, x: &[f64], vals: &mut [f64]) {
        let chunks = par::split_by_ranges(vals, self.elements.iter().map(|e| e.jac.clone()));
        par::for_each_with(self.parallel, &self.elements, chunks, |e, out| self.eval_jacobian(e.kind, x, out));
    }

    fn hessian_structure(&self) -> Vec<(usize, usize)> {
        self.hess_structure.clone()
    }

    fn hessian_values(&self, x: &[f64], sigma: f64, y: &[f64], vals: &mut [f64]) {
        let (cons, obj) = vals.split_at_mut(self.obj_hess.start);
        let chunks = par::split_by_ranges(cons, self.elements.iter().map(|e| e.hess.clone()));
        par::for_each_with(self.parallel, &self.elements, chunks, |e, out| {
            self.eval_hessian(e.kind, x, &y[e.rows.clone()], out)
        });
        obj[0] = 2.0 * sigma * self.scenario.gains.alpha;
        let q = &self.scenario.gains.q;
        let scale = 2.0 * sigma / self.layout.n_cavs as f64;
        let mut i = 1;
        for _ in 0..self.layout.n_cavs {
            for n in 0..self.layout.nodes {
                let w = self.node_weight[n];
                if w == 0.0 {
                    continue;
                }
                for a in 0..3 {
                    for b in 0..=a {
                        obj[i] = scale * w * q[a][b];
                        i += 1;
                    }
                }
            }
        }
    }

    fn row_blocks(&self) -> Vec<(String, Range<usize>)> {
        self.row_blocks.clone()
    }
}

//! Starting point for the solver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{NlpProblem, TF};
use crate::duality::face_aligned_duals;
use crate::dynamics::{idx, STATE_DIM};
use crate::geometry::{centroid, closest_points, norm, sub, ConvexPolytope, Pose, Vec2};
use crate::solver::Nlp;

/// Reference path from start to goal: a straight segment when the two
/// headings are parallel, otherwise the two heading lines joined by a
/// circular fillet at their intersection.
#[derive(Debug, Clone)]
pub struct GuidePath {
    segments: Vec<Segment>,
    pub length: f64,
}

#[derive(Debug, Clone)]
enum Segment {
    Line { from: Vec2, heading: f64, len: f64 },
    Arc { center: Vec2, radius: f64, start_angle: f64, sweep: f64, heading0: f64 },
}

impl Segment {
    fn len(&self) -> f64 {
        match self {
            Segment::Line { len, .. } => *len,
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// `(position, heading, curvature)` at arc length `s` along the segment.
    fn at(&self, s: f64) -> (Vec2, f64, f64) {
        match self {
            Segment::Line { from, heading, .. } => {
                ([from[0] + s * heading.cos(), from[1] + s * heading.sin()], *heading, 0.0)
            }
            Segment::Arc { center, radius, start_angle, sweep, heading0 } => {
                let dir = sweep.signum();
                let phi = start_angle + dir * s / radius;
                (
                    [center[0] + radius * phi.cos(), center[1] + radius * phi.sin()],
                    heading0 + dir * s / radius,
                    dir / radius,
                )
            }
        }
    }
}

/// Fillet radius used at a turn (m). Fits inside a 10 m junction square
/// when the heading lines cross near its centre.
const FILLET_RADIUS: f64 = 10.0;

impl GuidePath {
    pub fn new(start: Pose, goal: Pose) -> Self {
        let p0 = start.position();
        let pf = goal.position();
        let h0 = [start.theta.cos(), start.theta.sin()];
        let hf = [goal.theta.cos(), goal.theta.sin()];
        let cross = h0[0] * hf[1] - h0[1] * hf[0];
        let straight = |theta: f64| {
            let len = norm(sub(pf, p0));
            GuidePath { segments: vec![Segment::Line { from: p0, heading: theta, len }], length: len }
        };
        if cross.abs() < 1e-6 {
            let d = sub(pf, p0);
            return straight(d[1].atan2(d[0]));
        }
        // p0 + a h0 = pf - b hf
        let d = sub(pf, p0);
        let a = (d[0] * hf[1] - d[1] * hf[0]) / cross;
        let b = (h0[0] * d[1] - h0[1] * d[0]) / cross;
        let turn = goal.theta - start.theta;
        let turn = (turn + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        if a <= 0.0 || b <= 0.0 || turn.abs() < 1e-9 {
            let d = sub(pf, p0);
            return straight(d[1].atan2(d[0]));
        }
        let tan_half = (turn.abs() / 2.0).tan();
        let t = (FILLET_RADIUS * tan_half).min(0.9 * a.min(b));
        let radius = t / tan_half;
        let corner = [p0[0] + a * h0[0], p0[1] + a * h0[1]];
        let enter = [corner[0] - t * h0[0], corner[1] - t * h0[1]];
        let exit = [corner[0] + t * hf[0], corner[1] + t * hf[1]];
        // centre lies to the left of travel for a left turn
        let side = turn.signum();
        let normal = [-h0[1] * side, h0[0] * side];
        let center = [enter[0] + radius * normal[0], enter[1] + radius * normal[1]];
        let start_angle = (enter[1] - center[1]).atan2(enter[0] - center[0]);
        let goal_heading = start.theta + turn;
        let segments = vec![
            Segment::Line { from: p0, heading: start.theta, len: a - t },
            Segment::Arc { center, radius, start_angle, sweep: turn, heading0: start.theta },
            Segment::Line { from: exit, heading: goal_heading, len: b - t },
        ];
        let length = segments.iter().map(Segment::len).sum();
        GuidePath { segments, length }
    }

    /// `(position, heading, curvature)` at arc length `s`, clamped to the path.
    pub fn at(&self, s: f64) -> (Vec2, f64, f64) {
        let mut s = s.clamp(0.0, self.length);
        for (i, seg) in self.segments.iter().enumerate() {
            if s <= seg.len() || i + 1 == self.segments.len() {
                return seg.at(s.min(seg.len()));
            }
            s -= seg.len();
        }
        unreachable!("path has at least one segment")
    }
}

fn unit_or(v: Vec2, fallback: Vec2) -> Vec2 {
    let n = norm(v);
    if n > 1e-12 {
        [v[0] / n, v[1] / n]
    } else {
        fallback
    }
}

/// Direction from `p` towards `q` used to seed the dual block: along the
/// closest-point pair when disjoint, else between centroids.
fn separating_direction(p: &ConvexPolytope, q: &ConvexPolytope) -> Vec2 {
    let (d, a, b) = closest_points(p, q);
    let centres = sub(centroid(&q.vertices()), centroid(&p.vertices()));
    if d > 1e-9 {
        unit_or(sub(b, a), unit_or(centres, [1.0, 0.0]))
    } else {
        unit_or(centres, [1.0, 0.0])
    }
}

impl NlpProblem {
    /// Duration guess: longest start-goal distance over the mean of the
    /// initial and maximum speeds.
    pub fn duration_guess(&self) -> f64 {
        self.vehicles
            .iter()
            .map(|v| {
                let dist = (v.goal[0] - v.init[idx::X]).hypot(v.goal[1] - v.init[idx::Y]);
                dist / (0.5 * (v.init[idx::V] + v.bounds.v_max))
            })
            .fold(0.0, f64::max)
            .clamp(self.config.min_duration, self.config.max_duration)
    }

    /// Analytic starting point.
    ///
    /// Each vehicle follows its guide path with the constant acceleration
    /// that covers the path in the guessed duration; yaw rate and steering
    /// follow the path curvature; sideslip is zero. Dual blocks are
    /// face-aligned for the resulting poses, so every dual equality holds.
    pub fn initial_guess(&self) -> Vec<f64> {
        let l = &self.layout;
        let mut x = vec![0.0; l.total];
        let t = self.duration_guess();
        x[TF] = self.scenario.t0 + t;
        for (c, v) in self.vehicles.iter().enumerate() {
            let start = Pose::new(v.init[idx::X], v.init[idx::Y], v.init[idx::THETA]);
            let goal = Pose::from_array(v.goal);
            let path = GuidePath::new(start, goal);
            let v0 = v.init[idx::V];
            let acc = 2.0 * (path.length - v0 * t) / (t * t);
            let wheelbase = v.model.params.lf + v.model.params.lr;
            for n in 0..l.nodes {
                let tn = self.node_tau[n] * t;
                let speed = v0 + acc * tn;
                let (p, heading, kappa) = path.at(v0 * tn + 0.5 * acc * tn * tn);
                let s = l.state(c, n);
                x[s + idx::R] = if n == 0 { 0.0 } else { speed * kappa };
                x[s + idx::BETA] = 0.0;
                x[s + idx::V] = speed;
                x[s + idx::X] = p[0];
                x[s + idx::Y] = p[1];
                x[s + idx::THETA] = heading;
            }
            x[l.state(c, 0)..l.state(c, 0) + STATE_DIM].copy_from_slice(&v.init);
            let fin = l.state(c, l.final_node()) + idx::X;
            x[fin..fin + 3].copy_from_slice(&v.goal);
            for k in 0..l.intervals {
                let tm = (k as f64 + 0.5) / l.intervals as f64 * t;
                let (_, _, kappa) = path.at(v0 * tm + 0.5 * acc * tm * tm);
                let s = l.input(c, k);
                x[s] = acc;
                x[s + 1] = (wheelbase * kappa).atan();
            }
        }
        self.fill_duals(&mut x);
        x
    }

    /// Overwrite every dual block with face-aligned duals for the poses in `x`.
    pub fn fill_duals(&self, x: &mut [f64]) {
        let l = &self.layout;
        let posed = |x: &[f64], c: usize, n: usize| {
            let s = l.state(c, n) + idx::X;
            self.vehicles[c].base.at_pose(&Pose::new(x[s], x[s + 1], x[s + 2]))
        };
        for n in 0..l.nodes {
            let bodies: Vec<ConvexPolytope> = (0..l.n_cavs).map(|c| posed(x, c, n)).collect();
            for (c, body) in bodies.iter().enumerate() {
                for (r, o) in self.boundaries.iter().enumerate() {
                    let d = face_aligned_duals(body, o, separating_direction(body, o));
                    let b = l.road_block(c, n, r);
                    x[b..b + l.road_block_len(c, r)].copy_from_slice(&d.to_vec());
                }
            }
            for (p, &(i, j)) in l.pairs.iter().enumerate() {
                let d = face_aligned_duals(&bodies[i], &bodies[j], separating_direction(&bodies[i], &bodies[j]));
                let b = l.pair_block(p, n);
                x[b..b + l.pair_block_len(p)].copy_from_slice(&d.to_vec());
            }
        }
    }

    /// Seeded perturbation of the pose states at interior nodes (standard
    /// deviation `sigma`), with the dual blocks refreshed to match. A zero
    /// `sigma` returns `x` unchanged.
    pub fn perturbed(&self, x: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
        let mut out = x.to_vec();
        if sigma == 0.0 {
            return out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).expect("finite sigma");
        let l = &self.layout;
        for c in 0..l.n_cavs {
            for n in 1..l.final_node() {
                let s = l.state(c, n);
                for q in [idx::X, idx::Y, idx::THETA] {
                    out[s + q] += noise.sample(&mut rng);
                }
            }
        }
        self.fill_duals(&mut out);
        out
    }

    /// Clip `x` into the variable bounds.
    pub fn clip_to_bounds(&self, x: &mut [f64]) {
        let (lo, hi) = self.variable_bounds();
        for ((v, a), b) in x.iter_mut().zip(&lo).zip(&hi) {
            *v = v.clamp(*a, *b);
        }
    }
}

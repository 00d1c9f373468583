//! Decision vector to solution record, and back.

use super::{NlpProblem, TF};
use crate::duality::DualBlock;
use crate::dynamics::{INPUT_DIM, STATE_DIM};
use crate::error::TranscriptionError;
use crate::geometry::BOUNDARY_NAMES;
use crate::scenario::{CavTrajectory, CrossingSolution, DualTrajectory, SolverDiagnostics};

/// Dense sampling period (s).
pub const SAMPLE_PERIOD: f64 = 0.01;

/// Node values of every vehicle in internal order, for packing.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrajectories {
    pub t_f: f64,
    pub states: Vec<Vec<[f64; STATE_DIM]>>,
    pub inputs: Vec<Vec<[f64; INPUT_DIM]>>,
}

impl NlpProblem {
    /// Write node states and interval inputs into a decision vector whose
    /// dual blocks are face-aligned for the packed poses.
    pub fn pack(&self, traj: &NodeTrajectories) -> Vec<f64> {
        let l = &self.layout;
        let mut x = vec![0.0; l.total];
        x[TF] = traj.t_f;
        for c in 0..l.n_cavs {
            for n in 0..l.nodes {
                let s = l.state(c, n);
                x[s..s + STATE_DIM].copy_from_slice(&traj.states[c][n]);
            }
            for k in 0..l.intervals {
                let s = l.input(c, k);
                x[s..s + INPUT_DIM].copy_from_slice(&traj.inputs[c][k]);
            }
        }
        self.fill_duals(&mut x);
        x
    }

    pub fn unpack(&self, x: &[f64]) -> Result<NodeTrajectories, TranscriptionError> {
        self.check_len(x)?;
        let l = &self.layout;
        Ok(NodeTrajectories {
            t_f: x[TF],
            states: (0..l.n_cavs).map(|c| (0..l.nodes).map(|n| self.state_at(x, c, n)).collect()).collect(),
            inputs: (0..l.n_cavs).map(|c| (0..l.intervals).map(|k| self.input_at(x, c, k)).collect()).collect(),
        })
    }

    /// Interpolated state of internal vehicle `c` at normalized time `tau`.
    pub fn state_at_tau(&self, x: &[f64], c: usize, tau: f64) -> [f64; STATE_DIM] {
        let (k, sigma) = self.locate(tau);
        let basis = self.colloc.basis(sigma);
        let mut out = [0.0; STATE_DIM];
        for (b, w) in basis.iter().enumerate() {
            let s = self.state_at(x, c, self.layout.node(k, b));
            for q in 0..STATE_DIM {
                out[q] += w * s[q];
            }
        }
        out
    }

    /// Input of internal vehicle `c` at normalized time `tau`.
    pub fn input_at_tau(&self, x: &[f64], c: usize, tau: f64) -> [f64; INPUT_DIM] {
        self.input_at(x, c, self.locate(tau).0)
    }

    /// Interval and local time of `tau`; the right end belongs to the last interval.
    fn locate(&self, tau: f64) -> (usize, f64) {
        let np = self.layout.intervals;
        let scaled = tau.clamp(0.0, 1.0) * np as f64;
        let k = (scaled.floor() as usize).min(np - 1);
        (k, scaled - k as f64)
    }

    /// Uniform 10 ms grid from `t0` to `t_f`, with `t_f` appended when it is
    /// not on the grid.
    pub fn sample_times(&self, t_f: f64) -> Vec<f64> {
        let t0 = self.scenario.t0;
        let steps = ((t_f - t0) / SAMPLE_PERIOD + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=steps).map(|i| t0 + i as f64 * SAMPLE_PERIOD).collect();
        if t_f - times[steps] > 1e-9 {
            times.push(t_f);
        }
        times
    }

    pub fn extract_solution(&self, x: &[f64], diagnostics: SolverDiagnostics) -> Result<CrossingSolution, TranscriptionError> {
        self.check_len(x)?;
        let l = &self.layout;
        let t0 = self.scenario.t0;
        let t_f = x[TF];
        let times = self.sample_times(t_f);
        let span = t_f - t0;
        let taus: Vec<f64> = times.iter().map(|t| ((t - t0) / span).clamp(0.0, 1.0)).collect();
        let mut cavs: Vec<Option<CavTrajectory>> = vec![None; l.n_cavs];
        for c in 0..l.n_cavs {
            let traj = CavTrajectory {
                id: self.vehicles[c].id.clone(),
                states: taus.iter().map(|tau| self.state_at_tau(x, c, *tau)).collect(),
                inputs: taus.iter().map(|tau| self.input_at_tau(x, c, *tau)).collect(),
                node_states: (0..l.nodes).map(|n| self.state_at(x, c, n)).collect(),
            };
            cavs[self.order[c]] = Some(traj);
        }
        let block = |start: usize, fwd: usize, rev: usize| DualBlock::from_slice(&x[start..start + fwd + rev + 2], fwd, rev);
        let mut road_duals = Vec::new();
        for c in 0..l.n_cavs {
            for r in 0..l.n_boundaries() {
                road_duals.push(DualTrajectory {
                    first: self.vehicles[c].id.clone(),
                    second: BOUNDARY_NAMES.get(r).map(|s| s.to_string()).unwrap_or_else(|| format!("boundary{r}")),
                    blocks: (0..l.nodes)
                        .map(|n| block(l.road_block(c, n, r), l.vehicle_faces[c], l.boundary_faces[r]))
                        .collect(),
                });
            }
        }
        let pair_duals = l
            .pairs
            .iter()
            .enumerate()
            .map(|(p, &(i, j))| DualTrajectory {
                first: self.vehicles[i].id.clone(),
                second: self.vehicles[j].id.clone(),
                blocks: (0..l.nodes)
                    .map(|n| block(l.pair_block(p, n), l.vehicle_faces[i], l.vehicle_faces[j]))
                    .collect(),
            })
            .collect();
        Ok(CrossingSolution {
            t0,
            t_f,
            times,
            node_tau: self.node_tau.clone(),
            node_weights: self.node_weight.clone(),
            cavs: cavs.into_iter().map(|c| c.expect("every vehicle extracted")).collect(),
            pair_duals,
            road_duals,
            diagnostics,
        })
    }
}

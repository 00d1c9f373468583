//! Decision-vector layout.
//!
//! ```text
//! [t_f]
//! per vehicle: states node-major (6 per node), inputs (2 per interval)
//! road duals:  per (vehicle, node, boundary) [lambda_vehicle, lambda_boundary, s]
//! pair duals:  per (pair i < j, node)        [lambda_i, lambda_j, s]
//! ```
//!
//! Vehicles are in the transcription's internal order.

use crate::dynamics::{INPUT_DIM, STATE_DIM};

pub const TF: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub n_cavs: usize,
    pub intervals: usize,
    pub degree: usize,
    /// Radau shares interval ends with the last collocation point.
    pub ends_on_node: bool,
    pub nodes: usize,
    pub vehicle_faces: Vec<usize>,
    pub boundary_faces: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    state_start: Vec<usize>,
    input_start: Vec<usize>,
    road_start: Vec<usize>,
    pair_start: Vec<usize>,
    pub duals_start: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(
        intervals: usize,
        degree: usize,
        ends_on_node: bool,
        vehicle_faces: Vec<usize>,
        boundary_faces: Vec<usize>,
    ) -> Self {
        let n_cavs = vehicle_faces.len();
        let nodes = if ends_on_node { intervals * degree + 1 } else { intervals * (degree + 1) + 1 };
        let mut next = 1;
        let mut state_start = Vec::with_capacity(n_cavs);
        let mut input_start = Vec::with_capacity(n_cavs);
        for _ in 0..n_cavs {
            state_start.push(next);
            next += nodes * STATE_DIM;
            input_start.push(next);
            next += intervals * INPUT_DIM;
        }
        let duals_start = next;
        let mut road_start = Vec::with_capacity(n_cavs * nodes * boundary_faces.len());
        for fc in &vehicle_faces {
            for _ in 0..nodes {
                for fr in &boundary_faces {
                    road_start.push(next);
                    next += fc + fr + 2;
                }
            }
        }
        let pairs: Vec<(usize, usize)> = (0..n_cavs).flat_map(|i| (i + 1..n_cavs).map(move |j| (i, j))).collect();
        let mut pair_start = Vec::with_capacity(pairs.len() * nodes);
        for &(i, j) in &pairs {
            for _ in 0..nodes {
                pair_start.push(next);
                next += vehicle_faces[i] + vehicle_faces[j] + 2;
            }
        }
        Self {
            n_cavs,
            intervals,
            degree,
            ends_on_node,
            nodes,
            vehicle_faces,
            boundary_faces,
            pairs,
            state_start,
            input_start,
            road_start,
            pair_start,
            duals_start,
            total: next,
        }
    }

    pub fn n_boundaries(&self) -> usize {
        self.boundary_faces.len()
    }

    /// Node index of basis point `j` (0 = interval start) of interval `k`.
    /// `node(intervals, 0)` is the final node.
    pub fn node(&self, k: usize, j: usize) -> usize {
        if self.ends_on_node {
            k * self.degree + j
        } else {
            k * (self.degree + 1) + j
        }
    }

    pub fn final_node(&self) -> usize {
        self.nodes - 1
    }

    /// Index of the first state of vehicle `c` at node `n`.
    pub fn state(&self, c: usize, n: usize) -> usize {
        self.state_start[c] + n * STATE_DIM
    }

    /// Index of the first input of vehicle `c` on interval `k`.
    pub fn input(&self, c: usize, k: usize) -> usize {
        self.input_start[c] + k * INPUT_DIM
    }

    pub fn road_block(&self, c: usize, n: usize, r: usize) -> usize {
        self.road_start[(c * self.nodes + n) * self.n_boundaries() + r]
    }

    pub fn road_block_len(&self, c: usize, r: usize) -> usize {
        self.vehicle_faces[c] + self.boundary_faces[r] + 2
    }

    pub fn pair_block(&self, p: usize, n: usize) -> usize {
        self.pair_start[p * self.nodes + n]
    }

    pub fn pair_block_len(&self, p: usize) -> usize {
        let (i, j) = self.pairs[p];
        self.vehicle_faces[i] + self.vehicle_faces[j] + 2
    }

    /// Interval containing node `n` as a collocation or start point, and the
    /// basis index within it.
    pub fn node_position(&self, n: usize) -> (usize, usize) {
        let per = if self.ends_on_node { self.degree } else { self.degree + 1 };
        if n == self.final_node() {
            return if self.ends_on_node { (self.intervals - 1, self.degree) } else { (self.intervals, 0) };
        }
        (n / per, n % per)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent count: t_f, then per vehicle states and inputs, then one
    /// dual block per vehicle-boundary pair and per vehicle pair at every node.
    fn count(n: usize, np: usize, d: usize) -> usize {
        let nodes = np * d + 1;
        let per_vehicle = nodes * 6 + np * 2;
        let road = n * 4 * nodes * (4 + 4 + 2);
        let pairs = n * (n - 1) / 2 * nodes * (4 + 4 + 2);
        1 + n * per_vehicle + road + pairs
    }

    #[test]
    fn single_vehicle_count() {
        let l = Layout::new(15, 5, true, vec![4], vec![4; 4]);
        assert_eq!(l.nodes, 76);
        // four boundary blocks of 4 + 4 + 2 duals at each of the 76 nodes
        assert_eq!(l.total, 1 + 30 + 456 + 76 * 4 * 10);
        assert_eq!(l.total, 3527);
    }

    #[test]
    fn counts_match_independent_formula() {
        for n in 1..=5 {
            for (np, d) in [(15, 5), (4, 3), (1, 1)] {
                let l = Layout::new(np, d, true, vec![4; n], vec![4; 4]);
                assert_eq!(l.total, count(n, np, d));
            }
        }
        let one = Layout::new(15, 5, true, vec![4], vec![4; 4]);
        let two = Layout::new(15, 5, true, vec![4; 2], vec![4; 4]);
        assert_eq!(two.total - 2 * (one.total - 1), 1 + 76 * 10);
    }

    #[test]
    fn slices_tile_the_vector() {
        let l = Layout::new(3, 2, true, vec![4; 3], vec![4; 4]);
        let mut seen = vec![0u8; l.total];
        seen[TF] += 1;
        for c in 0..3 {
            for n in 0..l.nodes {
                (0..6).for_each(|k| seen[l.state(c, n) + k] += 1);
                for r in 0..4 {
                    (0..l.road_block_len(c, r)).for_each(|k| seen[l.road_block(c, n, r) + k] += 1);
                }
            }
            for k in 0..3 {
                (0..2).for_each(|q| seen[l.input(c, k) + q] += 1);
            }
        }
        for p in 0..l.pairs.len() {
            for n in 0..l.nodes {
                (0..l.pair_block_len(p)).for_each(|k| seen[l.pair_block(p, n) + k] += 1);
            }
        }
        assert!(seen.iter().all(|s| *s == 1));
    }

    #[test]
    fn node_indexing() {
        let r = Layout::new(3, 2, true, vec![4], vec![4; 4]);
        assert_eq!(r.node(1, 0), r.node(0, 2));
        assert_eq!(r.node(3, 0), r.final_node());
        assert_eq!(r.node_position(r.final_node()), (2, 2));
        assert_eq!(r.node_position(3), (1, 1));
        let g = Layout::new(3, 2, false, vec![4], vec![4; 4]);
        assert_eq!(g.nodes, 10);
        assert_eq!(g.node(3, 0), g.final_node());
        assert_eq!(g.node_position(4), (1, 1));
        assert_eq!(g.node_position(9), (3, 0));
    }
}

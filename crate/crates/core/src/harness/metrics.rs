//! Summary numbers of a crossing solution.

use serde::{Deserialize, Serialize};

use crate::dynamics::idx;
use crate::scenario::CrossingSolution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_cavs: usize,
    /// `t_f - t0` (s).
    pub min_crossing_time: f64,
    /// Mean speed over every vehicle and sample (m/s).
    pub average_speed: f64,
    /// Population standard deviation of the same speeds.
    pub speed_std: f64,
    /// `N / (t_f - t0)`.
    pub throughput_per_s: f64,
    pub throughput_per_h: f64,
}

pub fn metrics(sol: &CrossingSolution) -> Metrics {
    let n = sol.cavs.len();
    let span = sol.t_f - sol.t0;
    // id order keeps the sums independent of the scenario's vehicle order
    let mut cavs: Vec<_> = sol.cavs.iter().collect();
    cavs.sort_by(|a, b| a.id.cmp(&b.id));
    let speeds: Vec<f64> = cavs.iter().flat_map(|c| c.states.iter().map(|s| s[idx::V])).collect();
    let (mean, std) = mean_std(&speeds);
    let per_s = n as f64 / span;
    Metrics {
        n_cavs: n,
        min_crossing_time: span,
        average_speed: mean,
        speed_std: std,
        throughput_per_s: per_s,
        throughput_per_h: 3600.0 * per_s,
    }
}

/// Mean and population standard deviation; zeros for an empty slice.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

//! Forward simulation with the same collocation equations the NLP imposes.

use nalgebra::{DMatrix, DVector};

use super::collocation::Collocation;
use crate::dynamics::{VehicleModel, INPUT_DIM, STATE_DIM};
use crate::error::TranscriptionError;

/// States at the `d + 1` basis points of every interval, obtained by
/// solving each interval's collocation defects with Newton's method.
pub fn simulate(
    model: &VehicleModel,
    colloc: &Collocation,
    x0: [f64; STATE_DIM],
    inputs: &[[f64; INPUT_DIM]],
    duration: f64,
) -> Result<Vec<Vec<[f64; STATE_DIM]>>, TranscriptionError> {
    let d = colloc.degree;
    let h = duration / inputs.len() as f64;
    let dim = STATE_DIM * d;
    let mut start = x0;
    let mut out = Vec::with_capacity(inputs.len());
    for (k, u) in inputs.iter().enumerate() {
        let f0 = model.rate(&start, u);
        let mut nodes: Vec<[f64; STATE_DIM]> = std::iter::once(start)
            .chain((1..=d).map(|j| std::array::from_fn(|q| start[q] + colloc.tau[j] * h * f0[q])))
            .collect();
        let mut converged = false;
        for _ in 0..50 {
            let mut res = DVector::zeros(dim);
            let mut jac = DMatrix::zeros(dim, dim);
            for j in 1..=d {
                let f = model.rate(&nodes[j], u);
                let (jx, _) = model.jacobians(&nodes[j], u);
                for q in 0..STATE_DIM {
                    let row = (j - 1) * STATE_DIM + q;
                    let mut v = -h * f[q];
                    for (b, node) in nodes.iter().enumerate() {
                        v += colloc.diff[b][j - 1] * node[q];
                        if b > 0 {
                            jac[(row, (b - 1) * STATE_DIM + q)] += colloc.diff[b][j - 1];
                        }
                    }
                    res[row] = v;
                    for m in 0..STATE_DIM {
                        jac[(row, (j - 1) * STATE_DIM + m)] -= h * jx[q][m];
                    }
                }
            }
            let scale = nodes.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
            if res.amax() <= 1e-13 * scale {
                converged = true;
                break;
            }
            let step = jac.lu().solve(&res).ok_or_else(|| {
                TranscriptionError::InvalidConfig(format!("singular collocation system on interval {k}"))
            })?;
            for j in 1..=d {
                for q in 0..STATE_DIM {
                    nodes[j][q] -= step[(j - 1) * STATE_DIM + q];
                }
            }
        }
        if !converged {
            return Err(TranscriptionError::InvalidConfig(format!("collocation Newton did not converge on interval {k}")));
        }
        start = std::array::from_fn(|q| (0..=d).map(|b| colloc.end[b] * nodes[b][q]).sum());
        out.push(nodes);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::VehicleParams;

    #[test]
    fn straight_acceleration_is_exact_at_nodes() {
        let model = VehicleModel::new(VehicleParams::default(), 0.5);
        for colloc in [Collocation::radau(5).unwrap(), Collocation::legendre(3).unwrap()] {
            let x0 = [0.0, 0.0, 10.0, 1.0, -2.0, 0.3];
            let nodes = simulate(&model, &colloc, x0, &[[2.0, 0.0]; 6], 4.2).unwrap();
            let h = 4.2 / 6.0;
            for (k, interval) in nodes.iter().enumerate() {
                for (j, s) in interval.iter().enumerate() {
                    let t = (k as f64 + colloc.tau[j]) * h;
                    let dist = 10.0 * t + t * t;
                    assert!((s[2] - (10.0 + 2.0 * t)).abs() < 1e-10);
                    assert!((s[3] - (1.0 + dist * 0.3f64.cos())).abs() < 1e-9);
                    assert!((s[4] - (-2.0 + dist * 0.3f64.sin())).abs() < 1e-9);
                    assert_eq!(s[0], 0.0);
                }
            }
        }
    }
}

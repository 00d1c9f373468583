//! Single-track (bicycle) vehicle model with a linear tyre law.
//!
//! State ordering is `[r, beta, V, x, y, theta]` and input ordering is
//! `[a, delta]`. The hot-path evaluators in [`VehicleModel`] work on plain
//! arrays so the transcription can call them without conversions.

use serde::{Deserialize, Serialize};

use crate::error::DynamicsError;

pub const STATE_DIM: usize = 6;
pub const INPUT_DIM: usize = 2;

/// Index of each state inside the state array.
pub mod idx {
    pub const R: usize = 0;
    pub const BETA: usize = 1;
    pub const V: usize = 2;
    pub const X: usize = 3;
    pub const Y: usize = 4;
    pub const THETA: usize = 5;
    /// Offsets of the inputs when state and input are stacked into one 8-vector.
    pub const A: usize = 6;
    pub const DELTA: usize = 7;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// Mass (kg).
    pub mass: f64,
    /// Yaw moment of inertia (kg m^2).
    pub yaw_inertia: f64,
    /// Distance from the centre of gravity to the front axle (m).
    pub lf: f64,
    /// Distance from the centre of gravity to the rear axle (m).
    pub lr: f64,
    /// Front cornering stiffness (N/rad).
    pub cf: f64,
    /// Rear cornering stiffness (N/rad).
    pub cr: f64,
    /// Body length (m).
    pub length: f64,
    /// Body width (m).
    pub width: f64,
}

impl Default for VehicleParams {
    /// Mid-size passenger car. These numbers are assumed, not measured.
    fn default() -> Self {
        Self {
            mass: 1500.0,
            yaw_inertia: 2500.0,
            lf: 1.1,
            lr: 1.6,
            cf: 55_000.0,
            cr: 55_000.0,
            length: 4.6,
            width: 2.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let fields = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("lf", self.lf),
            ("lr", self.lr),
            ("cf", self.cf),
            ("cr", self.cr),
            ("length", self.length),
            ("width", self.width),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidParams(format!("{name} must be positive, got {value}")));
            }
        }
        if self.lf + self.lr >= self.length {
            return Err(DynamicsError::InvalidParams(format!(
                "wheelbase {} must be shorter than body length {}",
                self.lf + self.lr,
                self.length
            )));
        }
        Ok(())
    }
}

/// Linearised tyre-force coefficients of the single-track model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityDerivatives {
    pub n_r: f64,
    pub n_beta: f64,
    pub n_delta: f64,
    pub y_r: f64,
    pub y_beta: f64,
    pub y_delta: f64,
}

/// Slip angles `alpha_f = delta - beta - lf r / V`, `alpha_r = -beta + lr r / V`
/// with lateral forces `C alpha` give these closed forms.
pub fn stability_derivatives(p: &VehicleParams) -> StabilityDerivatives {
    StabilityDerivatives {
        n_r: -(p.lf * p.lf * p.cf + p.lr * p.lr * p.cr),
        n_beta: p.lr * p.cr - p.lf * p.cf,
        n_delta: p.lf * p.cf,
        y_r: p.lr * p.cr - p.lf * p.cf,
        y_beta: -(p.cf + p.cr),
        y_delta: p.cf,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub r: f64,
    pub beta: f64,
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl VehicleState {
    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [self.r, self.beta, self.v, self.x, self.y, self.theta]
    }

    pub fn from_array(a: &[f64; STATE_DIM]) -> Self {
        Self { r: a[0], beta: a[1], v: a[2], x: a[3], y: a[4], theta: a[5] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub a: f64,
    pub delta: f64,
}

impl ControlInput {
    pub fn to_array(&self) -> [f64; INPUT_DIM] {
        [self.a, self.delta]
    }
}

/// Box limits on speed, inputs, yaw rate and sideslip. All but the speed
/// floor are symmetric magnitude bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub delta_max: f64,
    pub r_max: f64,
    pub beta_max: f64,
}

impl Default for StateBounds {
    fn default() -> Self {
        Self { v_min: 0.5, v_max: 25.0, a_max: 3.0, delta_max: 0.67, r_max: 0.7, beta_max: 0.5 }
    }
}

impl StateBounds {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let ok = self.v_min > 0.0
            && self.v_max > self.v_min
            && self.a_max > 0.0
            && self.delta_max > 0.0
            && self.r_max > 0.0
            && self.beta_max > 0.0
            && [self.v_min, self.v_max, self.a_max, self.delta_max, self.r_max, self.beta_max]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::InvalidBounds(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    SpeedMin,
    SpeedMax,
    Acceleration,
    Steering,
    YawRate,
    Sideslip,
}

/// One violated bound. `margin` is how far the value lies beyond the bound
/// (always positive for a violation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitViolation {
    pub limit: Limit,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
}

pub fn check_limits(s: &VehicleState, u: &ControlInput, b: &StateBounds) -> Vec<LimitViolation> {
    check_limits_with_tolerance(s, u, b, 0.0)
}

/// Like [`check_limits`] but ignores excursions up to `tol`.
pub fn check_limits_with_tolerance(
    s: &VehicleState,
    u: &ControlInput,
    b: &StateBounds,
    tol: f64,
) -> Vec<LimitViolation> {
    let mut out = Vec::new();
    let mut push = |limit, value: f64, bound: f64, margin: f64| {
        if margin > tol {
            out.push(LimitViolation { limit, value, bound, margin });
        }
    };
    push(Limit::SpeedMin, s.v, b.v_min, b.v_min - s.v);
    push(Limit::SpeedMax, s.v, b.v_max, s.v - b.v_max);
    push(Limit::Acceleration, u.a, b.a_max, u.a.abs() - b.a_max);
    push(Limit::Steering, u.delta, b.delta_max, u.delta.abs() - b.delta_max);
    push(Limit::YawRate, s.r, b.r_max, s.r.abs() - b.r_max);
    push(Limit::Sideslip, s.beta, b.beta_max, s.beta.abs() - b.beta_max);
    out
}

/// Vehicle parameters together with their derived coefficients and the
/// speed floor below which the model is considered singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleModel {
    pub params: VehicleParams,
    pub derivs: StabilityDerivatives,
    pub v_floor: f64,
}

impl VehicleModel {
    pub fn new(params: VehicleParams, v_floor: f64) -> Self {
        Self { params, derivs: stability_derivatives(&params), v_floor }
    }

    /// Checked evaluation of the state derivative.
    pub fn state_rate(&self, s: &VehicleState, u: &ControlInput) -> Result<[f64; STATE_DIM], DynamicsError> {
        if !(s.v >= self.v_floor) {
            return Err(DynamicsError::SpeedBelowFloor { speed: s.v, floor: self.v_floor });
        }
        Ok(self.rate(&s.to_array(), &u.to_array()))
    }

    /// Unchecked state derivative; callers guarantee `V > 0`.
    #[inline]
    pub fn rate(&self, s: &[f64; STATE_DIM], u: &[f64; INPUT_DIM]) -> [f64; STATE_DIM] {
        let d = &self.derivs;
        let m = self.params.mass;
        let iz = self.params.yaw_inertia;
        let [r, beta, v, _, _, theta] = *s;
        let [a, delta] = *u;
        [
            d.n_r / (iz * v) * r + d.n_beta / iz * beta + d.n_delta / iz * delta,
            (d.y_r / (m * v * v) - 1.0) * r + d.y_beta / (m * v) * beta + d.y_delta / (m * v) * delta,
            a,
            v * theta.cos(),
            v * theta.sin(),
            r,
        ]
    }

    /// Analytic Jacobians `(d rate / d state, d rate / d input)`.
    pub fn jacobians(
        &self,
        s: &[f64; STATE_DIM],
        u: &[f64; INPUT_DIM],
    ) -> ([[f64; STATE_DIM]; STATE_DIM], [[f64; INPUT_DIM]; STATE_DIM]) {
        let d = &self.derivs;
        let m = self.params.mass;
        let iz = self.params.yaw_inertia;
        let [r, beta, v, _, _, theta] = *s;
        let delta = u[1];
        let (sin, cos) = theta.sin_cos();
        let mut jx = [[0.0; STATE_DIM]; STATE_DIM];
        let mut ju = [[0.0; INPUT_DIM]; STATE_DIM];

        jx[0][idx::R] = d.n_r / (iz * v);
        jx[0][idx::BETA] = d.n_beta / iz;
        jx[0][idx::V] = -d.n_r * r / (iz * v * v);
        ju[0][1] = d.n_delta / iz;

        jx[1][idx::R] = d.y_r / (m * v * v) - 1.0;
        jx[1][idx::BETA] = d.y_beta / (m * v);
        jx[1][idx::V] = -2.0 * d.y_r * r / (m * v * v * v) - (d.y_beta * beta + d.y_delta * delta) / (m * v * v);
        ju[1][1] = d.y_delta / (m * v);

        ju[2][0] = 1.0;

        jx[3][idx::V] = cos;
        jx[3][idx::THETA] = -v * sin;
        jx[4][idx::V] = sin;
        jx[4][idx::THETA] = v * cos;

        jx[5][idx::R] = 1.0;
        (jx, ju)
    }

    /// `sum_k w[k] * Hessian(rate_k)` over the stacked `[state, input]` vector.
    pub fn weighted_hessian(
        &self,
        s: &[f64; STATE_DIM],
        u: &[f64; INPUT_DIM],
        w: &[f64; STATE_DIM],
    ) -> [[f64; 8]; 8] {
        let d = &self.derivs;
        let m = self.params.mass;
        let iz = self.params.yaw_inertia;
        let [r, beta, v, _, _, theta] = *s;
        let delta = u[1];
        let (sin, cos) = theta.sin_cos();
        let (v2, v3) = (v * v, v * v * v);
        let mut h = [[0.0; 8]; 8];
        let mut set = |i: usize, j: usize, val: f64| {
            h[i][j] += val;
            if i != j {
                h[j][i] += val;
            }
        };
        use idx::*;
        // yaw rate row
        set(R, V, w[0] * (-d.n_r / (iz * v2)));
        set(V, V, w[0] * (2.0 * d.n_r * r / (iz * v3)));
        // sideslip row
        set(R, V, w[1] * (-2.0 * d.y_r / (m * v3)));
        set(BETA, V, w[1] * (-d.y_beta / (m * v2)));
        set(DELTA, V, w[1] * (-d.y_delta / (m * v2)));
        set(
            V,
            V,
            w[1] * (6.0 * d.y_r * r / (m * v2 * v2) + 2.0 * (d.y_beta * beta + d.y_delta * delta) / (m * v3)),
        );
        // position rows
        set(V, THETA, -w[3] * sin + w[4] * cos);
        set(THETA, THETA, -w[3] * v * cos - w[4] * v * sin);
        h
    }
}

/// Structural nonzeros of each row of the rate Jacobian over the stacked
/// `[state, input]` vector. Used to build sparsity patterns.
pub const RATE_JACOBIAN_PATTERN: [&[usize]; STATE_DIM] = [
    &[idx::R, idx::BETA, idx::V, idx::DELTA],
    &[idx::R, idx::BETA, idx::V, idx::DELTA],
    &[idx::A],
    &[idx::V, idx::THETA],
    &[idx::V, idx::THETA],
    &[idx::R],
];

/// Structural nonzeros `(i, j)`, `i >= j`, of any weighted rate Hessian.
pub const RATE_HESSIAN_PATTERN: [(usize, usize); 6] = [
    (idx::V, idx::R),
    (idx::V, idx::BETA),
    (idx::V, idx::V),
    (idx::THETA, idx::V),
    (idx::THETA, idx::THETA),
    (idx::DELTA, idx::V),
];

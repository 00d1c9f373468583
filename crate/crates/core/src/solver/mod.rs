//! Constrained NLP interface and the in-repo primal-dual interior-point
//! solver.
//!
//! The solver works on `min f(x)` subject to `g_l <= g(x) <= g_u` and
//! `x_l <= x <= x_u`. Inequality rows get slack variables, bounds are
//! handled by a log barrier, and steps are globalized by a filter line
//! search. Linear systems are solved by [`ldl::SparseLdl`].

pub mod derivatives;
mod ipm;
pub mod ldl;
mod nlp;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use derivatives::{check_derivatives, check_hessian, BlockError, DerivativeReport};
pub use nlp::Nlp;

use crate::error::SolverError;

/// How derivatives are used during a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    #[default]
    Analytic,
    /// Analytic derivatives, checked against central differences at the
    /// starting point before iterating.
    FiniteDifferenceCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Scaled KKT error tolerance.
    pub tol: f64,
    /// Unscaled constraint violation tolerance.
    pub constr_tol: f64,
    pub max_iter: usize,
    /// Initial barrier parameter.
    pub mu_init: f64,
    /// Absolute and relative push of the start into the bound interior.
    pub bound_push: f64,
    pub bound_frac: f64,
    /// Looser tolerance accepted after `acceptable_iter` consecutive hits.
    pub acceptable_tol: f64,
    pub acceptable_iter: usize,
    pub derivative_mode: DerivativeMode,
    /// Seed of any perturbation applied to the starting point, recorded in
    /// the outcome.
    pub seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            constr_tol: 1e-6,
            max_iter: 3000,
            mu_init: 0.1,
            bound_push: 1e-2,
            bound_frac: 1e-2,
            acceptable_tol: 1e-4,
            acceptable_iter: 15,
            derivative_mode: DerivativeMode::Analytic,
            seed: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("tol", self.tol),
            ("constr_tol", self.constr_tol),
            ("mu_init", self.mu_init),
            ("bound_push", self.bound_push),
            ("bound_frac", self.bound_frac),
            ("acceptable_tol", self.acceptable_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SolverError::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.bound_frac > 0.5 {
            return Err(SolverError::InvalidConfig("bound_frac must be at most 0.5".into()));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Acceptable,
    MaxIter,
    Infeasible,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Acceptable => "acceptable",
            SolveStatus::MaxIter => "max-iter",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NumericalFailure => "numerical-failure",
        }
    }

    pub fn is_success(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Acceptable)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Kind of an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    /// Starting point.
    Init,
    /// Barrier objective decrease (Armijo).
    Objective,
    /// Sufficient decrease in infeasibility or barrier objective; the
    /// filter was augmented.
    Filter,
    /// Second-order correction accepted.
    Correction,
    /// Feasibility restoration.
    Restoration,
    /// Step too small to measure; taken in full.
    Tiny,
}

impl StepKind {
    fn tag(self) -> char {
        match self {
            StepKind::Init => '-',
            StepKind::Objective => 'f',
            StepKind::Filter => 'h',
            StepKind::Correction => 's',
            StepKind::Restoration => 'r',
            StepKind::Tiny => 't',
        }
    }
}

/// One line of the iteration log.
///
/// `theta` is the 1-norm of the scaled constraint residual and `phi` the
/// scaled barrier objective, both at the barrier parameter `mu` used for
/// the step; `theta_prev`/`phi_prev` are the same quantities at the point
/// the step started from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub inf_pr: f64,
    pub inf_du: f64,
    pub mu: f64,
    pub alpha_pr: f64,
    pub alpha_du: f64,
    pub regularization: f64,
    pub ls_trials: usize,
    pub step: StepKind,
    pub theta_prev: f64,
    pub phi_prev: f64,
    pub theta: f64,
    pub phi: f64,
}

impl IterationRecord {
    pub const HEADER: &'static str = "iter objective inf_pr inf_du mu alpha_pr alpha_du reg ls step theta phi";

    /// Whitespace-separated line matching [`Self::HEADER`].
    pub fn to_line(&self) -> String {
        format!(
            "{} {:.10e} {:.3e} {:.3e} {:.3e} {:.3e} {:.3e} {:.1e} {} {} {:.6e} {:.10e}",
            self.iter,
            self.objective,
            self.inf_pr,
            self.inf_du,
            self.mu,
            self.alpha_pr,
            self.alpha_du,
            self.regularization,
            self.ls_trials,
            self.step.tag(),
            self.theta,
            self.phi
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub iterations: usize,
    /// Unscaled objective at the returned point.
    pub objective: f64,
    /// Scaled stationarity error used by the termination test.
    pub stationarity: f64,
    /// Unscaled max constraint residual.
    pub primal_infeasibility: f64,
    /// Max bound complementarity `(x - x_l) z_l`, `(x_u - x) z_u`.
    pub complementarity: f64,
    pub wall_time: f64,
    pub seed: Option<u64>,
    /// Number of starting-point entries clipped into the variable bounds.
    pub clipped: usize,
    /// Constraint row responsible for an infeasible or numerical-failure exit.
    pub offending_constraint: Option<usize>,
    pub message: String,
    pub records: Vec<IterationRecord>,
    pub derivative_report: Option<DerivativeReport>,
}

impl SolveOutcome {
    /// Iteration log, one header line then one line per iteration.
    pub fn log(&self) -> String {
        let mut s = String::from(IterationRecord::HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.to_line());
            s.push('\n');
        }
        s
    }
}

/// Pluggable NLP backend.
pub trait NlpSolver {
    fn solve(&self, p: &dyn Nlp, x0: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveOutcome), SolverError>;
}

/// The in-repo interior-point method.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl NlpSolver for InteriorPoint {
    fn solve(&self, p: &dyn Nlp, x0: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveOutcome), SolverError> {
        solve(p, x0, cfg)
    }
}

/// Solve `p` from `x0` with the interior-point method. `x0` is clipped into
/// the variable bounds first; the number of clipped entries is reported.
pub fn solve<P: Nlp + ?Sized>(p: &P, x0: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveOutcome), SolverError> {
    cfg.validate()?;
    let n = p.num_variables();
    if x0.len() != n {
        return Err(SolverError::DimensionMismatch { got: x0.len(), expected: n });
    }
    if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite { what: "starting point", index: i });
    }
    ipm::run(p, x0, cfg)
}

//! Primal-dual interior-point iterations with a filter line search.

use std::time::Instant;

use super::ldl::SparseLdl;
use super::{
    check_derivatives, DerivativeMode, IterationRecord, Nlp, SolveOutcome, SolveStatus, SolverConfig, StepKind,
};
use crate::error::SolverError;

// Filter and line-search constants.
const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const TAU_MIN: f64 = 0.99;
const S_PHI: f64 = 2.3;
const S_THETA: f64 = 1.1;
const DELTA: f64 = 1.0;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const GAMMA_ALPHA: f64 = 0.05;
const ETA_PHI: f64 = 1e-8;
const MAX_SOC: usize = 4;
const KAPPA_SOC: f64 = 0.99;
const KAPPA_SIGMA: f64 = 1e10;
const S_MAX: f64 = 100.0;
const SCALE_TARGET: f64 = 100.0;
const BOUND_RELAX: f64 = 1e-8;
const DELTA_C: f64 = 1e-7;
const DELTA_W_INIT: f64 = 1e-4;
const DELTA_W_MAX: f64 = 1e40;
const REFINE_TOL: f64 = 1e-10;
const REFINE_STEPS: usize = 10;
/// Relative residual above which a Newton system is refactored with more
/// regularization.
const SOLVE_ACCEPT: f64 = 1e-10;
const Y_INIT_MAX: f64 = 1e3;
const RESTORATION_ITERS: usize = 100;

/// Problem with gradient-based scaling, slacks for inequality rows and
/// relaxed bounds. Variables are `w = [x, s]`.
struct Internal<'a, P: Nlp + ?Sized> {
    p: &'a P,
    n: usize,
    ns: usize,
    m: usize,
    obj_scale: f64,
    row_scale: Vec<f64>,
    /// Slack index of each row, `None` for equalities.
    slack_of: Vec<Option<usize>>,
    /// Scaled lower bound of equality rows.
    eq_rhs: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    jac: Vec<(usize, usize)>,
    hess: Vec<(usize, usize)>,
}

/// Values at one primal point.
#[derive(Clone)]
struct Eval {
    f: f64,
    c: Vec<f64>,
}

impl<'a, P: Nlp + ?Sized> Internal<'a, P> {
    fn nw(&self) -> usize {
        self.n + self.ns
    }

    /// Scaled objective and constraint residuals; `Err(row)` on a non-finite
    /// constraint value, `Err(usize::MAX)` for a non-finite objective.
    fn eval(&self, w: &[f64]) -> Result<Eval, usize> {
        let x = &w[..self.n];
        let f = self.p.objective(x);
        if !f.is_finite() {
            return Err(usize::MAX);
        }
        let mut g = vec![0.0; self.m];
        self.p.constraints(x, &mut g);
        let mut c = vec![0.0; self.m];
        for i in 0..self.m {
            if !g[i].is_finite() {
                return Err(i);
            }
            let gi = self.row_scale[i] * g[i];
            c[i] = match self.slack_of[i] {
                Some(k) => gi - w[self.n + k],
                None => gi - self.eq_rhs[i],
            };
        }
        Ok(Eval { f: self.obj_scale * f, c })
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        self.p.gradient(&w[..self.n], &mut g);
        for v in &mut g {
            *v *= self.obj_scale;
        }
        g.resize(self.nw(), 0.0);
        g
    }

    fn jacobian(&self, w: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.jac.len()];
        self.p.jacobian_values(&w[..self.n], &mut v);
        for (val, &(r, _)) in v.iter_mut().zip(&self.jac) {
            *val *= self.row_scale[r];
        }
        v
    }

    /// `J^T y` over `w`.
    fn jt_times(&self, jv: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nw()];
        for (&(r, c), v) in self.jac.iter().zip(jv) {
            out[c] += v * y[r];
        }
        for (i, s) in self.slack_of.iter().enumerate() {
            if let Some(k) = s {
                out[self.n + k] -= y[i];
            }
        }
        out
    }

    fn unscaled_violation(&self, c: &[f64]) -> f64 {
        c.iter().zip(&self.row_scale).fold(0.0, |m, (v, s)| m.max(v.abs() / s))
    }
}

/// Symmetric KKT matrix in `[w, y]` ordering. Value layout: Hessian
/// entries, `w` diagonal, Jacobian entries, slack entries, `y` diagonal.
struct Kkt {
    ldl: SparseLdl,
    vals: Vec<f64>,
    nh: usize,
    nw: usize,
    nj: usize,
    ns: usize,
    m: usize,
    last_delta_w: f64,
}

impl Kkt {
    fn new<P: Nlp + ?Sized>(ip: &Internal<'_, P>) -> Result<Self, SolverError> {
        let nw = ip.nw();
        let (mut rows, mut cols) = (Vec::new(), Vec::new());
        for &(r, c) in &ip.hess {
            rows.push(r.max(c));
            cols.push(r.min(c));
        }
        for i in 0..nw {
            rows.push(i);
            cols.push(i);
        }
        for &(r, c) in &ip.jac {
            rows.push(nw + r);
            cols.push(c);
        }
        for (i, s) in ip.slack_of.iter().enumerate() {
            if let Some(k) = s {
                rows.push(nw + i);
                cols.push(ip.n + k);
            }
        }
        for i in 0..ip.m {
            rows.push(nw + i);
            cols.push(nw + i);
        }
        let ldl = SparseLdl::analyse(nw + ip.m, &rows, &cols)?;
        let len = rows.len();
        Ok(Self {
            ldl,
            vals: vec![0.0; len],
            nh: ip.hess.len(),
            nw,
            nj: ip.jac.len(),
            ns: ip.ns,
            m: ip.m,
            last_delta_w: 0.0,
        })
    }

    /// Fill values for `[H + diag + dw I, J^T; J, -dc I]`.
    fn fill(&mut self, hess: Option<&[f64]>, diag: &[f64], jac: &[f64], delta_w: f64, delta_c: f64) {
        let (nh, nw, nj, ns) = (self.nh, self.nw, self.nj, self.ns);
        match hess {
            Some(h) => self.vals[..nh].copy_from_slice(h),
            None => self.vals[..nh].fill(0.0),
        }
        for i in 0..nw {
            self.vals[nh + i] = diag[i] + delta_w;
        }
        self.vals[nh + nw..nh + nw + nj].copy_from_slice(jac);
        self.vals[nh + nw + nj..nh + nw + nj + ns].fill(-1.0);
        self.vals[nh + nw + nj + ns..].fill(-delta_c);
    }

    /// Factor with inertia correction; returns the regularization used.
    /// Factor with inertia correction, starting from regularization
    /// `floor`; returns the regularization used.
    fn factor_corrected(&mut self, hess: &[f64], diag: &[f64], jac: &[f64], floor: f64) -> Result<f64, SolverError> {
        let want = (self.nw, self.m);
        let mut delta_w = floor;
        loop {
            self.fill(Some(hess), diag, jac, delta_w, DELTA_C);
            if let Ok(inertia) = self.ldl.factor(&self.vals) {
                if (inertia.positive, inertia.negative) == want {
                    if delta_w > 0.0 {
                        self.last_delta_w = delta_w;
                    }
                    return Ok(delta_w);
                }
            }
            delta_w = if delta_w == 0.0 {
                if self.last_delta_w == 0.0 {
                    DELTA_W_INIT
                } else {
                    (self.last_delta_w / 3.0).max(1e-20)
                }
            } else if self.last_delta_w == 0.0 {
                delta_w * 100.0
            } else {
                delta_w * 8.0
            };
            if delta_w > DELTA_W_MAX {
                return Err(SolverError::Factorization("inertia correction exceeded its limit".into()));
            }
        }
    }

    /// Factor `[D, J^T; J, -dc I]` with a positive diagonal `D`.
    fn factor_plain(&mut self, diag: &[f64], jac: &[f64]) -> Result<(), SolverError> {
        self.fill(None, diag, jac, 0.0, DELTA_C);
        let inertia = self.ldl.factor(&self.vals)?;
        if (inertia.positive, inertia.negative) != (self.nw, self.m) {
            return Err(SolverError::Factorization("wrong inertia in feasibility system".into()));
        }
        Ok(())
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; rhs.len()];
        self.ldl.solve_refined(&self.vals, rhs, &mut out, REFINE_STEPS, REFINE_TOL);
        out
    }

    /// Solve and report the relative residual.
    fn solve_checked(&self, rhs: &[f64]) -> (Vec<f64>, f64) {
        let mut out = vec![0.0; rhs.len()];
        let r = self.ldl.solve_refined(&self.vals, rhs, &mut out, REFINE_STEPS, REFINE_TOL);
        (out, r)
    }
}

/// Filter of `(theta, phi)` pairs.
#[derive(Default)]
struct Filter(Vec<(f64, f64)>);

impl Filter {
    fn acceptable(&self, theta: f64, phi: f64) -> bool {
        self.0.iter().all(|&(t, p)| theta < t || phi < p)
    }

    fn add(&mut self, theta: f64, phi: f64) {
        self.0.retain(|&(t, p)| t < theta || p < phi);
        self.0.push((theta, phi));
    }
}

fn has_lo(v: f64) -> bool {
    v > f64::NEG_INFINITY
}

fn has_hi(v: f64) -> bool {
    v < f64::INFINITY
}

fn amax(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn one_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

struct State {
    w: Vec<f64>,
    y: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
    ev: Eval,
    grad: Vec<f64>,
    jac: Vec<f64>,
}

struct Solver<'a, 'b, P: Nlp + ?Sized> {
    ip: Internal<'a, P>,
    cfg: &'b SolverConfig,
    kkt: Kkt,
    mu: f64,
    tau: f64,
    filter: Filter,
    theta_max: f64,
    theta_min: f64,
}

impl<'a, 'b, P: Nlp + ?Sized> Solver<'a, 'b, P> {
    fn barrier(&self, w: &[f64], f: f64) -> f64 {
        let mut phi = f;
        for i in 0..self.ip.nw() {
            if has_lo(self.ip.lo[i]) {
                phi -= self.mu * (w[i] - self.ip.lo[i]).ln();
            }
            if has_hi(self.ip.hi[i]) {
                phi -= self.mu * (self.ip.hi[i] - w[i]).ln();
            }
        }
        phi
    }

    fn barrier_gradient(&self, st: &State) -> Vec<f64> {
        let mut g = st.grad.clone();
        for i in 0..self.ip.nw() {
            if has_lo(self.ip.lo[i]) {
                g[i] -= self.mu / (st.w[i] - self.ip.lo[i]);
            }
            if has_hi(self.ip.hi[i]) {
                g[i] += self.mu / (self.ip.hi[i] - st.w[i]);
            }
        }
        g
    }

    fn sigma(&self, st: &State) -> Vec<f64> {
        (0..self.ip.nw())
            .map(|i| {
                let mut s = 0.0;
                if has_lo(self.ip.lo[i]) {
                    s += st.zl[i] / (st.w[i] - self.ip.lo[i]);
                }
                if has_hi(self.ip.hi[i]) {
                    s += st.zu[i] / (self.ip.hi[i] - st.w[i]);
                }
                s
            })
            .collect()
    }

    /// `(stationarity, feasibility, complementarity)` with the usual
    /// multiplier-size scaling, at barrier parameter `mu`, plus the raw
    /// complementarity.
    fn errors(&self, st: &State, mu: f64) -> (f64, f64, f64, f64) {
        let nw = self.ip.nw();
        let mut lag = self.ip.jt_times(&st.jac, &st.y);
        for i in 0..nw {
            lag[i] += st.grad[i] - st.zl[i] + st.zu[i];
        }
        let z_sum: f64 = one_norm(&st.zl) + one_norm(&st.zu);
        let n_z = (0..nw).filter(|&i| has_lo(self.ip.lo[i])).count() + (0..nw).filter(|&i| has_hi(self.ip.hi[i])).count();
        let s_d = ((one_norm(&st.y) + z_sum) / (self.ip.m + n_z).max(1) as f64).max(S_MAX) / S_MAX;
        let s_c = (z_sum / n_z.max(1) as f64).max(S_MAX) / S_MAX;
        let mut compl: f64 = 0.0;
        let mut compl_raw: f64 = 0.0;
        for i in 0..nw {
            if has_lo(self.ip.lo[i]) {
                let v = (st.w[i] - self.ip.lo[i]) * st.zl[i];
                compl = compl.max((v - mu).abs());
                compl_raw = compl_raw.max(v.abs());
            }
            if has_hi(self.ip.hi[i]) {
                let v = (self.ip.hi[i] - st.w[i]) * st.zu[i];
                compl = compl.max((v - mu).abs());
                compl_raw = compl_raw.max(v.abs());
            }
        }
        (amax(&lag) / s_d, amax(&st.ev.c), compl / s_c, compl_raw)
    }

    fn refresh(&self, st: &mut State) {
        st.grad = self.ip.gradient(&st.w);
        st.jac = self.ip.jacobian(&st.w);
    }

    /// Least-squares multipliers for the current point.
    fn init_multipliers(&mut self, st: &mut State) {
        let nw = self.ip.nw();
        let ones = vec![1.0; nw];
        if self.kkt.factor_plain(&ones, &st.jac).is_err() {
            st.y.fill(0.0);
            return;
        }
        let mut rhs = vec![0.0; nw + self.ip.m];
        for i in 0..nw {
            rhs[i] = -(st.grad[i] - st.zl[i] + st.zu[i]);
        }
        let sol = self.kkt.solve(&rhs);
        let y = &sol[nw..];
        if amax(y) > Y_INIT_MAX || y.iter().any(|v| !v.is_finite()) {
            st.y.fill(0.0);
        } else {
            st.y.copy_from_slice(y);
        }
    }

    /// Largest step in `(0, 1]` keeping `w + a dw` a fraction `tau` inside
    /// the bounds.
    fn max_step_primal(&self, w: &[f64], dw: &[f64]) -> f64 {
        let mut a: f64 = 1.0;
        for i in 0..w.len() {
            if dw[i] < 0.0 && has_lo(self.ip.lo[i]) {
                a = a.min(-self.tau * (w[i] - self.ip.lo[i]) / dw[i]);
            }
            if dw[i] > 0.0 && has_hi(self.ip.hi[i]) {
                a = a.min(self.tau * (self.ip.hi[i] - w[i]) / dw[i]);
            }
        }
        a
    }

    fn max_step_dual(&self, z: &[f64], dz: &[f64]) -> f64 {
        let mut a: f64 = 1.0;
        for i in 0..z.len() {
            if dz[i] < 0.0 {
                a = a.min(-self.tau * z[i] / dz[i]);
            }
        }
        a
    }

    fn bound_duals_step(&self, st: &State, dw: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nw = self.ip.nw();
        let mut dzl = vec![0.0; nw];
        let mut dzu = vec![0.0; nw];
        for i in 0..nw {
            if has_lo(self.ip.lo[i]) {
                let gap = st.w[i] - self.ip.lo[i];
                dzl[i] = self.mu / gap - st.zl[i] - st.zl[i] / gap * dw[i];
            }
            if has_hi(self.ip.hi[i]) {
                let gap = self.ip.hi[i] - st.w[i];
                dzu[i] = self.mu / gap - st.zu[i] + st.zu[i] / gap * dw[i];
            }
        }
        (dzl, dzu)
    }

    /// Keep bound multipliers within a factor of their primal-dual
    /// estimates `mu / gap`.
    fn safeguard_duals(&self, st: &mut State) {
        for i in 0..self.ip.nw() {
            if has_lo(self.ip.lo[i]) {
                let m = self.mu / (st.w[i] - self.ip.lo[i]);
                st.zl[i] = st.zl[i].clamp(m / KAPPA_SIGMA, m * KAPPA_SIGMA);
            }
            if has_hi(self.ip.hi[i]) {
                let m = self.mu / (self.ip.hi[i] - st.w[i]);
                st.zu[i] = st.zu[i].clamp(m / KAPPA_SIGMA, m * KAPPA_SIGMA);
            }
        }
    }

    fn newton_rhs(&self, st: &State, grad_phi: &[f64], c: &[f64]) -> Vec<f64> {
        let nw = self.ip.nw();
        let jty = self.ip.jt_times(&st.jac, &st.y);
        let mut rhs = vec![0.0; nw + self.ip.m];
        for i in 0..nw {
            rhs[i] = -(grad_phi[i] + jty[i]);
        }
        for i in 0..self.ip.m {
            rhs[nw + i] = -c[i];
        }
        rhs
    }

    fn trial_point(&self, w: &[f64], dw: &[f64], alpha: f64) -> Vec<f64> {
        w.iter().zip(dw).map(|(a, b)| a + alpha * b).collect()
    }

    /// Gauss-Newton steps on the constraint residual, weighted by the
    /// barrier diagonal, until the point is acceptable to the filter with
    /// reduced infeasibility.
    fn restore(&mut self, st: &mut State) -> Result<usize, usize> {
        let theta_start = one_norm(&st.ev.c);
        let phi_start = self.barrier(&st.w, st.ev.f);
        self.filter.add(theta_start, phi_start);
        let nw = self.ip.nw();
        let worst = |c: &[f64]| {
            c.iter()
                .enumerate()
                .fold((0, 0.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
                .0
        };
        for it in 1..=RESTORATION_ITERS {
            let sig = self.sigma(st);
            let zeta = self.mu.sqrt();
            let diag: Vec<f64> = sig.iter().map(|s| s + zeta).collect();
            if self.kkt.factor_plain(&diag, &st.jac).is_err() {
                return Err(worst(&st.ev.c));
            }
            let mut rhs = vec![0.0; nw + self.ip.m];
            for i in 0..self.ip.m {
                rhs[nw + i] = -st.ev.c[i];
            }
            let sol = self.kkt.solve(&rhs);
            let dw = &sol[..nw];
            let theta = one_norm(&st.ev.c);
            let mut alpha = self.max_step_primal(&st.w, dw);
            let mut accepted = None;
            while alpha > 1e-12 {
                let wt = self.trial_point(&st.w, dw, alpha);
                if let Ok(ev) = self.ip.eval(&wt) {
                    if one_norm(&ev.c) <= (1.0 - 1e-4 * alpha) * theta {
                        accepted = Some((wt, ev));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some((wt, ev)) = accepted else {
                return Err(worst(&st.ev.c));
            };
            st.w = wt;
            st.ev = ev;
            self.refresh(st);
            self.safeguard_duals(st);
            let theta = one_norm(&st.ev.c);
            let phi = self.barrier(&st.w, st.ev.f);
            if theta <= 0.9 * theta_start && self.filter.acceptable(theta, phi) {
                self.init_multipliers(st);
                return Ok(it);
            }
            if theta <= self.cfg.constr_tol * 1e-3 {
                // feasible but still dominated: no progress possible here
                return Err(worst(&st.ev.c));
            }
        }
        Err(worst(&st.ev.c))
    }
}

pub(super) fn run<P: Nlp + ?Sized>(p: &P, x0: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveOutcome), SolverError> {
    let start = Instant::now();
    let n = p.num_variables();
    let m = p.num_constraints();
    let (xl, xu) = p.variable_bounds();
    let (gl, gu) = p.constraint_bounds();
    if xl.len() != n || xu.len() != n || gl.len() != m || gu.len() != m {
        return Err(SolverError::DimensionMismatch { got: xl.len(), expected: n });
    }

    let mut x: Vec<f64> = x0.to_vec();
    let mut clipped = 0;
    for i in 0..n {
        if xl[i] > xu[i] {
            return Err(SolverError::InvalidConfig(format!("variable {i} has lower bound above upper bound")));
        }
        let v = x[i].clamp(xl[i], xu[i]);
        if v != x[i] {
            clipped += 1;
            x[i] = v;
        }
    }

    let derivative_report = match cfg.derivative_mode {
        DerivativeMode::Analytic => None,
        DerivativeMode::FiniteDifferenceCheck => Some(check_derivatives(p, &x)),
    };

    let jac = p.jacobian_structure();
    let hess = p.hessian_structure();

    // gradient-based scaling at the start
    let mut grad0 = vec![0.0; n];
    p.gradient(&x, &mut grad0);
    let gmax = amax(&grad0);
    let obj_scale = if gmax.is_finite() && gmax > SCALE_TARGET { SCALE_TARGET / gmax } else { 1.0 };
    let mut jv0 = vec![0.0; jac.len()];
    p.jacobian_values(&x, &mut jv0);
    let mut row_max = vec![0.0f64; m];
    for (&(r, _), v) in jac.iter().zip(&jv0) {
        if v.is_finite() {
            row_max[r] = row_max[r].max(v.abs());
        }
    }
    let row_scale: Vec<f64> = row_max.iter().map(|&g| if g > SCALE_TARGET { SCALE_TARGET / g } else { 1.0 }).collect();

    let mut slack_of = vec![None; m];
    let mut eq_rhs = vec![0.0; m];
    let mut slo = Vec::new();
    let mut shi = Vec::new();
    for i in 0..m {
        if gl[i] > gu[i] {
            return Err(SolverError::InvalidConfig(format!("constraint {i} has lower bound above upper bound")));
        }
        if gl[i] == gu[i] {
            eq_rhs[i] = row_scale[i] * gl[i];
        } else {
            slack_of[i] = Some(slo.len());
            slo.push(row_scale[i] * gl[i]);
            shi.push(row_scale[i] * gu[i]);
        }
    }
    let ns = slo.len();
    let relax = |v: f64, sign: f64| if v.is_finite() { v + sign * BOUND_RELAX * v.abs().max(1.0) } else { v };
    let lo: Vec<f64> = xl.iter().chain(&slo).map(|&v| relax(v, -1.0)).collect();
    let hi: Vec<f64> = xu.iter().chain(&shi).map(|&v| relax(v, 1.0)).collect();

    let ip = Internal { p, n, ns, m, obj_scale, row_scale, slack_of, eq_rhs, lo, hi, jac, hess };
    let kkt = Kkt::new(&ip)?;

    // starting point: slacks at the constraint values, everything pushed inside
    let mut g0 = vec![0.0; m];
    p.constraints(&x, &mut g0);
    let mut w = x;
    w.resize(ip.nw(), 0.0);
    for i in 0..m {
        if let Some(k) = ip.slack_of[i] {
            w[n + k] = ip.row_scale[i] * g0[i];
        }
    }
    for i in 0..ip.nw() {
        let (l, u) = (ip.lo[i], ip.hi[i]);
        let push = |b: f64| cfg.bound_push * b.abs().max(1.0);
        match (has_lo(l), has_hi(u)) {
            (true, true) => {
                let pl = push(l).min(cfg.bound_frac * (u - l));
                let pu = push(u).min(cfg.bound_frac * (u - l));
                w[i] = w[i].clamp(l + pl, u - pu);
            }
            (true, false) => w[i] = w[i].max(l + push(l)),
            (false, true) => w[i] = w[i].min(u - push(u)),
            (false, false) => {}
        }
        if !w[i].is_finite() {
            return Err(SolverError::NonFinite { what: "starting point", index: i });
        }
    }

    let nw = ip.nw();
    let mut solver = Solver {
        ip,
        cfg,
        kkt,
        mu: cfg.mu_init,
        tau: TAU_MIN.max(1.0 - cfg.mu_init),
        filter: Filter::default(),
        theta_max: 0.0,
        theta_min: 0.0,
    };

    let mut records = Vec::new();
    let finish = |solver: &Solver<'_, '_, P>,
                  st: &State,
                  status: SolveStatus,
                  iterations: usize,
                  offending: Option<usize>,
                  message: String,
                  records: Vec<IterationRecord>| {
        let (stat, _, _, compl) = solver.errors(st, 0.0);
        let outcome = SolveOutcome {
            status,
            iterations,
            objective: st.ev.f / solver.ip.obj_scale,
            stationarity: stat,
            primal_infeasibility: solver.ip.unscaled_violation(&st.ev.c),
            complementarity: compl,
            wall_time: start.elapsed().as_secs_f64(),
            seed: cfg.seed,
            clipped,
            offending_constraint: offending,
            message,
            records,
            derivative_report: derivative_report.clone(),
        };
        (st.w[..solver.ip.n].to_vec(), outcome)
    };

    let ev = match solver.ip.eval(&w) {
        Ok(ev) => ev,
        Err(i) => {
            let what = if i == usize::MAX { "objective" } else { "constraints" };
            return Err(SolverError::NonFinite { what, index: if i == usize::MAX { 0 } else { i } });
        }
    };
    let mut st = State {
        zl: (0..nw).map(|i| if has_lo(solver.ip.lo[i]) { 1.0 } else { 0.0 }).collect(),
        zu: (0..nw).map(|i| if has_hi(solver.ip.hi[i]) { 1.0 } else { 0.0 }).collect(),
        y: vec![0.0; m],
        grad: Vec::new(),
        jac: Vec::new(),
        w,
        ev,
    };
    solver.refresh(&mut st);
    if st.grad.iter().chain(&st.jac).any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite { what: "derivatives", index: 0 });
    }
    solver.init_multipliers(&mut st);
    let theta0 = one_norm(&st.ev.c);
    solver.theta_max = 1e4 * theta0.max(1.0);
    solver.theta_min = 1e-4 * theta0.max(1.0);

    let mut acceptable_count = 0;
    let mut last_step = StepKind::Init;
    let mut alpha_pr = 0.0;
    let mut alpha_du = 0.0;
    let mut reg = 0.0;
    let mut ls_trials = 0;
    let mut theta_prev = theta0;
    let mut phi_prev = solver.barrier(&st.w, st.ev.f);
    let mut force_mu_decrease = false;

    for iter in 0..=cfg.max_iter {
        let (e_stat, e_feas, e_compl, _) = solver.errors(&st, 0.0);
        let theta = one_norm(&st.ev.c);
        records.push(IterationRecord {
            iter,
            objective: st.ev.f / solver.ip.obj_scale,
            inf_pr: solver.ip.unscaled_violation(&st.ev.c),
            inf_du: e_stat,
            mu: solver.mu,
            alpha_pr,
            alpha_du,
            regularization: reg,
            ls_trials,
            step: last_step,
            theta_prev,
            phi_prev,
            theta,
            phi: solver.barrier(&st.w, st.ev.f),
        });

        let unscaled = solver.ip.unscaled_violation(&st.ev.c);
        let e0 = e_stat.max(e_feas).max(e_compl);
        if e0 <= cfg.tol && unscaled <= cfg.constr_tol && e_compl <= cfg.tol {
            return Ok(finish(&solver, &st, SolveStatus::Optimal, iter, None, "converged".into(), records));
        }
        if e0 <= cfg.acceptable_tol && unscaled <= cfg.acceptable_tol {
            acceptable_count += 1;
            if acceptable_count >= cfg.acceptable_iter {
                return Ok(finish(&solver, &st, SolveStatus::Acceptable, iter, None, "acceptable level reached".into(), records));
            }
        } else {
            acceptable_count = 0;
        }
        if iter == cfg.max_iter {
            return Ok(finish(&solver, &st, SolveStatus::MaxIter, iter, None, "iteration limit".into(), records));
        }

        // barrier update
        let mu_floor = cfg.tol / 10.0;
        loop {
            let (s, f, c, _) = solver.errors(&st, solver.mu);
            let e_mu = s.max(f).max(c);
            if solver.mu <= mu_floor || !(e_mu <= KAPPA_EPS * solver.mu || force_mu_decrease) {
                break;
            }
            force_mu_decrease = false;
            solver.mu = mu_floor.max((KAPPA_MU * solver.mu).min(solver.mu.powf(THETA_MU)));
            solver.tau = TAU_MIN.max(1.0 - solver.mu);
            solver.filter = Filter::default();
        }
        force_mu_decrease = false;

        // Newton direction
        let mut hv = vec![0.0; solver.ip.hess.len()];
        let y_orig: Vec<f64> = st.y.iter().zip(&solver.ip.row_scale).map(|(y, s)| y * s).collect();
        solver.ip.p.hessian_values(&st.w[..n], solver.ip.obj_scale, &y_orig, &mut hv);
        if let Some(i) = hv.iter().position(|v| !v.is_finite()) {
            let (_, o) = solver.ip.hess[i];
            return Ok(finish(&solver, &st, SolveStatus::NumericalFailure, iter, None, format!("non-finite Hessian entry in column {o}"), records));
        }
        let sig = solver.sigma(&st);
        let grad_phi = solver.barrier_gradient(&st);
        let rhs = solver.newton_rhs(&st, &grad_phi, &st.ev.c);
        // an inaccurate solve is treated like wrong inertia
        let mut floor = 0.0;
        let sol = loop {
            reg = match solver.kkt.factor_corrected(&hv, &sig, &st.jac, floor) {
                Ok(r) => r,
                Err(e) => return Ok(finish(&solver, &st, SolveStatus::NumericalFailure, iter, None, e.to_string(), records)),
            };
            let (sol, res) = solver.kkt.solve_checked(&rhs);
            if res <= SOLVE_ACCEPT {
                break sol;
            }
            floor = if reg == 0.0 { DELTA_W_INIT.max(solver.kkt.last_delta_w / 3.0) } else { 8.0 * reg };
            if floor > DELTA_W_MAX {
                return Ok(finish(&solver, &st, SolveStatus::NumericalFailure, iter, None, "linear solve inaccurate".into(), records));
            }
        };
        if sol.iter().any(|v| !v.is_finite()) {
            return Ok(finish(&solver, &st, SolveStatus::NumericalFailure, iter, None, "non-finite search direction".into(), records));
        }
        let mut dw = sol[..nw].to_vec();
        let mut dy = sol[nw..].to_vec();

        theta_prev = theta;
        phi_prev = solver.barrier(&st.w, st.ev.f);
        let gdot: f64 = grad_phi.iter().zip(&dw).map(|(a, b)| a * b).sum();

        // tiny step: take it whole
        let tiny = dw.iter().zip(&st.w).all(|(d, w)| d.abs() <= 10.0 * f64::EPSILON * (1.0 + w.abs()));
        let alpha_max = solver.max_step_primal(&st.w, &dw);
        let mut accepted: Option<(Vec<f64>, Eval, f64, StepKind)> = None;
        ls_trials = 0;
        if tiny {
            let wt = solver.trial_point(&st.w, &dw, alpha_max);
            if let Ok(ev) = solver.ip.eval(&wt) {
                accepted = Some((wt, ev, alpha_max, StepKind::Tiny));
                force_mu_decrease = theta < 1e-4;
            }
        } else {
            let alpha_min = if gdot < 0.0 {
                GAMMA_ALPHA
                    * GAMMA_THETA
                        .min(GAMMA_PHI * theta / -gdot)
                        .min(DELTA * theta.powf(S_THETA) / (-gdot).powf(S_PHI))
            } else {
                GAMMA_ALPHA * GAMMA_THETA
            };
            let mut alpha = alpha_max;
            let mut first = true;
            while alpha >= alpha_min.min(alpha_max) && alpha > 1e-16 {
                ls_trials += 1;
                let wt = solver.trial_point(&st.w, &dw, alpha);
                let Ok(ev) = solver.ip.eval(&wt) else {
                    alpha *= 0.5;
                    first = false;
                    continue;
                };
                let th = one_norm(&ev.c);
                let ph = solver.barrier(&wt, ev.f);
                if let Some(kind) = solver.acceptance(theta, phi_prev, gdot, alpha, th, ph) {
                    if kind == StepKind::Filter {
                        solver.filter.add((1.0 - GAMMA_THETA) * theta, phi_prev - GAMMA_PHI * theta);
                    }
                    accepted = Some((wt, ev, alpha, kind));
                    break;
                }
                if first && th >= theta {
                    // second-order correction
                    let mut c_soc: Vec<f64> = st.ev.c.iter().zip(&ev.c).map(|(a, b)| alpha * a + b).collect();
                    let mut theta_old_soc = theta;
                    let mut th_soc = th;
                    for _ in 0..MAX_SOC {
                        if th_soc > KAPPA_SOC * theta_old_soc && theta_old_soc != theta {
                            break;
                        }
                        let rhs = solver.newton_rhs(&st, &grad_phi, &c_soc);
                        let s = solver.kkt.solve(&rhs);
                        let dw_soc = &s[..nw];
                        let a_soc = solver.max_step_primal(&st.w, dw_soc);
                        let wt = solver.trial_point(&st.w, dw_soc, a_soc);
                        let Ok(ev_soc) = solver.ip.eval(&wt) else { break };
                        let th2 = one_norm(&ev_soc.c);
                        let ph2 = solver.barrier(&wt, ev_soc.f);
                        if let Some(kind) = solver.acceptance(theta, phi_prev, gdot, alpha, th2, ph2) {
                            if kind == StepKind::Filter {
                                solver.filter.add((1.0 - GAMMA_THETA) * theta, phi_prev - GAMMA_PHI * theta);
                            }
                            dw = dw_soc.to_vec();
                            dy = s[nw..].to_vec();
                            accepted = Some((wt, ev_soc, a_soc, StepKind::Correction));
                            break;
                        }
                        theta_old_soc = th_soc;
                        th_soc = th2;
                        for (cs, cn) in c_soc.iter_mut().zip(&ev_soc.c) {
                            *cs = a_soc * *cs + cn;
                        }
                    }
                    if accepted.is_some() {
                        break;
                    }
                }
                first = false;
                alpha *= 0.5;
            }
        }

        match accepted {
            Some((wt, ev, alpha, kind)) => {
                let (dzl, dzu) = solver.bound_duals_step(&st, &dw);
                let a_z = solver.max_step_dual(&st.zl, &dzl).min(solver.max_step_dual(&st.zu, &dzu));
                for i in 0..nw {
                    st.zl[i] += a_z * dzl[i];
                    st.zu[i] += a_z * dzu[i];
                }
                for (y, d) in st.y.iter_mut().zip(&dy) {
                    *y += alpha * d;
                }
                st.w = wt;
                st.ev = ev;
                solver.refresh(&mut st);
                if let Some(i) = st.jac.iter().position(|v| !v.is_finite()) {
                    let (r, _) = solver.ip.jac[i];
                    return Ok(finish(&solver, &st, SolveStatus::NumericalFailure, iter + 1, Some(r), "non-finite Jacobian".into(), records));
                }
                solver.safeguard_duals(&mut st);
                alpha_pr = alpha;
                alpha_du = a_z;
                last_step = kind;
            }
            None => match solver.restore(&mut st) {
                Ok(_) => {
                    alpha_pr = 0.0;
                    alpha_du = 0.0;
                    last_step = StepKind::Restoration;
                }
                Err(row) => {
                    return Ok(finish(
                        &solver,
                        &st,
                        SolveStatus::Infeasible,
                        iter + 1,
                        Some(row),
                        format!("restoration failed; largest residual in constraint {row}"),
                        records,
                    ))
                }
            },
        }
    }
    unreachable!("loop returns at max_iter")
}

impl<'a, 'b, P: Nlp + ?Sized> Solver<'a, 'b, P> {
    /// Filter acceptance of a trial point `(th, ph)` reached with step
    /// `alpha` from `(theta, phi)`.
    fn acceptance(&self, theta: f64, phi: f64, gdot: f64, alpha: f64, th: f64, ph: f64) -> Option<StepKind> {
        if !(th.is_finite() && ph.is_finite()) || th > self.theta_max || !self.filter.acceptable(th, ph) {
            return None;
        }
        let switching = gdot < 0.0 && alpha * (-gdot).powf(S_PHI) > DELTA * theta.powf(S_THETA);
        if switching && theta <= self.theta_min {
            (ph <= phi + ETA_PHI * alpha * gdot).then_some(StepKind::Objective)
        } else if th <= (1.0 - GAMMA_THETA) * theta || ph <= phi - GAMMA_PHI * theta {
            Some(StepKind::Filter)
        } else {
            None
        }
    }
}

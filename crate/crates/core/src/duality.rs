//! Dual-form collision avoidance between two polygons.
//!
//! For `P = {X : A_i X <= b_i}` and `Q = {Y : A_j Y <= b_j}`, any `lambda >= 0`,
//! `mu >= 0`, `s` with
//!
//! ```text
//! A_i^T lambda + s = 0,   A_j^T mu - s = 0,   |s| <= 1
//! ```
//!
//! gives the lower bound `-b_i^T lambda - b_j^T mu <= dist(P, Q)`, with
//! equality at the maximiser. The optimizer carries `(lambda, mu, s)` as
//! decision variables, so this module only evaluates residuals and their
//! derivatives; nothing here solves the dual problem.
//!
//! Rows of the constraint bundle used by the transcription, in order:
//! `[dual distance, eq_fwd.x, eq_fwd.y, eq_rev.x, eq_rev.y, s.s]`.

use serde::{Deserialize, Serialize};

use crate::error::DualityError;
use crate::geometry::{dot, norm, rotate, ConvexPolytope, Pose, Vec2};

pub const ROWS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBlock {
    pub lambda_fwd: Vec<f64>,
    pub lambda_rev: Vec<f64>,
    pub s: Vec2,
}

impl DualBlock {
    pub fn zeros(k_fwd: usize, k_rev: usize) -> Self {
        Self { lambda_fwd: vec![0.0; k_fwd], lambda_rev: vec![0.0; k_rev], s: [0.0; 2] }
    }

    pub fn len(&self) -> usize {
        self.lambda_fwd.len() + self.lambda_rev.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat layout `[lambda_fwd, lambda_rev, s]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.lambda_fwd);
        v.extend_from_slice(&self.lambda_rev);
        v.extend_from_slice(&self.s);
        v
    }

    pub fn from_slice(v: &[f64], k_fwd: usize, k_rev: usize) -> Self {
        Self {
            lambda_fwd: v[..k_fwd].to_vec(),
            lambda_rev: v[k_fwd..k_fwd + k_rev].to_vec(),
            s: [v[k_fwd + k_rev], v[k_fwd + k_rev + 1]],
        }
    }
}

/// Residual bundle of one avoidance pair. Feasibility means `gap >= 0`,
/// both equality residuals zero and `norm >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `-b_i^T lambda_fwd - b_j^T lambda_rev - d_min`.
    pub gap: f64,
    /// `A_i^T lambda_fwd + s`.
    pub eq_fwd: Vec2,
    /// `A_j^T lambda_rev - s`.
    pub eq_rev: Vec2,
    /// `1 - |s|`.
    pub norm: f64,
}

impl Residuals {
    pub fn equality_norm(&self) -> f64 {
        self.eq_fwd.iter().chain(&self.eq_rev).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn check_dims(p: &ConvexPolytope, q: &ConvexPolytope, d: &DualBlock) -> Result<(), DualityError> {
    if d.lambda_fwd.len() != p.face_count() || d.lambda_rev.len() != q.face_count() {
        return Err(DualityError::DimensionMismatch {
            fwd: d.lambda_fwd.len(),
            rev: d.lambda_rev.len(),
            faces_fwd: p.face_count(),
            faces_rev: q.face_count(),
        });
    }
    Ok(())
}

fn weighted_normals(p: &ConvexPolytope, lambda: &[f64]) -> Vec2 {
    p.normals().iter().zip(lambda).fold([0.0, 0.0], |acc, (n, l)| [acc[0] + l * n[0], acc[1] + l * n[1]])
}

fn weighted_offsets(p: &ConvexPolytope, lambda: &[f64]) -> f64 {
    p.offsets().iter().zip(lambda).map(|(b, l)| b * l).sum()
}

/// `-b_i^T lambda_fwd - b_j^T lambda_rev`, the distance lower bound the block certifies.
pub fn dual_distance(zi: &ConvexPolytope, zj: &ConvexPolytope, d: &DualBlock) -> Result<f64, DualityError> {
    check_dims(zi, zj, d)?;
    Ok(-weighted_offsets(zi, &d.lambda_fwd) - weighted_offsets(zj, &d.lambda_rev))
}

/// Residuals of the vehicle-vehicle avoidance constraints for posed polytopes.
pub fn pair_residuals(
    zi: &ConvexPolytope,
    zj: &ConvexPolytope,
    d: &DualBlock,
    d_min: f64,
) -> Result<Residuals, DualityError> {
    let dist = dual_distance(zi, zj, d)?;
    let ai = weighted_normals(zi, &d.lambda_fwd);
    let aj = weighted_normals(zj, &d.lambda_rev);
    Ok(Residuals {
        gap: dist - d_min,
        eq_fwd: [ai[0] + d.s[0], ai[1] + d.s[1]],
        eq_rev: [aj[0] - d.s[0], aj[1] - d.s[1]],
        norm: 1.0 - norm(d.s),
    })
}

/// Residuals of the vehicle-boundary avoidance constraints. Uses the same
/// sign convention as [`pair_residuals`]: `A_i^T lambda + s = 0`,
/// `A_r^T mu - s = 0`.
pub fn road_residuals(
    zi: &ConvexPolytope,
    boundary: &ConvexPolytope,
    d: &DualBlock,
    d_rmin: f64,
) -> Result<Residuals, DualityError> {
    pair_residuals(zi, boundary, d, d_rmin)
}

/// The line `normal . X = offset`, with the first polytope on the
/// nonpositive side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatingHyperplane {
    pub normal: Vec2,
    pub offset: f64,
}

impl SeparatingHyperplane {
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        dot(self.normal, p) - self.offset
    }

    /// Same geometric line seen from the other body.
    pub fn flipped(&self) -> Self {
        Self { normal: [-self.normal[0], -self.normal[1]], offset: -self.offset }
    }
}

/// Hyperplane certified by a feasible dual block.
///
/// The normal is `A_i^T lambda_fwd / |s|` (equivalently `-s / |s|`), pointing
/// from the first body towards the second. The block bounds the first body
/// by `n.X <= b_i^T lambda / |s|` and the second by
/// `n.Y >= -b_j^T mu / |s|`; the offset is the midpoint of those two values.
pub fn recover_hyperplane(
    zi: &ConvexPolytope,
    zj: &ConvexPolytope,
    d: &DualBlock,
) -> Result<SeparatingHyperplane, DualityError> {
    let res = pair_residuals(zi, zj, d, 0.0)?;
    let sn = norm(d.s);
    if sn < 1e-9 {
        return Err(DualityError::DegenerateDirection(sn));
    }
    if res.equality_norm() > 1e-6 {
        return Err(DualityError::NotSeparating(format!("equality residual {:.3e}", res.equality_norm())));
    }
    if res.gap <= 0.0 {
        return Err(DualityError::NotSeparating(format!("dual distance {:.3e} is not positive", res.gap)));
    }
    let normal = [-d.s[0] / sn, -d.s[1] / sn];
    let upper_i = weighted_offsets(zi, &d.lambda_fwd) / sn;
    let lower_j = -weighted_offsets(zj, &d.lambda_rev) / sn;
    Ok(SeparatingHyperplane { normal, offset: 0.5 * (upper_i + lower_j) })
}

/// `min b^T lambda  s.t.  A^T lambda = c, lambda >= 0` by enumerating every
/// basis of one or two faces. For a bounded polygon this is the support
/// value `max { c.X : A X <= b }`.
fn cheapest_combination(p: &ConvexPolytope, c: Vec2) -> (f64, Vec<f64>) {
    let n = p.normals();
    let b = p.offsets();
    let k = n.len();
    let mut best = (f64::INFINITY, vec![0.0; k]);
    let cn = norm(c);
    if cn == 0.0 {
        return (0.0, best.1);
    }
    for i in 0..k {
        // single face parallel to c
        let along = dot(n[i], c);
        if along > 0.0 && (along - cn).abs() <= 1e-12 * cn {
            let val = b[i] * cn;
            if val < best.0 {
                let mut l = vec![0.0; k];
                l[i] = cn;
                best = (val, l);
            }
        }
        for j in i + 1..k {
            let det = n[i][0] * n[j][1] - n[i][1] * n[j][0];
            if det.abs() < 1e-12 {
                continue;
            }
            let li = (c[0] * n[j][1] - c[1] * n[j][0]) / det;
            let lj = (n[i][0] * c[1] - n[i][1] * c[0]) / det;
            if li < -1e-14 || lj < -1e-14 {
                continue;
            }
            let (li, lj) = (li.max(0.0), lj.max(0.0));
            let val = b[i] * li + b[j] * lj;
            if val < best.0 {
                let mut l = vec![0.0; k];
                l[i] = li;
                l[j] = lj;
                best = (val, l);
            }
        }
    }
    best
}

/// Duals supported on the faces that touch each body's support point in
/// direction `u` (unit vector from the first body towards the second),
/// with `s = -u`. Equalities hold exactly by construction; the certified
/// distance equals the true distance when `u` is the optimal separating
/// direction.
pub fn face_aligned_duals(zi: &ConvexPolytope, zj: &ConvexPolytope, u: Vec2) -> DualBlock {
    let un = norm(u);
    let u = if un > 0.0 { [u[0] / un, u[1] / un] } else { [1.0, 0.0] };
    let (_, lambda_fwd) = cheapest_combination(zi, u);
    let (_, lambda_rev) = cheapest_combination(zj, [-u[0], -u[1]]);
    DualBlock { lambda_fwd, lambda_rev, s: [-u[0], -u[1]] }
}

/// One side of an avoidance block as seen by the derivative routines.
#[derive(Debug, Clone, Copy)]
pub enum Side<'a> {
    /// Body-frame polytope placed at a pose that is a decision variable.
    Moving { base: &'a ConvexPolytope, pose: Pose },
    /// World-frame polytope that does not move.
    Fixed(&'a ConvexPolytope),
}

impl Side<'_> {
    fn faces(&self) -> usize {
        match self {
            Side::Moving { base, .. } => base.face_count(),
            Side::Fixed(p) => p.face_count(),
        }
    }

    fn is_moving(&self) -> bool {
        matches!(self, Side::Moving { .. })
    }

    /// World-frame normals, their derivative w.r.t. heading, and world offsets.
    fn posed(&self) -> (Vec<Vec2>, Vec<Vec2>, Vec<f64>, Vec2) {
        match self {
            Side::Moving { base, pose } => {
                let p = pose.position();
                let n: Vec<Vec2> = base.normals().iter().map(|a| rotate(*a, pose.theta)).collect();
                let dn: Vec<Vec2> = n.iter().map(|v| [-v[1], v[0]]).collect();
                let b = n.iter().zip(base.offsets()).map(|(v, b)| b + dot(*v, p)).collect();
                (n, dn, b, p)
            }
            Side::Fixed(poly) => {
                let n = poly.normals().to_vec();
                let dn = vec![[0.0, 0.0]; n.len()];
                (n, dn, poly.offsets().to_vec(), [0.0, 0.0])
            }
        }
    }
}

/// Local variable layout of a block: `[pose_i(3), pose_j(3) if moving,
/// lambda_fwd, lambda_rev, s(2)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub faces_fwd: usize,
    pub faces_rev: usize,
    pub rev_moving: bool,
}

impl BlockLayout {
    pub fn new(first: &Side, second: &Side) -> Self {
        assert!(first.is_moving(), "first side of a block must be a vehicle");
        Self { faces_fwd: first.faces(), faces_rev: second.faces(), rev_moving: second.is_moving() }
    }

    pub fn pose_j(&self) -> usize {
        3
    }

    pub fn lambda_fwd(&self) -> usize {
        if self.rev_moving {
            6
        } else {
            3
        }
    }

    pub fn lambda_rev(&self) -> usize {
        self.lambda_fwd() + self.faces_fwd
    }

    pub fn s(&self) -> usize {
        self.lambda_rev() + self.faces_rev
    }

    pub fn len(&self) -> usize {
        self.s() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Structural nonzeros `(row, local variable)` of the block Jacobian.
    pub fn jacobian_pattern(&self) -> Vec<(usize, usize)> {
        let mut pat = Vec::new();
        let (lf, lr, s) = (self.lambda_fwd(), self.lambda_rev(), self.s());
        // dual distance
        pat.extend([(0, 0), (0, 1), (0, 2)]);
        if self.rev_moving {
            pat.extend([(0, 3), (0, 4), (0, 5)]);
        }
        pat.extend((0..self.faces_fwd).map(|k| (0, lf + k)));
        pat.extend((0..self.faces_rev).map(|k| (0, lr + k)));
        for c in 0..2 {
            pat.push((1 + c, 2));
            pat.extend((0..self.faces_fwd).map(|k| (1 + c, lf + k)));
            pat.push((1 + c, s + c));
        }
        for c in 0..2 {
            if self.rev_moving {
                pat.push((3 + c, 5));
            }
            pat.extend((0..self.faces_rev).map(|k| (3 + c, lr + k)));
            pat.push((3 + c, s + c));
        }
        pat.extend([(5, s), (5, s + 1)]);
        pat
    }

    /// Structural nonzeros `(a, b)`, `a >= b`, of any weighted block Hessian.
    pub fn hessian_pattern(&self) -> Vec<(usize, usize)> {
        let mut pat = Vec::new();
        let (lf, lr, s) = (self.lambda_fwd(), self.lambda_rev(), self.s());
        pat.extend([(2, 0), (2, 1), (2, 2)]);
        for k in 0..self.faces_fwd {
            pat.extend([(lf + k, 0), (lf + k, 1), (lf + k, 2)]);
        }
        if self.rev_moving {
            pat.extend([(5, 3), (5, 4), (5, 5)]);
            for k in 0..self.faces_rev {
                pat.extend([(lr + k, 3), (lr + k, 4), (lr + k, 5)]);
            }
        }
        pat.extend([(s, s), (s + 1, s + 1)]);
        pat
    }
}

/// Evaluates the six constraint rows of one block from its local variables.
pub struct BlockEval<'a> {
    pub layout: BlockLayout,
    first: Side<'a>,
    second: Side<'a>,
}

impl<'a> BlockEval<'a> {
    /// `first` must be [`Side::Moving`]; the pose stored in each side is
    /// ignored in favour of the local variable vector passed to each method.
    pub fn new(first: Side<'a>, second: Side<'a>) -> Self {
        Self { layout: BlockLayout::new(&first, &second), first, second }
    }

    fn with_poses(&self, local: &[f64]) -> (Side<'a>, Side<'a>) {
        let place = |side: &Side<'a>, at: usize| match side {
            Side::Moving { base, .. } => Side::Moving {
                base: *base,
                pose: Pose::new(local[at], local[at + 1], local[at + 2]),
            },
            Side::Fixed(p) => Side::Fixed(*p),
        };
        (place(&self.first, 0), place(&self.second, 3))
    }

    /// Constraint rows `[dual distance, eq_fwd, eq_rev, s.s]`.
    pub fn values(&self, local: &[f64]) -> [f64; ROWS] {
        let l = &self.layout;
        let (first, second) = self.with_poses(local);
        let (ni, _, bi, _) = first.posed();
        let (nj, _, bj, _) = second.posed();
        let lam = &local[l.lambda_fwd()..l.lambda_fwd() + l.faces_fwd];
        let mu = &local[l.lambda_rev()..l.lambda_rev() + l.faces_rev];
        let s = [local[l.s()], local[l.s() + 1]];
        let mut dist = 0.0;
        let mut ei = s;
        for k in 0..l.faces_fwd {
            dist -= bi[k] * lam[k];
            ei[0] += lam[k] * ni[k][0];
            ei[1] += lam[k] * ni[k][1];
        }
        let mut ej = [-s[0], -s[1]];
        for k in 0..l.faces_rev {
            dist -= bj[k] * mu[k];
            ej[0] += mu[k] * nj[k][0];
            ej[1] += mu[k] * nj[k][1];
        }
        [dist, ei[0], ei[1], ej[0], ej[1], s[0] * s[0] + s[1] * s[1]]
    }

    /// Jacobian values in the order of [`BlockLayout::jacobian_pattern`].
    pub fn jacobian(&self, local: &[f64], out: &mut Vec<f64>) {
        let l = &self.layout;
        let (first, second) = self.with_poses(local);
        let (ni, dni, bi, pi) = first.posed();
        let (nj, dnj, bj, pj) = second.posed();
        let lam = &local[l.lambda_fwd()..l.lambda_fwd() + l.faces_fwd];
        let mu = &local[l.lambda_rev()..l.lambda_rev() + l.faces_rev];
        let s = [local[l.s()], local[l.s() + 1]];
        let sum = |ns: &[Vec2], w: &[f64]| -> Vec2 {
            ns.iter().zip(w).fold([0.0, 0.0], |a, (n, w)| [a[0] + w * n[0], a[1] + w * n[1]])
        };
        let (ai, dai) = (sum(&ni, lam), sum(&dni, lam));
        let (aj, daj) = (sum(&nj, mu), sum(&dnj, mu));
        out.clear();
        // dual distance
        out.extend([-ai[0], -ai[1], -dot(dai, pi)]);
        if l.rev_moving {
            out.extend([-aj[0], -aj[1], -dot(daj, pj)]);
        }
        out.extend(bi.iter().map(|b| -b));
        out.extend(bj.iter().map(|b| -b));
        for c in 0..2 {
            out.push(dai[c]);
            out.extend(ni.iter().map(|n| n[c]));
            out.push(1.0);
        }
        for c in 0..2 {
            if l.rev_moving {
                out.push(daj[c]);
            }
            out.extend(nj.iter().map(|n| n[c]));
            out.push(-1.0);
        }
        out.extend([2.0 * s[0], 2.0 * s[1]]);
    }

    /// `sum_r w[r] * Hessian(row r)` in the order of [`BlockLayout::hessian_pattern`].
    pub fn hessian(&self, local: &[f64], w: &[f64; ROWS], out: &mut Vec<f64>) {
        let l = &self.layout;
        let (first, second) = self.with_poses(local);
        let lam = &local[l.lambda_fwd()..l.lambda_fwd() + l.faces_fwd];
        let mu = &local[l.lambda_rev()..l.lambda_rev() + l.faces_rev];
        out.clear();
        let side = |side: &Side, duals: &[f64], w_eq: Vec2, out: &mut Vec<f64>| {
            let (n, dn, _, p) = side.posed();
            let mut d_theta_p = [0.0; 2];
            let mut d_theta_theta = 0.0;
            for k in 0..n.len() {
                d_theta_p[0] -= w[0] * duals[k] * dn[k][0];
                d_theta_p[1] -= w[0] * duals[k] * dn[k][1];
                d_theta_theta += w[0] * duals[k] * dot(n[k], p) - duals[k] * dot(w_eq, n[k]);
            }
            out.extend([d_theta_p[0], d_theta_p[1], d_theta_theta]);
            let mut per_face = Vec::with_capacity(3 * n.len());
            for k in 0..n.len() {
                per_face.extend([-w[0] * n[k][0], -w[0] * n[k][1], -w[0] * dot(dn[k], p) + dot(w_eq, dn[k])]);
            }
            per_face
        };
        let fwd_faces = side(&first, lam, [w[1], w[2]], out);
        out.extend(fwd_faces);
        if l.rev_moving {
            let rev_faces = side(&second, mu, [w[3], w[4]], out);
            out.extend(rev_faces);
        }
        out.extend([2.0 * w[5], 2.0 * w[5]]);
    }
}

/// Local vector `[pose_i, pose_j?, duals]` for a block.
pub fn block_local(pose_i: &Pose, pose_j: Option<&Pose>, d: &DualBlock) -> Vec<f64> {
    let mut v = pose_i.to_array().to_vec();
    if let Some(pj) = pose_j {
        v.extend(pj.to_array());
    }
    v.extend(d.to_vec());
    v
}

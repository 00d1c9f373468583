//! Half-space polygons for vehicle bodies and road boundaries.
//!
//! A [`ConvexPolytope`] is the set `{X : A X <= b}` with unit-norm rows of
//! `A`, so each offset is a signed distance from the origin. The vertex
//! enumeration and [`min_distance_oracle`] here work purely in primal
//! terms; they are used to certify solutions independently of the dual
//! variables the optimizer carries.

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleParams;
use crate::error::GeometryError;

pub type Vec2 = [f64; 2];

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

/// Rotate `v` counter-clockwise by `theta`.
#[inline]
pub fn rotate(v: Vec2, theta: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Planar pose of a body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Vec2 {
        [self.x, self.y]
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self { x: a[0], y: a[1], theta: a[2] }
    }

    /// Map a body-frame point into the world frame.
    pub fn transform(&self, p: Vec2) -> Vec2 {
        let q = rotate(p, self.theta);
        [q[0] + self.x, q[1] + self.y]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolytope {
    normals: Vec<Vec2>,
    offsets: Vec<f64>,
}

impl ConvexPolytope {
    /// Builds `{X : A X <= b}` after normalising each row of `A`.
    pub fn new(normals: Vec<Vec2>, offsets: Vec<f64>) -> Result<Self, GeometryError> {
        if normals.len() != offsets.len() {
            return Err(GeometryError::LengthMismatch { normals: normals.len(), offsets: offsets.len() });
        }
        if normals.len() < 3 {
            return Err(GeometryError::TooFewFaces(normals.len()));
        }
        let mut a = Vec::with_capacity(normals.len());
        let mut b = Vec::with_capacity(offsets.len());
        for (k, (n, o)) in normals.iter().zip(&offsets).enumerate() {
            let len = norm(*n);
            if !(len.is_finite() && len > 1e-12) || !o.is_finite() {
                return Err(GeometryError::DegenerateNormal(k));
            }
            a.push([n[0] / len, n[1] / len]);
            b.push(o / len);
        }
        let poly = Self { normals: a, offsets: b };
        if !poly.is_bounded() || poly.vertices().len() < 3 || poly.area() <= 1e-12 {
            return Err(GeometryError::EmptyOrUnbounded);
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle centred at the origin. Rows are ordered
    /// `+x, -x, +y, -y`.
    pub fn rectangle(half_length: f64, half_width: f64) -> Result<Self, GeometryError> {
        Self::new(
            vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            vec![half_length, half_length, half_width, half_width],
        )
    }

    /// Axis-aligned box `[x0, x1] x [y0, y1]`, rows ordered like [`Self::rectangle`].
    pub fn axis_box(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::new(vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], vec![x1, -x0, y1, -y0])
    }

    pub fn face_count(&self) -> usize {
        self.normals.len()
    }

    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `A X <= b + tol` componentwise.
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        self.normals.iter().zip(&self.offsets).all(|(n, b)| dot(*n, p) <= b + tol)
    }

    /// Largest violated face value, i.e. a signed membership margin:
    /// negative inside, positive outside.
    pub fn max_face_value(&self, p: Vec2) -> f64 {
        self.normals.iter().zip(&self.offsets).map(|(n, b)| dot(*n, p) - b).fold(f64::NEG_INFINITY, f64::max)
    }

    fn is_bounded(&self) -> bool {
        let mut angles: Vec<f64> = self.normals.iter().map(|n| n[1].atan2(n[0])).collect();
        angles.sort_by(f64::total_cmp);
        let mut max_gap = angles[0] + 2.0 * std::f64::consts::PI - angles[angles.len() - 1];
        for w in angles.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        max_gap < std::f64::consts::PI - 1e-12
    }

    /// Vertices in counter-clockwise order, found by intersecting every pair
    /// of face lines and keeping the feasible points.
    pub fn vertices(&self) -> Vec<Vec2> {
        let k = self.normals.len();
        let scale = 1.0 + self.offsets.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        let tol = 1e-9 * scale;
        let mut pts: Vec<Vec2> = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                let (a, c) = (self.normals[i], self.normals[j]);
                let det = a[0] * c[1] - a[1] * c[0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let (bi, bj) = (self.offsets[i], self.offsets[j]);
                let p = [(bi * c[1] - a[1] * bj) / det, (a[0] * bj - c[0] * bi) / det];
                if self.contains(p, tol) && !pts.iter().any(|q| norm(sub(*q, p)) <= tol) {
                    pts.push(p);
                }
            }
        }
        if pts.is_empty() {
            return pts;
        }
        let n = pts.len() as f64;
        let c = pts.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0] / n, acc[1] + p[1] / n]);
        pts.sort_by(|p, q| {
            let ap = (p[1] - c[1]).atan2(p[0] - c[0]);
            let aq = (q[1] - c[1]).atan2(q[0] - c[0]);
            ap.total_cmp(&aq)
        });
        pts
    }

    /// Shoelace area of the vertex polygon.
    pub fn area(&self) -> f64 {
        shoelace(&self.vertices())
    }

    /// Image of the polytope under the rigid motion `X -> R(theta) X + p`:
    /// `A' = A R(theta)^T`, `b' = b + A R(theta)^T p`.
    pub fn at_pose(&self, z: &Pose) -> ConvexPolytope {
        let p = z.position();
        let normals: Vec<Vec2> = self.normals.iter().map(|n| rotate(*n, z.theta)).collect();
        let offsets = normals.iter().zip(&self.offsets).map(|(n, b)| b + dot(*n, p)).collect();
        ConvexPolytope { normals, offsets }
    }
}

pub fn shoelace(v: &[Vec2]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s.abs()
}

/// Body rectangle of a vehicle in its own frame (rows `+x, -x, +y, -y`).
pub fn base_body_polytope(params: &VehicleParams) -> ConvexPolytope {
    ConvexPolytope::rectangle(0.5 * params.length, 0.5 * params.width)
        .expect("validated vehicle dimensions give a valid rectangle")
}

pub fn polytope_at_pose(base: &ConvexPolytope, z: &Pose) -> ConvexPolytope {
    base.at_pose(z)
}

/// Four-arm junction whose drivable area is the cross `|x| <= w or |y| <= w`
/// clipped at `w + L`. The four square corner blocks, each of side `L`, are
/// the road boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionLayout {
    pub lane_width: f64,
    pub arm_length: f64,
    pub boundaries: Vec<ConvexPolytope>,
}

pub const BOUNDARY_NAMES: [&str; 4] = ["NE", "NW", "SW", "SE"];

impl IntersectionLayout {
    /// Half-extent of the modelled area, `w + L`.
    pub fn extent(&self) -> f64 {
        self.lane_width + self.arm_length
    }

    /// Index of the corner block containing `p`, if any.
    pub fn boundary_containing(&self, p: Vec2) -> Option<usize> {
        self.boundaries.iter().position(|o| o.contains(p, 0.0))
    }

    /// Road outline as a closed polyline (12 corners, counter-clockwise).
    pub fn road_outline(&self) -> Vec<Vec2> {
        let (w, e) = (self.lane_width, self.extent());
        vec![
            [w, -e],
            [w, -w],
            [e, -w],
            [e, w],
            [w, w],
            [w, e],
            [-w, e],
            [-w, w],
            [-e, w],
            [-e, -w],
            [-w, -w],
            [-w, -e],
        ]
    }
}

pub fn build_intersection(w: f64, l: f64) -> Result<IntersectionLayout, GeometryError> {
    if !(w > 0.0 && l > 0.0 && w.is_finite() && l.is_finite()) {
        return Err(GeometryError::InvalidLayout(format!("lane width {w} and arm length {l} must be positive")));
    }
    let e = w + l;
    let boundaries = vec![
        ConvexPolytope::axis_box(w, e, w, e)?,
        ConvexPolytope::axis_box(-e, -w, w, e)?,
        ConvexPolytope::axis_box(-e, -w, -e, -w)?,
        ConvexPolytope::axis_box(w, e, -e, -w)?,
    ];
    Ok(IntersectionLayout { lane_width: w, arm_length: l, boundaries })
}

fn point_segment(p: Vec2, a: Vec2, b: Vec2) -> (f64, Vec2) {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 { (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    (norm(sub(p, q)), q)
}

fn projections(v: &[Vec2], n: Vec2) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = dot(*p, n);
        (lo.min(d), hi.max(d))
    })
}

/// Closest points between two polygons, `(distance, point on P, point on Q)`.
/// Overlapping polygons give distance 0 and a pair of coincident points
/// inside the overlap when one is found, otherwise the two centroids.
pub fn closest_points(p: &ConvexPolytope, q: &ConvexPolytope) -> (f64, Vec2, Vec2) {
    let vp = p.vertices();
    let vq = q.vertices();
    let separated = p.normals().iter().chain(q.normals()).any(|n| {
        let (lp, hp) = projections(&vp, *n);
        let (lq, hq) = projections(&vq, *n);
        hp < lq || hq < lp
    });
    if !separated {
        let inside = vp.iter().find(|v| q.contains(**v, 1e-12)).or_else(|| vq.iter().find(|v| p.contains(**v, 1e-12)));
        let c = match inside {
            Some(v) => *v,
            None => {
                let cp = centroid(&vp);
                let cq = centroid(&vq);
                [(cp[0] + cq[0]) / 2.0, (cp[1] + cq[1]) / 2.0]
            }
        };
        return (0.0, c, c);
    }
    let mut best = (f64::INFINITY, [0.0; 2], [0.0; 2]);
    for a in &vp {
        for j in 0..vq.len() {
            let (d, c) = point_segment(*a, vq[j], vq[(j + 1) % vq.len()]);
            if d < best.0 {
                best = (d, *a, c);
            }
        }
    }
    for b in &vq {
        for i in 0..vp.len() {
            let (d, c) = point_segment(*b, vp[i], vp[(i + 1) % vp.len()]);
            if d < best.0 {
                best = (d, c, *b);
            }
        }
    }
    best
}

/// Exact Euclidean distance between two bounded polygons; zero iff they
/// intersect. Separation is decided by the separating-axis test, the
/// distance by enumerating every vertex-edge pair in both directions.
pub fn min_distance_oracle(p: &ConvexPolytope, q: &ConvexPolytope) -> f64 {
    closest_points(p, q).0
}

pub fn centroid(v: &[Vec2]) -> Vec2 {
    let n = v.len() as f64;
    v.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0] / n, acc[1] + p[1] / n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn unit_square_at(x: f64, y: f64) -> ConvexPolytope {
        ConvexPolytope::rectangle(0.5, 0.5).unwrap().at_pose(&Pose::new(x, y, 0.0))
    }

    #[test]
    fn base_body_rectangle() {
        let p = base_body_polytope(&VehicleParams::default());
        assert_eq!(p.offsets(), &[2.3, 2.3, 1.0, 1.0]);
        assert_eq!(p.normals(), &[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]);
        assert!(p.normals().iter().zip(p.offsets()).all(|(n, b)| dot(*n, [0.0, 0.0]) < *b));
        let active = p.normals().iter().zip(p.offsets()).filter(|(n, b)| (dot(**n, [2.3, 1.0]) - **b).abs() < 1e-15);
        assert_eq!(active.count(), 2);
        assert!(p.contains([2.3, 1.0], 1e-15));
    }

    #[test]
    fn rows_are_normalised() {
        let p = ConvexPolytope::new(vec![[2.0, 0.0], [-3.0, 0.0], [0.0, 4.0], [0.0, -0.5]], vec![2.0, 3.0, 4.0, 0.5])
            .unwrap();
        for (n, b) in p.normals().iter().zip(p.offsets()) {
            assert_relative_eq!(norm(*n), 1.0);
            assert_relative_eq!(*b, 1.0);
        }
    }

    #[test]
    fn rejects_bad_polytopes() {
        assert!(matches!(
            ConvexPolytope::new(vec![[1.0, 0.0], [-1.0, 0.0]], vec![1.0, 1.0]),
            Err(GeometryError::TooFewFaces(2))
        ));
        // open half-strip
        assert!(ConvexPolytope::new(vec![[1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], vec![1.0, 1.0, 1.0]).is_err());
        // empty
        assert!(ConvexPolytope::new(vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], vec![-1.0, -1.0, 1.0, 1.0])
            .is_err());
        assert!(ConvexPolytope::new(vec![[0.0, 0.0], [-1.0, 0.0], [0.0, 1.0]], vec![1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn identity_and_translation() {
        let base = ConvexPolytope::rectangle(2.3, 1.0).unwrap();
        assert_eq!(base.at_pose(&Pose::default()), base);
        let moved = base.at_pose(&Pose::new(1.0, 2.0, 0.0));
        assert_eq!(moved.normals(), base.normals());
        for ((b2, b), n) in moved.offsets().iter().zip(base.offsets()).zip(base.normals()) {
            assert_relative_eq!(*b2, b + dot(*n, [1.0, 2.0]));
        }
    }

    #[test]
    fn rotated_vertices_match_transformed_base() {
        let base = ConvexPolytope::rectangle(2.3, 1.0).unwrap();
        let z = Pose::new(1.0, 2.0, FRAC_PI_2);
        let got = base.at_pose(&z).vertices();
        let want: Vec<Vec2> = base.vertices().iter().map(|v| z.transform(*v)).collect();
        assert_eq!(got.len(), 4);
        for w in &want {
            assert!(got.iter().any(|g| norm(sub(*g, *w)) < 1e-12), "{w:?} missing from {got:?}");
        }
    }

    #[test]
    fn corner_blocks() {
        let lay = build_intersection(5.0, 30.0).unwrap();
        assert_eq!(lay.boundaries.len(), 4);
        assert_eq!(lay.boundary_containing([20.0, 20.0]), Some(0));
        assert_eq!(lay.boundary_containing([0.0, 0.0]), None);
        for i in 0..4 {
            for j in i + 1..4 {
                assert!(min_distance_oracle(&lay.boundaries[i], &lay.boundaries[j]) > 0.0);
            }
        }
    }

    #[test]
    fn membership_matches_direct_predicate() {
        let (w, l) = (5.0, 30.0);
        let lay = build_intersection(w, l).unwrap();
        let on_road = |p: Vec2| p[0].abs() <= w || p[1].abs() <= w;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut probes = vec![[6.0, 20.0]];
        for _ in 0..500 {
            probes.push([rng.gen_range(-35.0..35.0), rng.gen_range(-35.0..35.0)]);
        }
        for p in probes {
            let count = lay.boundaries.iter().filter(|o| o.contains(p, 0.0)).count();
            if on_road(p) {
                // boundary faces are closed, so points exactly on |x| = w count as both
                assert!(count == 0 || p[0].abs() == w || p[1].abs() == w);
            } else {
                assert_eq!(count, 1, "{p:?}");
            }
        }
    }

    #[test]
    fn face_gap_and_overlap() {
        assert_relative_eq!(min_distance_oracle(&unit_square_at(0.0, 0.0), &unit_square_at(3.0, 0.0)), 2.0);
        assert_eq!(min_distance_oracle(&unit_square_at(0.0, 0.0), &unit_square_at(0.6, 0.3)), 0.0);
        // containment counts as intersection
        let big = ConvexPolytope::rectangle(5.0, 5.0).unwrap();
        assert_eq!(min_distance_oracle(&big, &unit_square_at(1.0, 1.0)), 0.0);
    }

    #[test]
    fn analytic_configurations() {
        // diamond vertex facing a square face
        let diamond = ConvexPolytope::rectangle(0.5, 0.5).unwrap().at_pose(&Pose::new(3.0, 0.0, FRAC_PI_4));
        let d = min_distance_oracle(&unit_square_at(0.0, 0.0), &diamond);
        assert!((d - (3.0 - 0.5 - 0.5 * 2f64.sqrt())).abs() < 1e-9);
        // corner to corner along the diagonal
        let d = min_distance_oracle(&unit_square_at(0.0, 0.0), &unit_square_at(2.0, 2.0));
        assert!((d - 2f64.sqrt()).abs() < 1e-9);
        // offset so a corner faces an edge interior
        let d = min_distance_oracle(&unit_square_at(0.0, 0.0), &unit_square_at(1.7, 0.4));
        assert!((d - 0.7).abs() < 1e-9);
    }

    fn perimeter_point(v: &[Vec2], s: f64) -> Vec2 {
        // s in [0, 1) is a fraction of the perimeter
        let n = v.len();
        let lens: Vec<f64> = (0..n).map(|i| norm(sub(v[(i + 1) % n], v[i]))).collect();
        let total: f64 = lens.iter().sum();
        let mut t = s.rem_euclid(1.0) * total;
        for i in 0..n {
            if t <= lens[i] || i == n - 1 {
                let f = (t / lens[i]).min(1.0);
                let (a, b) = (v[i], v[(i + 1) % n]);
                return [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])];
            }
            t -= lens[i];
        }
        unreachable!()
    }

    /// Two-stage boundary sampling: a coarse sweep, then a zoomed sweep
    /// around the best coarse pair.
    fn sampled_distance(p: &ConvexPolytope, q: &ConvexPolytope) -> f64 {
        let (vp, vq) = (p.vertices(), q.vertices());
        let n = 800;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..n {
            let a = perimeter_point(&vp, i as f64 / n as f64);
            for j in 0..n {
                let b = perimeter_point(&vq, j as f64 / n as f64);
                let d = norm(sub(a, b));
                if d < best.0 {
                    best = (d, i as f64 / n as f64, j as f64 / n as f64);
                }
            }
        }
        let (_, si, sj) = best;
        let w = 2.0 / n as f64;
        let m = 800;
        for i in 0..=m {
            let a = perimeter_point(&vp, si - w + 2.0 * w * i as f64 / m as f64);
            for j in 0..=m {
                let b = perimeter_point(&vq, sj - w + 2.0 * w * j as f64 / m as f64);
                best.0 = best.0.min(norm(sub(a, b)));
            }
        }
        best.0
    }

    #[test]
    fn oracle_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let base = ConvexPolytope::rectangle(2.3, 1.0).unwrap();
        let mut checked = 0;
        while checked < 6 {
            let p = base.at_pose(&Pose::new(0.0, 0.0, rng.gen_range(-3.0..3.0)));
            let q = base.at_pose(&Pose::new(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), rng.gen_range(-3.0..3.0)));
            let d = min_distance_oracle(&p, &q);
            if d == 0.0 {
                continue;
            }
            let s = sampled_distance(&p, &q);
            assert!(d <= s + 1e-12, "oracle {d} above sampled {s}");
            assert!(s - d <= 1e-4, "oracle {d} sampled {s}");
            checked += 1;
        }
    }

    #[test]
    fn closest_points_realise_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = ConvexPolytope::rectangle(2.3, 1.0).unwrap();
        for _ in 0..100 {
            let p = base.at_pose(&Pose::new(0.0, 0.0, rng.gen_range(-3.0..3.0)));
            let q = base.at_pose(&Pose::new(rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0), rng.gen_range(-3.0..3.0)));
            let (d, a, b) = closest_points(&p, &q);
            assert!(p.contains(a, 1e-9) && q.contains(b, 1e-9));
            assert!((norm(sub(a, b)) - d).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn pose_preserves_area(x in -50.0..50.0f64, y in -50.0..50.0f64, th in -7.0..7.0f64,
                               hl in 0.5..5.0f64, hw in 0.3..3.0f64) {
            let base = ConvexPolytope::rectangle(hl, hw).unwrap();
            let moved = base.at_pose(&Pose::new(x, y, th));
            prop_assert!((moved.area() - base.area()).abs() < 1e-9);
            prop_assert!(moved.contains([x, y], 0.0));
            for n in moved.normals() {
                prop_assert!((norm(*n) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn oracle_is_symmetric(x in -10.0..10.0f64, y in -10.0..10.0f64, t1 in -3.2..3.2f64, t2 in -3.2..3.2f64) {
            let base = ConvexPolytope::rectangle(2.3, 1.0).unwrap();
            let p = base.at_pose(&Pose::new(0.0, 0.0, t1));
            let q = base.at_pose(&Pose::new(x, y, t2));
            prop_assert!((min_distance_oracle(&p, &q) - min_distance_oracle(&q, &p)).abs() < 1e-12);
        }

        #[test]
        fn translating_away_adds_distance(x in -10.0..10.0f64, y in -10.0..10.0f64,
                                          t1 in -3.2..3.2f64, t2 in -3.2..3.2f64, shift in 0.0..20.0f64) {
            let base = ConvexPolytope::rectangle(2.3, 1.0).unwrap();
            let p = base.at_pose(&Pose::new(0.0, 0.0, t1));
            let q = base.at_pose(&Pose::new(x, y, t2));
            let (d, a, b) = closest_points(&p, &q);
            prop_assume!(d > 1e-6);
            let dir = [(b[0] - a[0]) / d, (b[1] - a[1]) / d];
            let q2 = base.at_pose(&Pose::new(x + shift * dir[0], y + shift * dir[1], t2));
            prop_assert!((min_distance_oracle(&p, &q2) - (d + shift)).abs() < 1e-9);
        }
    }
}

//! Collocation nodes, differentiation matrix and quadrature weights on the
//! unit interval.

use serde::{Deserialize, Serialize};

use crate::error::TranscriptionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Radau IIA: the right end of each interval is a collocation point.
    #[default]
    Radau,
    /// Gauss-Legendre: interior points only; interval ends are extrapolated.
    Legendre,
}

/// Polynomial basis over `tau[0] = 0` and the `d` collocation points.
#[derive(Debug, Clone, PartialEq)]
pub struct Collocation {
    pub scheme: Scheme,
    pub degree: usize,
    /// `d + 1` basis points; `tau[0] = 0`.
    pub tau: Vec<f64>,
    /// `diff[l][j] = L_l'(tau[j + 1])`, the derivative of basis `l` at
    /// collocation point `j`.
    pub diff: Vec<Vec<f64>>,
    /// Quadrature weights of the `d` collocation points over `[0, 1]`.
    pub weights: Vec<f64>,
    /// `end[l] = L_l(1)`, used to continue the state across intervals.
    pub end: Vec<f64>,
}

/// Legendre polynomials `(P_d(x), P_{d-1}(x))` by the three-term recurrence.
fn legendre_pair(d: usize, x: f64) -> (f64, f64) {
    if d == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..d {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Roots of `f` on `[-1, 1]` by sign scanning and bisection; `include_right`
/// adds `x = 1` when it is a root.
fn roots_on_unit(f: impl Fn(f64) -> f64, count: usize, include_right: bool) -> Vec<f64> {
    let mut roots = Vec::with_capacity(count);
    let n = 20_000;
    let mut prev = -1.0;
    let mut fprev = f(prev);
    for i in 1..n {
        let x = -1.0 + 2.0 * i as f64 / n as f64;
        let fx = f(x);
        if fprev == 0.0 {
            roots.push(prev);
        } else if fprev * fx < 0.0 {
            let (mut a, mut b, mut fa) = (prev, x, fprev);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = f(m);
                if fm == 0.0 || (b - a) < 1e-17 {
                    a = m;
                    b = m;
                    break;
                }
                if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = x;
        fprev = fx;
    }
    if include_right {
        roots.push(1.0);
    }
    roots
}

/// Value of basis `l` over `pts` at `t`.
pub fn lagrange(pts: &[f64], l: usize, t: f64) -> f64 {
    pts.iter().enumerate().filter(|(m, _)| *m != l).map(|(_, p)| (t - p) / (pts[l] - p)).product()
}

/// Derivative of basis `l` over `pts` at `t`.
pub fn lagrange_derivative(pts: &[f64], l: usize, t: f64) -> f64 {
    let mut total = 0.0;
    for (m, pm) in pts.iter().enumerate() {
        if m == l {
            continue;
        }
        let mut term = 1.0 / (pts[l] - pm);
        for (q, pq) in pts.iter().enumerate() {
            if q != l && q != m {
                term *= (t - pq) / (pts[l] - pq);
            }
        }
        total += term;
    }
    total
}

/// `int_0^1 L_l(t) dt` by Gauss-Legendre quadrature on enough points to be exact.
fn integrate_basis(pts: &[f64], l: usize) -> f64 {
    let n = pts.len() + 1;
    let nodes = roots_on_unit(|x| legendre_pair(n, x).0, n, false);
    nodes
        .iter()
        .map(|x| {
            let (_, pm1) = legendre_pair(n, *x);
            // w = 2 (1 - x^2) / (n P_{n-1}(x))^2
            let w = 2.0 * (1.0 - x * x) / ((n as f64) * pm1).powi(2);
            0.5 * w * lagrange(pts, l, 0.5 * (x + 1.0))
        })
        .sum()
}

impl Collocation {
    pub fn new(scheme: Scheme, degree: usize) -> Result<Self, TranscriptionError> {
        if !(1..=9).contains(&degree) {
            return Err(TranscriptionError::InvalidConfig(format!("collocation degree {degree} outside 1..=9")));
        }
        let x = match scheme {
            Scheme::Radau => roots_on_unit(
                |x| {
                    let (p, q) = legendre_pair(degree, x);
                    p - q
                },
                degree - 1,
                true,
            ),
            Scheme::Legendre => roots_on_unit(|x| legendre_pair(degree, x).0, degree, false),
        };
        if x.len() != degree {
            return Err(TranscriptionError::InvalidConfig(format!("found {} collocation points for degree {degree}", x.len())));
        }
        let mut tau = vec![0.0];
        tau.extend(x.iter().map(|v| 0.5 * (v + 1.0)));
        let diff = (0..=degree)
            .map(|l| (1..=degree).map(|j| lagrange_derivative(&tau, l, tau[j])).collect())
            .collect();
        let colloc = &tau[1..];
        let weights = (0..degree).map(|j| integrate_basis(colloc, j)).collect();
        let end = (0..=degree).map(|l| lagrange(&tau, l, 1.0)).collect();
        Ok(Self { scheme, degree, tau, diff, weights, end })
    }

    pub fn radau(degree: usize) -> Result<Self, TranscriptionError> {
        Self::new(Scheme::Radau, degree)
    }

    pub fn legendre(degree: usize) -> Result<Self, TranscriptionError> {
        Self::new(Scheme::Legendre, degree)
    }

    /// Whether the last collocation point is the right end of the interval.
    pub fn ends_on_node(&self) -> bool {
        self.scheme == Scheme::Radau
    }

    /// Basis values at local time `t` in `[0, 1]`.
    pub fn basis(&self, t: f64) -> Vec<f64> {
        (0..=self.degree).map(|l| lagrange(&self.tau, l, t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn radau_points_match_tabulated_values() {
        let c = Collocation::radau(3).unwrap();
        // (4 -/+ sqrt 6) / 10 and 1
        assert_relative_eq!(c.tau[1], (4.0 - 6f64.sqrt()) / 10.0, epsilon = 1e-14);
        assert_relative_eq!(c.tau[2], (4.0 + 6f64.sqrt()) / 10.0, epsilon = 1e-14);
        assert_eq!(c.tau[3], 1.0);
        assert_relative_eq!(c.weights[0], (16.0 - 6f64.sqrt()) / 36.0, epsilon = 1e-14);
        assert_relative_eq!(c.weights[1], (16.0 + 6f64.sqrt()) / 36.0, epsilon = 1e-14);
        assert_relative_eq!(c.weights[2], 1.0 / 9.0, epsilon = 1e-14);
        let e = Collocation::radau(1).unwrap();
        assert_eq!(e.tau, vec![0.0, 1.0]);
        assert_relative_eq!(e.weights[0], 1.0);
    }

    #[test]
    fn legendre_points_match_tabulated_values() {
        let c = Collocation::legendre(2).unwrap();
        assert_relative_eq!(c.tau[1], 0.5 - 0.5 / 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(c.tau[2], 0.5 + 0.5 / 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(c.weights[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn differentiation_is_exact_on_polynomials() {
        for scheme in [Scheme::Radau, Scheme::Legendre] {
            for d in 1..=9 {
                let c = Collocation::new(scheme, d).unwrap();
                for p in 0..=d {
                    for j in 0..d {
                        let t = c.tau[j + 1];
                        let num: f64 = (0..=d).map(|l| c.diff[l][j] * c.tau[l].powi(p as i32)).sum();
                        let exact = if p == 0 { 0.0 } else { p as f64 * t.powi(p as i32 - 1) };
                        assert!((num - exact).abs() < 1e-8, "{scheme:?} d={d} p={p}: {num} vs {exact}");
                    }
                }
            }
        }
    }

    #[test]
    fn quadrature_order() {
        for d in 1..=9 {
            let r = Collocation::radau(d).unwrap();
            let g = Collocation::legendre(d).unwrap();
            for p in 0..(2 * d - 1) {
                let exact = 1.0 / (p as f64 + 1.0);
                let qr: f64 = (0..d).map(|j| r.weights[j] * r.tau[j + 1].powi(p as i32)).sum();
                assert!((qr - exact).abs() < 1e-12, "radau d={d} p={p}");
            }
            for p in 0..(2 * d) {
                let exact = 1.0 / (p as f64 + 1.0);
                let qg: f64 = (0..d).map(|j| g.weights[j] * g.tau[j + 1].powi(p as i32)).sum();
                assert!((qg - exact).abs() < 1e-12, "legendre d={d} p={p}");
            }
        }
    }

    #[test]
    fn end_weights() {
        let r = Collocation::radau(5).unwrap();
        assert!(r.ends_on_node());
        for (l, e) in r.end.iter().enumerate() {
            assert_relative_eq!(*e, if l == 5 { 1.0 } else { 0.0 }, epsilon = 1e-12);
        }
        let g = Collocation::legendre(4).unwrap();
        assert_relative_eq!(g.end.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_degree() {
        assert!(Collocation::radau(0).is_err());
        assert!(Collocation::radau(10).is_err());
    }
}

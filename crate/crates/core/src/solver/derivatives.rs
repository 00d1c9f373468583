//! Central finite-difference checks of analytic derivatives.

use serde::{Deserialize, Serialize};

use super::Nlp;

/// Step for central differences.
pub const FD_STEP: f64 = 1e-6;

/// Worst entry of one block: relative error `|an - fd| / max(|an|, |fd|, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockError {
    pub name: String,
    pub max_rel_error: f64,
    /// `(row, col)` of the worst entry; `col` is `None` when the difference
    /// appeared in a row with no structural entry in the perturbed group.
    pub worst_row: Option<usize>,
    pub worst_col: Option<usize>,
    pub analytic: f64,
    pub finite_difference: f64,
}

impl BlockError {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            max_rel_error: 0.0,
            worst_row: None,
            worst_col: None,
            analytic: 0.0,
            finite_difference: 0.0,
        }
    }

    fn record(&mut self, row: usize, col: Option<usize>, an: f64, fd: f64) {
        let err = rel_error(an, fd);
        if err > self.max_rel_error || err.is_nan() {
            self.max_rel_error = err;
            self.worst_row = Some(row);
            self.worst_col = col;
            self.analytic = an;
            self.finite_difference = fd;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub gradient: BlockError,
    /// One entry per named row block of the problem.
    pub jacobian: Vec<BlockError>,
}

impl DerivativeReport {
    pub fn max_rel_error(&self) -> f64 {
        self.jacobian.iter().map(|b| b.max_rel_error).fold(self.gradient.max_rel_error, f64::max)
    }

    /// Blocks whose error exceeds `tol`.
    pub fn flagged(&self, tol: f64) -> Vec<&BlockError> {
        std::iter::once(&self.gradient)
            .chain(&self.jacobian)
            .filter(|b| !(b.max_rel_error <= tol))
            .collect()
    }
}

pub fn rel_error(an: f64, fd: f64) -> f64 {
    (an - fd).abs() / an.abs().max(fd.abs()).max(1.0)
}

/// Greedy distance-1 coloring of the columns: columns sharing a row get
/// different colors.
pub fn color_columns(n: usize, m: usize, pattern: &[(usize, usize)]) -> Vec<usize> {
    let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(r, c) in pattern {
        row_cols[r].push(c);
        col_rows[c].push(r);
    }
    for v in row_cols.iter_mut().chain(col_rows.iter_mut()) {
        v.sort_unstable();
        v.dedup();
    }
    let mut color = vec![usize::MAX; n];
    let mut forbidden: Vec<usize> = Vec::new();
    for j in 0..n {
        for &r in &col_rows[j] {
            for &k in &row_cols[r] {
                if color[k] != usize::MAX {
                    if forbidden.len() <= color[k] {
                        forbidden.resize(color[k] + 1, usize::MAX);
                    }
                    forbidden[color[k]] = j;
                }
            }
        }
        color[j] = (0..).find(|&c| forbidden.get(c).map_or(true, |&f| f != j)).unwrap();
    }
    color
}

fn perturbation(x: &[f64], lo: &[f64], hi: &[f64], j: usize) -> (f64, f64) {
    // keep both evaluation points inside the bounds where possible
    let h = FD_STEP * x[j].abs().max(1.0);
    let up = (x[j] + h).min(hi[j]);
    let down = (x[j] - h).max(lo[j]);
    (up, down)
}

/// Compare the analytic gradient and Jacobian of `p` at `x` against central
/// differences, reporting the worst relative error per row block.
pub fn check_derivatives<P: Nlp + ?Sized>(p: &P, x: &[f64]) -> DerivativeReport {
    let n = p.num_variables();
    let m = p.num_constraints();
    let (lo, hi) = p.variable_bounds();

    let mut gradient = BlockError::new("objective");
    let mut grad = vec![0.0; n];
    p.gradient(x, &mut grad);
    let mut xp = x.to_vec();
    for j in 0..n {
        let (up, down) = perturbation(x, &lo, &hi, j);
        xp[j] = up;
        let fu = p.objective(&xp);
        xp[j] = down;
        let fd = p.objective(&xp);
        xp[j] = x[j];
        gradient.record(0, Some(j), grad[j], (fu - fd) / (up - down));
    }

    let blocks = p.row_blocks();
    let mut block_of = vec![0usize; m];
    for (b, (_, range)) in blocks.iter().enumerate() {
        for r in range.clone() {
            block_of[r] = b;
        }
    }
    let mut jacobian: Vec<BlockError> = blocks.iter().map(|(name, _)| BlockError::new(name)).collect();

    let pattern = p.jacobian_structure();
    let mut vals = vec![0.0; pattern.len()];
    p.jacobian_values(x, &mut vals);
    let color = color_columns(n, m, &pattern);
    let n_colors = color.iter().copied().max().map_or(0, |c| c + 1);
    let mut by_color: Vec<Vec<usize>> = vec![Vec::new(); n_colors];
    for (j, &c) in color.iter().enumerate() {
        by_color[c].push(j);
    }
    // analytic entries keyed by column, duplicates summed
    let mut col_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (&(r, c), v) in pattern.iter().zip(&vals) {
        match col_entries[c].iter_mut().find(|(rr, _)| *rr == r) {
            Some(e) => e.1 += v,
            None => col_entries[c].push((r, *v)),
        }
    }

    let mut gu = vec![0.0; m];
    let mut gd = vec![0.0; m];
    let mut owner = vec![usize::MAX; m];
    for cols in &by_color {
        let mut steps = Vec::with_capacity(cols.len());
        for &j in cols {
            let (up, down) = perturbation(x, &lo, &hi, j);
            steps.push((j, up, down));
        }
        for &(j, up, _) in &steps {
            xp[j] = up;
        }
        p.constraints(&xp, &mut gu);
        for &(j, _, down) in &steps {
            xp[j] = down;
        }
        p.constraints(&xp, &mut gd);
        for &(j, _, _) in &steps {
            xp[j] = x[j];
        }
        for &(j, _, _) in &steps {
            for &(r, _) in &col_entries[j] {
                owner[r] = j;
            }
        }
        for r in 0..m {
            let diff = gu[r] - gd[r];
            if owner[r] == usize::MAX {
                if diff != 0.0 {
                    // structural miss: attribute to the group's first column step
                    let (_, up, down) = steps[0];
                    jacobian[block_of[r]].record(r, None, 0.0, diff / (up - down));
                }
                continue;
            }
            let j = owner[r];
            let (_, up, down) = *steps.iter().find(|s| s.0 == j).unwrap();
            let an = col_entries[j].iter().find(|(rr, _)| *rr == r).unwrap().1;
            jacobian[block_of[r]].record(r, Some(j), an, diff / (up - down));
        }
        for &(j, _, _) in &steps {
            for &(r, _) in &col_entries[j] {
                owner[r] = usize::MAX;
            }
        }
    }
    DerivativeReport { gradient, jacobian }
}

/// Compare the analytic Lagrangian Hessian `sigma H_f + sum y_i H_gi` at
/// `x` against central differences of the Lagrangian gradient. Returns the
/// worst relative error over all entries of the lower triangle.
pub fn check_hessian<P: Nlp + ?Sized>(p: &P, x: &[f64], sigma: f64, y: &[f64]) -> BlockError {
    let n = p.num_variables();
    let (lo, hi) = p.variable_bounds();
    let pattern = p.hessian_structure();
    let mut vals = vec![0.0; pattern.len()];
    p.hessian_values(x, sigma, y, &mut vals);
    let mut dense_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut add = |r: usize, c: usize, v: f64| match dense_cols[c].iter_mut().find(|(rr, _)| *rr == r) {
        Some(e) => e.1 += v,
        None => dense_cols[c].push((r, v)),
    };
    for (&(r, c), v) in pattern.iter().zip(&vals) {
        add(r, c, *v);
        if r != c {
            add(c, r, *v);
        }
    }
    let full: Vec<(usize, usize)> = dense_cols
        .iter()
        .enumerate()
        .flat_map(|(c, e)| e.iter().map(move |(r, _)| (*r, c)))
        .collect();
    let color = color_columns(n, n, &full);
    let n_colors = color.iter().copied().max().map_or(0, |c| c + 1);

    let jac = p.jacobian_structure();
    let lag_grad = |xx: &[f64]| {
        let mut g = vec![0.0; n];
        p.gradient(xx, &mut g);
        for v in &mut g {
            *v *= sigma;
        }
        let mut jv = vec![0.0; jac.len()];
        p.jacobian_values(xx, &mut jv);
        for (&(r, c), v) in jac.iter().zip(&jv) {
            g[c] += y[r] * v;
        }
        g
    };

    let mut out = BlockError::new("hessian");
    let mut xp = x.to_vec();
    let mut owner = vec![usize::MAX; n];
    for col in 0..n_colors {
        let cols: Vec<usize> = (0..n).filter(|&j| color[j] == col).collect();
        let steps: Vec<(usize, f64, f64)> = cols
            .iter()
            .map(|&j| {
                let (u, d) = perturbation(x, &lo, &hi, j);
                (j, u, d)
            })
            .collect();
        for &(j, u, _) in &steps {
            xp[j] = u;
        }
        let gu = lag_grad(&xp);
        for &(j, _, d) in &steps {
            xp[j] = d;
        }
        let gd = lag_grad(&xp);
        for &(j, _, _) in &steps {
            xp[j] = x[j];
            for &(r, _) in &dense_cols[j] {
                owner[r] = j;
            }
        }
        for r in 0..n {
            let diff = gu[r] - gd[r];
            if owner[r] == usize::MAX {
                if diff != 0.0 {
                    let (_, u, d) = steps[0];
                    out.record(r, None, 0.0, diff / (u - d));
                }
                continue;
            }
            let j = owner[r];
            let (_, u, d) = *steps.iter().find(|s| s.0 == j).unwrap();
            let an = dense_cols[j].iter().find(|(rr, _)| *rr == r).unwrap().1;
            out.record(r, Some(j), an, diff / (u - d));
        }
        for &(j, _, _) in &steps {
            for &(r, _) in &dense_cols[j] {
                owner[r] = usize::MAX;
            }
        }
    }
    out
}

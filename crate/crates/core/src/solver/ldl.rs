//! Sparse `L D L^T` factorization of symmetric quasi-definite matrices.
//!
//! The fill-reducing ordering comes from approximate minimum degree; the
//! elimination tree and the up-looking numeric factorization (no pivoting)
//! are implemented here. Inertia is read off the signs of `D`.

use crate::error::SolverError;

const NONE: usize = usize::MAX;

/// Counts of positive and negative pivots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
}

/// Symmetric matrix given by lower- or upper-triangle triplets; duplicate
/// entries are summed. The pattern is analysed once and refactored with
/// new values.
#[derive(Debug, Clone)]
pub struct SparseLdl {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// Column pointers and row indices of the permuted upper triangle.
    ap: Vec<usize>,
    ai: Vec<usize>,
    /// Slot in `ax` for each input triplet.
    slot: Vec<usize>,
    ax: Vec<f64>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    /// Original triplets, for products with the unfactored matrix.
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl SparseLdl {
    /// Analyse the pattern `(rows[k], cols[k])`. Every diagonal entry must
    /// appear at least once.
    pub fn analyse(n: usize, rows: &[usize], cols: &[usize]) -> Result<Self, SolverError> {
        assert_eq!(rows.len(), cols.len());
        // full symmetric pattern for the ordering
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut has_diag = vec![false; n];
        for (&r, &c) in rows.iter().zip(cols) {
            if r == c {
                has_diag[r] = true;
            }
            adj[c].push(r);
            if r != c {
                adj[r].push(c);
            }
        }
        if let Some(i) = has_diag.iter().position(|h| !h) {
            return Err(SolverError::Factorization(format!("diagonal entry {i} missing from pattern")));
        }
        let mut cp = Vec::with_capacity(n + 1);
        let mut ci = Vec::new();
        cp.push(0);
        for col in adj.iter_mut() {
            col.sort_unstable();
            col.dedup();
            ci.extend_from_slice(col);
            cp.push(ci.len());
        }
        let (perm, pinv, _) = amd::order(n, &cp, &ci, &amd::Control::default())
            .map_err(|s| SolverError::Factorization(format!("ordering failed: {s:?}")))?;

        // permuted upper triangle
        let mut entries: Vec<(usize, usize, usize)> = rows
            .iter()
            .zip(cols)
            .enumerate()
            .map(|(k, (&r, &c))| {
                let (a, b) = (pinv[r], pinv[c]);
                (a.max(b), a.min(b), k)
            })
            .collect();
        // sort by column, then row
        entries.sort_unstable_by_key(|&(col, row, _)| (col, row));
        let mut ap = vec![0; n + 1];
        let mut ai = Vec::new();
        let mut slot = vec![0; rows.len()];
        let mut last = (NONE, NONE);
        for &(col, row, k) in &entries {
            if (col, row) != last {
                ai.push(row);
                ap[col + 1] += 1;
                last = (col, row);
            }
            slot[k] = ai.len() - 1;
        }
        for j in 0..n {
            ap[j + 1] += ap[j];
        }

        // elimination tree and column counts
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for k in 0..n {
            work[k] = k;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p];
                while i < k && work[i] != k {
                    if etree[i] == NONE {
                        etree[i] = k;
                    }
                    lnz[i] += 1;
                    work[i] = k;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let nnz = lp[n];
        let nz_a = ai.len();
        Ok(Self {
            n,
            perm,
            ap,
            ai,
            slot,
            ax: vec![0.0; nz_a],
            etree,
            lp,
            li: vec![0; nnz],
            lx: vec![0.0; nnz],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            rows: rows.to_vec(),
            cols: cols.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Factor the matrix with triplet values `vals`. Fails on a zero or
    /// non-finite pivot.
    pub fn factor(&mut self, vals: &[f64]) -> Result<Inertia, SolverError> {
        let n = self.n;
        self.ax.fill(0.0);
        for (k, v) in vals.iter().enumerate() {
            self.ax[self.slot[k]] += v;
        }
        let mut y_vals = vec![0.0; n];
        let mut y_used = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = self.lp[..n].to_vec();
        let mut inertia = Inertia::default();

        for k in 0..n {
            let mut nnz_y = 0;
            let mut dk = 0.0;
            for p in self.ap[k]..self.ap[k + 1] {
                let b = self.ai[p];
                if b == k {
                    dk = self.ax[p];
                    continue;
                }
                y_vals[b] = self.ax[p];
                if !y_used[b] {
                    y_used[b] = true;
                    elim[0] = b;
                    let mut n_e = 1;
                    let mut next = self.etree[b];
                    while next != NONE && next < k {
                        if y_used[next] {
                            break;
                        }
                        y_used[next] = true;
                        elim[n_e] = next;
                        n_e += 1;
                        next = self.etree[next];
                    }
                    while n_e > 0 {
                        n_e -= 1;
                        y_idx[nnz_y] = elim[n_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let tmp = next_space[c];
                let yc = y_vals[c];
                for j in self.lp[c]..tmp {
                    y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[tmp] = k;
                self.lx[tmp] = yc * self.dinv[c];
                dk -= yc * self.lx[tmp];
                next_space[c] += 1;
                y_vals[c] = 0.0;
                y_used[c] = false;
            }
            if !dk.is_finite() {
                return Err(SolverError::Factorization(format!("non-finite pivot at {k}")));
            }
            if dk == 0.0 {
                return Err(SolverError::Factorization(format!("zero pivot at {k}")));
            }
            if dk > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
            self.d[k] = dk;
            self.dinv[k] = 1.0 / dk;
        }
        Ok(inertia)
    }

    /// Solve `A x = b` in place with the current factors.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                xi -= self.lx[j] * x[self.li[j]];
            }
            x[i] = xi;
        }
        for i in 0..n {
            b[self.perm[i]] = x[i];
        }
    }

    /// `out = A v` for the symmetric matrix with triplet values `vals`.
    pub fn multiply(&self, vals: &[f64], v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for ((&r, &c), a) in self.rows.iter().zip(&self.cols).zip(vals) {
            out[r] += a * v[c];
            if r != c {
                out[c] += a * v[r];
            }
        }
    }

    /// Solve `M x = b` where `M` has values `vals_true`, using the current
    /// factors (of a nearby matrix) with iterative refinement. Returns the
    /// final relative residual.
    pub fn solve_refined(&self, vals_true: &[f64], b: &[f64], x: &mut [f64], max_steps: usize, rel_tol: f64) -> f64 {
        let n = self.n;
        x.copy_from_slice(b);
        self.solve_in_place(x);
        let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut r = vec![0.0; n];
        let mut rel = f64::INFINITY;
        for _ in 0..=max_steps {
            self.multiply(vals_true, x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            let xnorm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            rel = r.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (bnorm + xnorm);
            if rel <= rel_tol {
                break;
            }
            self.solve_in_place(&mut r);
            for i in 0..n {
                x[i] += r[i];
            }
        }
        rel
    }
}

use std::ops::Range;

/// A smooth nonlinear program
///
/// ```text
/// min f(x)  s.t.  g_l <= g(x) <= g_u,  x_l <= x <= x_u
/// ```
///
/// with sparse first and second derivatives. Rows with `g_l == g_u` are
/// equalities. Sparsity patterns are fixed; repeated `(row, col)` entries
/// are summed.
pub trait Nlp: Sync {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;

    /// `(x_l, x_u)`; infinite entries mean no bound.
    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>);
    /// `(g_l, g_u)`.
    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>);

    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    fn constraints(&self, x: &[f64], g: &mut [f64]);

    /// `(row, col)` of each Jacobian entry.
    fn jacobian_structure(&self) -> Vec<(usize, usize)>;
    fn jacobian_values(&self, x: &[f64], vals: &mut [f64]);

    /// `(row, col)` with `row >= col` of each entry of the Lagrangian Hessian.
    fn hessian_structure(&self) -> Vec<(usize, usize)>;
    /// Values of `sigma * H_f + sum_i y_i H_{g_i}`.
    fn hessian_values(&self, x: &[f64], sigma: f64, y: &[f64], vals: &mut [f64]);

    /// Named constraint row ranges, for diagnostics.
    fn row_blocks(&self) -> Vec<(String, Range<usize>)> {
        vec![("constraints".into(), 0..self.num_constraints())]
    }
}

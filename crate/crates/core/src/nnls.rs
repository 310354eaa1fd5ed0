//! Active-set least squares with a block of free variables.
//!
//! Solves `min ‖A z − b‖₂` where the first `n_free` entries of `z` are
//! unrestricted and the rest are constrained to `z ≥ 0`. This is the
//! Lawson–Hanson NNLS iteration with the free block kept permanently in the
//! passive set; subproblems are solved by SVD so rank-deficient column sets
//! give the minimum-norm solution instead of failing.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub z: DVector<f64>,
    /// `‖A z − b‖₂`
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NnlsNonConvergence;

fn passive_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..a.ncols()).filter(|&j| passive[j]).collect();
    let mut z = DVector::zeros(a.ncols());
    if cols.is_empty() {
        return z;
    }
    let sub = a.select_columns(&cols);
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (smax * 1e-12).max(f64::MIN_POSITIVE);
    let s = svd.solve(b, eps).expect("both factors were computed");
    for (k, &j) in cols.iter().enumerate() {
        z[j] = s[k];
    }
    z
}

/// See module docs. Returns an error if the active-set loop fails to settle
/// within `3·cols + 10` outer steps.
pub fn solve_nnls_with_free(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    n_free: usize,
) -> Result<NnlsSolution, NnlsNonConvergence> {
    let ncols = a.ncols();
    assert!(n_free <= ncols);
    assert_eq!(a.nrows(), b.len());

    let scale = a.norm() * b.norm().max(1.0);
    let tol = 1e-13 * scale.max(1e-300);

    let mut passive: Vec<bool> = (0..ncols).map(|j| j < n_free).collect();
    let mut z = passive_lstsq(a, b, &passive);
    let mut blocked = vec![false; ncols];
    let max_outer = 3 * ncols + 10;

    for iteration in 0..max_outer {
        let grad = a.transpose() * (b - a * &z);
        let entering = (n_free..ncols)
            .filter(|&j| !passive[j] && !blocked[j])
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(j) = entering.filter(|&j| grad[j] > tol) else {
            let residual_norm = (a * &z - b).norm();
            return Ok(NnlsSolution {
                z,
                residual_norm,
                iterations: iteration,
            });
        };

        passive[j] = true;
        let mut first = true;
        loop {
            let s = passive_lstsq(a, b, &passive);
            if first && s[j] <= 0.0 {
                // numerically useless direction; skip it until the active set changes
                passive[j] = false;
                blocked[j] = true;
                break;
            }
            first = false;
            let infeasible: Vec<usize> = (n_free..ncols).filter(|&q| passive[q] && s[q] <= 0.0).collect();
            if infeasible.is_empty() {
                z = s;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            let alpha = infeasible
                .iter()
                .map(|&q| z[q] / (z[q] - s[q]))
                .fold(f64::INFINITY, f64::min);
            z += (s - &z) * alpha;
            for q in n_free..ncols {
                if passive[q] && z[q] <= tol.max(f64::EPSILON * z[q].abs()) {
                    passive[q] = false;
                    z[q] = 0.0;
                }
            }
        }
    }
    Err(NnlsNonConvergence)
}

//! Sparse symmetric-positive-definite linear algebra: a CSR container and a
//! Jacobi-preconditioned conjugate gradient solver.

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: matrix is {n}x{n}, vector has length {len}")]
    DimensionMismatch { n: usize, len: usize },
}

/// Row-compressed sparse matrix. Assembled stiffness matrices are
/// structurally symmetric and, after Dirichlet elimination, SPD on the
/// free degrees of freedom.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Outcome of a conjugate gradient solve.
#[derive(Debug, Clone, Copy)]
pub struct CgReport {
    pub iterations: usize,
    /// Final true relative residual `||b - Ax|| / ||b||`.
    pub rel_residual: f64,
    pub converged: bool,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> SparseMatrix {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut rows = Vec::with_capacity(triplets.len());
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for &k in &order {
            let (i, j, v) = triplets[k];
            assert!(i < n && j < n, "triplet ({i},{j}) out of range for n={n}");
            if rows.last() == Some(&i) && col_idx.last() == Some(&j) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(i);
                col_idx.push(j);
                values.push(v);
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &i in &rows {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { n, row_ptr, col_idx, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.values[k];
                }
            }
        }
        d
    }

    /// y = A x.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.n {
            return Err(LinalgError::DimensionMismatch { n: self.n, len: x.len() });
        }
        let mut y = vec![0.0; self.n];
        // Rows are independent; the per-row sum order is fixed, so the result
        // does not depend on the thread count.
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        });
        Ok(y)
    }

    /// Entry lookup, zero when not stored. Intended for tests and audits.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.values[k];
            }
        }
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned conjugate gradients with a zero initial guess.
pub fn cg_solve(
    a: &SparseMatrix,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport), LinalgError> {
    let x0 = vec![0.0; a.n()];
    cg_solve_from(a, rhs, &x0, tol, max_iter)
}

/// Jacobi-preconditioned conjugate gradients starting from `x0`.
///
/// Convergence means the true relative residual `||b - Ax|| / ||b||` is at
/// most `tol`. Non-convergence (including a breakdown on an indefinite
/// matrix) is reported through [`CgReport::converged`], not as an error.
pub fn cg_solve_from(
    a: &SparseMatrix,
    rhs: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport), LinalgError> {
    cg_solve_observed(a, rhs, x0, tol, max_iter, |_| {})
}

/// As [`cg_solve_from`], invoking `observe` with the iterate after every
/// update. Used by diagnostics that track the energy-norm error history.
pub fn cg_solve_observed(
    a: &SparseMatrix,
    rhs: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(&[f64]),
) -> Result<(Vec<f64>, CgReport), LinalgError> {
    let n = a.n();
    if rhs.len() != n {
        return Err(LinalgError::DimensionMismatch { n, len: rhs.len() });
    }
    if x0.len() != n {
        return Err(LinalgError::DimensionMismatch { n, len: x0.len() });
    }
    if n == 0 {
        return Ok((Vec::new(), CgReport { iterations: 0, rel_residual: 0.0, converged: true }));
    }

    let b_norm = norm(rhs);
    if b_norm == 0.0 {
        let report = CgReport { iterations: 0, rel_residual: 0.0, converged: true };
        return Ok((vec![0.0; n], report));
    }

    let diag = a.diagonal();
    let precond = |r: &[f64]| -> Vec<f64> {
        r.iter()
            .zip(&diag)
            .map(|(ri, &di)| if di != 0.0 { ri / di } else { *ri })
            .collect()
    };

    let mut x = x0.to_vec();
    let mut iterations = 0;
    let mut healthy = true;
    let mut rel_residual = f64::INFINITY;

    // The recurrence residual drifts from the true one near convergence, so
    // restart from an exact residual when the recurrence claims success but
    // the true residual still misses the tolerance.
    'restart: for _ in 0..3 {
        let ax = a.spmv(&x)?;
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let before = iterations;

        loop {
            if iterations >= max_iter || norm(&r) <= tol * b_norm {
                break;
            }
            let ap = a.spmv(&p)?;
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                // Curvature is not positive: matrix is not SPD along p.
                healthy = false;
                break 'restart;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            observe(&x);
            z = precond(&r);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }

        let ax = a.spmv(&x)?;
        let true_res: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
        rel_residual = norm(&true_res) / b_norm;
        if rel_residual <= tol || iterations >= max_iter || iterations == before {
            break;
        }
    }

    let converged = healthy && rel_residual <= tol;
    Ok((x, CgReport { iterations, rel_residual, converged }))
}

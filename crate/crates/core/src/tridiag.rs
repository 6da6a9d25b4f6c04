//! LU factorisation of a tridiagonal matrix (Thomas algorithm).
//!
//! The time-stepping matrices are constant over a solve, so the
//! factorisation is computed once and reused for every step.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    // multipliers l[i] for rows 1..n (l[0] unused)
    lower: Vec<f64>,
    // pivots of U
    pivot: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalLu {
    /// Factorises the matrix with sub-diagonal `sub` (`sub[i]` couples row
    /// `i` to column `i-1`, `sub[0]` ignored), diagonal `diag` and
    /// super-diagonal `sup` (`sup[i]` couples row `i` to column `i+1`,
    /// last entry ignored).
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self> {
        let n = diag.len();
        assert!(
            sub.len() == n && sup.len() == n,
            "tridiagonal bands must have equal length"
        );
        let mut lower = vec![0.0; n];
        let mut pivot = vec![0.0; n];
        pivot[0] = diag[0];
        for i in 1..n {
            if pivot[i - 1] == 0.0 || !pivot[i - 1].is_finite() {
                return Err(Error::SingularSystem { row: i - 1 });
            }
            lower[i] = sub[i] / pivot[i - 1];
            pivot[i] = diag[i] - lower[i] * sup[i - 1];
        }
        if pivot[n - 1] == 0.0 || !pivot[n - 1].is_finite() {
            return Err(Error::SingularSystem { row: n - 1 });
        }
        Ok(Self {
            lower,
            pivot,
            upper: sup.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivot.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        for i in 1..n {
            rhs[i] -= self.lower[i] * rhs[i - 1];
        }
        rhs[n - 1] /= self.pivot[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.pivot[i];
        }
    }
}

/// y = A x for the tridiagonal A given by its bands.
pub fn tridiag_matvec(sub: &[f64], diag: &[f64], sup: &[f64], x: &[f64], y: &mut [f64]) {
    let n = diag.len();
    for i in 0..n {
        let mut acc = diag[i] * x[i];
        if i > 0 {
            acc += sub[i] * x[i - 1];
        }
        if i + 1 < n {
            acc += sup[i] * x[i + 1];
        }
        y[i] = acc;
    }
}

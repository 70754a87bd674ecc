//! Standard-form conic programs over free variables and PSD blocks.
//!
//! The program is
//!
//! ```text
//! minimize    <C, X> + c_f^T x_f
//! subject to  <A_i, X> + a_i^T x_f = b_i,   X = blockdiag(X_1, ..., X_k) PSD
//! ```
//!
//! Each PSD variable is addressed by its upper-triangular entry `(i, j)`,
//! `i <= j`. A row coefficient `c` on entry `(i, j)` with `i < j` multiplies
//! the single variable `X_ij = X_ji`, so the symmetric matrix `A_i` holds
//! `c / 2` in both positions.

mod compile;
mod ipm;
mod linalg;
mod presolve;
pub mod sdpa;

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use compile::{compile, Compiled, RowTag, VarLoc, TRACE_PENALTY};
pub use ipm::{solve, SolveOptions};

/// One PSD coefficient `coef * X[block][i][j]` with `i <= j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdEntry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub coef: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicRow {
    pub free: Vec<(usize, f64)>,
    pub psd: Vec<PsdEntry>,
    pub rhs: f64,
}

impl ConicRow {
    pub fn is_empty(&self) -> bool {
        self.free.is_empty() && self.psd.is_empty()
    }

    /// Largest absolute coefficient.
    pub fn norm_inf(&self) -> f64 {
        self.free
            .iter()
            .map(|&(_, c)| c.abs())
            .chain(self.psd.iter().map(|e| e.coef.abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicProgram {
    pub n_free: usize,
    pub blocks: Vec<usize>,
    pub rows: Vec<ConicRow>,
    pub cost_free: Vec<(usize, f64)>,
    pub cost_psd: Vec<PsdEntry>,
}

impl ConicProgram {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() && self.blocks.is_empty() && self.n_free == 0
    }

    /// Checks the structural invariants: indices in range, `i <= j`, rows
    /// nonempty (a row without variables is tolerated only when its
    /// right-hand side is nonzero, which makes the program infeasible).
    pub fn validate(&self) -> Result<(), String> {
        let check = |e: &PsdEntry| -> Result<(), String> {
            match self.blocks.get(e.block) {
                None => Err(format!("block {} out of range", e.block)),
                Some(&n) if e.i > e.j || e.j >= n => {
                    Err(format!("entry ({}, {}) invalid in block {} of side {n}", e.i, e.j, e.block))
                }
                _ => Ok(()),
            }
        };
        for (r, row) in self.rows.iter().enumerate() {
            if row.is_empty() && row.rhs == 0.0 {
                return Err(format!("row {r} is empty"));
            }
            for &(k, _) in &row.free {
                if k >= self.n_free {
                    return Err(format!("row {r}: free variable {k} out of range"));
                }
            }
            for e in &row.psd {
                check(e).map_err(|m| format!("row {r}: {m}"))?;
            }
        }
        for &(k, _) in &self.cost_free {
            if k >= self.n_free {
                return Err(format!("cost: free variable {k} out of range"));
            }
        }
        for e in &self.cost_psd {
            check(e).map_err(|m| format!("cost: {m}"))?;
        }
        Ok(())
    }

    /// `A z - b` for a candidate point.
    pub fn residuals(&self, free: &[f64], psd: &[DMatrix<f64>]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                let mut s = -row.rhs;
                for &(k, c) in &row.free {
                    s += c * free[k];
                }
                for e in &row.psd {
                    s += e.coef * psd[e.block][(e.i, e.j)];
                }
                s
            })
            .collect()
    }

    pub fn objective(&self, free: &[f64], psd: &[DMatrix<f64>]) -> f64 {
        let mut s = 0.0;
        for &(k, c) in &self.cost_free {
            s += c * free[k];
        }
        for e in &self.cost_psd {
            s += e.coef * psd[e.block][(e.i, e.j)];
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// No point satisfies the constraints (primal infeasibility certificate).
    Infeasible,
    /// The objective is unbounded below (dual infeasibility certificate).
    Unbounded,
    MaxIter,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for SolveStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "Optimal" => SolveStatus::Optimal,
            "Infeasible" => SolveStatus::Infeasible,
            "Unbounded" => SolveStatus::Unbounded,
            "MaxIter" => SolveStatus::MaxIter,
            "NumericalFailure" => SolveStatus::NumericalFailure,
            other => return Err(format!("unknown solver status {other:?}")),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub status: SolveStatus,
    pub free_values: Vec<f64>,
    pub psd_matrices: Vec<DMatrix<f64>>,
    /// Equality multipliers, one per row of the original program.
    pub dual: Vec<f64>,
    /// `max |A z - b|` over the original rows.
    pub primal_residual: f64,
    /// Relative dual residual of the scaled problem.
    pub dual_residual: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub min_eigenvalues: Vec<f64>,
    pub iterations: usize,
}

impl Solution {
    pub(crate) fn empty(cp: &ConicProgram, status: SolveStatus) -> Self {
        Solution {
            status,
            free_values: vec![0.0; cp.n_free],
            psd_matrices: cp.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
            dual: vec![0.0; cp.rows.len()],
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            min_eigenvalues: cp.blocks.iter().map(|_| f64::NAN).collect(),
            iterations: 0,
        }
    }

    /// Recomputes residual, objective and eigenvalue fields from the point.
    pub(crate) fn refresh(&mut self, cp: &ConicProgram) {
        self.primal_residual = cp
            .residuals(&self.free_values, &self.psd_matrices)
            .iter()
            .fold(0.0, |a, r| a.max(r.abs()));
        self.primal_objective = cp.objective(&self.free_values, &self.psd_matrices);
        self.min_eigenvalues = self.psd_matrices.iter().map(linalg::min_eigenvalue).collect();
    }

    /// Compact, stable one-line description.
    pub fn summary(&self) -> String {
        let min_eig = self
            .min_eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        format!(
            "status={} iterations={} primal_residual={:.6e} dual_residual={:.6e} primal_objective={:.12e} min_eigenvalue={:.6e}",
            self.status,
            self.iterations,
            self.primal_residual,
            self.dual_residual,
            self.primal_objective,
            min_eig
        )
    }
}

pub use linalg::min_eigenvalue;

use nalgebra::DMatrix;

use super::{ConicProgram, ConicRow, PsdEntry, Solution};
use crate::poly::{Monomial, Polynomial};
use crate::soscomp::{AffinePolyExpr, SosProgram, VarId, VarKind};

/// Weight of the trace penalty used as the objective of feasibility programs.
pub const TRACE_PENALTY: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarLoc {
    Free(usize),
    Psd { block: usize, i: usize, j: usize },
}

/// Origin of a compiled row: the constraint and the monomial whose
/// coefficient it matches.
#[derive(Clone, Debug, PartialEq)]
pub struct RowTag {
    pub constraint: String,
    pub monomial: Monomial,
}

#[derive(Clone, Debug)]
pub struct Compiled {
    pub program: ConicProgram,
    pub var_loc: Vec<VarLoc>,
    pub row_tags: Vec<RowTag>,
}

impl Compiled {
    pub fn value(&self, sol: &Solution, v: VarId) -> f64 {
        match self.var_loc[v.0] {
            VarLoc::Free(k) => sol.free_values[k],
            VarLoc::Psd { block, i, j } => sol.psd_matrices[block][(i, j)],
        }
    }

    /// Substitutes a solution into an expression.
    pub fn evaluate(&self, sol: &Solution, expr: &AffinePolyExpr) -> Polynomial {
        expr.evaluate_with(|v| self.value(sol, v))
    }

    pub fn gram(&self, sol: &Solution, block: usize) -> DMatrix<f64> {
        sol.psd_matrices[block].clone()
    }
}

/// Expands every constraint of `prog` into scalar rows, one per monomial.
///
/// SOS constraints produce `expr - v^T Q v = 0` rows, zero constraints
/// `expr = 0` rows. Rows with no variables and a zero right-hand side are
/// dropped; rows with no variables and a nonzero right-hand side are kept
/// so that the solver reports the program infeasible.
pub fn compile(prog: &SosProgram) -> Compiled {
    let mut var_loc = Vec::with_capacity(prog.vars().len());
    let mut n_free = 0;
    for kind in prog.vars() {
        var_loc.push(match *kind {
            VarKind::Free => {
                n_free += 1;
                VarLoc::Free(n_free - 1)
            }
            VarKind::Gram { block, i, j } => VarLoc::Psd { block, i, j },
        });
    }

    let mut rows = Vec::new();
    let mut row_tags = Vec::new();
    let mut push = |name: &str, m: Monomial, vars: Vec<(VarId, f64)>, constant: f64| {
        let mut row = ConicRow {
            rhs: -constant,
            ..Default::default()
        };
        for (v, c) in vars {
            match var_loc[v.0] {
                VarLoc::Free(k) => row.free.push((k, c)),
                VarLoc::Psd { block, i, j } => row.psd.push(PsdEntry { block, i, j, coef: c }),
            }
        }
        if row.is_empty() && row.rhs == 0.0 {
            return;
        }
        rows.push(row);
        row_tags.push(RowTag {
            constraint: name.to_string(),
            monomial: m,
        });
    };
    for c in prog.sos_constraints() {
        for (m, (vars, k)) in prog.sos_rows(c) {
            push(&c.name, m, vars, k);
        }
    }
    for c in prog.zero_constraints() {
        for (m, (vars, k)) in c.expr.coefficient_rows() {
            push(&c.name, m, vars, k);
        }
    }

    let blocks: Vec<usize> = prog.blocks().iter().map(|b| b.side).collect();
    let cost_psd = blocks
        .iter()
        .enumerate()
        .flat_map(|(b, &n)| {
            (0..n).map(move |i| PsdEntry {
                block: b,
                i,
                j: i,
                coef: TRACE_PENALTY,
            })
        })
        .collect();
    Compiled {
        program: ConicProgram {
            n_free,
            blocks,
            rows,
            cost_free: Vec::new(),
            cost_psd,
        },
        var_loc,
        row_tags,
    }
}

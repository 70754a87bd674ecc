//! Removal of linearly dependent equality rows.
//!
//! A row owning a column that no other row touches can never be a
//! combination of other rows, so only the remaining rows go through
//! Gaussian elimination on `[A | b]`.

use std::collections::HashMap;

use super::ConicProgram;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Presolve {
    /// Indices of the rows to keep, in original order.
    Keep(Vec<usize>),
    /// Row `row` is a combination of earlier rows with a different
    /// right-hand side.
    Inconsistent { row: usize },
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Col {
    Free(usize),
    Psd(usize, usize, usize),
}

fn row_cols(cp: &ConicProgram, r: usize) -> impl Iterator<Item = (Col, f64)> + '_ {
    let row = &cp.rows[r];
    row.free
        .iter()
        .map(|&(k, c)| (Col::Free(k), c))
        .chain(row.psd.iter().map(|e| (Col::Psd(e.block, e.i, e.j), e.coef)))
}

pub(crate) fn presolve(cp: &ConicProgram, tol: f64) -> Presolve {
    let mut count: HashMap<Col, usize> = HashMap::new();
    for r in 0..cp.rows.len() {
        for (c, _) in row_cols(cp, r) {
            *count.entry(c).or_insert(0) += 1;
        }
    }
    let mut keep = vec![false; cp.rows.len()];
    let mut candidates = Vec::new();
    for (r, row) in cp.rows.iter().enumerate() {
        if row.is_empty() {
            if row.rhs.abs() > tol {
                return Presolve::Inconsistent { row: r };
            }
            continue;
        }
        if row_cols(cp, r).any(|(c, _)| count[&c] == 1) {
            keep[r] = true;
        } else {
            candidates.push(r);
        }
    }

    // Dense elimination restricted to the columns the candidates use.
    let mut col_index: HashMap<Col, usize> = HashMap::new();
    for &r in &candidates {
        for (c, _) in row_cols(cp, r) {
            let n = col_index.len();
            col_index.entry(c).or_insert(n);
        }
    }
    let ncols = col_index.len();
    let mut pivots: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    for &r in &candidates {
        let mut v = vec![0.0; ncols];
        for (c, a) in row_cols(cp, r) {
            v[col_index[&c]] += a;
        }
        let mut rhs = cp.rows[r].rhs;
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for (pc, prow, prhs) in &pivots {
            let f = v[*pc];
            if f != 0.0 {
                for (x, p) in v.iter_mut().zip(prow) {
                    *x -= f * p;
                }
                rhs -= f * prhs;
            }
        }
        let (best, mag) = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bm), (i, x)| if x.abs() > bm { (i, x.abs()) } else { (bi, bm) });
        if mag <= 1e-9 * scale {
            if rhs.abs() > tol * (1.0 + cp.rows[r].rhs.abs()).max(scale) {
                return Presolve::Inconsistent { row: r };
            }
            continue;
        }
        let inv = 1.0 / v[best];
        for x in v.iter_mut() {
            *x *= inv;
        }
        pivots.push((best, v, rhs * inv));
        keep[r] = true;
    }
    Presolve::Keep((0..cp.rows.len()).filter(|&r| keep[r]).collect())
}

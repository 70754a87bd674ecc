//! Homogeneous self-dual primal-dual interior-point method with
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector.
//!
//! The embedding works on `(X, x_f, y, S, tau, kappa)` with residuals
//!
//! ```text
//! L_p = A(X) + A_f x_f - b tau
//! L_d = A*(y) + S - C tau
//! L_f = A_f^T y - c_f tau
//! L_g = b^T y - <C, X> - c_f^T x_f - kappa
//! ```
//!
//! and declares infeasibility when `tau / kappa` collapses.

use nalgebra::{DMatrix, DVector, SVD};

use super::linalg::{backward_sub_t, dot, forward_sub, min_eigenvalue, norm_inf, norm_inf_mat, symmetrize};
use super::presolve::{presolve, Presolve};
use super::{ConicProgram, Solution, SolveStatus};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// A row index with its `(i, j, coef)` entries in one block.
type RowEntries = (usize, Vec<(usize, usize, f64)>);

const INFEASIBILITY_RATIO: f64 = 1e-6;
const STEP_FRACTION: f64 = 0.99;

/// Scaled, presolved problem data.
struct Problem {
    m: usize,
    nf: usize,
    blocks: Vec<usize>,
    row_free: Vec<Vec<(usize, f64)>>,
    /// Full symmetric entries `(block, p, q, a)`; off-diagonals appear twice.
    row_psd: Vec<Vec<(usize, usize, usize, f64)>>,
    b: DVector<f64>,
    c_blocks: Vec<DMatrix<f64>>,
    c_free: DVector<f64>,
    /// Per block: rows touching it with their entries in that block.
    block_entries: Vec<Vec<RowEntries>>,
    /// Rows with PSD entries grouped into connected components.
    comps: Vec<Vec<usize>>,
    /// `(component, local index)` for rows with PSD entries.
    row_comp: Vec<Option<(usize, usize)>>,
    /// Rows without PSD entries.
    f_rows: Vec<usize>,
    /// Original row index and scale factor of each kept row.
    origin: Vec<(usize, f64)>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl Problem {
    fn new(cp: &ConicProgram, keep: &[usize]) -> Self {
        let m = keep.len();
        let nb = cp.blocks.len();
        let mut row_free = Vec::with_capacity(m);
        let mut row_psd = Vec::with_capacity(m);
        let mut b = DVector::zeros(m);
        let mut origin = Vec::with_capacity(m);
        for (k, &r) in keep.iter().enumerate() {
            let row = &cp.rows[r];
            let s = 1.0 / row.norm_inf();
            row_free.push(row.free.iter().map(|&(j, c)| (j, c * s)).collect::<Vec<_>>());
            let mut e = Vec::with_capacity(2 * row.psd.len());
            for p in &row.psd {
                if p.i == p.j {
                    e.push((p.block, p.i, p.i, p.coef * s));
                } else {
                    e.push((p.block, p.i, p.j, 0.5 * p.coef * s));
                    e.push((p.block, p.j, p.i, 0.5 * p.coef * s));
                }
            }
            row_psd.push(e);
            b[k] = row.rhs * s;
            origin.push((r, s));
        }
        let mut c_blocks: Vec<DMatrix<f64>> = cp.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for e in &cp.cost_psd {
            if e.i == e.j {
                c_blocks[e.block][(e.i, e.i)] += e.coef;
            } else {
                c_blocks[e.block][(e.i, e.j)] += 0.5 * e.coef;
                c_blocks[e.block][(e.j, e.i)] += 0.5 * e.coef;
            }
        }
        let mut c_free = DVector::zeros(cp.n_free);
        for &(k, c) in &cp.cost_free {
            c_free[k] += c;
        }

        let mut block_entries: Vec<Vec<RowEntries>> = vec![Vec::new(); nb];
        for (r, entries) in row_psd.iter().enumerate() {
            let mut per_block: Vec<RowEntries> = Vec::new();
            for &(blk, p, q, a) in entries {
                match per_block.iter_mut().find(|(bb, _)| *bb == blk) {
                    Some((_, v)) => v.push((p, q, a)),
                    None => per_block.push((blk, vec![(p, q, a)])),
                }
            }
            for (blk, v) in per_block {
                block_entries[blk].push((r, v));
            }
        }

        // Rows sharing a block belong to the same component.
        let mut parent: Vec<usize> = (0..m).collect();
        for list in &block_entries {
            if let Some(&(first, _)) = list.first() {
                for &(r, _) in &list[1..] {
                    let (a, c) = (find(&mut parent, first), find(&mut parent, r));
                    if a != c {
                        parent[c] = a;
                    }
                }
            }
        }
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut root_comp: Vec<Option<usize>> = vec![None; m];
        let mut row_comp = vec![None; m];
        let mut f_rows = Vec::new();
        for r in 0..m {
            if row_psd[r].is_empty() {
                f_rows.push(r);
                continue;
            }
            let root = find(&mut parent, r);
            let c = match root_comp[root] {
                Some(c) => c,
                None => {
                    comps.push(Vec::new());
                    root_comp[root] = Some(comps.len() - 1);
                    comps.len() - 1
                }
            };
            row_comp[r] = Some((c, comps[c].len()));
            comps[c].push(r);
        }

        Problem {
            m,
            nf: cp.n_free,
            blocks: cp.blocks.clone(),
            row_free,
            row_psd,
            b,
            c_blocks,
            c_free,
            block_entries,
            comps,
            row_comp,
            f_rows,
            origin,
        }
    }

    fn a_psd(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.m,
            self.row_psd
                .iter()
                .map(|e| e.iter().map(|&(blk, p, q, a)| a * x[blk][(p, q)]).sum::<f64>()),
        )
    }

    fn a_free(&self, xf: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.m,
            self.row_free
                .iter()
                .map(|e| e.iter().map(|&(k, a)| a * xf[k]).sum::<f64>()),
        )
    }

    fn a_free_t(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.nf);
        for (r, e) in self.row_free.iter().enumerate() {
            for &(k, a) in e {
                out[k] += a * y[r];
            }
        }
        out
    }

    fn a_psd_t(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (r, e) in self.row_psd.iter().enumerate() {
            for &(blk, p, q, a) in e {
                out[blk][(p, q)] += a * y[r];
            }
        }
        out
    }

    fn cost(&self, x: &[DMatrix<f64>], xf: &DVector<f64>) -> f64 {
        x.iter().zip(&self.c_blocks).map(|(a, c)| dot(a, c)).sum::<f64>() + self.c_free.dot(xf)
    }
}

/// Nesterov-Todd scaling of one block: `R^T S R = R^{-1} X R^{-T} = diag(lambda)`.
struct BlockScaling {
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    n: DMatrix<f64>,
    lambda: DVector<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<BlockScaling> {
    let lx = x.clone().cholesky()?.l();
    let ls = s.clone().cholesky()?.l();
    let g = ls.transpose() * &lx;
    let svd = SVD::new(g, false, true);
    let v_t = svd.v_t?;
    let lambda = svd.singular_values;
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return None;
    }
    let inv_sqrt = DMatrix::from_diagonal(&lambda.map(|l| 1.0 / l.sqrt()));
    let sqrt = DMatrix::from_diagonal(&lambda.map(f64::sqrt));
    let r = &lx * v_t.transpose() * inv_sqrt;
    // R^{-1} = Lambda^{1/2} V^T L_X^{-1}
    let lx_inv = lx.clone().try_inverse()?;
    let r_inv = sqrt * v_t * lx_inv;
    let n = &r * r.transpose();
    Some(BlockScaling { r, r_inv, n, lambda })
}

/// Largest `a` with `Lambda + a * D` PSD, where `D` is in scaled coordinates.
fn max_step(lambda: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let n = lambda.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let mut t = d.clone();
    for i in 0..n {
        for j in 0..n {
            t[(i, j)] /= (lambda[i] * lambda[j]).sqrt();
        }
    }
    let e = min_eigenvalue(&t);
    if e >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / e
    }
}

/// Factorization of `[M A_f; A_f^T 0]`.
struct Kkt {
    m_comp: Vec<DMatrix<f64>>,
    l_comp: Vec<DMatrix<f64>>,
    w_comp: Vec<DMatrix<f64>>,
    saddle: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Kkt {
    fn build(p: &Problem, sc: &[BlockScaling]) -> Option<Kkt> {
        let mut m_comp: Vec<DMatrix<f64>> = p.comps.iter().map(|c| DMatrix::zeros(c.len(), c.len())).collect();
        for (blk, list) in p.block_entries.iter().enumerate() {
            let nm = &sc[blk].n;
            for (k1, (r1, e1)) in list.iter().enumerate() {
                let (c, l1) = p.row_comp[*r1].expect("psd row");
                for (r2, e2) in &list[k1..] {
                    let (_, l2) = p.row_comp[*r2].expect("psd row");
                    let mut s = 0.0;
                    for &(p1, q1, a1) in e1 {
                        for &(p2, q2, a2) in e2 {
                            s += a1 * a2 * nm[(p1, p2)] * nm[(q1, q2)];
                        }
                    }
                    m_comp[c][(l1, l2)] += s;
                    if l1 != l2 {
                        m_comp[c][(l2, l1)] += s;
                    }
                }
            }
        }
        let nf = p.nf;
        let mut l_comp = Vec::with_capacity(m_comp.len());
        let mut w_comp = Vec::with_capacity(m_comp.len());
        let mut schur = DMatrix::<f64>::zeros(nf, nf);
        for (c, mc) in m_comp.iter().enumerate() {
            let scale = mc.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
            let mut chol = None;
            for k in 0..4 {
                let reg = scale * 1e-13 * 1e3f64.powi(k);
                let mut a = mc.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] += reg;
                }
                if let Some(ch) = a.cholesky() {
                    chol = Some(ch.l());
                    break;
                }
            }
            let l = chol?;
            let rows = &p.comps[c];
            let mut w = DMatrix::<f64>::zeros(rows.len(), nf);
            for (li, &r) in rows.iter().enumerate() {
                for &(k, a) in &p.row_free[r] {
                    w[(li, k)] += a;
                }
            }
            if nf > 0 {
                for j in 0..nf {
                    let mut col: Vec<f64> = w.column(j).iter().copied().collect();
                    if col.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    forward_sub(&l, &mut col);
                    for (i, v) in col.into_iter().enumerate() {
                        w[(i, j)] = v;
                    }
                }
                schur += w.transpose() * &w;
            }
            l_comp.push(l);
            w_comp.push(w);
        }
        let nfr = p.f_rows.len();
        let size = nf + nfr;
        let mut k = DMatrix::<f64>::zeros(size, size);
        let sreg = schur.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0) * 1e-13;
        for i in 0..nf {
            for j in 0..nf {
                k[(i, j)] = -schur[(i, j)];
            }
            k[(i, i)] -= sreg;
        }
        for (li, &r) in p.f_rows.iter().enumerate() {
            for &(kk, a) in &p.row_free[r] {
                k[(nf + li, kk)] += a;
                k[(kk, nf + li)] += a;
            }
        }
        let saddle = k.lu();
        Some(Kkt {
            m_comp,
            l_comp,
            w_comp,
            saddle,
        })
    }

    fn solve_once(&self, p: &Problem, ry: &DVector<f64>, rx: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let nf = p.nf;
        let mut t_comp = Vec::with_capacity(p.comps.len());
        let mut rhs_x = rx.clone();
        for (c, rows) in p.comps.iter().enumerate() {
            let mut t: Vec<f64> = rows.iter().map(|&r| ry[r]).collect();
            forward_sub(&self.l_comp[c], &mut t);
            if nf > 0 {
                let tv = DVector::from_vec(t.clone());
                rhs_x -= self.w_comp[c].transpose() * tv;
            }
            t_comp.push(t);
        }
        let nfr = p.f_rows.len();
        let mut rhs = DVector::zeros(nf + nfr);
        for i in 0..nf {
            rhs[i] = rhs_x[i];
        }
        for (li, &r) in p.f_rows.iter().enumerate() {
            rhs[nf + li] = ry[r];
        }
        let sol = if nf + nfr > 0 { self.saddle.solve(&rhs)? } else { rhs };
        let dx = DVector::from_iterator(nf, sol.iter().take(nf).copied());
        let mut dy = DVector::zeros(p.m);
        for (li, &r) in p.f_rows.iter().enumerate() {
            dy[r] = sol[nf + li];
        }
        for (c, rows) in p.comps.iter().enumerate() {
            let mut t = t_comp[c].clone();
            if nf > 0 {
                let wdx = &self.w_comp[c] * &dx;
                for (ti, wi) in t.iter_mut().zip(wdx.iter()) {
                    *ti -= wi;
                }
            }
            backward_sub_t(&self.l_comp[c], &mut t);
            for (li, &r) in rows.iter().enumerate() {
                dy[r] = t[li];
            }
        }
        Some((dy, dx))
    }

    fn apply(&self, p: &Problem, dy: &DVector<f64>, dx: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let mut ky = p.a_free(dx);
        for (c, rows) in p.comps.iter().enumerate() {
            let local = DVector::from_iterator(rows.len(), rows.iter().map(|&r| dy[r]));
            let md = &self.m_comp[c] * local;
            for (li, &r) in rows.iter().enumerate() {
                ky[r] += md[li];
            }
        }
        (ky, p.a_free_t(dy))
    }

    /// Solve with two rounds of iterative refinement against the
    /// unregularized system.
    fn solve(&self, p: &Problem, ry: &DVector<f64>, rx: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let (mut dy, mut dx) = self.solve_once(p, ry, rx)?;
        for _ in 0..2 {
            let (ky, kx) = self.apply(p, &dy, &dx);
            let ey = ry - ky;
            let ex = rx - kx;
            let (cy, cx) = self.solve_once(p, &ey, &ex)?;
            dy += cy;
            dx += cx;
        }
        if dy.iter().chain(dx.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        Some((dy, dx))
    }
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    xf: DVector<f64>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dxf: DVector<f64>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dtau: f64,
    dkappa: f64,
}

struct Residuals {
    lp: DVector<f64>,
    ld: Vec<DMatrix<f64>>,
    lf: DVector<f64>,
    lg: f64,
}

fn residuals(p: &Problem, it: &Iterate) -> Residuals {
    let lp = p.a_psd(&it.x) + p.a_free(&it.xf) - &p.b * it.tau;
    let aty = p.a_psd_t(&it.y);
    let ld = aty
        .iter()
        .zip(&it.s)
        .zip(&p.c_blocks)
        .map(|((a, s), c)| a + s - c * it.tau)
        .collect();
    let lf = p.a_free_t(&it.y) - &p.c_free * it.tau;
    let lg = p.b.dot(&it.y) - p.cost(&it.x, &it.xf) - it.kappa;
    Residuals { lp, ld, lf, lg }
}

/// Everything that stays fixed between predictor and corrector.
struct Step<'a> {
    p: &'a Problem,
    sc: &'a [BlockScaling],
    kkt: &'a Kkt,
    ncn: Vec<DMatrix<f64>>,
    g: DVector<f64>,
    c1: f64,
    dy2: DVector<f64>,
    dxf2: DVector<f64>,
}

impl Step<'_> {
    /// Solves the linearized system with residual weight `eta`, scaled
    /// complementarity target `z` (per block) and `tau kappa` target `r_tau`.
    fn direction(&self, it: &Iterate, res: &Residuals, eta: f64, z: &[DMatrix<f64>], r_tau: f64) -> Option<Direction> {
        let p = self.p;
        // T = R Z R^T + eta N L_d N
        let t: Vec<DMatrix<f64>> = self
            .sc
            .iter()
            .zip(z)
            .zip(&res.ld)
            .map(|((s, zb), ld)| &s.r * zb * s.r.transpose() + (&s.n * ld * &s.n) * eta)
            .collect();
        let ry = -(&res.lp * eta) - p.a_psd(&t);
        let rx = -(&res.lf * eta);
        let (dy1, dxf1) = self.kkt.solve(p, &ry, &rx)?;
        let c0: f64 = t.iter().zip(&p.c_blocks).map(|(a, c)| dot(a, c)).sum();
        let bg = &p.b - &self.g;
        let denom = bg.dot(&self.dy2) - p.c_free.dot(&self.dxf2) + self.c1 + it.kappa / it.tau;
        let numer = -eta * res.lg + c0 + r_tau / it.tau - bg.dot(&dy1) + p.c_free.dot(&dxf1);
        let dtau = numer / denom;
        if !dtau.is_finite() {
            return None;
        }
        let dy = dy1 + &self.dy2 * dtau;
        let dxf = dxf1 + &self.dxf2 * dtau;
        let aty = p.a_psd_t(&dy);
        let ds: Vec<DMatrix<f64>> = res
            .ld
            .iter()
            .zip(&aty)
            .zip(&p.c_blocks)
            .map(|((ld, a), c)| symmetrize(&(-(ld * eta) - a + c * dtau)))
            .collect();
        let dx: Vec<DMatrix<f64>> = t
            .iter()
            .zip(&aty)
            .zip(self.sc.iter().zip(&self.ncn))
            .map(|((tb, a), (s, ncn))| symmetrize(&(tb + &s.n * a * &s.n - ncn * dtau)))
            .collect();
        let dkappa = (r_tau - it.kappa * dtau) / it.tau;
        Some(Direction {
            dx,
            dxf,
            dy,
            ds,
            dtau,
            dkappa,
        })
    }

    fn scaled(&self, d: &Direction) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
        let dxt = self
            .sc
            .iter()
            .zip(&d.dx)
            .map(|(s, dx)| symmetrize(&(&s.r_inv * dx * s.r_inv.transpose())))
            .collect();
        let dst = self
            .sc
            .iter()
            .zip(&d.ds)
            .map(|(s, ds)| symmetrize(&(s.r.transpose() * ds * &s.r)))
            .collect();
        (dxt, dst)
    }

    fn step_length(&self, it: &Iterate, d: &Direction) -> f64 {
        let (dxt, dst) = self.scaled(d);
        let mut a = f64::INFINITY;
        for (s, (dx, ds)) in self.sc.iter().zip(dxt.iter().zip(&dst)) {
            a = a.min(max_step(&s.lambda, dx)).min(max_step(&s.lambda, ds));
        }
        if d.dtau < 0.0 {
            a = a.min(-it.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            a = a.min(-it.kappa / d.dkappa);
        }
        a
    }
}

fn complementarity_target(sc: &[BlockScaling], sigma_mu: f64, corr: Option<&[DMatrix<f64>]>) -> Vec<DMatrix<f64>> {
    sc.iter()
        .enumerate()
        .map(|(b, s)| {
            let n = s.lambda.len();
            DMatrix::from_fn(n, n, |i, j| {
                let mut r = if i == j { 2.0 * (sigma_mu - s.lambda[i] * s.lambda[i]) } else { 0.0 };
                if let Some(c) = corr {
                    r -= c[b][(i, j)];
                }
                r / (s.lambda[i] + s.lambda[j])
            })
        })
        .collect()
}

/// Solves `cp` to tolerance `opts.tol`.
pub fn solve(cp: &ConicProgram, opts: &SolveOptions) -> Solution {
    if let Err(e) = cp.validate() {
        log::error!("malformed conic program: {e}");
        return Solution::empty(cp, SolveStatus::NumericalFailure);
    }
    let keep = match presolve(cp, opts.tol) {
        Presolve::Keep(k) => k,
        Presolve::Inconsistent { row } => {
            log::info!("presolve: row {row} is inconsistent with earlier rows");
            let mut s = Solution::empty(cp, SolveStatus::Infeasible);
            s.refresh(cp);
            return s;
        }
    };
    if keep.len() < cp.rows.len() {
        log::debug!("presolve dropped {} dependent rows", cp.rows.len() - keep.len());
    }
    let p = Problem::new(cp, &keep);
    let n_cone: usize = p.blocks.iter().sum();
    let mut it = Iterate {
        x: p.blocks.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        xf: DVector::zeros(p.nf),
        y: DVector::zeros(p.m),
        s: p.blocks.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        tau: 1.0,
        kappa: 1.0,
    };
    let b_norm = norm_inf(&p.b);
    let c_norm = p
        .c_blocks
        .iter()
        .map(norm_inf_mat)
        .fold(norm_inf(&p.c_free), f64::max);

    let finish = |it: &Iterate, status: SolveStatus, iters: usize, dres: f64| -> Solution {
        let mut sol = Solution::empty(cp, status);
        sol.iterations = iters;
        sol.dual_residual = dres;
        match status {
            SolveStatus::Infeasible | SolveStatus::Unbounded => {
                let by = p.b.dot(&it.y);
                let scale = if status == SolveStatus::Infeasible && by > 0.0 { by } else { 1.0 };
                for (k, &(r, s)) in p.origin.iter().enumerate() {
                    sol.dual[r] = it.y[k] * s / scale;
                }
                sol.refresh(cp);
                sol.dual_objective = p.b.dot(&it.y) / scale;
            }
            _ => {
                sol.free_values = it.xf.iter().map(|v| v / it.tau).collect();
                sol.psd_matrices = it.x.iter().map(|x| symmetrize(&(x / it.tau))).collect();
                for (k, &(r, s)) in p.origin.iter().enumerate() {
                    sol.dual[r] = it.y[k] * s / it.tau;
                }
                sol.refresh(cp);
                sol.dual_objective = p.b.dot(&it.y) / it.tau;
            }
        }
        sol
    };

    let mut last_dres = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let res = residuals(&p, &it);
        let xs: f64 = it.x.iter().zip(&it.s).map(|(x, s)| dot(x, s)).sum();
        let mu = (xs + it.tau * it.kappa) / (n_cone as f64 + 1.0);
        if !mu.is_finite() {
            return finish(&it, SolveStatus::NumericalFailure, iter, last_dres);
        }

        let pres = norm_inf(&res.lp) / it.tau / (1.0 + b_norm);
        let dres = res
            .ld
            .iter()
            .map(norm_inf_mat)
            .fold(norm_inf(&res.lf), f64::max)
            / it.tau
            / (1.0 + c_norm);
        last_dres = dres;
        let pobj = p.cost(&it.x, &it.xf) / it.tau;
        let dobj = p.b.dot(&it.y) / it.tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        log::trace!(
            "ipm {iter:3}: mu={mu:.3e} pres={pres:.3e} dres={dres:.3e} gap={gap:.3e} tau={:.3e} kappa={:.3e}",
            it.tau,
            it.kappa
        );
        if pres <= opts.tol && dres <= opts.tol && gap <= opts.tol {
            let free: Vec<f64> = it.xf.iter().map(|v| v / it.tau).collect();
            let psd: Vec<DMatrix<f64>> = it.x.iter().map(|x| x / it.tau).collect();
            let orig = cp.residuals(&free, &psd).iter().fold(0.0f64, |a, r| a.max(r.abs()));
            if orig <= opts.tol {
                return finish(&it, SolveStatus::Optimal, iter, dres);
            }
        }
        if it.tau / it.kappa < INFEASIBILITY_RATIO {
            let by = p.b.dot(&it.y);
            let cx = p.cost(&it.x, &it.xf);
            if by > 0.0 {
                return finish(&it, SolveStatus::Infeasible, iter, dres);
            }
            if cx < 0.0 {
                return finish(&it, SolveStatus::Unbounded, iter, dres);
            }
        }

        let mut sc = Vec::with_capacity(p.blocks.len());
        for (x, s) in it.x.iter().zip(&it.s) {
            match nt_scaling(x, s) {
                Some(v) => sc.push(v),
                None => return finish(&it, SolveStatus::NumericalFailure, iter, dres),
            }
        }
        let kkt = match Kkt::build(&p, &sc) {
            Some(k) => k,
            None => return finish(&it, SolveStatus::NumericalFailure, iter, dres),
        };
        let ncn: Vec<DMatrix<f64>> = sc
            .iter()
            .zip(&p.c_blocks)
            .map(|(s, c)| &s.n * c * &s.n)
            .collect();
        let g = p.a_psd(&ncn);
        let c1: f64 = ncn.iter().zip(&p.c_blocks).map(|(a, c)| dot(a, c)).sum();
        let ry2 = &p.b + &g;
        let (dy2, dxf2) = match kkt.solve(&p, &ry2, &p.c_free) {
            Some(v) => v,
            None => return finish(&it, SolveStatus::NumericalFailure, iter, dres),
        };
        let step = Step {
            p: &p,
            sc: &sc,
            kkt: &kkt,
            ncn,
            g,
            c1,
            dy2,
            dxf2,
        };

        // Predictor.
        let z_aff = complementarity_target(&sc, 0.0, None);
        let aff = match step.direction(&it, &res, 1.0, &z_aff, -it.tau * it.kappa) {
            Some(d) => d,
            None => return finish(&it, SolveStatus::NumericalFailure, iter, dres),
        };
        let alpha_aff = step.step_length(&it, &aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let (dxt, dst) = step.scaled(&aff);
        let corr: Vec<DMatrix<f64>> = dxt.iter().zip(&dst).map(|(a, b)| a * b + b * a).collect();
        let z = complementarity_target(&sc, sigma * mu, Some(&corr));
        let r_tau = sigma * mu - it.tau * it.kappa - aff.dtau * aff.dkappa;
        let d = match step.direction(&it, &res, 1.0 - sigma, &z, r_tau) {
            Some(d) => d,
            None => return finish(&it, SolveStatus::NumericalFailure, iter, dres),
        };
        let alpha = (STEP_FRACTION * step.step_length(&it, &d)).min(1.0);
        if !(alpha > 1e-12) {
            return finish(&it, SolveStatus::NumericalFailure, iter, dres);
        }

        for (x, dx) in it.x.iter_mut().zip(&d.dx) {
            *x += dx * alpha;
        }
        for (s, ds) in it.s.iter_mut().zip(&d.ds) {
            *s += ds * alpha;
        }
        it.xf += &d.dxf * alpha;
        it.y += &d.dy * alpha;
        it.tau += alpha * d.dtau;
        it.kappa += alpha * d.dkappa;
    }
    finish(&it, SolveStatus::MaxIter, opts.max_iter, last_dres)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{ConicRow, PsdEntry};

    fn scalar_program(rhs: f64) -> ConicProgram {
        ConicProgram {
            n_free: 0,
            blocks: vec![1],
            rows: vec![ConicRow {
                free: vec![],
                psd: vec![PsdEntry { block: 0, i: 0, j: 0, coef: 1.0 }],
                rhs,
            }],
            cost_free: vec![],
            cost_psd: vec![],
        }
    }

    #[test]
    fn one_by_one_feasible() {
        let sol = solve(&scalar_program(4.0), &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.psd_matrices[0][(0, 0)] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn one_by_one_infeasible() {
        let sol = solve(&scalar_program(-1.0), &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn free_only_program() {
        // c + 3 = 0
        let cp = ConicProgram {
            n_free: 1,
            rows: vec![ConicRow { free: vec![(0, 1.0)], psd: vec![], rhs: -3.0 }],
            ..Default::default()
        };
        let sol = solve(&cp, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.free_values[0] + 3.0).abs() < 1e-8);
    }

    #[test]
    fn two_by_two_trace_minimization() {
        // min tr X  s.t. X_01 = 1  => X = [[1,1],[1,1]], objective 2
        let cp = ConicProgram {
            blocks: vec![2],
            rows: vec![ConicRow {
                free: vec![],
                psd: vec![PsdEntry { block: 0, i: 0, j: 1, coef: 1.0 }],
                rhs: 1.0,
            }],
            cost_psd: vec![
                PsdEntry { block: 0, i: 0, j: 0, coef: 1.0 },
                PsdEntry { block: 0, i: 1, j: 1, coef: 1.0 },
            ],
            ..Default::default()
        };
        let sol = solve(&cp, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 2.0).abs() < 1e-6, "{}", sol.summary());
    }
}

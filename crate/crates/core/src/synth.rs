//! Assembly of the robust density-function SOS program and extraction of a
//! certificate from its solution.
//!
//! With `rho = rho_hat / V^alpha` and pursuer input `w` in the box
//! `|w_i| <= w_max`, the program asks for polynomials `rho_hat`, `psi_hat`
//! (evader, 2 entries) and `y >= 0` (4 entries) such that
//!
//! * `rho_hat >= 0` on the initial set,
//! * `rho_hat < 0` on the evader wall away from the target, on the pursuer
//!   wall and on the capture set,
//! * `V y^T N + V grad_p rho_hat - alpha rho_hat grad_p V = 0`,
//! * `-V y^T e + V div_e psi_hat - alpha grad_e V . psi_hat > 0` on the arena,
//! * `|psi_hat_i| <= u_max rho_hat` on the collision-free set.
//!
//! The fourth line is the Farkas form of "divergence positive for every
//! pursuer input in the box".

use std::collections::BTreeMap;

use log::info;
use thiserror::Error;

use crate::certificate::{Certificate, SolverReport};
use crate::config::EnvironmentConfig;
use crate::conic::{compile, solve, SolveOptions, SolveStatus};
use crate::poly::{PolyVec, Polynomial};
use crate::semialg::{build_sets, circle, SetError, NVARS};
use crate::soscomp::{AffinePolyExpr, DecisionPoly, DomainTerm, SosError, SosProgram, Side};
use crate::verify::{check_certificate, VerificationReport};

/// Evader coordinates in the joint state.
pub const EVADER: [usize; 2] = [0, 1];
/// Pursuer coordinates in the joint state.
pub const PURSUER: [usize; 2] = [2, 3];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("program infeasible at these degrees ({0}); raise d_rho/d_psi/d_sigma or relax epsilon_strict")]
    Infeasible(String),
    #[error("program too large for the internal solver: {0}; use `export` and an external SDP solver")]
    TooLarge(String),
    #[error("solver did not converge: {0}")]
    Solver(String),
    #[error(transparent)]
    Sos(#[from] SosError),
}

impl From<SetError> for SynthError {
    fn from(e: SetError) -> Self {
        SynthError::Config(e.to_string())
    }
}

/// `V = (x1 - x_r1)^2 + (x2 - x_r2)^2`.
pub fn build_v(cfg: &EnvironmentConfig) -> Polynomial {
    circle(EVADER[0], EVADER[1], cfg.x_r, 0.0)
}

/// `W = {w : N w <= e}` with `N = [I; -I]` and `e = w_max 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FarkasData {
    pub n: [[f64; 2]; 4],
    pub e: [f64; 4],
}

impl FarkasData {
    pub fn new(w_max: f64) -> Self {
        FarkasData {
            n: [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
            e: [w_max; 4],
        }
    }

    /// The corners of the box, in a fixed order.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        let w = self.e[0];
        if w == 0.0 {
            return vec![[0.0, 0.0]];
        }
        vec![[w, w], [w, -w], [-w, w], [-w, -w]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthLimits {
    pub max_block_side: usize,
    pub max_rows: usize,
}

impl Default for SynthLimits {
    fn default() -> Self {
        SynthLimits {
            max_block_side: 150,
            max_rows: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SynthOptions {
    pub solver: SolveOptions,
    pub limits: SynthLimits,
    pub seed: u64,
}

/// The assembled program and handles to its unknowns.
#[derive(Clone, Debug)]
pub struct BuiltProgram {
    pub program: SosProgram,
    pub rho_hat: DecisionPoly,
    pub psi_hat: [DecisionPoly; 2],
    pub y: [DecisionPoly; 4],
    pub multipliers: Vec<(String, AffinePolyExpr)>,
    pub v: Polynomial,
    /// Number of polynomial constraint families before multiplier expansion.
    pub families: usize,
}

impl BuiltProgram {
    pub fn stats(&self) -> ProgramStats {
        let p = &self.program;
        ProgramStats {
            rows: p.row_count(),
            blocks: p.blocks().len(),
            max_block_side: p.max_block_side(),
            free_variables: p.free_var_count(),
            block_sides: p.blocks().iter().map(|b| b.side).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProgramStats {
    pub rows: usize,
    pub blocks: usize,
    pub max_block_side: usize,
    pub free_variables: usize,
    pub block_sides: Vec<usize>,
}

fn constant(p: &Polynomial) -> AffinePolyExpr {
    AffinePolyExpr::constant(p.clone())
}

/// Builds the 15 constraint families for `cfg`.
pub fn build_program(cfg: &EnvironmentConfig) -> Result<BuiltProgram, SynthError> {
    cfg.validate().map_err(|e| SynthError::Config(e.to_string()))?;
    let sets = build_sets(cfg)?;
    let v = build_v(cfg);
    let farkas = FarkasData::new(cfg.w_max);
    let alpha = f64::from(cfg.alpha);
    let eps = cfg.epsilon_strict;
    let ds = cfg.d_sigma;
    let dl = cfg.d_lambda;
    let mut prog = SosProgram::new(NVARS);

    let rho = prog.declare_poly("rho_hat", cfg.d_rho)?;
    let psi = [
        prog.declare_poly("psi_hat.1", cfg.d_psi)?,
        prog.declare_poly("psi_hat.2", cfg.d_psi)?,
    ];
    let y = [
        prog.declare_poly("y.1", cfg.d_y())?,
        prog.declare_poly("y.2", cfg.d_y())?,
        prog.declare_poly("y.3", cfg.d_y())?,
        prog.declare_poly("y.4", cfg.d_y())?,
    ];
    let rho_e = rho.expr();
    let psi_e = [psi[0].expr(), psi[1].expr()];
    let y_e: Vec<AffinePolyExpr> = y.iter().map(|p| p.expr()).collect();
    let eps_c = constant(&Polynomial::constant(NVARS, eps));
    let neg_rho_eps = rho_e.scale(-1.0).sub(&eps_c)?;
    let mut multipliers = Vec::new();
    let mut nonneg = |prog: &mut SosProgram, name: &str, expr: AffinePolyExpr, dom: Vec<DomainTerm>| -> Result<(), SynthError> {
        let h = prog.assert_nonneg_on(name, expr, &dom)?;
        multipliers.extend(h.multipliers);
        Ok(())
    };

    // Initial set.
    nonneg(
        &mut prog,
        "initial",
        rho_e.clone(),
        vec![
            DomainTerm::sos("sigma_ie", &sets.h_ie, Side::NonPos, ds),
            DomainTerm::sos("sigma_ip", &sets.h_ip, Side::NonPos, ds),
        ],
    )?;

    // Unsafe boundary and capture set.
    nonneg(
        &mut prog,
        "unsafe.evader_wall",
        neg_rho_eps.clone(),
        vec![
            DomainTerm::free("lambda_e", &sets.h_xe, dl),
            DomainTerm::sos("sigma_re", &sets.h_re, Side::NonNeg, ds),
        ],
    )?;
    nonneg(
        &mut prog,
        "unsafe.pursuer_wall",
        neg_rho_eps.clone(),
        vec![DomainTerm::free("lambda_p", &sets.h_xp, dl)],
    )?;
    nonneg(
        &mut prog,
        "unsafe.capture",
        neg_rho_eps,
        vec![
            DomainTerm::sos("sigma_a", &sets.h_a, Side::NonPos, ds),
            DomainTerm::sos("sigma_ae", &sets.h_xe, Side::NonPos, ds),
            DomainTerm::sos("sigma_ap", &sets.h_xp, Side::NonPos, ds),
        ],
    )?;

    // y >= 0 entrywise.
    for (i, e) in y_e.iter().enumerate() {
        prog.assert_sos(&format!("y.{}.sos", i + 1), e.clone())?;
    }

    // V y^T N + V grad_p rho_hat - alpha rho_hat grad_p V = 0.
    let grad_p_v = v.gradient(&PURSUER).map_err(SosError::from)?;
    for (k, &var) in PURSUER.iter().enumerate() {
        let mut ytn = AffinePolyExpr::zero(NVARS);
        for (row, ye) in farkas.n.iter().zip(&y_e) {
            if row[k] != 0.0 {
                ytn = ytn.add(&ye.scale(row[k]))?;
            }
        }
        let expr = ytn
            .mul_poly(&v)?
            .add(&rho_e.differentiate(var)?.mul_poly(&v)?)?
            .sub(&rho_e.mul_poly(grad_p_v.get(k))?.scale(alpha))?;
        prog.assert_zero(&format!("equality.{}", k + 1), expr)?;
    }

    // -V y^T e + V div_e psi_hat - alpha grad_e V . psi_hat - eps V > 0 on cl(X \ Xr).
    let grad_e_v = v.gradient(&EVADER).map_err(SosError::from)?;
    let mut yte = AffinePolyExpr::zero(NVARS);
    for (ei, ye) in farkas.e.iter().zip(&y_e) {
        if *ei != 0.0 {
            yte = yte.add(&ye.scale(*ei))?;
        }
    }
    let mut div = AffinePolyExpr::zero(NVARS);
    let mut drift = AffinePolyExpr::zero(NVARS);
    for (k, &var) in EVADER.iter().enumerate() {
        div = div.add(&psi_e[k].differentiate(var)?)?;
        drift = drift.add(&psi_e[k].mul_poly(grad_e_v.get(k))?)?;
    }
    let divergence = yte
        .scale(-1.0)
        .add(&div)?
        .mul_poly(&v)?
        .sub(&drift.scale(alpha))?
        .sub(&constant(&v.scale(eps)))?;
    nonneg(
        &mut prog,
        "divergence",
        divergence,
        vec![
            DomainTerm::sos("sigma_de", &sets.h_xe, Side::NonPos, ds),
            DomainTerm::sos("sigma_dp", &sets.h_xp, Side::NonPos, ds),
        ],
    )?;

    // u_max rho_hat -/+ psi_hat_i >= 0 on the (shrunk) collision-free set.
    let rho_u = rho_e.scale(cfg.u_max);
    for (i, pe) in psi_e.iter().enumerate() {
        for (tag, sign) in [("+", -1.0), ("-", 1.0)] {
            let name = format!("input.{}{}", i + 1, tag);
            let expr = rho_u.add(&pe.scale(sign))?;
            nonneg(
                &mut prog,
                &name,
                expr,
                vec![
                    DomainTerm::sos(&format!("sigma_ue.{}{}", i + 1, tag), &sets.h_xe_inner, Side::NonPos, ds),
                    DomainTerm::sos(&format!("sigma_up.{}{}", i + 1, tag), &sets.h_xp_inner, Side::NonPos, ds),
                    DomainTerm::sos(&format!("sigma_ua.{}{}", i + 1, tag), &sets.h_a_outer, Side::NonNeg, ds),
                ],
            )?;
        }
    }

    let families = prog.sos_constraints().len() + prog.zero_constraints().len();
    Ok(BuiltProgram {
        program: prog,
        rho_hat: rho,
        psi_hat: psi,
        y,
        multipliers,
        v,
        families,
    })
}

/// Rejects programs the dense internal solver cannot handle.
pub fn check_limits(stats: &ProgramStats, limits: &SynthLimits) -> Result<(), SynthError> {
    if stats.max_block_side > limits.max_block_side {
        return Err(SynthError::TooLarge(format!(
            "largest Gram block has side {} > {}",
            stats.max_block_side, limits.max_block_side
        )));
    }
    if stats.rows > limits.max_rows {
        return Err(SynthError::TooLarge(format!(
            "{} equality rows > {}",
            stats.rows, limits.max_rows
        )));
    }
    Ok(())
}

/// Builds, solves and extracts a certificate, then audits it.
pub fn synthesize(
    cfg: &EnvironmentConfig,
    opts: &SynthOptions,
) -> Result<(Certificate, VerificationReport), SynthError> {
    let built = build_program(cfg)?;
    let stats = built.stats();
    info!(
        "program: {} rows, {} PSD blocks (max side {}), {} free variables",
        stats.rows, stats.blocks, stats.max_block_side, stats.free_variables
    );
    check_limits(&stats, &opts.limits)?;
    let compiled = compile(&built.program);
    let sol = solve(&compiled.program, &opts.solver);
    info!("solver: {}", sol.summary());
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(SynthError::Infeasible(sol.summary())),
        _ => return Err(SynthError::Solver(sol.summary())),
    }
    let eval = |p: &DecisionPoly| compiled.evaluate(&sol, &p.expr());
    let rho_hat = eval(&built.rho_hat);
    let psi_hat = PolyVec::new(built.psi_hat.iter().map(eval).collect()).map_err(SosError::from)?;
    let y = PolyVec::new(built.y.iter().map(eval).collect()).map_err(SosError::from)?;
    let multipliers: BTreeMap<String, Polynomial> = built
        .multipliers
        .iter()
        .map(|(n, e)| (n.clone(), compiled.evaluate(&sol, e)))
        .collect();
    let solver_report = SolverReport {
        status: sol.status.to_string(),
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        primal_objective: sol.primal_objective,
        min_eigenvalue: sol.min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min),
        rows: compiled.program.rows.len(),
        blocks: stats.blocks,
        max_block_side: stats.max_block_side,
        free_variables: stats.free_variables,
    };
    let cert = Certificate {
        rho_hat,
        psi_hat,
        y,
        multipliers,
        cfg: cfg.clone(),
        v: built.v,
        alpha: cfg.alpha,
        solver_report,
    };
    let report = check_certificate(&cert, cfg.verify_samples, opts.seed);
    Ok((cert, report))
}

//! Shared fixtures for the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use pursuit_density::certificate::{Certificate, SolverReport};
use pursuit_density::config::EnvironmentConfig;
use pursuit_density::poly::{Monomial, PolyVec, Polynomial};
use pursuit_density::semialg::{build_sets, NVARS};
use pursuit_density::synth::build_v;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random polynomial with up to `max_terms` terms of degree at most
/// `max_deg` and coefficients in [-10, 10].
pub fn random_poly(rng: &mut ChaCha8Rng, nvars: usize, max_terms: usize, max_deg: u32) -> Polynomial {
    let mut p = Polynomial::zero(nvars);
    let terms = rng.gen_range(1..=max_terms);
    for _ in 0..terms {
        let mut e = vec![0u32; nvars];
        let deg = rng.gen_range(0..=max_deg);
        for _ in 0..deg {
            e[rng.gen_range(0..nvars)] += 1;
        }
        p.add_term(Monomial::new(e), rng.gen_range(-10.0..=10.0));
    }
    p
}

pub fn random_point(rng: &mut ChaCha8Rng, nvars: usize) -> Vec<f64> {
    (0..nvars).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Sum of `|c m(x)|`: the natural scale for rounding error in `p(x)`.
pub fn magnitude(p: &Polynomial, x: &[f64]) -> f64 {
    p.terms().map(|(m, c)| (c * m.evaluate(x)).abs()).sum()
}

/// Coefficient-wise comparison with tolerance relative to the larger
/// coefficient scale of the two sides.
pub fn coeffs_close(a: &Polynomial, b: &Polynomial, rel: f64) -> bool {
    let scale = 1.0f64.max(a.max_abs_coefficient()).max(b.max_abs_coefficient());
    (a - b).max_abs_coefficient() <= rel * scale
}

pub fn x(i: usize) -> Polynomial {
    Polynomial::var(NVARS, i)
}

pub fn constant(c: f64) -> Polynomial {
    Polynomial::constant(NVARS, c)
}

/// Numerical-example geometry with a motionless pursuer and degree-6
/// density.
pub fn static_config() -> EnvironmentConfig {
    EnvironmentConfig {
        w_max: 0.0,
        d_rho: 6,
        d_psi: 6,
        verify_samples: 2000,
        ..EnvironmentConfig::paper_tail_chasing()
    }
}

pub fn certificate(cfg: &EnvironmentConfig, rho_hat: Polynomial, psi_hat: [Polynomial; 2], y: [Polynomial; 4]) -> Certificate {
    Certificate {
        rho_hat,
        psi_hat: PolyVec::new(psi_hat.to_vec()).unwrap(),
        y: PolyVec::new(y.to_vec()).unwrap(),
        multipliers: BTreeMap::new(),
        cfg: cfg.clone(),
        v: build_v(cfg),
        alpha: cfg.alpha,
        solver_report: SolverReport::default(),
    }
}

/// Closed-form certificate for [`static_config`].
///
/// `rho_hat = h_xe h_xp h_a - 0.002` is negative on both walls and in the
/// capture disc and at least 0.002 on the shrunk input-bound domain.
/// `psi_hat = -1e-6 (x_e - x_r)` makes the divergence `2e-6 (alpha - 1) V`.
/// With `V` independent of the pursuer the equality reduces to
/// `y1 - y3 = -d rho_hat / d x3` (and likewise for x4), met by
/// `((q + 1) / 2)^2 - ((q - 1) / 2)^2 = q`.
pub fn static_certificate() -> Certificate {
    let cfg = static_config();
    let sets = build_sets(&cfg).unwrap();
    let rho_hat = &(&(&sets.h_xe * &sets.h_xp) * &sets.h_a) - &constant(0.002);
    let k = 1e-6;
    let psi = [0, 1].map(|i| &(&x(i) - &constant(cfg.x_r[i])) * -k);
    let half = |q: &Polynomial, s: f64| {
        let h = &(q + &constant(s)) * 0.5;
        &h * &h
    };
    let q = [2, 3].map(|i| -&rho_hat.differentiate(i).unwrap());
    let y = [half(&q[0], 1.0), half(&q[1], 1.0), half(&q[0], -1.0), half(&q[1], -1.0)];
    certificate(&cfg, rho_hat, psi, y)
}

/// `rho_hat = c`, `psi_hat = 0`, `y = 0`.
pub fn constant_certificate(cfg: &EnvironmentConfig, c: f64) -> Certificate {
    let z = constant(0.0);
    certificate(cfg, constant(c), [z.clone(), z.clone()], [z.clone(), z.clone(), z.clone(), z])
}

/// Constant density with the evader field pointing at a point halfway
/// through the target disc, past the arena wall; the controller then
/// saturates toward the target.
pub fn homing_certificate(cfg: &EnvironmentConfig) -> Certificate {
    let z = constant(0.0);
    let s = (cfg.r + 0.5 * cfg.r_r) / cfg.r;
    let psi = [0, 1].map(|i| &constant(s * cfg.x_r[i]) - &x(i));
    certificate(cfg, constant(1.0), psi, [z.clone(), z.clone(), z.clone(), z])
}

pub mod oracles {
    //! Independent constructions with known answers for the SOS compiler
    //! and the conic solver.

    use nalgebra::{DMatrix, SymmetricEigen};
    use pursuit_density::conic::{compile, solve, ConicProgram, ConicRow, PsdEntry, SolveOptions, SolveStatus, Solution};
    use pursuit_density::poly::{monomial_basis, Polynomial};
    use pursuit_density::soscomp::{AffinePolyExpr, SosProgram};
    use rand::Rng;

    use super::rng;

    fn quadratic_form(nvars: usize, half: u32, g: &DMatrix<f64>) -> Polynomial {
        let basis = monomial_basis(nvars, half);
        let mut p = Polynomial::zero(nvars);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                p.add_term(a.mul(b), g[(i, j)]);
            }
        }
        p
    }

    /// `(nvars, half degree)` for a case seed: 1 to 3 variables, basis
    /// degree 1 or 2.
    fn shape(seed: u64) -> (usize, u32) {
        let mut r = rng(seed);
        (r.gen_range(1..=3), r.gen_range(1..=2))
    }

    /// `v^T G v` with `G = L L^T + 0.1 I`, strictly inside the SOS cone.
    pub fn sos_feasible_poly(seed: u64) -> Polynomial {
        let (n, d) = shape(seed);
        let m = monomial_basis(n, d).len();
        let mut r = rng(seed.wrapping_mul(31).wrapping_add(7));
        let l = DMatrix::from_fn(m, m, |_, _| r.gen_range(-1.0..1.0));
        let g = &l * l.transpose() + DMatrix::identity(m, m) * 0.1;
        quadratic_form(n, d, &g)
    }

    /// A sum of squares of polynomials vanishing at a common point `x*`,
    /// minus one. Every Gram matrix of the square part is singular (it
    /// annihilates `v(x*)`), and the shifted polynomial is `-1` at `x*`,
    /// so it is not SOS.
    pub fn sos_infeasible_poly(seed: u64) -> Polynomial {
        let (n, d) = shape(seed);
        let basis = monomial_basis(n, d);
        let m = basis.len();
        let mut r = rng(seed.wrapping_mul(131).wrapping_add(3));
        let star: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = basis.iter().map(|b| b.evaluate(&star)).collect();
        let mut g = DMatrix::zeros(m, m);
        for _ in 0..m {
            let mut c: Vec<f64> = (0..m).map(|_| r.gen_range(-1.0..1.0)).collect();
            // Project out v(x*) so that the square vanishes at x*.
            let vv: f64 = v.iter().map(|a| a * a).sum();
            let cv: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (ci, vi) in c.iter_mut().zip(&v) {
                *ci -= cv / vv * vi;
            }
            let c = DMatrix::from_column_slice(m, 1, &c);
            g += &c * c.transpose();
        }
        let p = quadratic_form(n, d, &g);
        &p - &Polynomial::constant(n, 1.0)
    }

    /// Outcome of asserting `p` SOS, with the minimum Gram eigenvalue and
    /// the coefficient residual of the returned decomposition.
    pub struct SosVerdict {
        pub status: SolveStatus,
        pub min_eig: f64,
        pub residual: f64,
    }

    pub fn classify(p: &Polynomial) -> SosVerdict {
        let mut prog = SosProgram::new(p.nvars());
        prog.assert_sos("p", AffinePolyExpr::constant(p.clone())).unwrap();
        let c = compile(&prog);
        let sol = solve(&c.program, &SolveOptions::default());
        let min_eig = sol.min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        SosVerdict {
            status: sol.status,
            min_eig,
            residual: sol.primal_residual,
        }
    }

    /// A conic test problem with its expected status and optimal value.
    pub struct SdpCase {
        pub name: String,
        pub program: ConicProgram,
        pub status: SolveStatus,
        pub optimum: f64,
    }

    fn entry(block: usize, i: usize, j: usize, coef: f64) -> PsdEntry {
        PsdEntry { block, i, j, coef }
    }

    fn row(psd: Vec<PsdEntry>, free: Vec<(usize, f64)>, rhs: f64) -> ConicRow {
        ConicRow { free, psd, rhs }
    }

    /// `min t` subject to `t I - A = X` PSD: the largest eigenvalue of a
    /// 2x2 symmetric `A`, known in closed form.
    fn max_eigenvalue(a: f64, b: f64, c: f64) -> SdpCase {
        let rows = vec![
            row(vec![entry(0, 0, 0, 1.0)], vec![(0, -1.0)], -a),
            row(vec![entry(0, 0, 1, 1.0)], vec![], -b),
            row(vec![entry(0, 1, 1, 1.0)], vec![(0, -1.0)], -c),
        ];
        let lam = 0.5 * (a + c) + (0.25 * (a - c) * (a - c) + b * b).sqrt();
        SdpCase {
            name: format!("lambda_max[{a:.3},{b:.3},{c:.3}]"),
            program: ConicProgram {
                n_free: 1,
                blocks: vec![2],
                rows,
                cost_free: vec![(0, 1.0)],
                cost_psd: vec![],
            },
            status: SolveStatus::Optimal,
            optimum: lam,
        }
    }

    /// `min sum c_i X_ii` over a 3x3 block with unit trace: `min c_i`.
    fn weighted_trace(c: [f64; 3]) -> SdpCase {
        SdpCase {
            name: format!("weighted_trace{c:?}"),
            program: ConicProgram {
                n_free: 0,
                blocks: vec![3],
                rows: vec![row((0..3).map(|i| entry(0, i, i, 1.0)).collect(), vec![], 1.0)],
                cost_free: vec![],
                cost_psd: (0..3).map(|i| entry(0, i, i, c[i])).collect(),
            },
            status: SolveStatus::Optimal,
            optimum: c.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// `min tr X` with `X_12 = beta`: `2 |beta|`.
    fn trace_with_offdiagonal(beta: f64) -> SdpCase {
        SdpCase {
            name: format!("trace_offdiag[{beta}]"),
            program: ConicProgram {
                n_free: 0,
                blocks: vec![2],
                rows: vec![row(vec![entry(0, 0, 1, 1.0)], vec![], beta)],
                cost_free: vec![],
                cost_psd: vec![entry(0, 0, 0, 1.0), entry(0, 1, 1, 1.0)],
            },
            status: SolveStatus::Optimal,
            optimum: 2.0 * beta.abs(),
        }
    }

    /// Two 1x1 blocks, `min p a + q b` with `a + b = 1`: `min(p, q)`.
    fn two_scalars(p: f64, q: f64) -> SdpCase {
        SdpCase {
            name: format!("two_scalars[{p},{q}]"),
            program: ConicProgram {
                n_free: 0,
                blocks: vec![1, 1],
                rows: vec![row(vec![entry(0, 0, 0, 1.0), entry(1, 0, 0, 1.0)], vec![], 1.0)],
                cost_free: vec![],
                cost_psd: vec![entry(0, 0, 0, p), entry(1, 0, 0, q)],
            },
            status: SolveStatus::Optimal,
            optimum: p.min(q),
        }
    }

    fn scalar_equality(b: f64) -> SdpCase {
        SdpCase {
            name: format!("scalar[{b}]"),
            program: ConicProgram {
                n_free: 0,
                blocks: vec![1],
                rows: vec![row(vec![entry(0, 0, 0, 1.0)], vec![], b)],
                cost_free: vec![],
                cost_psd: vec![entry(0, 0, 0, 1.0)],
            },
            status: if b >= 0.0 { SolveStatus::Optimal } else { SolveStatus::Infeasible },
            optimum: b,
        }
    }

    /// `x1 + x2 = 3`, `x1 - x2 = 1`, minimise `x1 + 2 x2`: the unique point gives 4.
    fn free_system() -> SdpCase {
        SdpCase {
            name: "free_system".into(),
            program: ConicProgram {
                n_free: 2,
                blocks: vec![],
                rows: vec![
                    row(vec![], vec![(0, 1.0), (1, 1.0)], 3.0),
                    row(vec![], vec![(0, 1.0), (1, -1.0)], 1.0),
                ],
                cost_free: vec![(0, 1.0), (1, 2.0)],
                cost_psd: vec![],
            },
            status: SolveStatus::Optimal,
            optimum: 4.0,
        }
    }

    /// `X_11 = -1` on a 2x2 block is infeasible.
    fn negative_diagonal() -> SdpCase {
        SdpCase {
            name: "negative_diagonal".into(),
            program: ConicProgram {
                n_free: 0,
                blocks: vec![2],
                rows: vec![row(vec![entry(0, 0, 0, 1.0)], vec![], -1.0)],
                cost_free: vec![],
                cost_psd: vec![],
            },
            status: SolveStatus::Infeasible,
            optimum: f64::NAN,
        }
    }

    /// The twenty-problem library.
    pub fn sdp_library() -> Vec<SdpCase> {
        let mut out = vec![
            max_eigenvalue(1.0, 0.0, 2.0),
            max_eigenvalue(0.0, 1.0, 0.0),
            max_eigenvalue(-1.0, 0.5, 3.0),
            max_eigenvalue(2.0, -2.0, 2.0),
            max_eigenvalue(-3.0, 0.25, -1.0),
            weighted_trace([1.0, 2.0, 3.0]),
            weighted_trace([5.0, 0.5, 4.0]),
            weighted_trace([2.0, 2.0, 2.0]),
            weighted_trace([-1.0, 1.0, 0.0]),
            weighted_trace([3.0, 7.0, 0.25]),
            trace_with_offdiagonal(1.0),
            trace_with_offdiagonal(-0.5),
            trace_with_offdiagonal(3.0),
            trace_with_offdiagonal(0.0),
            two_scalars(2.0, 3.0),
            scalar_equality(4.0),
            scalar_equality(0.5),
            scalar_equality(-1.0),
            free_system(),
            negative_diagonal(),
        ];
        for c in &mut out {
            c.program.validate().unwrap();
        }
        out.truncate(20);
        out
    }

    /// Brute-force cross-check of the reported eigenvalues.
    pub fn min_eig(sol: &Solution) -> f64 {
        sol.psd_matrices
            .iter()
            .filter(|m| m.nrows() > 0)
            .map(|m| SymmetricEigen::new(m.clone()).eigenvalues.min())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_case(case: &SdpCase) -> Result<(), String> {
        let sol = solve(&case.program, &SolveOptions::default());
        if sol.status != case.status {
            return Err(format!("{}: status {} expected {}", case.name, sol.status, case.status));
        }
        if case.status != SolveStatus::Optimal {
            return Ok(());
        }
        if sol.primal_residual >= 1e-6 || sol.dual_residual >= 1e-6 {
            return Err(format!(
                "{}: residuals {:e} {:e}",
                case.name, sol.primal_residual, sol.dual_residual
            ));
        }
        if (sol.primal_objective - case.optimum).abs() > 1e-6 * case.optimum.abs().max(1.0) {
            return Err(format!("{}: objective {} expected {}", case.name, sol.primal_objective, case.optimum));
        }
        if min_eig(&sol) < -1e-8 {
            return Err(format!("{}: iterate left the cone", case.name));
        }
        let again = solve(&case.program, &SolveOptions::default());
        if again.free_values != sol.free_values || again.psd_matrices != sol.psd_matrices || again.iterations != sol.iterations {
            return Err(format!("{}: repeated solve differs", case.name));
        }
        Ok(())
    }
}

/// Program shape formulas, counted from monomial combinatorics alone.
pub mod shape {
    use pursuit_density::poly::binomial;

    pub fn b4(d: u32) -> usize {
        binomial(4 + u64::from(d), u64::from(d)) as usize
    }

    /// Monomials in four variables of total degree exactly `d`.
    pub fn exact4(d: u32) -> usize {
        binomial(3 + u64::from(d), 3) as usize
    }

    /// Support of `V y` for a generic `y` of degree `dy`, where
    /// `V = x1^2 + x2^2 + (linear in x1, x2) + nonzero constant`: everything up to
    /// `dy`, degree `dy + 1` monomials that contain x1 or x2, and degree `dy + 2`
    /// monomials divisible by x1^2 or x2^2.
    pub fn equality_rows(dy: u32) -> usize {
        let top1 = exact4(dy + 1) - (dy as usize + 2);
        let d = dy + 2;
        // Exponents of x1 and x2 both at most one.
        let low: usize = [(0, 0), (1, 0), (0, 1), (1, 1)]
            .iter()
            .map(|(a, b)| (d - a - b) as usize + 1)
            .sum();
        b4(dy) + top1 + exact4(d) - low
    }

    pub struct Expected {
        pub rows: usize,
        pub block_sides: Vec<usize>,
        pub free: usize,
    }

    /// Shape of the program for even `d = d_rho = d_psi`, `d_sigma + 2 <= d`
    /// and `d_lambda + 2 <= d`.
    pub fn expected(d: u32, ds: u32, dl: u32) -> Expected {
        let half = d / 2;
        let dy = d;
        let div_half = (dy + 2).div_ceil(2);
        let sigma = b4(ds / 2);
        // initial, three unsafe pieces, four y entries, four input bounds.
        let mut block_sides = vec![b4(half); 12];
        block_sides.push(b4(div_half));
        block_sides.extend(std::iter::repeat_n(sigma, 20));
        block_sides.sort_unstable();
        Expected {
            rows: 12 * b4(2 * half) + b4(2 * div_half) + 2 * equality_rows(dy),
            block_sides,
            free: 7 * b4(d) + 2 * b4(dl),
        }
    }
}

//! Sample-based audits of certificates and simulation traces.
//!
//! Nothing here trusts the solver: every condition is re-evaluated on the
//! extracted polynomials at freshly sampled points.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certificate::Certificate;
use crate::config::EnvironmentConfig;
use crate::poly::Polynomial;
use crate::semialg::{build_sets, GameSets, Region, NVARS};
use crate::sim::Trace;
use crate::synth::{FarkasData, EVADER, PURSUER};

pub const INITIAL_TOL: f64 = 1e-9;
pub const Y_TOL: f64 = 1e-9;
pub const EQUALITY_TOL: f64 = 1e-7;
pub const INPUT_TOL: f64 = 1e-9;
/// Slack on control bounds in trace audits.
pub const BOUND_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionResult {
    pub name: &'static str,
    pub passed: bool,
    pub samples: usize,
    /// Worst sampled value of the checked quantity (see [`check_certificate`]).
    pub worst: f64,
    pub seed: u64,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub conditions: Vec<ConditionResult>,
    pub equality_residuals: [f64; 2],
    /// Smallest Gram eigenvalue reported with the certificate.
    pub gram_min_eigenvalue: f64,
    pub overall: bool,
}

impl VerificationReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// `key = value` lines in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let verdict = |b: bool| if b { "pass" } else { "fail" };
        let _ = writeln!(out, "overall = {}", verdict(self.overall));
        for c in &self.conditions {
            let _ = writeln!(out, "{}.result = {}", c.name, verdict(c.passed));
            let _ = writeln!(out, "{}.samples = {}", c.name, c.samples);
            let _ = writeln!(out, "{}.worst = {:.9e}", c.name, c.worst);
            let _ = writeln!(out, "{}.seed = {}", c.name, c.seed);
            if let Some(n) = &c.note {
                let _ = writeln!(out, "{}.note = {}", c.name, n);
            }
        }
        for (k, r) in self.equality_residuals.iter().enumerate() {
            let _ = writeln!(out, "equality_residual.{} = {:.9e}", k + 1, r);
        }
        let _ = writeln!(out, "gram_min_eigenvalue = {:.9e}", self.gram_min_eigenvalue);
        out
    }
}

/// The robust divergence `D(x, w) = a(x) + b(x) . w`, multiplied through by
/// `V^(alpha + 1)`:
/// `a = V div_e psi_hat - alpha grad_e V . psi_hat`,
/// `b = V grad_p rho_hat - alpha rho_hat grad_p V`.
#[derive(Clone, Debug)]
pub struct DivergenceForm {
    pub a: Polynomial,
    pub b: [Polynomial; 2],
}

impl DivergenceForm {
    pub fn new(cert: &Certificate) -> Self {
        let alpha = f64::from(cert.alpha);
        let v = &cert.v;
        let d = |p: &Polynomial, i: usize| p.differentiate(i).expect("index in range");
        let mut a = Polynomial::zero(NVARS);
        for (k, &var) in EVADER.iter().enumerate() {
            let psi = cert.psi_hat.get(k);
            a = &a + &(&(v * &d(psi, var)) - &(&(&d(v, var) * psi) * alpha));
        }
        let b = PURSUER.map(|var| &(v * &d(&cert.rho_hat, var)) - &(&(&cert.rho_hat * &d(v, var)) * alpha));
        DivergenceForm { a, b }
    }

    pub fn value(&self, x: &[f64; 4], w: [f64; 2]) -> f64 {
        self.a.eval_unchecked(x) + self.b[0].eval_unchecked(x) * w[0] + self.b[1].eval_unchecked(x) * w[1]
    }
}

fn sample(sets: &GameSets, region: Region, n: usize, seed: u64) -> Result<Vec<[f64; 4]>, String> {
    sets.sample_region(region, n, seed).map_err(|e| e.to_string())
}

/// Uniform points of the box `[-R - R_r, R + R_r]^4`.
fn box_points(cfg: &EnvironmentConfig, n: usize, seed: u64) -> Vec<[f64; 4]> {
    let b = cfg.r + cfg.r_r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [0; 4].map(|_| rng.gen_range(-b..=b)))
        .collect()
}

/// Evaluates `f` on each point; the condition passes when every value
/// satisfies `ok`. `worst` keeps the extreme value under `worse`.
fn sampled(
    name: &'static str,
    seed: u64,
    points: Result<Vec<[f64; 4]>, String>,
    f: impl Fn(&[f64; 4]) -> f64,
    ok: impl Fn(f64) -> bool,
    lower_is_worse: bool,
) -> ConditionResult {
    let points = match points {
        Ok(p) => p,
        Err(e) => {
            return ConditionResult {
                name,
                passed: false,
                samples: 0,
                worst: f64::NAN,
                seed,
                note: Some(e),
            }
        }
    };
    let mut worst = if lower_is_worse { f64::INFINITY } else { f64::NEG_INFINITY };
    let mut passed = true;
    for x in &points {
        let v = f(x);
        if !ok(v) {
            passed = false;
        }
        let worse = if lower_is_worse { v < worst } else { v > worst };
        if worse || v.is_nan() {
            worst = v;
        }
    }
    ConditionResult {
        name,
        passed,
        samples: points.len(),
        worst,
        seed,
        note: None,
    }
}

/// Coefficient-wise residuals of `V y^T N + V grad_p rho_hat - alpha rho_hat grad_p V`.
pub fn equality_residuals(cert: &Certificate) -> [f64; 2] {
    let form = DivergenceForm::new(cert);
    let n = FarkasData::new(cert.cfg.w_max).n;
    [0, 1].map(|k| {
        let mut ytn = Polynomial::zero(NVARS);
        for (row, y) in n.iter().zip(cert.y.iter()) {
            ytn = &ytn + &(y * row[k]);
        }
        (&(&cert.v * &ytn) + &form.b[k]).max_abs_coefficient()
    })
}

/// Runs the six certificate conditions on `n_samples` points each.
///
/// `worst` is the minimum of `rho_hat` for `initial`, the maximum of
/// `rho_hat` for `unsafe`, the minimum `y_i` for `y_nonneg`, the largest
/// coefficient residual for `equality`, the minimum vertex divergence for
/// `divergence` and the maximum of `|psi_i| - u_max rho_hat` for `input_bound`.
pub fn check_certificate(cert: &Certificate, n_samples: usize, seed: u64) -> VerificationReport {
    let cfg = &cert.cfg;
    let sets = match build_sets(cfg) {
        Ok(s) => s,
        Err(e) => {
            let c = ConditionResult {
                name: "config",
                passed: false,
                samples: 0,
                worst: f64::NAN,
                seed,
                note: Some(e.to_string()),
            };
            return VerificationReport {
                conditions: vec![c],
                equality_residuals: [f64::NAN; 2],
                gram_min_eigenvalue: cert.solver_report.min_eigenvalue,
                overall: false,
            };
        }
    };
    let rho = &cert.rho_hat;
    let mut conditions = Vec::new();

    let s = seed.wrapping_add(1);
    conditions.push(sampled(
        "initial",
        s,
        sample(&sets, Region::Xi, n_samples, s),
        |x| rho.eval_unchecked(x),
        |v| v >= -INITIAL_TOL,
        true,
    ));

    let s = seed.wrapping_add(2);
    let margin = -0.5 * cfg.epsilon_strict;
    conditions.push(sampled(
        "unsafe",
        s,
        sample(&sets, Region::UnsafeBoundaryUnion, n_samples, s),
        |x| rho.eval_unchecked(x),
        |v| v <= margin,
        false,
    ));

    let s = seed.wrapping_add(3);
    conditions.push(sampled(
        "y_nonneg",
        s,
        Ok(box_points(cfg, n_samples, s)),
        |x| cert.y.iter().map(|p| p.eval_unchecked(x)).fold(f64::INFINITY, f64::min),
        |v| v >= -Y_TOL,
        true,
    ));

    let residuals = equality_residuals(cert);
    let eq_worst = residuals[0].max(residuals[1]);
    conditions.push(ConditionResult {
        name: "equality",
        passed: eq_worst < EQUALITY_TOL,
        samples: 0,
        worst: eq_worst,
        seed: 0,
        note: None,
    });

    let s = seed.wrapping_add(5);
    let form = DivergenceForm::new(cert);
    let vertices = FarkasData::new(cfg.w_max).vertices();
    conditions.push(sampled(
        "divergence",
        s,
        sample(&sets, Region::ClXMinusXr, n_samples, s),
        |x| vertices.iter().map(|&w| form.value(x, w)).fold(f64::INFINITY, f64::min),
        |v| v > 0.0,
        true,
    ));

    let s = seed.wrapping_add(6);
    conditions.push(sampled(
        "input_bound",
        s,
        sample(&sets, Region::XcInner, n_samples, s),
        |x| {
            let bound = cfg.u_max * rho.eval_unchecked(x);
            cert.psi_hat
                .iter()
                .map(|p| p.eval_unchecked(x).abs() - bound)
                .fold(f64::NEG_INFINITY, f64::max)
        },
        |v| v <= INPUT_TOL,
        false,
    ));

    let overall = conditions.iter().all(|c| c.passed);
    VerificationReport {
        conditions,
        equality_residuals: residuals,
        gram_min_eigenvalue: cert.solver_report.min_eigenvalue,
        overall,
    }
}

/// Brute-force containment check at one state: the divergence inequality
/// at every box vertex and at `n_w_samples` uniform interior inputs.
pub fn check_farkas_pointwise(cert: &Certificate, x: &[f64; 4], n_w_samples: usize, seed: u64) -> bool {
    let r = farkas_pointwise(&DivergenceForm::new(cert), cert.cfg.w_max, x, n_w_samples, seed);
    r.vertices_positive && r.interior_positive
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FarkasPointwise {
    pub vertices_positive: bool,
    pub interior_positive: bool,
}

pub fn farkas_pointwise(
    form: &DivergenceForm,
    w_max: f64,
    x: &[f64; 4],
    n_w_samples: usize,
    seed: u64,
) -> FarkasPointwise {
    let vertices_positive = FarkasData::new(w_max)
        .vertices()
        .iter()
        .all(|&w| form.value(x, w) > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior_positive = if w_max == 0.0 {
        form.value(x, [0.0, 0.0]) > 0.0
    } else {
        (0..n_w_samples).all(|_| {
            let w = [rng.gen_range(-w_max..=w_max), rng.gen_range(-w_max..=w_max)];
            form.value(x, w) > 0.0
        })
    };
    FarkasPointwise {
        vertices_positive,
        interior_positive,
    }
}

/// Counts states where all vertices pass but some interior input fails.
/// Because the divergence is affine in `w`, this must be zero.
pub fn vertex_interior_violations(cert: &Certificate, states: &[[f64; 4]], n_w_samples: usize, seed: u64) -> usize {
    let form = DivergenceForm::new(cert);
    states
        .iter()
        .enumerate()
        .filter(|(k, x)| {
            let r = farkas_pointwise(&form, cert.cfg.w_max, x, n_w_samples, seed.wrapping_add(*k as u64));
            r.vertices_positive && !r.interior_positive
        })
        .count()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceReport {
    pub rows: usize,
    pub min_dist: f64,
    /// First row whose distance is at or below the catch radius.
    pub capture_row: Option<usize>,
    pub final_in_target: bool,
    pub outcome_consistent: bool,
    /// First row outside the arena.
    pub outside_row: Option<usize>,
    /// First row whose evader input exceeds `u_max` in some axis.
    pub input_violation_row: Option<usize>,
    /// First row whose pursuer input leaves the box `|w_i| <= w_max`.
    pub pursuer_violation_row: Option<usize>,
    /// First row whose recorded distance differs from the state.
    pub dist_mismatch_row: Option<usize>,
    pub max_abs_u: f64,
    /// Largest 2-norm of the pursuer input.
    pub max_norm_w: f64,
    pub passed: bool,
}

impl TraceReport {
    pub fn to_text(&self) -> String {
        let opt = |o: Option<usize>| o.map_or("none".to_string(), |r| r.to_string());
        format!(
            "overall = {}\nrows = {}\nmin_dist = {:.9e}\ncapture_row = {}\nfinal_in_target = {}\noutcome_consistent = {}\noutside_row = {}\ninput_violation_row = {}\npursuer_violation_row = {}\ndist_mismatch_row = {}\nmax_abs_u = {:.9e}\nmax_norm_w = {:.9e}\n",
            if self.passed { "pass" } else { "fail" },
            self.rows,
            self.min_dist,
            opt(self.capture_row),
            self.final_in_target,
            self.outcome_consistent,
            opt(self.outside_row),
            opt(self.input_violation_row),
            opt(self.pursuer_violation_row),
            opt(self.dist_mismatch_row),
            self.max_abs_u,
            self.max_norm_w,
        )
    }
}

/// Audits a trace: distance above the catch radius, every row in the arena,
/// the outcome agreeing with the last row, and both input bounds.
pub fn check_trace(trace: &Trace, cfg: &EnvironmentConfig) -> TraceReport {
    use crate::sim::Outcome;
    let sets = build_sets(cfg).ok();
    let mut r = TraceReport {
        rows: trace.rows.len(),
        min_dist: f64::INFINITY,
        capture_row: None,
        final_in_target: false,
        outcome_consistent: false,
        outside_row: None,
        input_violation_row: None,
        pursuer_violation_row: None,
        dist_mismatch_row: None,
        max_abs_u: 0.0,
        max_norm_w: 0.0,
        passed: false,
    };
    for (k, row) in trace.rows.iter().enumerate() {
        let d = GameSets::distance(&row.x);
        r.min_dist = r.min_dist.min(d);
        if d <= cfg.r_a && r.capture_row.is_none() {
            r.capture_row = Some(k);
        }
        if d != row.dist && r.dist_mismatch_row.is_none() {
            r.dist_mismatch_row = Some(k);
        }
        if let Some(s) = &sets {
            if !s.contains(Region::X, &row.x) && r.outside_row.is_none() {
                r.outside_row = Some(k);
            }
        }
        let au = row.u[0].abs().max(row.u[1].abs());
        r.max_abs_u = r.max_abs_u.max(au);
        if au > cfg.u_max + BOUND_TOL && r.input_violation_row.is_none() {
            r.input_violation_row = Some(k);
        }
        r.max_norm_w = r.max_norm_w.max(row.w[0].hypot(row.w[1]));
        if row.w[0].abs().max(row.w[1].abs()) > cfg.w_max + BOUND_TOL && r.pursuer_violation_row.is_none() {
            r.pursuer_violation_row = Some(k);
        }
    }
    if let (Some(last), Some(s)) = (trace.rows.last(), &sets) {
        r.final_in_target = s.contains(Region::Xr, &last.x);
    }
    r.outcome_consistent = r.final_in_target == (trace.outcome == Outcome::ReachedTarget);
    r.passed = sets.is_some()
        && !trace.rows.is_empty()
        && r.capture_row.is_none()
        && r.outside_row.is_none()
        && r.input_violation_row.is_none()
        && r.pursuer_violation_row.is_none()
        && r.dist_mismatch_row.is_none()
        && r.outcome_consistent;
    r
}

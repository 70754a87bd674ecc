//! Closed-loop simulation of `x' = (u, w)` under the rational evader law
//! `u = psi_hat / rho_hat` and a pursuer strategy.

mod strategy;
mod trace;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use log::{debug, warn};
use thiserror::Error;

use crate::certificate::Certificate;
use crate::semialg::{build_sets, GameSets, Region};

pub use strategy::{toward, BoxSaturating, GoToMiddle, PursuerStrategy, StrategyRegistry, TailChasing};
pub use trace::{from_csv, to_csv, TraceError, CSV_HEADER};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    ReachedTarget,
    Captured,
    LeftArena,
    Timeout,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Outcome {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ReachedTarget" => Ok(Outcome::ReachedTarget),
            "Captured" => Ok(Outcome::Captured),
            "LeftArena" => Ok(Outcome::LeftArena),
            "Timeout" => Ok(Outcome::Timeout),
            _ => Err(format!("unknown outcome {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: [f64; 4],
    pub u: [f64; 2],
    pub w: [f64; 2],
    pub rho: f64,
    pub dist: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub outcome: Outcome,
    /// Steps on which `|rho_hat|` fell below the singularity floor.
    pub singular_steps: usize,
}

impl Trace {
    pub fn min_dist(&self) -> f64 {
        self.rows.iter().map(|r| r.dist).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation settings: {0}")]
    Config(String),
    #[error("initial state {0:?} is not in the initial set")]
    InitialState([f64; 4]),
}

#[derive(Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub strategy: Arc<dyn PursuerStrategy>,
    pub x0: [f64; 4],
    /// Minimum `|rho_hat|` before the controller saturates; `None` uses
    /// `1e-9` times the largest coefficient of `rho_hat`.
    pub singularity_floor: Option<f64>,
}

impl fmt::Debug for SimConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimConfig")
            .field("dt", &self.dt)
            .field("t_max", &self.t_max)
            .field("strategy", &self.strategy.name())
            .field("x0", &self.x0)
            .field("singularity_floor", &self.singularity_floor)
            .finish()
    }
}

impl SimConfig {
    /// Settings from the certificate's config with the given strategy and
    /// initial state.
    pub fn new(cert: &Certificate, strategy: Arc<dyn PursuerStrategy>, x0: [f64; 4]) -> Self {
        SimConfig {
            dt: cert.cfg.dt,
            t_max: cert.cfg.t_max,
            strategy,
            x0,
            singularity_floor: None,
        }
    }
}

pub fn default_floor(cert: &Certificate) -> f64 {
    1e-9 * cert.rho_hat.max_abs_coefficient()
}

/// `u = psi_hat / rho_hat` clamped to the box; when `|rho_hat|` is below
/// `floor` the input saturates in the direction of `psi_hat`. The flag
/// reports the degraded case.
pub fn evader_control(cert: &Certificate, x: &[f64; 4], floor: f64) -> ([f64; 2], bool) {
    let u_max = cert.cfg.u_max;
    let rho = cert.rho_hat.eval_unchecked(x);
    let psi = [cert.psi_hat.get(0).eval_unchecked(x), cert.psi_hat.get(1).eval_unchecked(x)];
    if rho.abs() < floor || rho == 0.0 {
        let sat = |p: f64| if p == 0.0 { 0.0 } else { u_max * p.signum() };
        return ([sat(psi[0]), sat(psi[1])], true);
    }
    let clamp = |p: f64| (p / rho).clamp(-u_max, u_max);
    ([clamp(psi[0]), clamp(psi[1])], false)
}

/// Forward Euler, exact for the integrator with held inputs.
pub fn step(x: &[f64; 4], u: [f64; 2], w: [f64; 2], dt: f64) -> [f64; 4] {
    [x[0] + dt * u[0], x[1] + dt * u[1], x[2] + dt * w[0], x[3] + dt * w[1]]
}

/// Checks in order: capture, target, arena exit, horizon.
fn classify(sets: &GameSets, x: &[f64; 4], t: f64, t_max: f64) -> Option<Outcome> {
    if GameSets::distance(x) <= sets.config().r_a {
        Some(Outcome::Captured)
    } else if sets.contains(Region::Xr, x) {
        Some(Outcome::ReachedTarget)
    } else if !sets.contains(Region::X, x) {
        Some(Outcome::LeftArena)
    } else if t >= t_max {
        Some(Outcome::Timeout)
    } else {
        None
    }
}

pub fn run(cert: &Certificate, sim: &SimConfig) -> Result<Trace, SimError> {
    let cfg = &cert.cfg;
    if !(sim.dt > 0.0) || !(sim.t_max > 0.0) {
        return Err(SimError::Config(format!("dt = {} and t_max = {} must be positive", sim.dt, sim.t_max)));
    }
    if sim.dt * cfg.u_max > cfg.r_a / 10.0 || sim.dt * cfg.w_max > cfg.r_a / 10.0 {
        return Err(SimError::Config(format!(
            "dt = {} moves more than R_a/10 per step",
            sim.dt
        )));
    }
    let sets = build_sets(cfg).map_err(|e| SimError::Config(e.to_string()))?;
    if !sets.contains(Region::Xi, &sim.x0) {
        return Err(SimError::InitialState(sim.x0));
    }
    let floor = sim.singularity_floor.unwrap_or_else(|| default_floor(cert));
    let mut x = sim.x0;
    let mut rows = Vec::new();
    let mut singular_steps = 0;
    let mut k: u64 = 0;
    loop {
        let t = k as f64 * sim.dt;
        let (u, singular) = evader_control(cert, &x, floor);
        if singular {
            singular_steps += 1;
            debug!("t = {t}: |rho_hat| below {floor:e}, saturating input");
        }
        let w = sim.strategy.control(&x, cfg);
        rows.push(TraceRow {
            t,
            x,
            u,
            w,
            rho: cert.rho_hat.eval_unchecked(&x),
            dist: GameSets::distance(&x),
        });
        if let Some(outcome) = classify(&sets, &x, t, sim.t_max) {
            if singular_steps > 0 {
                warn!("{singular_steps} steps used the saturated controller near rho_hat = 0");
            }
            return Ok(Trace {
                rows,
                outcome,
                singular_steps,
            });
        }
        x = step(&x, u, w, sim.dt);
        k += 1;
    }
}

/// Runs from `n` initial states drawn uniformly from the initial set, in
/// parallel.
pub fn sweep(
    cert: &Certificate,
    strategy: Arc<dyn PursuerStrategy>,
    n: usize,
    seed: u64,
) -> Result<Vec<Trace>, SimError> {
    let sets = build_sets(&cert.cfg).map_err(|e| SimError::Config(e.to_string()))?;
    let starts = sets
        .sample_region(Region::Xi, n, seed)
        .map_err(|e| SimError::Config(e.to_string()))?;
    // Runs are independent; each thread owns one trace and results keep the
    // order of `starts`.
    std::thread::scope(|s| {
        let handles: Vec<_> = starts
            .into_iter()
            .map(|x0| {
                let sim = SimConfig::new(cert, strategy.clone(), x0);
                s.spawn(move || run(cert, &sim))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::SolverReport;
    use crate::config::EnvironmentConfig;
    use crate::poly::{PolyVec, Polynomial};
    use crate::semialg::NVARS;
    use crate::synth::build_v;
    use std::collections::BTreeMap;

    fn cert(rho: Polynomial, psi: [Polynomial; 2]) -> Certificate {
        let cfg = EnvironmentConfig::paper_tail_chasing();
        Certificate {
            rho_hat: rho,
            psi_hat: PolyVec::new(psi.to_vec()).unwrap(),
            y: PolyVec::zeros(NVARS, 4),
            multipliers: BTreeMap::new(),
            v: build_v(&cfg),
            alpha: cfg.alpha,
            cfg,
            solver_report: SolverReport::default(),
        }
    }

    fn c(v: f64) -> Polynomial {
        Polynomial::constant(NVARS, v)
    }

    #[test]
    fn control_examples() {
        let k = cert(c(2.0), [c(0.02), c(0.0)]);
        assert_eq!(evader_control(&k, &[0.0; 4], 1e-9), ([0.01, 0.0], false));
        let k = cert(c(1.0), [c(0.05), c(0.0)]);
        assert_eq!(evader_control(&k, &[0.0; 4], 1e-9).0, [0.015, 0.0]);
        let k = cert(c(0.0), [c(-1.0), c(1.0)]);
        assert_eq!(evader_control(&k, &[0.0; 4], 1e-9), ([-0.015, 0.015], true));
    }

    #[test]
    fn step_examples() {
        assert_eq!(step(&[0.0; 4], [1.0, 0.0], [0.0, 1.0], 0.1), [0.1, 0.0, 0.0, 0.1]);
        assert_eq!(step(&[1.0, 2.0, 3.0, 4.0], [0.0; 2], [0.0; 2], 0.1), [1.0, 2.0, 3.0, 4.0]);
        let mut x = [0.0; 4];
        for _ in 0..10 {
            x = step(&x, [0.25, -0.5], [0.0, 0.0], 0.125);
        }
        assert_eq!(x, [10.0 * 0.125 * 0.25, 10.0 * 0.125 * -0.5, 0.0, 0.0]);
    }

    #[test]
    fn motionless_evader_never_reaches() {
        let k = cert(c(1.0), [c(0.0), c(0.0)]);
        let cfg = &k.cfg;
        let mut sim = SimConfig::new(&k, Arc::new(TailChasing), [cfg.x_ie[0], cfg.x_ie[1], cfg.x_ip[0], cfg.x_ip[1]]);
        sim.t_max = 400.0;
        let t = run(&k, &sim).unwrap();
        assert!(matches!(t.outcome, Outcome::Captured | Outcome::Timeout));
        assert_eq!(t.outcome, Outcome::Captured);
        for w in t.rows.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn rejects_start_outside_initial_set() {
        let k = cert(c(1.0), [c(0.0), c(0.0)]);
        let sim = SimConfig::new(&k, Arc::new(TailChasing), [0.0, 0.0, 0.0, 0.0]);
        assert_eq!(run(&k, &sim).unwrap_err(), SimError::InitialState([0.0; 4]));
    }
}

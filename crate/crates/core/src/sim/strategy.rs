//! Pursuer strategies behind a name-keyed registry.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::config::EnvironmentConfig;

/// A feedback law for the pursuer. Implementations must keep
/// `|w_i| <= w_max` in every axis.
pub trait PursuerStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn control(&self, x: &[f64; 4], cfg: &EnvironmentConfig) -> [f64; 2];
}

impl fmt::Debug for dyn PursuerStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PursuerStrategy({})", self.name())
    }
}

/// Full speed along `d` in the 2-norm, or rest when `d` vanishes.
pub fn toward(d: [f64; 2], w_max: f64) -> [f64; 2] {
    let n = d[0].hypot(d[1]);
    if n < 1e-12 {
        return [0.0, 0.0];
    }
    [w_max * d[0] / n, w_max * d[1] / n]
}

/// Moves straight at the evader.
#[derive(Debug, Clone, Copy, Default)]
pub struct TailChasing;

impl PursuerStrategy for TailChasing {
    fn name(&self) -> &'static str {
        "tail-chasing"
    }

    fn control(&self, x: &[f64; 4], cfg: &EnvironmentConfig) -> [f64; 2] {
        toward([x[0] - x[2], x[1] - x[3]], cfg.w_max)
    }
}

/// Moves toward the midpoint between the evader and the target center.
#[derive(Debug, Clone, Copy, Default)]
pub struct GoToMiddle;

impl PursuerStrategy for GoToMiddle {
    fn name(&self) -> &'static str {
        "go-to-middle"
    }

    fn control(&self, x: &[f64; 4], cfg: &EnvironmentConfig) -> [f64; 2] {
        let mid = [0.5 * (x[0] + cfg.x_r[0]), 0.5 * (x[1] + cfg.x_r[1])];
        toward([mid[0] - x[2], mid[1] - x[3]], cfg.w_max)
    }
}

/// Chases the evader at `w_max` in each axis, i.e. at a corner of the box.
/// Faster than the 2-norm strategies; meant for stress tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoxSaturating;

impl PursuerStrategy for BoxSaturating {
    fn name(&self) -> &'static str {
        "box-saturating"
    }

    fn control(&self, x: &[f64; 4], cfg: &EnvironmentConfig) -> [f64; 2] {
        let s = |d: f64| if d.abs() < 1e-12 { 0.0 } else { cfg.w_max * d.signum() };
        [s(x[0] - x[2]), s(x[1] - x[3])]
    }
}

type Factory = Box<dyn Fn() -> Arc<dyn PursuerStrategy> + Send + Sync>;

pub struct StrategyRegistry {
    factories: BTreeMap<String, Factory>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut r = StrategyRegistry::empty();
        r.register("tail-chasing", || Arc::new(TailChasing));
        r.register("go-to-middle", || Arc::new(GoToMiddle));
        r.register("box-saturating", || Arc::new(BoxSaturating));
        r
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// Adds or replaces a strategy under `name`.
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn() -> Arc<dyn PursuerStrategy> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn PursuerStrategy>> {
        self.factories.get(name).map(|f| f())
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }
}

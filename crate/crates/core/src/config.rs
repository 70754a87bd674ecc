//! Game-instance configuration.
//!
//! A config file is flat TOML whose keys mirror the field names below
//! (`R`, `R_ie`, `x_r`, `u_max`, ...). Everything a run needs lives in one file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn default_alpha() -> u32 {
    2
}
fn default_degree() -> u32 {
    4
}
fn default_sigma() -> u32 {
    2
}
fn default_eps() -> f64 {
    1e-4
}
fn default_shrink() -> f64 {
    0.02
}
fn default_dt() -> f64 {
    0.1
}
fn default_t_max() -> f64 {
    2000.0
}
fn default_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "R_ie")]
    pub r_ie: f64,
    #[serde(rename = "R_ip")]
    pub r_ip: f64,
    #[serde(rename = "R_a")]
    pub r_a: f64,
    #[serde(rename = "R_r")]
    pub r_r: f64,
    pub x_r: [f64; 2],
    pub x_ie: [f64; 2],
    pub x_ip: [f64; 2],
    pub u_max: f64,
    pub w_max: f64,
    #[serde(default = "default_alpha")]
    pub alpha: u32,
    #[serde(default = "default_degree")]
    pub d_rho: u32,
    #[serde(default = "default_degree")]
    pub d_psi: u32,
    #[serde(default = "default_sigma")]
    pub d_sigma: u32,
    #[serde(default = "default_sigma")]
    pub d_lambda: u32,
    #[serde(default = "default_eps")]
    pub epsilon_strict: f64,
    /// Relative inward offset of the region on which the input bound is
    /// imposed. The bound `|psi| <= u_max rho` forces `rho >= 0` on its
    /// domain while the unsafe boundary needs `rho < 0`, so the two domains
    /// must not touch.
    #[serde(default = "default_shrink")]
    pub input_bound_shrink: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_samples")]
    pub verify_samples: usize,
}

impl EnvironmentConfig {
    /// The geometry of the numerical example with the tail-chasing initial
    /// positions and desk-scale degrees.
    pub fn paper_tail_chasing() -> Self {
        let r = 4.0;
        let a = std::f64::consts::FRAC_PI_4;
        EnvironmentConfig {
            r,
            r_ie: 0.3,
            r_ip: 0.3,
            r_a: 0.5,
            r_r: 0.5,
            x_r: [r * a.cos(), r * a.sin()],
            x_ie: [0.5, -1.8],
            x_ip: [0.5, 1.0],
            u_max: 0.015,
            w_max: 0.01,
            alpha: default_alpha(),
            d_rho: default_degree(),
            d_psi: default_degree(),
            d_sigma: default_sigma(),
            d_lambda: default_sigma(),
            epsilon_strict: default_eps(),
            input_bound_shrink: default_shrink(),
            dt: default_dt(),
            t_max: default_t_max(),
            verify_samples: default_samples(),
        }
    }

    /// Same geometry with the go-to-middle initial positions.
    pub fn paper_go_to_middle() -> Self {
        EnvironmentConfig {
            x_ie: [-2.0, 0.0],
            x_ip: [-2.0, 2.0],
            ..Self::paper_tail_chasing()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: EnvironmentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Degree of each Farkas multiplier entry `y_k`: `d_rho` rounded up to
    /// the next even number so that `y_k` can be a square.
    pub fn d_y(&self) -> u32 {
        self.d_rho + self.d_rho % 2
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let radii = [
            ("R", self.r),
            ("R_ie", self.r_ie),
            ("R_ip", self.r_ip),
            ("R_a", self.r_a),
            ("R_r", self.r_r),
        ];
        for (name, v) in radii {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let points = [("x_r", self.x_r), ("x_ie", self.x_ie), ("x_ip", self.x_ip)];
        for (name, p) in points {
            if !p.iter().all(|v| v.is_finite()) {
                return bad(format!("{name} must be finite"));
            }
        }
        if !(self.u_max.is_finite() && self.u_max >= 0.0) {
            return bad(format!("u_max must be nonnegative, got {}", self.u_max));
        }
        if !(self.w_max.is_finite() && self.w_max >= 0.0) {
            return bad(format!("w_max must be nonnegative, got {}", self.w_max));
        }
        if self.u_max <= self.w_max {
            log::warn!(
                "u_max = {} does not exceed w_max = {}; the evader has no speed advantage",
                self.u_max,
                self.w_max
            );
        }
        if self.alpha < 1 {
            return bad("alpha must be at least 1".into());
        }
        if !self.d_sigma.is_multiple_of(2) {
            return bad(format!("d_sigma must be even, got {}", self.d_sigma));
        }
        if !(self.epsilon_strict.is_finite() && self.epsilon_strict > 0.0) {
            return bad("epsilon_strict must be positive".into());
        }
        if !(0.0..0.5).contains(&self.input_bound_shrink) {
            return bad("input_bound_shrink must lie in [0, 0.5)".into());
        }
        if self.r_a >= self.r {
            return bad(format!(
                "catch radius R_a = {} must be smaller than the arena radius R = {}",
                self.r_a, self.r
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive".into());
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return bad("t_max must be positive".into());
        }
        let norm = |p: [f64; 2]| p[0].hypot(p[1]);
        let dist = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
        if norm(self.x_ie) + self.r_ie > self.r {
            return bad("evader initial ball leaves the arena".into());
        }
        if norm(self.x_ip) + self.r_ip > self.r {
            return bad("pursuer initial ball leaves the arena".into());
        }
        // Xi and Xa disjoint: every evader/pursuer pair from the two balls
        // must be farther apart than the catch radius.
        if dist(self.x_ie, self.x_ip) <= self.r_ie + self.r_ip + self.r_a {
            return bad("initial balls are within catch distance of each other".into());
        }
        // Xi and Xr disjoint: Xr lies outside the arena disc, Xi inside it,
        // which the two checks above already guarantee.
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_configs_are_valid() {
        EnvironmentConfig::paper_tail_chasing().validate().unwrap();
        EnvironmentConfig::paper_go_to_middle().validate().unwrap();
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = EnvironmentConfig::paper_tail_chasing();
        let text = cfg.to_toml_string();
        assert!(text.contains("R_ie = 0.3"));
        assert_eq!(EnvironmentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn defaults_fill_in() {
        let text = r#"
R = 4.0
R_ie = 0.3
R_ip = 0.3
R_a = 0.5
R_r = 0.5
x_r = [2.8284271247461903, 2.8284271247461903]
x_ie = [0.5, -1.8]
x_ip = [0.5, 1.0]
u_max = 0.015
w_max = 0.01
"#;
        let cfg = EnvironmentConfig::from_toml_str(text).unwrap();
        assert_eq!((cfg.d_rho, cfg.alpha, cfg.d_sigma), (4, 2, 2));
        assert_eq!(cfg.epsilon_strict, 1e-4);
        assert_eq!(cfg.d_y(), 4);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = EnvironmentConfig::paper_tail_chasing();
        cfg.r_a = 4.0;
        assert!(cfg.validate().is_err());
        let mut cfg = EnvironmentConfig::paper_tail_chasing();
        cfg.r_ie = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = EnvironmentConfig::paper_tail_chasing();
        cfg.alpha = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = EnvironmentConfig::paper_tail_chasing();
        cfg.x_ip = [0.5, -1.2];
        assert!(cfg.validate().is_err());
        assert!(matches!(
            EnvironmentConfig::from_toml_str("R = 'x'"),
            Err(ConfigError::Parse(_))
        ));
        assert!(EnvironmentConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn odd_d_rho_rounds_y_degree_up() {
        let mut cfg = EnvironmentConfig::paper_tail_chasing();
        cfg.d_rho = 5;
        assert_eq!(cfg.d_y(), 6);
    }
}

//! Solved density certificate and its text format.
//!
//! ```text
//! pursuit-density-certificate v1
//! manifest <hash>
//! [config]
//! <TOML>
//! [poly rho_hat]
//! e1 e2 e3 e4 coefficient
//! ...
//! [solver]
//! <TOML>
//! ```
//!
//! Polynomial sections are `rho_hat`, `psi_hat.1`, `psi_hat.2`, `y.1` to
//! `y.4`, `V` and `multiplier.<name>` in any order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, EnvironmentConfig};
use crate::poly::{PolyError, PolyVec, Polynomial};
use crate::semialg::NVARS;

pub const HEADER: &str = "pursuit-density-certificate v1";

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("cannot access certificate {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> CertificateError {
    CertificateError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Solver statistics carried along with a certificate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: String,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub primal_objective: f64,
    pub min_eigenvalue: f64,
    pub rows: usize,
    pub blocks: usize,
    pub max_block_side: usize,
    pub free_variables: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub rho_hat: Polynomial,
    pub psi_hat: PolyVec,
    pub y: PolyVec,
    pub multipliers: BTreeMap<String, Polynomial>,
    pub cfg: EnvironmentConfig,
    pub v: Polynomial,
    pub alpha: u32,
    pub solver_report: SolverReport,
}

impl Certificate {
    pub fn to_text(&self, manifest: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "manifest {manifest}");
        out.push_str("[config]\n");
        out.push_str(&self.cfg.to_toml_string());
        if !out.ends_with('\n') {
            out.push('\n');
        }
        let mut poly = |name: &str, p: &Polynomial| {
            let _ = writeln!(out, "[poly {name}]");
            p.write_rows(&mut out);
        };
        poly("rho_hat", &self.rho_hat);
        for (i, p) in self.psi_hat.iter().enumerate() {
            poly(&format!("psi_hat.{}", i + 1), p);
        }
        for (i, p) in self.y.iter().enumerate() {
            poly(&format!("y.{}", i + 1), p);
        }
        poly("V", &self.v);
        for (name, p) in &self.multipliers {
            poly(&format!("multiplier.{name}"), p);
        }
        out.push_str("[solver]\n");
        out.push_str(&toml::to_string(&self.solver_report).expect("solver report serializes"));
        out
    }

    /// Parses a certificate, returning it with its manifest hash.
    pub fn from_text(text: &str) -> Result<(Certificate, String), CertificateError> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.first().map(|l| l.trim()) != Some(HEADER) {
            return Err(parse_err(1, format!("expected header {HEADER:?}")));
        }
        let manifest = lines
            .get(1)
            .and_then(|l| l.strip_prefix("manifest "))
            .ok_or_else(|| parse_err(2, "expected 'manifest <hash>'"))?
            .trim()
            .to_string();

        // (name, first content line index, lines)
        let mut sections: Vec<(String, usize, Vec<&str>)> = Vec::new();
        for (k, line) in lines.iter().enumerate().skip(2) {
            let t = line.trim();
            if t.starts_with('[') && t.ends_with(']') {
                let name = &t[1..t.len() - 1];
                let known = name == "config" || name == "solver" || name.strip_prefix("poly ").is_some_and(|n| !n.is_empty());
                if !known {
                    return Err(parse_err(k + 1, format!("unknown section [{name}]")));
                }
                if sections.iter().any(|(n, _, _)| n == name) {
                    return Err(parse_err(k + 1, format!("duplicate section [{name}]")));
                }
                sections.push((name.to_string(), k + 2, Vec::new()));
            } else if let Some(s) = sections.last_mut() {
                s.2.push(line);
            } else if !t.is_empty() {
                return Err(parse_err(k + 1, "content before the first section"));
            }
        }
        let take = |name: &str| sections.iter().find(|(n, _, _)| n == name);
        let (_, _, cfg_lines) = take("config").ok_or_else(|| parse_err(lines.len(), "missing [config]"))?;
        let cfg = EnvironmentConfig::from_toml_str(&cfg_lines.join("\n"))?;
        let (_, solver_line, solver_lines) = take("solver").ok_or_else(|| parse_err(lines.len(), "missing [solver]"))?;
        let solver_report: SolverReport = toml::from_str(&solver_lines.join("\n"))
            .map_err(|e| parse_err(*solver_line, format!("malformed solver section: {e}")))?;

        let poly = |name: &str| -> Result<Polynomial, CertificateError> {
            let (_, first, rows) = take(&format!("poly {name}"))
                .ok_or_else(|| parse_err(lines.len(), format!("missing [poly {name}]")))?;
            Ok(Polynomial::parse_rows(NVARS, rows.iter().copied(), *first)?)
        };
        let rho_hat = poly("rho_hat")?;
        let psi_hat = PolyVec::new(vec![poly("psi_hat.1")?, poly("psi_hat.2")?])?;
        let y = PolyVec::new((1..=4).map(|i| poly(&format!("y.{i}"))).collect::<Result<_, _>>()?)?;
        let v = poly("V")?;
        let mut multipliers = BTreeMap::new();
        for (name, first, rows) in &sections {
            if let Some(m) = name.strip_prefix("poly multiplier.") {
                multipliers.insert(m.to_string(), Polynomial::parse_rows(NVARS, rows.iter().copied(), *first)?);
            }
        }
        let alpha = cfg.alpha;
        Ok((
            Certificate {
                rho_hat,
                psi_hat,
                y,
                multipliers,
                cfg,
                v,
                alpha,
                solver_report,
            },
            manifest,
        ))
    }

    pub fn save(&self, path: &Path, manifest: &str) -> Result<(), CertificateError> {
        std::fs::write(path, self.to_text(manifest)).map_err(|source| CertificateError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<(Certificate, String), CertificateError> {
        let text = std::fs::read_to_string(path).map_err(|source| CertificateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Certificate::from_text(&text)
    }
}

//! The six circle polynomials of the game and the sets built from them.
//!
//! State layout is `x = (x1, x2, x3, x4)` with the evader at `(x1, x2)` and the
//! pursuer at `(x3, x4)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, EnvironmentConfig};
use crate::poly::Polynomial;

pub const NVARS: usize = 4;
/// Tolerance for the equality pieces of the unsafe boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SetError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("sampling {region} exhausted: {accepted} of {tries} draws accepted")]
    SamplingExhausted {
        region: Region,
        accepted: usize,
        tries: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    X,
    Xi,
    Xa,
    Xr,
    Xc,
    ClXMinusXr,
    UnsafeBoundaryUnion,
    /// `Xc` pulled inward by `input_bound_shrink`; the input-bound domain.
    XcInner,
}

impl Region {
    pub const ALL: [Region; 8] = [
        Region::X,
        Region::Xi,
        Region::Xa,
        Region::Xr,
        Region::Xc,
        Region::ClXMinusXr,
        Region::UnsafeBoundaryUnion,
        Region::XcInner,
    ];
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::X => "X",
            Region::Xi => "Xi",
            Region::Xa => "Xa",
            Region::Xr => "Xr",
            Region::Xc => "Xc",
            Region::ClXMinusXr => "cl(X\\Xr)",
            Region::UnsafeBoundaryUnion => "unsafe",
            Region::XcInner => "Xc-inner",
        };
        f.write_str(s)
    }
}

/// `(x_a - c0)^2 + (x_b - c1)^2 - r^2` over the joint state.
pub fn circle(a: usize, b: usize, center: [f64; 2], radius: f64) -> Polynomial {
    let n = NVARS;
    let da = &Polynomial::var(n, a) - &Polynomial::constant(n, center[0]);
    let db = &Polynomial::var(n, b) - &Polynomial::constant(n, center[1]);
    let sq = &(&da * &da) + &(&db * &db);
    &sq - &Polynomial::constant(n, radius * radius)
}

/// `(x1 - x3)^2 + (x2 - x4)^2 - r^2`.
pub fn separation(radius: f64) -> Polynomial {
    let n = NVARS;
    let d1 = &Polynomial::var(n, 0) - &Polynomial::var(n, 2);
    let d2 = &Polynomial::var(n, 1) - &Polynomial::var(n, 3);
    &(&(&d1 * &d1) + &(&d2 * &d2)) - &Polynomial::constant(n, radius * radius)
}

#[derive(Debug, Clone)]
pub struct GameSets {
    pub h_xe: Polynomial,
    pub h_xp: Polynomial,
    pub h_ie: Polynomial,
    pub h_ip: Polynomial,
    pub h_a: Polynomial,
    pub h_re: Polynomial,
    /// Shrunk variants describing [`Region::XcInner`].
    pub h_xe_inner: Polynomial,
    pub h_xp_inner: Polynomial,
    pub h_a_outer: Polynomial,
    cfg: EnvironmentConfig,
}

pub fn build_sets(cfg: &EnvironmentConfig) -> Result<GameSets, SetError> {
    cfg.validate()?;
    let s = cfg.input_bound_shrink;
    Ok(GameSets {
        h_xe: circle(0, 1, [0.0, 0.0], cfg.r),
        h_xp: circle(2, 3, [0.0, 0.0], cfg.r),
        h_ie: circle(0, 1, cfg.x_ie, cfg.r_ie),
        h_ip: circle(2, 3, cfg.x_ip, cfg.r_ip),
        h_a: separation(cfg.r_a),
        h_re: circle(0, 1, cfg.x_r, cfg.r_r),
        h_xe_inner: circle(0, 1, [0.0, 0.0], (1.0 - s) * cfg.r),
        h_xp_inner: circle(2, 3, [0.0, 0.0], (1.0 - s) * cfg.r),
        h_a_outer: separation((1.0 + s) * cfg.r_a),
        cfg: cfg.clone(),
    })
}

/// Pointwise values of the h-functions, computed directly from the geometry.
#[derive(Debug, Clone, Copy)]
struct HValues {
    xe: f64,
    xp: f64,
    ie: f64,
    ip: f64,
    a: f64,
    re: f64,
    xe_in: f64,
    xp_in: f64,
    a_out: f64,
}

fn sq_dist(a: f64, b: f64, c: [f64; 2]) -> f64 {
    (a - c[0]).powi(2) + (b - c[1]).powi(2)
}

impl GameSets {
    pub fn config(&self) -> &EnvironmentConfig {
        &self.cfg
    }

    fn values(&self, x: &[f64; 4]) -> HValues {
        let c = &self.cfg;
        let s = c.input_bound_shrink;
        let e2 = sq_dist(x[0], x[1], [0.0, 0.0]);
        let p2 = sq_dist(x[2], x[3], [0.0, 0.0]);
        let d2 = sq_dist(x[0], x[1], [x[2], x[3]]);
        HValues {
            xe: e2 - c.r * c.r,
            xp: p2 - c.r * c.r,
            ie: sq_dist(x[0], x[1], c.x_ie) - c.r_ie * c.r_ie,
            ip: sq_dist(x[2], x[3], c.x_ip) - c.r_ip * c.r_ip,
            a: d2 - c.r_a * c.r_a,
            re: sq_dist(x[0], x[1], c.x_r) - c.r_r * c.r_r,
            xe_in: e2 - ((1.0 - s) * c.r).powi(2),
            xp_in: p2 - ((1.0 - s) * c.r).powi(2),
            a_out: d2 - ((1.0 + s) * c.r_a).powi(2),
        }
    }

    pub fn contains(&self, region: Region, x: &[f64; 4]) -> bool {
        let h = self.values(x);
        match region {
            Region::X => (h.xe <= 0.0 || h.re <= 0.0) && h.xp <= 0.0,
            Region::Xi => h.ie < 0.0 && h.ip < 0.0,
            Region::Xa => h.xe <= 0.0 && h.xp <= 0.0 && h.a <= 0.0,
            Region::Xr => h.xe >= 0.0 && h.re <= 0.0 && h.xp <= 0.0,
            Region::Xc => h.xe <= 0.0 && h.xp <= 0.0 && h.a >= 0.0,
            Region::ClXMinusXr => h.xe <= 0.0 && h.xp <= 0.0,
            Region::UnsafeBoundaryUnion => {
                (h.xe.abs() <= BOUNDARY_TOL && h.re > 0.0)
                    || h.xp.abs() <= BOUNDARY_TOL
                    || (h.a <= 0.0 && h.xe <= 0.0 && h.xp <= 0.0)
            }
            Region::XcInner => h.xe_in <= 0.0 && h.xp_in <= 0.0 && h.a_out >= 0.0,
        }
    }

    /// Evader-pursuer distance.
    pub fn distance(x: &[f64; 4]) -> f64 {
        (x[0] - x[2]).hypot(x[1] - x[3])
    }

    /// Draws `count` points of `region`, deterministic in `seed`.
    ///
    /// Full-dimensional regions use rejection sampling from a box that
    /// contains the region (so the result is uniform on the region). The
    /// unsafe union is sampled as an equal mixture of its three pieces, with
    /// the two circle pieces generated by projection onto the circle.
    pub fn sample_region(
        &self,
        region: Region,
        count: usize,
        seed: u64,
    ) -> Result<Vec<[f64; 4]>, SetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        if region == Region::UnsafeBoundaryUnion {
            for k in 0..count {
                let p = match k % 3 {
                    0 => self.sample_evader_wall(&mut rng)?,
                    1 => self.sample_pursuer_wall(&mut rng)?,
                    _ => self.rejection_one(Region::Xa, &mut rng)?,
                };
                out.push(p);
            }
            return Ok(out);
        }
        for _ in 0..count {
            out.push(self.rejection_one(region, &mut rng)?);
        }
        Ok(out)
    }

    fn rejection_one(&self, region: Region, rng: &mut ChaCha8Rng) -> Result<[f64; 4], SetError> {
        const MIN_TRIES: usize = 1_000_000;
        let mut tries = 0usize;
        loop {
            let x = self.box_draw(region, rng);
            tries += 1;
            if self.contains(region, &x) {
                return Ok(x);
            }
            // One success in 10^6 draws is the floor on acceptance rate.
            if tries >= MIN_TRIES {
                return Err(SetError::SamplingExhausted {
                    region,
                    accepted: 0,
                    tries,
                });
            }
        }
    }

    /// One uniform draw from a box enclosing `region`.
    fn box_draw(&self, region: Region, rng: &mut ChaCha8Rng) -> [f64; 4] {
        let c = &self.cfg;
        let around = |rng: &mut ChaCha8Rng, center: [f64; 2], half: f64| -> [f64; 2] {
            [
                rng.gen_range(center[0] - half..=center[0] + half),
                rng.gen_range(center[1] - half..=center[1] + half),
            ]
        };
        let arena = |rng: &mut ChaCha8Rng| around(rng, [0.0, 0.0], c.r);
        let (e, p) = match region {
            Region::Xi => (around(rng, c.x_ie, c.r_ie), around(rng, c.x_ip, c.r_ip)),
            Region::Xa => {
                let e = arena(rng);
                (e, around(rng, e, c.r_a))
            }
            Region::Xr => (around(rng, c.x_r, c.r_r), arena(rng)),
            Region::X | Region::UnsafeBoundaryUnion => {
                (around(rng, [0.0, 0.0], c.r + c.r_r), arena(rng))
            }
            Region::Xc | Region::ClXMinusXr | Region::XcInner => (arena(rng), arena(rng)),
        };
        [e[0], e[1], p[0], p[1]]
    }

    fn uniform_disc(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        let r = self.cfg.r;
        loop {
            let p = [rng.gen_range(-r..=r), rng.gen_range(-r..=r)];
            if p[0] * p[0] + p[1] * p[1] <= r * r {
                return p;
            }
        }
    }

    fn on_circle(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        [self.cfg.r * t.cos(), self.cfg.r * t.sin()]
    }

    /// Evader on the arena circle outside the target disc, pursuer in the arena.
    fn sample_evader_wall(&self, rng: &mut ChaCha8Rng) -> Result<[f64; 4], SetError> {
        for _ in 0..1_000_000 {
            let e = self.on_circle(rng);
            if sq_dist(e[0], e[1], self.cfg.x_r) > self.cfg.r_r * self.cfg.r_r {
                let p = self.uniform_disc(rng);
                return Ok([e[0], e[1], p[0], p[1]]);
            }
        }
        Err(SetError::SamplingExhausted {
            region: Region::UnsafeBoundaryUnion,
            accepted: 0,
            tries: 1_000_000,
        })
    }

    /// Pursuer on the arena circle, evader in the arena.
    fn sample_pursuer_wall(&self, rng: &mut ChaCha8Rng) -> Result<[f64; 4], SetError> {
        let p = self.on_circle(rng);
        let e = self.uniform_disc(rng);
        Ok([e[0], e[1], p[0], p[1]])
    }

    /// Counts points of a uniform box sample lying in more than one of
    /// Xi, Xa, Xr. Zero means the sets passed the disjointness audit.
    pub fn disjointness_audit(&self, n: usize, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = self.cfg.r + self.cfg.r_r;
        let mut overlaps = 0;
        for _ in 0..n {
            let x = [
                rng.gen_range(-b..=b),
                rng.gen_range(-b..=b),
                rng.gen_range(-b..=b),
                rng.gen_range(-b..=b),
            ];
            let hits = [Region::Xi, Region::Xa, Region::Xr]
                .iter()
                .filter(|&&r| self.contains(r, &x))
                .count();
            if hits > 1 {
                overlaps += 1;
            }
        }
        overlaps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets() -> GameSets {
        build_sets(&EnvironmentConfig::paper_tail_chasing()).unwrap()
    }

    #[test]
    fn h_values_at_paper_points() {
        let s = sets();
        assert_eq!(s.h_a.evaluate(&[0.0, 0.0, 0.5, 0.0]).unwrap(), 0.0);
        assert_eq!(s.h_xe.evaluate(&[0.0, 0.0, 1.0, 2.0]).unwrap(), -16.0);
        let xr = s.config().x_r;
        let v = s.h_re.evaluate(&[xr[0], xr[1], 0.0, 0.0]).unwrap();
        assert!((v + 0.25).abs() < 1e-12);
    }

    #[test]
    fn polynomials_agree_with_direct_values() {
        let s = sets();
        let x = [0.3, -1.2, 2.0, 0.7];
        let h = s.values(&x);
        let pairs = [
            (&s.h_xe, h.xe),
            (&s.h_xp, h.xp),
            (&s.h_ie, h.ie),
            (&s.h_ip, h.ip),
            (&s.h_a, h.a),
            (&s.h_re, h.re),
            (&s.h_xe_inner, h.xe_in),
            (&s.h_a_outer, h.a_out),
        ];
        for (p, v) in pairs {
            assert!((p.evaluate(&x).unwrap() - v).abs() < 1e-12);
        }
    }

    #[test]
    fn membership_examples() {
        let s = sets();
        let c = s.config().clone();
        assert!(s.contains(Region::Xi, &[c.x_ie[0], c.x_ie[1], c.x_ip[0], c.x_ip[1]]));
        assert!(s.contains(Region::Xa, &[1.0, 1.0, 1.0, 1.0]));
        // Evader on the target circle, outside the arena.
        let dir = [c.x_r[0] / 4.0, c.x_r[1] / 4.0];
        let e = [c.x_r[0] + 0.25 * dir[0], c.x_r[1] + 0.25 * dir[1]];
        let x = [e[0], e[1], 0.0, 0.0];
        assert!(s.contains(Region::Xr, &x));
        assert!(s.contains(Region::X, &x));
        assert!(!s.contains(Region::ClXMinusXr, &x));
    }

    #[test]
    fn unsafe_union_pieces() {
        let s = sets();
        // Evader on the wall far from the target.
        assert!(s.contains(Region::UnsafeBoundaryUnion, &[-4.0, 0.0, 0.0, 0.0]));
        // Pursuer on the wall.
        assert!(s.contains(Region::UnsafeBoundaryUnion, &[0.0, 0.0, 0.0, 4.0]));
        // Evader on the wall inside the target disc is not unsafe.
        let xr = s.config().x_r;
        assert!(!s.contains(Region::UnsafeBoundaryUnion, &[xr[0], xr[1], 0.0, 0.0]));
        assert!(!s.contains(Region::UnsafeBoundaryUnion, &[0.0, 0.0, 2.0, 0.0]));
    }

    #[test]
    fn samples_satisfy_membership() {
        let s = sets();
        for region in Region::ALL {
            let pts = s.sample_region(region, 50, 7).unwrap();
            assert_eq!(pts.len(), 50);
            for p in &pts {
                assert!(s.contains(region, p), "{region} {p:?}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = sets();
        let a = s.sample_region(Region::Xc, 20, 3).unwrap();
        let b = s.sample_region(Region::Xc, 20, 3).unwrap();
        assert_eq!(a, b);
        let c = s.sample_region(Region::Xc, 20, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_region_exhausts() {
        let mut cfg = EnvironmentConfig::paper_tail_chasing();
        cfg.input_bound_shrink = 0.49;
        cfg.x_ie = [-3.5, 0.0];
        cfg.x_ip = [3.5, 0.0];
        cfg.r_a = 3.0;
        let s = build_sets(&cfg).unwrap();
        let err = s.sample_region(Region::XcInner, 1, 0).unwrap_err();
        assert!(matches!(err, SetError::SamplingExhausted { .. }));
    }
}

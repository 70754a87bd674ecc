use proptest::prelude::*;
use pursuit_density::config::EnvironmentConfig;
use pursuit_density::semialg::{build_sets, GameSets, Region};

fn sets() -> GameSets {
    build_sets(&EnvironmentConfig::paper_tail_chasing()).unwrap()
}

#[test]
fn initial_capture_and_target_sets_are_disjoint() {
    assert_eq!(sets().disjointness_audit(100_000, 2024), 0);
    assert_eq!(
        build_sets(&EnvironmentConfig::paper_go_to_middle()).unwrap().disjointness_audit(100_000, 7),
        0
    );
}

#[test]
fn h_functions_at_their_centres() {
    let cfg = EnvironmentConfig::paper_tail_chasing();
    let s = sets();
    let at = |e: [f64; 2], p: [f64; 2]| [e[0], e[1], p[0], p[1]];
    assert_eq!(s.h_xe.evaluate(&at([0.0, 0.0], [1.0, 1.0])).unwrap(), -16.0);
    assert_eq!(s.h_xp.evaluate(&at([1.0, 1.0], [0.0, 0.0])).unwrap(), -16.0);
    // Expanded coefficients such as 1.8^2 are rounded, so off-origin
    // centres agree to rounding only.
    let close = |a: f64, b: f64| assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    close(s.h_ie.evaluate(&at(cfg.x_ie, [0.0, 0.0])).unwrap(), -cfg.r_ie * cfg.r_ie);
    close(s.h_ip.evaluate(&at([0.0, 0.0], cfg.x_ip)).unwrap(), -cfg.r_ip * cfg.r_ip);
    close(s.h_re.evaluate(&at(cfg.x_r, [0.0, 0.0])).unwrap(), -0.25);
    assert_eq!(s.h_a.evaluate(&[0.0, 0.0, 0.5, 0.0]).unwrap(), 0.0);
}

#[test]
fn collision_free_samples_respect_the_set_algebra() {
    let s = sets();
    for x in s.sample_region(Region::Xc, 5000, 17).unwrap() {
        assert!(s.contains(Region::X, &x));
        assert!(!s.contains(Region::Xa, &x) || GameSets::distance(&x) == 0.5);
        let h_re = s.h_re.evaluate(&x).unwrap();
        assert!(!(s.contains(Region::Xr, &x) && h_re < 0.0 && s.h_xe.evaluate(&x).unwrap() > 0.0));
    }
}

#[test]
fn boundary_samples_lie_on_their_circles() {
    let s = sets();
    for x in s.sample_region(Region::UnsafeBoundaryUnion, 3000, 5).unwrap() {
        let he = s.h_xe.evaluate(&x).unwrap();
        let hp = s.h_xp.evaluate(&x).unwrap();
        let ha = s.h_a.evaluate(&x).unwrap();
        let on_wall = he.abs() <= 1e-6 || hp.abs() <= 1e-6;
        assert!(on_wall || (ha <= 0.0 && he <= 0.0 && hp <= 0.0), "{x:?}");
    }
}

#[test]
fn crescent_point_is_in_target() {
    let cfg = EnvironmentConfig::paper_tail_chasing();
    let s = sets();
    // Outward along the target ray, between the arena and target circles.
    let r = cfg.r + 0.25;
    let a = std::f64::consts::FRAC_PI_4;
    let x = [r * a.cos(), r * a.sin(), 0.0, 0.0];
    assert!(s.contains(Region::Xr, &x));
    assert!(s.contains(Region::X, &x));
    assert!(!s.contains(Region::Xc, &x));
}

proptest! {
    #[test]
    fn membership_matches_polynomials(x in prop::array::uniform4(-4.5f64..4.5)) {
        let s = sets();
        let h = |p: &pursuit_density::poly::Polynomial| p.evaluate(&x).unwrap();
        let (he, hp, ha, hre) = (h(&s.h_xe), h(&s.h_xp), h(&s.h_a), h(&s.h_re));
        let tol = 1e-9;
        // Away from the boundaries, the direct predicates and the
        // polynomials must agree.
        prop_assume!([he, hp, ha, hre, h(&s.h_ie), h(&s.h_ip)].iter().all(|v| v.abs() > tol));
        prop_assert_eq!(s.contains(Region::Xi, &x), h(&s.h_ie) < 0.0 && h(&s.h_ip) < 0.0);
        prop_assert_eq!(s.contains(Region::Xa, &x), he < 0.0 && hp < 0.0 && ha < 0.0);
        prop_assert_eq!(s.contains(Region::Xc, &x), he < 0.0 && hp < 0.0 && ha > 0.0);
        prop_assert_eq!(s.contains(Region::X, &x), (he < 0.0 || hre < 0.0) && hp < 0.0);
        prop_assert_eq!(s.contains(Region::Xr, &x), he > 0.0 && hre < 0.0 && hp < 0.0);
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>()) {
        let s = sets();
        let a = s.sample_region(Region::Xi, 10, seed).unwrap();
        prop_assert_eq!(&a, &s.sample_region(Region::Xi, 10, seed).unwrap());
        prop_assert!(a.iter().all(|x| s.contains(Region::Xi, x)));
        let b = s.sample_region(Region::Xa, 10, seed).unwrap();
        prop_assert!(b.iter().all(|x| GameSets::distance(x) <= 0.5));
    }
}

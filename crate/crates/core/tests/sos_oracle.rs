mod common;

use common::oracles::{classify, sos_feasible_poly, sos_infeasible_poly};
use pursuit_density::conic::SolveStatus;

#[test]
fn positive_definite_gram_constructions_are_certified() {
    for seed in 0..50 {
        let v = classify(&sos_feasible_poly(seed));
        assert_eq!(v.status, SolveStatus::Optimal, "seed {seed}");
        assert!(v.residual < 1e-6, "seed {seed}: residual {}", v.residual);
        assert!(v.min_eig > -1e-8, "seed {seed}: eig {}", v.min_eig);
    }
}

#[test]
fn shifted_tight_squares_are_rejected() {
    for seed in 0..50 {
        let v = classify(&sos_infeasible_poly(1000 + seed));
        assert_eq!(v.status, SolveStatus::Infeasible, "seed {seed}");
    }
}

#[test]
fn minus_one_is_not_a_square() {
    let p = pursuit_density::poly::Polynomial::constant(2, -1.0);
    assert_eq!(classify(&p).status, SolveStatus::Infeasible);
}

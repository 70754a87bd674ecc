mod common;

use common::*;
use proptest::prelude::*;
use pursuit_density::poly::{basis_size, binomial, divergence, monomial_basis, PolyVec, Polynomial};

const H: f64 = 1e-5;

fn central_difference(p: &Polynomial, x: &[f64], i: usize) -> f64 {
    let mut a = x.to_vec();
    let mut b = x.to_vec();
    a[i] += H;
    b[i] -= H;
    (p.evaluate(&a).unwrap() - p.evaluate(&b).unwrap()) / (2.0 * H)
}

fn triple(seed: u64, nvars: usize) -> (Polynomial, Polynomial, Polynomial) {
    let mut r = rng(seed);
    (
        random_poly(&mut r, nvars, 8, 4),
        random_poly(&mut r, nvars, 8, 4),
        random_poly(&mut r, nvars, 8, 4),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ring_axioms(seed in any::<u64>(), nvars in 1usize..=4) {
        let (p, q, r) = triple(seed, nvars);
        prop_assert!(coeffs_close(&(&(&p + &q) + &r), &(&p + &(&q + &r)), 1e-12));
        prop_assert!(coeffs_close(&(&p * &(&q + &r)), &(&(&p * &q) + &(&p * &r)), 1e-12));
        prop_assert!(coeffs_close(&(&p * &q), &(&q * &p), 1e-12));
        prop_assert!(coeffs_close(&(&(&p * &q) * &r), &(&p * &(&q * &r)), 1e-12));
        prop_assert!((&p - &p).is_zero());
    }

    #[test]
    fn leibniz_rule(seed in any::<u64>(), nvars in 1usize..=4) {
        let (p, q, _) = triple(seed, nvars);
        for i in 0..nvars {
            let lhs = (&p * &q).differentiate(i).unwrap();
            let rhs = &(&p.differentiate(i).unwrap() * &q) + &(&p * &q.differentiate(i).unwrap());
            prop_assert!(coeffs_close(&lhs, &rhs, 1e-12));
        }
    }

    #[test]
    fn pointwise_consistency(seed in any::<u64>(), nvars in 1usize..=4) {
        let (p, q, _) = triple(seed, nvars);
        let mut r = rng(seed ^ 0x5eed);
        for _ in 0..20 {
            let x = random_point(&mut r, nvars);
            let (pv, qv) = (p.evaluate(&x).unwrap(), q.evaluate(&x).unwrap());
            let scale = magnitude(&p, &x).max(1.0) * magnitude(&q, &x).max(1.0);
            prop_assert!(((&p + &q).evaluate(&x).unwrap() - (pv + qv)).abs() <= 1e-10 * scale);
            prop_assert!(((&p * &q).evaluate(&x).unwrap() - pv * qv).abs() <= 1e-10 * scale);
            let brute: f64 = p.terms().map(|(m, c)| {
                c * m.exponents().iter().zip(&x).map(|(&e, &xi)| xi.powi(e as i32)).product::<f64>()
            }).sum();
            prop_assert!((pv - brute).abs() <= 1e-12 * magnitude(&p, &x).max(1.0));
        }
    }

    #[test]
    fn derivatives_match_finite_differences(seed in any::<u64>(), nvars in 1usize..=4) {
        let (p, q, _) = triple(seed, nvars);
        let mut r = rng(seed ^ 0xd1ff);
        let vars: Vec<usize> = (0..nvars).collect();
        let grad = p.gradient(&vars).unwrap();
        let field = PolyVec::new(vec![p.clone(), q.clone()].into_iter().cycle().take(nvars).collect()).unwrap();
        let div = divergence(&field, &vars).unwrap();
        for _ in 0..10 {
            let x = random_point(&mut r, nvars);
            let mut fd_div = 0.0;
            for i in 0..nvars {
                let fd = central_difference(&p, &x, i);
                let exact = grad.get(i).evaluate(&x).unwrap();
                prop_assert!((exact - fd).abs() <= 1e-6 * magnitude(&p, &x).max(1.0));
                fd_div += central_difference(field.get(i), &x, i);
            }
            let scale = magnitude(&p, &x).max(magnitude(&q, &x)).max(1.0);
            prop_assert!((div.evaluate(&x).unwrap() - fd_div).abs() <= 1e-6 * scale);
        }
    }
}

#[test]
fn basis_counts_match_binomial() {
    for n in 1usize..=6 {
        for d in 0u32..=10 {
            let expect = binomial(n as u64 + u64::from(d), u64::from(d)) as usize;
            assert_eq!(basis_size(n, d), expect);
            if expect <= 3003 {
                assert_eq!(monomial_basis(n, d).len(), expect, "n={n} d={d}");
            }
        }
    }
    assert_eq!(monomial_basis(4, 5).len(), 126);
}

#[test]
fn basis_is_graded_and_sorted() {
    let b = monomial_basis(3, 4);
    assert!(b.windows(2).all(|w| w[0] < w[1]));
    assert!(b.windows(2).all(|w| w[0].degree() <= w[1].degree()));
}

#[test]
fn dimension_mismatch_is_an_error() {
    let p = Polynomial::var(2, 0);
    let q = Polynomial::var(3, 0);
    assert!(p.try_add(&q).is_err());
    assert!(p.try_mul(&q).is_err());
    assert!(p.evaluate(&[1.0]).is_err());
    let f = PolyVec::new(vec![p.clone()]).unwrap();
    assert!(divergence(&f, &[0, 1]).is_err());
}

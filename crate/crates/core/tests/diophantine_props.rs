use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use srec_core::diophantine::{lll_reduce, scan_return, simultaneous_return_lll, torus_distance, AngleSystem, DEFAULT_SCALE};

fn thetas(max_k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..=max_k)
}

/// Gram–Schmidt in exact rationals.
fn gram_schmidt(b: &[Vec<BigInt>]) -> (Vec<Vec<BigRational>>, Vec<Vec<BigRational>>) {
    let n = b.len();
    let rows: Vec<Vec<BigRational>> = b
        .iter()
        .map(|r| r.iter().map(|x| BigRational::from_integer(x.clone())).collect())
        .collect();
    let dot = |a: &[BigRational], c: &[BigRational]| -> BigRational {
        a.iter().zip(c).fold(BigRational::zero(), |s, (x, y)| s + x * y)
    };
    let mut star: Vec<Vec<BigRational>> = Vec::new();
    let mut mu = vec![vec![BigRational::zero(); n]; n];
    for i in 0..n {
        let mut v = rows[i].clone();
        for j in 0..i {
            mu[i][j] = dot(&rows[i], &star[j]) / dot(&star[j], &star[j]);
            for (vk, sk) in v.iter_mut().zip(&star[j]) {
                *vk -= &mu[i][j] * sk;
            }
        }
        star.push(v);
    }
    (star, mu)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solutions_validate(th in thetas(3), delta in 0.01f64..0.3) {
        let sys = AngleSystem::new(th.clone(), delta).unwrap();
        for sol in [scan_return(&sys, sys.pigeonhole_budget()), simultaneous_return_lll(&sys, DEFAULT_SCALE)].into_iter().flatten() {
            prop_assert!(th.iter().all(|&t| torus_distance(t, sol.n) < delta));
            for (d, &t) in sol.distances.iter().zip(&th) {
                prop_assert_eq!(*d, torus_distance(t, sol.n));
            }
        }
    }

    #[test]
    fn scan_is_minimal(th in thetas(2), delta in 0.01f64..0.3) {
        let sys = AngleSystem::new(th.clone(), delta).unwrap();
        let budget = 10_000;
        let first = (1..=budget).find(|&n| th.iter().all(|&t| torus_distance(t, n) < delta));
        match scan_return(&sys, budget) {
            Ok(sol) => prop_assert_eq!(Some(sol.n), first),
            Err(_) => prop_assert_eq!(first, None),
        }
    }

    #[test]
    fn feasibility_agrees(th in thetas(3), delta in 0.01f64..0.45) {
        let sys = AngleSystem::new(th, delta).unwrap();
        let scan = scan_return(&sys, sys.pigeonhole_budget());
        let lll = simultaneous_return_lll(&sys, DEFAULT_SCALE);
        prop_assert_eq!(scan.is_ok(), lll.is_ok());
    }

    #[test]
    fn lll_output_is_reduced(rows in prop::collection::vec(prop::collection::vec(-50i64..50, 3), 3)) {
        let basis: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
        let (star0, _) = gram_schmidt(&basis);
        prop_assume!(star0.iter().all(|v| v.iter().any(|x| !x.is_zero())));
        let out = lll_reduce(&basis).unwrap();
        let (star, mu) = gram_schmidt(&out.basis);
        let half = BigRational::new(1.into(), 2.into());
        let three_quarters = BigRational::new(3.into(), 4.into());
        let norm2 = |v: &[BigRational]| v.iter().fold(BigRational::zero(), |s, x| s + x * x);
        for i in 0..3 {
            for j in 0..i {
                prop_assert!(mu[i][j].abs() <= half);
            }
            if i > 0 {
                let lhs = norm2(&star[i]);
                let rhs = (&three_quarters - &mu[i][i - 1] * &mu[i][i - 1]) * norm2(&star[i - 1]);
                prop_assert!(lhs >= rhs);
            }
        }
        // U·input reproduces the reduced basis.
        for (u, b) in out.transform.iter().zip(&out.basis) {
            for col in 0..3 {
                let v: BigInt = u.iter().zip(&basis).map(|(a, r)| a * &r[col]).sum();
                prop_assert_eq!(&v, &b[col]);
            }
        }
    }
}

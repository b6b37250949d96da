//! Integral LLL (Cohen, Algorithm 2.6.7) with Lovász constant 3/4.
//!
//! All Gram–Schmidt data is kept as the integers dᵢ and λᵢⱼ = dⱼ·μᵢⱼ, so no
//! rounding ever enters the reduction.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LllOutput {
    pub basis: Vec<Vec<BigInt>>,
    /// Unimodular U with basis = U·input (rows).
    pub transform: Vec<Vec<BigInt>>,
}

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(target: &mut [BigInt], q: &BigInt, source: &[BigInt]) {
    for (t, s) in target.iter_mut().zip(source) {
        *t -= q * s;
    }
}

/// Nearest integer to a/b for b > 0, ties toward +∞.
fn round_div(a: &BigInt, b: &BigInt) -> BigInt {
    let two = BigInt::from(2);
    (a * &two + b).div_floor(&(b * &two))
}

struct State {
    b: Vec<Vec<BigInt>>,
    h: Vec<Vec<BigInt>>,
    // d[0] = 1, d[i] = Gram determinant of the first i vectors.
    d: Vec<BigInt>,
    // lam[i][j] for j < i, 0-based vectors.
    lam: Vec<Vec<BigInt>>,
}

impl State {
    fn redi(&mut self, k: usize, l: usize) {
        let two_lam: BigInt = &self.lam[k][l] * BigInt::from(2);
        if two_lam.abs() <= self.d[l + 1] {
            return;
        }
        let q = round_div(&self.lam[k][l], &self.d[l + 1]);
        let (hl, bl) = (self.h[l].clone(), self.b[l].clone());
        axpy(&mut self.h[k], &q, &hl);
        axpy(&mut self.b[k], &q, &bl);
        self.lam[k][l] -= &q * &self.d[l + 1];
        for i in 0..l {
            let t = &q * &self.lam[l][i];
            self.lam[k][i] -= t;
        }
    }

    fn swapi(&mut self, k: usize, kmax: usize) {
        self.h.swap(k, k - 1);
        self.b.swap(k, k - 1);
        for j in 0..k - 1 {
            let t = std::mem::take(&mut self.lam[k][j]);
            self.lam[k][j] = std::mem::replace(&mut self.lam[k - 1][j], t);
        }
        let lam = self.lam[k][k - 1].clone();
        let bb = (&self.d[k - 1] * &self.d[k + 1] + &lam * &lam) / &self.d[k];
        for i in k + 1..=kmax {
            let t = self.lam[i][k].clone();
            self.lam[i][k] = (&self.d[k + 1] * &self.lam[i][k - 1] - &lam * &t) / &self.d[k];
            self.lam[i][k - 1] = (&bb * &t + &lam * &self.lam[i][k]) / &self.d[k + 1];
        }
        self.d[k] = bb;
    }
}

/// LLL-reduces the rows of `basis`. Rows must be linearly independent.
pub fn lll_reduce(basis: &[Vec<BigInt>]) -> Result<LllOutput> {
    let n = basis.len();
    if n == 0 {
        return Err(invalid("empty basis"));
    }
    let width = basis[0].len();
    if basis.iter().any(|r| r.len() != width) {
        return Err(invalid("basis rows differ in length"));
    }
    let identity = (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();
    let mut s = State {
        b: basis.to_vec(),
        h: identity,
        d: vec![BigInt::zero(); n + 1],
        lam: vec![vec![BigInt::zero(); n]; n],
    };
    s.d[0] = BigInt::one();
    s.d[1] = dot(&s.b[0], &s.b[0]);
    if s.d[1].is_zero() {
        return Err(invalid("basis rows are linearly dependent"));
    }
    let mut k = 1;
    let mut kmax = 0;
    while k < n {
        if k > kmax {
            kmax = k;
            for j in 0..=k {
                let mut u = dot(&s.b[k], &s.b[j]);
                for i in 0..j {
                    u = (&s.d[i + 1] * u - &s.lam[k][i] * &s.lam[j][i]) / &s.d[i];
                }
                if j < k {
                    s.lam[k][j] = u;
                } else {
                    if u.is_zero() {
                        return Err(invalid("basis rows are linearly dependent"));
                    }
                    s.d[k + 1] = u;
                }
            }
        }
        loop {
            s.redi(k, k - 1);
            let lhs: BigInt = &s.d[k + 1] * &s.d[k - 1] * BigInt::from(4);
            let rhs: BigInt = &s.d[k] * &s.d[k] * BigInt::from(3)
                - &s.lam[k][k - 1] * &s.lam[k][k - 1] * BigInt::from(4);
            if lhs < rhs {
                s.swapi(k, kmax);
                k = (k - 1).max(1);
            } else {
                for l in (0..k - 1).rev() {
                    s.redi(k, l);
                }
                k += 1;
                break;
            }
        }
    }
    Ok(LllOutput {
        basis: s.b,
        transform: s.h,
    })
}

//! Simultaneous return times for rotations of the torus.
//!
//! For λⱼ = R·e^{2πiθⱼ} the scaled powers (R⁻¹λⱼ)ⁿ are all close to 1 exactly
//! when every ‖nθⱼ‖ (distance to the nearest integer) is small. Returns
//! always exist: boxing the points (nθ₁, …, nθₖ) mod 1 into ⌈1/δ⌉ᵏ cubes
//! forces two of them, n₁ < n₂, into one cube, and n₂ − n₁ < ⌈1/δ⌉ᵏ + 1 is a
//! return with all distances ≤ 1/⌈1/δ⌉ ≤ δ.

mod lll;

pub use lll::{lll_reduce, LllOutput};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default angle integerization scale for the lattice search.
pub const DEFAULT_SCALE: u64 = 1 << 32;
/// Largest n the torus distance keeps exact bookkeeping for.
pub const MAX_RETURN_TIME: u64 = 1 << 52;
/// Fallback scans beyond this many steps are refused.
pub const MAX_SCAN_BUDGET: u64 = 1 << 34;
const MAX_ANGLES: usize = 8;
const SEQUENTIAL_PREFIX: u64 = 1 << 16;

/// Distance from n·θ to the nearest integer.
///
/// The product is split into its rounded value and the exact rounding error
/// (one fused multiply-add), so the result is accurate to a few ulps of the
/// fractional part rather than of n·θ.
pub fn torus_distance(theta: f64, n: u64) -> f64 {
    let nf = n as f64;
    let p = nf * theta;
    let err = nf.mul_add(theta, -p);
    let f = (p - p.round()) + err;
    (f - f.round()).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSystem {
    pub thetas: Vec<f64>,
    pub delta: f64,
}

impl AngleSystem {
    pub fn new(thetas: Vec<f64>, delta: f64) -> Result<Self> {
        let sys = Self { thetas, delta };
        sys.validate()?;
        Ok(sys)
    }

    /// Reduces arbitrary arguments into [0, 1).
    pub fn from_turns(turns: &[f64], delta: f64) -> Result<Self> {
        let thetas = turns
            .iter()
            .map(|t| {
                let f = t - t.floor();
                if f >= 1.0 {
                    0.0
                } else {
                    f
                }
            })
            .collect();
        Self::new(thetas, delta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() {
            return Err(invalid("angle system needs at least one angle"));
        }
        if let Some(t) = self.thetas.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return Err(invalid(format!("angle {t} outside [0, 1)")));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(invalid(format!("delta {} outside (0, 0.5)", self.delta)));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.thetas.len()
    }

    pub fn distances(&self, n: u64) -> Vec<f64> {
        self.thetas.iter().map(|&t| torus_distance(t, n)).collect()
    }

    pub fn is_return(&self, n: u64) -> bool {
        n > 0 && self.thetas.iter().all(|&t| torus_distance(t, n) < self.delta)
    }

    /// (⌈1/δ⌉ + 1)ᵏ, saturating: a scan this long always finds a strict
    /// return.
    pub fn pigeonhole_budget(&self) -> u64 {
        pigeonhole_budget(self.k(), self.delta)
    }
}

pub fn pigeonhole_budget(k: usize, delta: f64) -> u64 {
    let side = (1.0 / delta).ceil() as u64 + 1;
    (0..k).fold(1u64, |acc, _| acc.saturating_mul(side))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnMethod {
    Scan,
    Lll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSolution {
    pub n: u64,
    pub distances: Vec<f64>,
    pub method: ReturnMethod,
    /// Set when the lattice search produced nothing valid and a scan answered.
    #[serde(default)]
    pub fallback: bool,
    /// Integerization scale of the lattice that produced n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<u64>,
}

impl ReturnSolution {
    fn new(sys: &AngleSystem, n: u64, method: ReturnMethod) -> Self {
        Self {
            n,
            distances: sys.distances(n),
            method,
            fallback: false,
            scale: None,
        }
    }

    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }
}

/// Smallest n in [1, n_max] with every ‖nθⱼ‖ < δ.
pub fn scan_return(sys: &AngleSystem, n_max: u64) -> Result<ReturnSolution> {
    sys.validate()?;
    let n_max = n_max.min(MAX_RETURN_TIME);
    let prefix = n_max.min(SEQUENTIAL_PREFIX);
    let found = (1..=prefix).find(|&n| sys.is_return(n)).or_else(|| {
        (prefix < n_max)
            .then(|| (prefix + 1..=n_max).into_par_iter().find_first(|&n| sys.is_return(n)))
            .flatten()
    });
    match found {
        Some(n) => Ok(ReturnSolution::new(sys, n, ReturnMethod::Scan)),
        None => Err(Error::BudgetExhausted { budget: n_max }),
    }
}

/// Convergents p/q of the regular continued fraction of θ, stopping early
/// when θ is exhausted at double precision.
pub fn continued_fraction_convergents(theta: f64, count: usize) -> Result<Vec<(i64, i64)>> {
    if !theta.is_finite() {
        return Err(invalid("theta must be finite"));
    }
    let mut out = Vec::with_capacity(count);
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, 0i64, 1i64);
    let mut x = theta;
    while out.len() < count {
        let a = x.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let (Some(p), Some(q)) = (
            a.checked_mul(p0).and_then(|v| v.checked_add(p1)),
            a.checked_mul(q0).and_then(|v| v.checked_add(q1)),
        ) else {
            break;
        };
        // Past 2^52 the float remainder no longer carries any information.
        if q.unsigned_abs() > MAX_RETURN_TIME {
            break;
        }
        out.push((p, q));
        (p1, q1, p0, q0) = (p0, q0, p, q);
        let frac = x - x.floor();
        if frac < 1e-9 || (theta - p as f64 / q as f64).abs() < f64::EPSILON * 4.0 {
            break;
        }
        x = 1.0 / frac;
    }
    Ok(out)
}

fn integerized(theta: f64, scale: u64) -> BigInt {
    // θ < 1 and scale ≤ 2^60 keep the product well inside i64/f64 range;
    // rounding loses at most half a unit, which validation absorbs.
    BigInt::from((theta * scale as f64).round() as i64)
}

/// Rows b₀ = (C, ⌊Mθ₁⌉, …, ⌊Mθₖ⌉), bⱼ = M·eⱼ. The lattice vector
/// n·b₀ − Σ pⱼbⱼ = (nC, n⌊Mθⱼ⌉ − pⱼM) is short exactly when n is small and
/// every nθⱼ is near an integer.
fn dirichlet_lattice(thetas: &[f64], scale: u64, weight: u64) -> Vec<Vec<BigInt>> {
    let k = thetas.len();
    let mut rows = Vec::with_capacity(k + 1);
    let mut first = vec![BigInt::from(weight)];
    first.extend(thetas.iter().map(|&t| integerized(t, scale)));
    rows.push(first);
    for j in 0..k {
        let mut row = vec![BigInt::zero(); k + 1];
        row[j + 1] = BigInt::from(scale);
        rows.push(row);
    }
    rows
}

/// Every n read off {−1, 0, 1}-combinations of the reduced rows.
fn candidates(reduced: &[Vec<BigInt>], weight: u64) -> Vec<u64> {
    let w = BigInt::from(weight);
    let heads: Vec<BigInt> = reduced.iter().map(|r| r[0].clone()).collect();
    let mut out = Vec::new();
    let combos = 3usize.pow(heads.len() as u32);
    for mut code in 1..combos {
        let mut acc = BigInt::zero();
        for h in &heads {
            match code % 3 {
                1 => acc += h,
                2 => acc -= h,
                _ => {}
            }
            code /= 3;
        }
        if acc.is_zero() || !(&acc % &w).is_zero() {
            continue;
        }
        if let Some(n) = (acc / &w).abs().to_u64() {
            if n <= MAX_RETURN_TIME {
                out.push(n);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn lattice_attempt(sys: &AngleSystem, scale: u64) -> Result<Option<u64>> {
    let k = sys.k() as i32;
    let base = (scale as f64 * sys.delta.powi(k + 1)).round().max(1.0);
    let mut weights: Vec<u64> = (-4..=4)
        .map(|s| (base * 4f64.powi(s)).round().max(1.0) as u64)
        .collect();
    weights.sort_unstable();
    weights.dedup();
    let mut best: Option<u64> = None;
    for w in weights {
        let reduced = lll_reduce(&dirichlet_lattice(&sys.thetas, scale, w))?;
        for n in candidates(&reduced.basis, w) {
            if best.is_some_and(|b| n >= b) {
                break;
            }
            if sys.is_return(n) {
                best = Some(n);
                break;
            }
        }
    }
    Ok(best)
}

/// Return time proposed by LLL on the Dirichlet lattice and validated by
/// direct torus distances. The scale doubles twice on failure, then a scan
/// up to the pigeonhole budget answers instead.
pub fn simultaneous_return_lll(sys: &AngleSystem, scale: u64) -> Result<ReturnSolution> {
    sys.validate()?;
    if sys.k() > MAX_ANGLES {
        return Err(invalid(format!(
            "lattice search supports at most {MAX_ANGLES} angles, got {}",
            sys.k()
        )));
    }
    if scale < 2 || scale > 1 << 60 {
        return Err(invalid("integerization scale must lie in [2, 2^60]"));
    }
    let mut m = scale;
    for _ in 0..3 {
        if let Some(n) = lattice_attempt(sys, m)? {
            let mut sol = ReturnSolution::new(sys, n, ReturnMethod::Lll);
            sol.scale = Some(m);
            return Ok(sol);
        }
        m = m.saturating_mul(2).min(1 << 60);
    }
    let budget = sys.pigeonhole_budget();
    if budget > MAX_SCAN_BUDGET {
        return Err(Error::BudgetExhausted { budget });
    }
    let mut sol = scan_return(sys, budget)?;
    sol.fallback = true;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const GOLDEN: f64 = 0.618_033_988_749_894_9;

    #[test]
    fn torus_distance_examples() {
        assert_abs_diff_eq!(torus_distance(1.0 / 3.0, 3), 0.0, epsilon = 1e-15);
        assert_eq!(torus_distance(0.5, 3), 0.5);
        // 13 × 0.618034 = 8.034442
        assert_abs_diff_eq!(torus_distance(0.618034, 13), 0.034442, epsilon = 1e-12);
    }

    #[test]
    fn torus_distance_large_n() {
        // θ = 2^-30 is exact, so n = 3·2^29 gives exactly 1.5.
        assert_eq!(torus_distance(2f64.powi(-30), 3 << 29), 0.5);
        assert_eq!(torus_distance(0.25, 1_000_000_001), 0.25);
    }

    #[test]
    fn scan_examples() {
        let s = AngleSystem::new(vec![1.0 / 3.0], 0.01).unwrap();
        assert_eq!(scan_return(&s, 100).unwrap().n, 3);
        let s = AngleSystem::new(vec![0.618034], 0.05).unwrap();
        assert_eq!(scan_return(&s, 100).unwrap().n, 13);
        let s = AngleSystem::new(vec![0.25, 1.0 / 6.0], 0.01).unwrap();
        let sol = scan_return(&s, 100).unwrap();
        assert_eq!(sol.n, 12);
        assert_eq!(sol.method, ReturnMethod::Scan);
    }

    #[test]
    fn scan_budget_exhausted() {
        let s = AngleSystem::new(vec![GOLDEN], 1e-6).unwrap();
        assert_eq!(scan_return(&s, 50), Err(Error::BudgetExhausted { budget: 50 }));
    }

    #[test]
    fn scan_parallel_tail_finds_minimum() {
        // First return of the golden mean below 5e-6 is F₂₆ = 121393 > 2^16.
        let s = AngleSystem::new(vec![GOLDEN], 5e-6).unwrap();
        assert_eq!(scan_return(&s, 200_000).unwrap().n, 121393);
    }

    #[test]
    fn rejects_bad_systems() {
        assert!(AngleSystem::new(vec![], 0.1).is_err());
        assert!(AngleSystem::new(vec![1.0], 0.1).is_err());
        assert!(AngleSystem::new(vec![0.2], 0.5).is_err());
        assert!(AngleSystem::new(vec![0.2], 0.0).is_err());
        assert_eq!(AngleSystem::from_turns(&[-0.25, 1.5], 0.1).unwrap().thetas, vec![0.75, 0.5]);
    }

    #[test]
    fn convergents() {
        let qs: Vec<i64> = continued_fraction_convergents(0.6180339887, 8)
            .unwrap()
            .iter()
            .map(|c| c.1)
            .collect();
        assert_eq!(qs, vec![1, 1, 2, 3, 5, 8, 13, 21]);
        assert_eq!(continued_fraction_convergents(1.0 / 3.0, 10).unwrap(), vec![(0, 1), (1, 3)]);
        assert_eq!(continued_fraction_convergents(0.5, 10).unwrap(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn lll_rational_pair() {
        let s = AngleSystem::new(vec![1.0 / 3.0, 0.25], 0.01).unwrap();
        let sol = simultaneous_return_lll(&s, DEFAULT_SCALE).unwrap();
        assert_eq!(sol.n, 12);
        assert_eq!(sol.method, ReturnMethod::Lll);
        assert!(!sol.fallback);
    }

    #[test]
    fn lll_golden_is_fibonacci() {
        let s = AngleSystem::new(vec![GOLDEN], 1e-4).unwrap();
        let sol = simultaneous_return_lll(&s, DEFAULT_SCALE).unwrap();
        assert!(sol.max_distance() < 1e-4);
        let fib: Vec<i64> = continued_fraction_convergents(GOLDEN, 40)
            .unwrap()
            .iter()
            .map(|c| c.1)
            .collect();
        assert!(fib.contains(&(sol.n as i64)), "n = {}", sol.n);
    }

    #[test]
    fn lll_falls_back_when_scale_is_useless() {
        // At M = 2 every angle integerizes to 0 or 1, so lattice candidates
        // rarely validate for an irrational pair; whatever path answers, the
        // solution must validate.
        let s = AngleSystem::new(vec![GOLDEN, 0.3183098861837907], 0.05).unwrap();
        let sol = simultaneous_return_lll(&s, 2).unwrap();
        assert!(sol.max_distance() < 0.05);
        if sol.fallback {
            assert_eq!(sol.method, ReturnMethod::Scan);
        }
    }
}

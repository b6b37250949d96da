use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::charpoly::CharPoly;
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    #[serde(with = "crate::serde_complex::vec")]
    pub roots: Vec<Complex64>,
    /// |p(root)| per root.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub sweeps: usize,
}

/// All roots of a monic polynomial by Aberth–Ehrlich simultaneous iteration.
///
/// Exact zero roots are split off first. A root stops moving once its update
/// drops below `tol·max(1,|z|)` or its residual reaches the Horner rounding
/// floor; the second test is what lets clusters around multiple roots settle.
pub fn polynomial_roots(p: &CharPoly, tol: f64) -> Result<RootReport> {
    roots_with_budget(p, tol, MAX_SWEEPS)
}

pub(crate) fn roots_with_budget(p: &CharPoly, tol: f64, max_sweeps: usize) -> Result<RootReport> {
    let n = p.degree();
    if n == 0 {
        return Err(Error::InvalidInput("polynomial must have degree ≥ 1".into()));
    }
    if (p.coeffs[n] - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
        return Err(Error::InvalidInput("polynomial must be monic".into()));
    }

    let zeros = p
        .coeffs
        .iter()
        .take_while(|c| **c == Complex64::new(0.0, 0.0))
        .count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    let reduced = CharPoly {
        coeffs: p.coeffs[zeros..].to_vec(),
    };
    let m = reduced.degree();
    let mut sweeps = 0;
    if m > 0 {
        let (found, s, converged) = aberth(&reduced, tol, max_sweeps);
        sweeps = s;
        if !converged {
            roots.extend(found);
            let residuals: Vec<f64> = roots.iter().map(|z| p.eval(*z).norm()).collect();
            let max_residual = residuals.iter().copied().fold(0.0, f64::max);
            return Err(Error::NonConvergence {
                sweeps,
                best: roots,
                residuals,
                max_residual,
            });
        }
        roots.extend(found);
    }
    let residuals: Vec<f64> = roots.iter().map(|z| p.eval(*z).norm()).collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(RootReport {
        roots,
        residuals,
        max_residual,
        sweeps,
    })
}

/// A root of multiplicity m is a simple root of p^{(m−1)}; Newton on that
/// derivative recovers it to working precision from a cluster estimate.
pub(crate) fn refine_multiple_root(p: &CharPoly, start: Complex64, multiplicity: usize) -> Complex64 {
    let mut d = p.clone();
    for _ in 1..multiplicity {
        d = d.derivative();
    }
    if d.degree() == 0 {
        return start;
    }
    let mut z = start;
    for _ in 0..50 {
        let (v, dv) = d.eval_with_derivative(z);
        if dv.norm() == 0.0 {
            break;
        }
        let step = v / dv;
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        z -= step;
        if step.norm() <= 4.0 * f64::EPSILON * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// True when the first `multiplicity` Taylor coefficients of p at c all
/// vanish to within `rel` of their magnitude bounds Σₖ|pₖ|·C(k, j)·|c|^{k−j},
/// i.e. c is an m-fold root of a relative perturbation of p of size `rel`.
pub(crate) fn is_numerical_multiple_root(p: &CharPoly, c: Complex64, multiplicity: usize, rel: f64) -> bool {
    let taylor = taylor_coefficients(&p.coeffs, c, multiplicity);
    let abs: Vec<Complex64> = p.coeffs.iter().map(|z| Complex64::new(z.norm(), 0.0)).collect();
    let bounds = taylor_coefficients(&abs, Complex64::new(c.norm(), 0.0), multiplicity);
    taylor.iter().zip(&bounds).all(|(a, b)| a.norm() <= rel * b.norm())
}

/// p^{(j)}(c)/j! for j < count by repeated synthetic division by (z − c).
fn taylor_coefficients(coeffs: &[Complex64], c: Complex64, count: usize) -> Vec<Complex64> {
    let mut b: Vec<Complex64> = coeffs.iter().rev().copied().collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        if b.is_empty() {
            out.push(Complex64::new(0.0, 0.0));
            continue;
        }
        for i in 1..b.len() {
            let prev = b[i - 1];
            b[i] += c * prev;
        }
        out.push(b.pop().expect("nonempty"));
    }
    out
}

fn aberth(p: &CharPoly, tol: f64, max_sweeps: usize) -> (Vec<Complex64>, usize, bool) {
    let n = p.degree();
    if n == 1 {
        return (vec![-p.coeffs[0]], 0, true);
    }
    // Start on a circle whose radius is the geometric mean of the root moduli,
    // with an angular offset so that symmetric root sets are not hit exactly.
    let radius = p.coeffs[0].norm().powf(1.0 / n as f64).max(1e-3);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64 + 0.4))
        .collect();
    let mut done = vec![false; n];

    for sweep in 1..=max_sweeps {
        for k in 0..n {
            if done[k] {
                continue;
            }
            let (val, der) = p.eval_with_derivative(z[k]);
            if val.norm() <= p.eval_error_bound(z[k]) {
                done[k] = true;
                continue;
            }
            if der.norm() == 0.0 {
                z[k] += Complex64::new(tol.max(1e-12), tol.max(1e-12)) * radius;
                continue;
            }
            let w = val / der;
            let s: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| Complex64::new(1.0, 0.0) / (z[k] - z[j]))
                .sum();
            let update = w / (Complex64::new(1.0, 0.0) - w * s);
            if !(update.re.is_finite() && update.im.is_finite()) {
                continue;
            }
            z[k] -= update;
            if update.norm() <= tol * z[k].norm().max(1.0) {
                done[k] = true;
            }
        }
        if done.iter().all(|&d| d) {
            return (z, sweep, true);
        }
    }
    (z, max_sweeps, false)
}

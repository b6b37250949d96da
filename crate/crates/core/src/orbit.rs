//! Orbit iteration with per-step renormalization.
//!
//! Tⁿx is stored as exp(log_magnitude)·direction with a unit direction, so
//! orbits of operators with huge or tiny spectral radius never overflow. The
//! direction sequence is the computable content of the scaled orbit
//! {λTⁿx : λ ∈ ℂ}: projective questions only need directions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operator::OperatorSpec;
use crate::vector::{self, VectorState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitStep {
    pub n: u64,
    pub direction: VectorState,
    pub log_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub base: VectorState,
    pub steps: Vec<OrbitStep>,
    /// Set when some Tⁿx was exactly zero; the record stops at the last
    /// nonzero iterate.
    pub reached_kernel: bool,
}

impl OrbitRecord {
    /// One JSON object per step, newline-terminated.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&serde_json::to_string(step).expect("orbit steps serialize"));
            out.push('\n');
        }
        out
    }

    /// Tⁿx rebuilt from the ledger; may overflow to infinity for large
    /// magnitudes.
    pub fn reconstruct(&self, index: usize) -> VectorState {
        let s = &self.steps[index];
        s.direction.scale(Complex64::new(s.log_magnitude.exp(), 0.0))
    }
}

/// Streaming orbit: holds the current unit direction and log magnitude.
#[derive(Debug, Clone)]
pub struct OrbitWalker<'a> {
    op: &'a OperatorSpec,
    direction: Vec<Complex64>,
    log_magnitude: f64,
    n: u64,
    reached_kernel: bool,
}

impl<'a> OrbitWalker<'a> {
    /// Starts at n = 0 with x/‖x‖.
    pub fn new(op: &'a OperatorSpec, x: &VectorState) -> Result<Self> {
        let dim = op.validate()?;
        if dim != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.dim(),
            });
        }
        let norm = x.norm();
        if norm == 0.0 {
            return Err(invalid("orbit base must be nonzero"));
        }
        Ok(Self {
            op,
            direction: x.entries().iter().map(|z| z / norm).collect(),
            log_magnitude: norm.ln(),
            n: 0,
            reached_kernel: false,
        })
    }

    /// Moves to n + 1. Returns false, leaving the state at n, when the next
    /// iterate is exactly zero.
    pub fn advance(&mut self) -> bool {
        if self.reached_kernel {
            return false;
        }
        let next = self.op.apply_raw(&self.direction);
        let norm = vector::norm(&next);
        if norm == 0.0 {
            self.reached_kernel = true;
            return false;
        }
        self.direction = next.into_iter().map(|z| z / norm).collect();
        self.log_magnitude += norm.ln();
        self.n += 1;
        true
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn direction(&self) -> &[Complex64] {
        &self.direction
    }

    pub fn log_magnitude(&self) -> f64 {
        self.log_magnitude
    }

    pub fn reached_kernel(&self) -> bool {
        self.reached_kernel
    }

    fn step(&self) -> OrbitStep {
        OrbitStep {
            n: self.n,
            direction: VectorState::from_raw(self.direction.clone()),
            log_magnitude: self.log_magnitude,
        }
    }
}

/// Steps n = 0..=steps of the orbit of x, truncated at the kernel.
pub fn iterate_orbit(op: &OperatorSpec, x: &VectorState, steps: u64) -> Result<OrbitRecord> {
    if steps == 0 {
        return Err(invalid("orbit length must be positive"));
    }
    let mut walker = OrbitWalker::new(op, x)?;
    let mut out = vec![walker.step()];
    while walker.n() < steps && walker.advance() {
        out.push(walker.step());
    }
    Ok(OrbitRecord {
        base: x.clone(),
        steps: out,
        reached_kernel: walker.reached_kernel(),
    })
}

/// sin of the angle between the complex lines through x and y:
/// min over λ of ‖λx̂ − ŷ‖ for unit x̂, ŷ.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ProjectiveGap {
    pub value: f64,
}

pub fn projective_gap(x: &VectorState, y: &VectorState) -> Result<ProjectiveGap> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    if x.is_zero() || y.is_zero() {
        return Err(invalid("projective gap needs nonzero vectors"));
    }
    Ok(ProjectiveGap {
        value: unit_gap(x.normalized().entries(), y.normalized().entries()),
    })
}

/// Gap between unit vectors as the norm of the rejection of ŷ from x̂. This
/// form keeps full relative accuracy for tiny gaps, unlike √(1 − |⟨x̂,ŷ⟩|²).
pub(crate) fn unit_gap(x: &[Complex64], y: &[Complex64]) -> f64 {
    let c = vector::inner(y, x);
    let rejection: Vec<Complex64> = y.iter().zip(x).map(|(b, a)| b - c * a).collect();
    vector::norm(&rejection).min(1.0)
}

/// argmin over λ of ‖λy − x‖, i.e. ⟨x,y⟩/⟨y,y⟩.
pub fn best_scalar(x: &VectorState, y: &VectorState) -> Result<Complex64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let yy = y.inner(y);
    if yy.re == 0.0 {
        return Err(invalid("best scalar needs a nonzero target vector"));
    }
    Ok(x.inner(y) / yy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_orbit_is_constant() {
        let x = VectorState::new(vec![c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        let rec = iterate_orbit(&OperatorSpec::identity(2), &x, 5).unwrap();
        assert_eq!(rec.steps.len(), 6);
        for (k, s) in rec.steps.iter().enumerate() {
            assert_eq!(s.n, k as u64);
            assert_abs_diff_eq!(s.log_magnitude, 5f64.ln(), epsilon = 1e-15);
            for (g, w) in s.direction.entries().iter().zip(x.normalized().entries()) {
                assert!((g - w).norm() < 1e-15);
            }
        }
        assert!(!rec.reached_kernel);
    }

    #[test]
    fn diagonal_orbit_closed_form() {
        let op = OperatorSpec::diagonal(vec![c(0.0, 2.0), c(2.0, 0.0)]);
        let x = VectorState::from_real(&[1.0, 1.0]).unwrap();
        let rec = iterate_orbit(&op, &x, 12).unwrap();
        let s2 = 2f64.sqrt();
        for s in &rec.steps {
            let n = s.n as f64;
            assert_abs_diff_eq!(s.log_magnitude, n * 2f64.ln() + s2.ln(), epsilon = 1e-12);
            let want = [c(0.0, 1.0).powu(s.n as u32) / s2, c(1.0 / s2, 0.0)];
            for (g, w) in s.direction.entries().iter().zip(want) {
                assert!((g - w).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn truncated_shift_reaches_kernel() {
        let op = OperatorSpec::shift(vec![1.0, 1.0], 3);
        let rec = iterate_orbit(&op, &VectorState::basis(3, 2), 10).unwrap();
        assert!(rec.reached_kernel);
        // T e₃ = e₂, T² e₃ = e₁, T³ e₃ = 0.
        assert_eq!(rec.steps.last().unwrap().n, 2);
    }

    #[test]
    fn huge_growth_does_not_overflow() {
        let op = OperatorSpec::diagonal(vec![c(1e300, 0.0), c(0.0, 1e300)]);
        let rec = iterate_orbit(&op, &VectorState::from_real(&[1.0, 1.0]).unwrap(), 50).unwrap();
        let last = rec.steps.last().unwrap();
        assert!(last.log_magnitude.is_finite());
        assert_abs_diff_eq!(last.direction.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gap_examples() {
        let x = VectorState::new(vec![c(1.0, 2.0), c(-0.5, 0.3)]).unwrap();
        assert!(projective_gap(&x, &x.scale(c(0.0, 3.0))).unwrap().value < 1e-15);
        let e1 = VectorState::basis(2, 0);
        let e2 = VectorState::basis(2, 1);
        assert_eq!(projective_gap(&e1, &e2).unwrap().value, 1.0);
        // |⟨(1,1),(1,i)⟩|/2 = |1 − i|/2 = 1/√2, so the gap is √(1 − 1/2).
        let a = VectorState::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let b = VectorState::new(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(projective_gap(&a, &b).unwrap().value, 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn gap_rejects_zero() {
        let z = VectorState::from_real(&[0.0, 0.0]).unwrap();
        assert!(projective_gap(&z, &VectorState::basis(2, 0)).is_err());
    }

    #[test]
    fn best_scalar_examples() {
        let x = VectorState::new(vec![c(1.0, 2.0), c(-0.5, 0.3)]).unwrap();
        assert!((best_scalar(&x, &x).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        let two_x = x.scale(c(2.0, 0.0));
        assert!((best_scalar(&x, &two_x).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
        let e1 = VectorState::basis(2, 0);
        let e2 = VectorState::basis(2, 1);
        assert_eq!(best_scalar(&e1, &e2).unwrap(), c(0.0, 0.0));
        assert!(best_scalar(&e1, &VectorState::from_real(&[0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn json_lines_one_step_per_line() {
        let rec = iterate_orbit(&OperatorSpec::identity(1), &VectorState::basis(1, 0), 3).unwrap();
        let text = rec.to_json_lines();
        assert_eq!(text.lines().count(), 4);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["n"], 0);
    }
}

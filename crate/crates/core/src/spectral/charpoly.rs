use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense::Mat;
use crate::error::{Error, Result};
use crate::operator::{OperatorSpec, MAX_DIM};
use crate::serde_complex;

/// Monic polynomial, coefficients in ascending degree (`coeffs[dim] == 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharPoly {
    #[serde(with = "serde_complex::vec")]
    pub coeffs: Vec<Complex64>,
}

impl CharPoly {
    /// Monic polynomial from ascending coefficients; the leading one is
    /// divided out.
    pub fn monic(mut coeffs: Vec<Complex64>) -> Result<Self> {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == Complex64::new(0.0, 0.0) {
            coeffs.pop();
        }
        let lead = *coeffs
            .last()
            .ok_or_else(|| Error::InvalidInput("empty polynomial".into()))?;
        if lead == Complex64::new(0.0, 0.0) {
            return Err(Error::InvalidInput("zero polynomial".into()));
        }
        Ok(Self {
            coeffs: coeffs.into_iter().map(|c| c / lead).collect(),
        })
    }

    /// ∏ (z − rᵢ) expanded.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut coeffs = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
            for (k, c) in coeffs.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= r * c;
            }
            coeffs = next;
        }
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// p(z) and p'(z) by one Horner pass.
    pub(crate) fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> CharPoly {
        CharPoly {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        }
    }

    /// Bound on the rounding error of Horner evaluation at z.
    pub(crate) fn eval_error_bound(&self, z: Complex64) -> f64 {
        let r = z.norm();
        let s = self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm());
        4.0 * (self.coeffs.len() as f64) * f64::EPSILON * s
    }
}

/// Characteristic polynomial det(zI − T) via the Faddeev–LeVerrier trace
/// recursion on the dense materialization.
pub fn characteristic_polynomial(op: &OperatorSpec) -> Result<CharPoly> {
    let n = op.validate()?;
    if n > MAX_DIM {
        return Err(Error::UnsupportedSize { dim: n, max: MAX_DIM });
    }
    Ok(faddeev_leverrier(&op.materialize()))
}

pub(crate) fn faddeev_leverrier(a: &Mat) -> CharPoly {
    let n = a.nrows();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
    coeffs[n] = Complex64::new(1.0, 0.0);
    let mut m = Mat::zeros(n, n);
    for k in 1..=n {
        // M_k = A·M_{k−1} + c_{n−k+1}·I
        m = a * &m;
        let c = coeffs[n - k + 1];
        for i in 0..n {
            m[(i, i)] += c;
        }
        let am = a * &m;
        coeffs[n - k] = -am.trace() / k as f64;
    }
    CharPoly { coeffs }
}

//! Symbolic operators on ℂⁿ.
//!
//! An [`OperatorSpec`] is a small expression tree. Application is structural:
//! diagonals act entrywise, shifts move coordinates, powers apply the inner
//! operator repeatedly and polynomials use Horner's scheme over operator
//! application. Dense matrices only appear when explicitly materialized.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense::{self, Mat};
use crate::error::{invalid, Error, Result};
use crate::serde_complex;
use crate::vector::{self, VectorState};

/// Operators are restricted to desk-scale dimensions.
pub const MAX_DIM: usize = 64;

/// Default relative determinant threshold for [`OperatorSpec::dense_range_check`].
pub const DENSE_RANGE_TOL: f64 = 1e-10;

const NORM_ITERATIONS: usize = 50;
const NORM_SQUARINGS: usize = 10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// Row-major square matrix.
    Dense {
        #[serde(with = "serde_complex::grid")]
        matrix: Vec<Vec<Complex64>>,
    },
    /// (x₁,…,xₙ) ↦ (λ₁x₁,…,λₙxₙ).
    Diagonal {
        #[serde(with = "serde_complex::vec")]
        entries: Vec<Complex64>,
    },
    /// Truncated weighted backward shift (x₁,…,x_d) ↦ (w₁x₂,…,w_{d−1}x_d, 0).
    /// Needs `dim − 1` positive weights.
    #[serde(rename = "shift")]
    WeightedBackwardShift { weights: Vec<f64>, dim: usize },
    /// Block-diagonal sum with the Euclidean norm on the product.
    DirectSum { parts: Vec<OperatorSpec> },
    Scaled {
        #[serde(with = "serde_complex::scalar")]
        c: Complex64,
        inner: Box<OperatorSpec>,
    },
    Power { p: u32, inner: Box<OperatorSpec> },
    /// Σₖ coeffs[k]·innerᵏ, coefficients in ascending degree.
    Polynomial {
        #[serde(with = "serde_complex::vec")]
        coeffs: Vec<Complex64>,
        inner: Box<OperatorSpec>,
    },
}

/// Output of [`OperatorSpec::operator_norm_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    /// Power-iteration value of ‖T‖₂ (converges from below).
    pub estimate: f64,
    /// Rigorous upper bound: min(Frobenius, trace-of-powers bound), never
    /// below `estimate`.
    pub upper_bound: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseRangeReport {
    pub dense_range: bool,
    #[serde(with = "serde_complex::scalar")]
    pub determinant: Complex64,
    /// |det| divided by the product of row norms; lies in [0, 1] by Hadamard.
    pub normalized_determinant: f64,
}

impl OperatorSpec {
    pub fn dense(matrix: Vec<Vec<Complex64>>) -> Self {
        Self::Dense { matrix }
    }

    pub fn from_matrix(m: &Mat) -> Self {
        Self::Dense {
            matrix: dense::to_rows(m),
        }
    }

    pub fn diagonal(entries: Vec<Complex64>) -> Self {
        Self::Diagonal { entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::Diagonal {
            entries: vec![ONE; dim],
        }
    }

    pub fn dense_identity(dim: usize) -> Self {
        Self::from_matrix(&Mat::identity(dim, dim))
    }

    pub fn shift(weights: Vec<f64>, dim: usize) -> Self {
        Self::WeightedBackwardShift { weights, dim }
    }

    pub fn direct_sum(parts: Vec<OperatorSpec>) -> Self {
        Self::DirectSum { parts }
    }

    pub fn scaled(c: Complex64, inner: OperatorSpec) -> Self {
        Self::Scaled {
            c,
            inner: Box::new(inner),
        }
    }

    pub fn power(p: u32, inner: OperatorSpec) -> Self {
        Self::Power {
            p,
            inner: Box::new(inner),
        }
    }

    pub fn polynomial(coeffs: Vec<Complex64>, inner: OperatorSpec) -> Self {
        Self::Polynomial {
            coeffs,
            inner: Box::new(inner),
        }
    }

    /// Checks every structural invariant recursively and returns the dimension.
    pub fn validate(&self) -> Result<usize> {
        let dim = match self {
            Self::Dense { matrix } => {
                let n = matrix.len();
                if n == 0 {
                    return Err(invalid("dense matrix must be nonempty"));
                }
                if let Some((i, row)) = matrix.iter().enumerate().find(|(_, r)| r.len() != n) {
                    return Err(invalid(format!(
                        "dense matrix row {i} has {} entries, expected {n}",
                        row.len()
                    )));
                }
                if matrix.iter().flatten().any(|z| !vector::is_finite(*z)) {
                    return Err(invalid("dense matrix entries must be finite"));
                }
                n
            }
            Self::Diagonal { entries } => {
                if entries.is_empty() {
                    return Err(invalid("diagonal must be nonempty"));
                }
                if entries.iter().any(|z| !vector::is_finite(*z)) {
                    return Err(invalid("diagonal entries must be finite"));
                }
                entries.len()
            }
            Self::WeightedBackwardShift { weights, dim } => {
                if *dim == 0 {
                    return Err(invalid("shift dimension must be positive"));
                }
                if weights.len() + 1 != *dim {
                    return Err(invalid(format!(
                        "shift of dim {dim} needs {} weights, got {}",
                        dim - 1,
                        weights.len()
                    )));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(invalid("shift weights must be finite and positive"));
                }
                *dim
            }
            Self::DirectSum { parts } => {
                if parts.is_empty() {
                    return Err(invalid("direct sum needs at least one part"));
                }
                let mut total = 0;
                for p in parts {
                    total += p.validate()?;
                }
                total
            }
            Self::Scaled { c, inner } => {
                if !vector::is_finite(*c) || *c == ZERO {
                    return Err(invalid("scale factor must be finite and nonzero"));
                }
                inner.validate()?
            }
            Self::Power { p, inner } => {
                if *p == 0 {
                    return Err(invalid("power exponent must be at least 1"));
                }
                inner.validate()?
            }
            Self::Polynomial { coeffs, inner } => {
                if coeffs.iter().any(|z| !vector::is_finite(*z)) {
                    return Err(invalid("polynomial coefficients must be finite"));
                }
                if coeffs.iter().all(|z| *z == ZERO) {
                    return Err(invalid("polynomial needs a nonzero coefficient"));
                }
                inner.validate()?
            }
        };
        if dim > MAX_DIM {
            return Err(Error::UnsupportedSize { dim, max: MAX_DIM });
        }
        Ok(dim)
    }

    /// Dimension of the ambient space. Assumes a valid spec.
    pub fn dim(&self) -> usize {
        match self {
            Self::Dense { matrix } => matrix.len(),
            Self::Diagonal { entries } => entries.len(),
            Self::WeightedBackwardShift { dim, .. } => *dim,
            Self::DirectSum { parts } => parts.iter().map(Self::dim).sum(),
            Self::Scaled { inner, .. } | Self::Power { inner, .. } | Self::Polynomial { inner, .. } => {
                inner.dim()
            }
        }
    }

    pub fn apply(&self, v: &VectorState) -> Result<VectorState> {
        let dim = self.validate()?;
        if dim != v.dim() {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.dim(),
            });
        }
        Ok(VectorState::from_raw(self.apply_raw(v.entries())))
    }

    /// Structural application without validation; the caller guarantees a
    /// valid spec of matching dimension.
    pub(crate) fn apply_raw(&self, x: &[Complex64]) -> Vec<Complex64> {
        match self {
            Self::Dense { matrix } => matrix
                .iter()
                .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
                .collect(),
            Self::Diagonal { entries } => entries.iter().zip(x).map(|(d, v)| d * v).collect(),
            Self::WeightedBackwardShift { weights, .. } => {
                let mut out: Vec<Complex64> =
                    weights.iter().zip(&x[1..]).map(|(w, v)| v * *w).collect();
                out.push(ZERO);
                out
            }
            Self::DirectSum { parts } => {
                let mut out = Vec::with_capacity(x.len());
                let mut at = 0;
                for p in parts {
                    let d = p.dim();
                    out.extend(p.apply_raw(&x[at..at + d]));
                    at += d;
                }
                out
            }
            Self::Scaled { c, inner } => inner.apply_raw(x).into_iter().map(|z| c * z).collect(),
            Self::Power { p, inner } => {
                let mut y = inner.apply_raw(x);
                for _ in 1..*p {
                    y = inner.apply_raw(&y);
                }
                y
            }
            Self::Polynomial { coeffs, inner } => {
                let (top, rest) = coeffs.split_last().expect("validated nonempty");
                let mut acc: Vec<Complex64> = x.iter().map(|v| top * v).collect();
                for c in rest.iter().rev() {
                    acc = inner.apply_raw(&acc);
                    for (a, v) in acc.iter_mut().zip(x) {
                        *a += c * v;
                    }
                }
                acc
            }
        }
    }

    /// Spec of the conjugate transpose. Shifts have no backward-shift
    /// adjoint, so they come back dense.
    pub fn adjoint(&self) -> OperatorSpec {
        match self {
            Self::Dense { matrix } => {
                let n = matrix.len();
                Self::Dense {
                    matrix: (0..n)
                        .map(|i| (0..n).map(|j| matrix[j][i].conj()).collect())
                        .collect(),
                }
            }
            Self::Diagonal { entries } => Self::Diagonal {
                entries: entries.iter().map(Complex64::conj).collect(),
            },
            Self::WeightedBackwardShift { .. } => Self::from_matrix(&self.materialize().adjoint()),
            Self::DirectSum { parts } => Self::DirectSum {
                parts: parts.iter().map(Self::adjoint).collect(),
            },
            Self::Scaled { c, inner } => Self::scaled(c.conj(), inner.adjoint()),
            Self::Power { p, inner } => Self::power(*p, inner.adjoint()),
            Self::Polynomial { coeffs, inner } => {
                Self::polynomial(coeffs.iter().map(Complex64::conj).collect(), inner.adjoint())
            }
        }
    }

    /// Dense matrix whose i-th column is `apply(eᵢ)`.
    pub fn materialize(&self) -> Mat {
        let n = self.dim();
        let mut m = Mat::zeros(n, n);
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e[j] = ONE;
            for (i, z) in self.apply_raw(&e).into_iter().enumerate() {
                m[(i, j)] = z;
            }
            e[j] = ZERO;
        }
        m
    }

    /// Row-major grid form of [`materialize`](Self::materialize).
    pub fn materialize_dense(&self) -> Result<Vec<Vec<Complex64>>> {
        self.validate()?;
        Ok(dense::to_rows(&self.materialize()))
    }

    /// ‖T‖₂ by 50 rounds of power iteration on T*T, plus a rigorous upper bound.
    pub fn operator_norm_estimate(&self) -> Result<NormEstimate> {
        let n = self.validate()?;
        let adj = self.adjoint();

        let mut v: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(1.0 + 0.37 * j as f64, 0.11 * (j as f64 + 1.0).sqrt()))
            .collect();
        let s = vector::norm(&v);
        v.iter_mut().for_each(|z| *z /= s);

        let mut estimate = 0.0;
        let mut previous = f64::NAN;
        let mut converged = false;
        for _ in 0..NORM_ITERATIONS {
            let tv = self.apply_raw(&v);
            estimate = vector::norm(&tv);
            let w = adj.apply_raw(&tv);
            let wn = vector::norm(&w);
            if wn == 0.0 {
                converged = estimate == 0.0;
                break;
            }
            v = w.into_iter().map(|z| z / wn).collect();
            converged = (estimate - previous).abs() <= 1e-12 * estimate.max(f64::MIN_POSITIVE);
            previous = estimate;
        }

        let m = self.materialize();
        let fro = dense::frobenius(&m);
        let trace_bound = trace_power_bound(&m);
        let upper_bound = fro.min(trace_bound).max(estimate);
        Ok(NormEstimate {
            estimate,
            upper_bound,
            converged,
        })
    }

    /// True iff |det T| exceeds `tol` times the product of the row norms.
    pub fn dense_range_check(&self, tol: f64) -> Result<DenseRangeReport> {
        self.validate()?;
        let m = self.materialize();
        let determinant = m.clone().determinant();
        let mut log_scale = 0.0;
        let mut zero_row = false;
        for i in 0..m.nrows() {
            let r = vector::norm(&(0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>());
            if r == 0.0 {
                zero_row = true;
            } else {
                log_scale += r.ln();
            }
        }
        let normalized_determinant = if zero_row || determinant.norm() == 0.0 {
            0.0
        } else {
            (determinant.norm().ln() - log_scale).exp()
        };
        Ok(DenseRangeReport {
            dense_range: normalized_determinant > tol,
            determinant,
            normalized_determinant,
        })
    }
}

/// σ_max(M) ≤ (tr (M*M)^k)^{1/2k} with k = 2^NORM_SQUARINGS, computed with
/// renormalized repeated squaring in log scale.
fn trace_power_bound(m: &Mat) -> f64 {
    let a = m.adjoint() * m;
    let f = dense::frobenius(&a);
    if f == 0.0 {
        return 0.0;
    }
    let mut b = a / Complex64::new(f, 0.0);
    let mut log_scale = f.ln();
    for _ in 0..NORM_SQUARINGS {
        b = &b * &b;
        let t = dense::frobenius(&b);
        b /= Complex64::new(t, 0.0);
        log_scale = 2.0 * log_scale + t.ln();
    }
    let tr = b.trace().re.max(f64::MIN_POSITIVE);
    let k = (1u64 << NORM_SQUARINGS) as f64;
    ((tr.ln() + log_scale) / (2.0 * k)).exp() * (1.0 + 1e-10)
}

use std::fmt;
use std::ops::Index;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};

/// A nonzero-length vector in ℂⁿ with the Euclidean norm.
#[derive(Clone, PartialEq)]
pub struct VectorState(Vec<Complex64>);

impl VectorState {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("vector must have at least one entry"));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("vector entries must be finite"));
        }
        Ok(Self(entries))
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&r| Complex64::new(r, 0.0)).collect())
    }

    /// The i-th standard basis vector of ℂ^dim.
    pub fn basis(dim: usize, i: usize) -> Self {
        assert!(i < dim, "basis index {i} out of range for dim {dim}");
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[i] = Complex64::new(1.0, 0.0);
        Self(v)
    }

    pub(crate) fn from_raw(entries: Vec<Complex64>) -> Self {
        debug_assert!(!entries.is_empty());
        Self(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_entries(self) -> Vec<Complex64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Unit vector in the same direction. Panics on the zero vector.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero vector");
        self.scale(Complex64::new(1.0 / n, 0.0))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self(self.0.iter().map(|z| z * c).collect())
    }

    /// ⟨self, other⟩ = Σ selfᵢ·conj(otherᵢ), linear in the first slot.
    pub fn inner(&self, other: &Self) -> Complex64 {
        inner(&self.0, &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Splits into consecutive pieces of the given lengths.
    pub fn split(&self, lens: &[usize]) -> Vec<Self> {
        let mut out = Vec::with_capacity(lens.len());
        let mut at = 0;
        for &l in lens {
            out.push(Self(self.0[at..at + l].to_vec()));
            at += l;
        }
        out
    }

    pub fn concat(parts: &[Self]) -> Self {
        Self(parts.iter().flat_map(|p| p.0.iter().copied()).collect())
    }
}

impl Index<usize> for VectorState {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl fmt::Debug for VectorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Serialize for VectorState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::serde_complex::vec::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for VectorState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = crate::serde_complex::vec::deserialize(d)?;
        VectorState::new(raw).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Euclidean norm with scaling so that huge or tiny entries do not
/// overflow or underflow the sum of squares.
pub(crate) fn norm(a: &[Complex64]) -> f64 {
    let m = a
        .iter()
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(0.0_f64, f64::max);
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = a.iter().map(|z| (z / m).norm_sqr()).sum();
    m * s.sqrt()
}

pub(crate) fn is_finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

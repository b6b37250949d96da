//! Seeded operator and vector generators with planted ground truth.
//!
//! Every generated operator carries the eigenvalues it was built from, so
//! checks downstream have an oracle that does not go through the spectral
//! module.

use std::f64::consts::TAU;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dense::{self, Mat};
use crate::operator::OperatorSpec;
use crate::vector::VectorState;

/// Denominators for rational arguments; their lcm is 120, so every rational
/// generator has an exact simultaneous return at some n ≤ 120.
pub const RATIONAL_DENOMINATORS: [u32; 9] = [1, 2, 3, 4, 5, 6, 8, 10, 12];
/// Radii used for equal-modulus generators.
pub const RADII: [f64; 3] = [0.5, 1.0, 2.0];
/// Largest condition number of a generated conjugator.
pub const MAX_CONDITION: f64 = 100.0;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Uniform on the unit sphere of ℂ^dim.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> VectorState {
    loop {
        let v: Vec<Complex64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
        let v = VectorState::from_raw(v);
        if v.norm() > 1e-8 {
            return v.normalized();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arguments {
    /// a/q turns with q from [`RATIONAL_DENOMINATORS`].
    Rational,
    /// Uniform turns, pairwise separated by at least 1/(4·dim) on the circle.
    Irrational,
}

pub fn rational_turn<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let q = *RATIONAL_DENOMINATORS.choose(rng).expect("nonempty");
    rng.gen_range(0..q) as f64 / q as f64
}

fn circular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Turns in [0, 1) for `dim` eigenvalue arguments.
pub fn turns<R: Rng + ?Sized>(rng: &mut R, dim: usize, kind: Arguments) -> Vec<f64> {
    match kind {
        Arguments::Rational => (0..dim).map(|_| rational_turn(rng)).collect(),
        Arguments::Irrational => {
            let sep = 1.0 / (4.0 * dim as f64);
            loop {
                let t: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
                let ok = (0..dim).all(|i| (i + 1..dim).all(|j| circular_gap(t[i], t[j]) >= sep));
                if ok {
                    return t;
                }
            }
        }
    }
}

pub fn polar(radius: f64, turn: f64) -> Complex64 {
    Complex64::from_polar(radius, TAU * turn)
}

/// `dim` eigenvalues of modulus `radius`.
pub fn equal_modulus_eigenvalues<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    radius: f64,
    kind: Arguments,
) -> Vec<Complex64> {
    turns(rng, dim, kind).into_iter().map(|t| polar(radius, t)).collect()
}

/// Eigenvalues whose modulus spread (max − min)/max is at least
/// `min_spread`; the spread itself is drawn from [min_spread, 0.5].
pub fn unequal_modulus_eigenvalues<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    min_spread: f64,
) -> Vec<Complex64> {
    assert!(dim >= 2, "a modulus spread needs two eigenvalues");
    let radius = *RADII.choose(rng).expect("nonempty");
    let spread = rng.gen_range(min_spread..=0.5f64.max(min_spread));
    let low = radius * (1.0 - spread);
    let mut moduli = vec![radius, low];
    moduli.extend((2..dim).map(|_| rng.gen_range(low..=radius)));
    moduli.shuffle(rng);
    turns(rng, dim, Arguments::Irrational)
        .into_iter()
        .zip(moduli)
        .map(|(t, r)| polar(r, t))
        .collect()
}

/// Haar-ish unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Mat {
    let g = Mat::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    g.qr().q()
}

/// V = U₁ΣU₂ᴴ with singular values spread log-uniformly over [1, cond] and
/// cond drawn from [1, max_cond]. Returns (V, V⁻¹, cond); the inverse is
/// assembled from the factors, not by elimination.
pub fn conjugator<R: Rng + ?Sized>(rng: &mut R, dim: usize, max_cond: f64) -> (Mat, Mat, f64) {
    let u1 = random_unitary(rng, dim);
    let u2 = random_unitary(rng, dim);
    let cond: f64 = if dim == 1 { 1.0 } else { rng.gen_range(1.0..=max_cond) };
    let mut sv: Vec<f64> = (0..dim)
        .map(|i| match i {
            0 => 1.0,
            1 => cond,
            _ => cond.powf(rng.gen::<f64>()),
        })
        .collect();
    sv.shuffle(rng);
    let s = DVector::from_iterator(dim, sv.iter().map(|&v| Complex64::new(v, 0.0)));
    let s_inv = DVector::from_iterator(dim, sv.iter().map(|&v| Complex64::new(1.0 / v, 0.0)));
    let v = &u1 * Mat::from_diagonal(&s) * u2.adjoint();
    let v_inv = &u2 * Mat::from_diagonal(&s_inv) * u1.adjoint();
    (v, v_inv, cond)
}

/// An operator together with the eigenvalues it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Planted {
    pub label: String,
    pub op: OperatorSpec,
    #[serde(with = "crate::serde_complex::vec")]
    pub eigenvalues: Vec<Complex64>,
    /// Condition number of the similarity, when one was applied.
    pub condition: Option<f64>,
}

pub fn diagonal(label: impl Into<String>, eigenvalues: Vec<Complex64>) -> Planted {
    Planted {
        label: label.into(),
        op: OperatorSpec::diagonal(eigenvalues.clone()),
        eigenvalues,
        condition: None,
    }
}

/// V·diag(eigenvalues)·V⁻¹ for a random conjugator with cond ≤ `max_cond`.
pub fn conjugated<R: Rng + ?Sized>(
    rng: &mut R,
    label: impl Into<String>,
    eigenvalues: Vec<Complex64>,
    max_cond: f64,
) -> Planted {
    let dim = eigenvalues.len();
    let (v, v_inv, cond) = conjugator(rng, dim, max_cond);
    let d = Mat::from_diagonal(&DVector::from_vec(eigenvalues.clone()));
    let t = &v * d * &v_inv;
    Planted {
        label: label.into(),
        op: OperatorSpec::dense(dense::to_rows(&t)),
        eigenvalues,
        condition: Some(cond),
    }
}

/// Upper-triangular Jordan block λI + N.
pub fn jordan_block(dim: usize, lambda: Complex64) -> OperatorSpec {
    let m = Mat::from_fn(dim, dim, |i, j| {
        if i == j {
            lambda
        } else if j == i + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    OperatorSpec::from_matrix(&m)
}

/// Coefficients of a random polynomial of degree 1..=max_degree with a
/// nonzero leading coefficient.
pub fn random_polynomial<R: Rng + ?Sized>(rng: &mut R, max_degree: usize) -> Vec<Complex64> {
    let degree = rng.gen_range(1..=max_degree.max(1));
    (0..=degree).map(|_| gaussian_complex(rng)).collect()
}

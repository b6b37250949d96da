use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::Mat;
use crate::error::{invalid, Error, Result};
use crate::generators::random_unit_vector;
use crate::operator::OperatorSpec;
use crate::serde_complex;
use crate::spectral::{self, SPREAD_TOL};
use crate::vector::{self, VectorState};

/// X₀ = ker x₀* for a dual eigenvector x₀* (x₀*∘T = λ·x₀*, i.e.
/// T*f = conj(λ)·f), together with T restricted to X₀ in an orthonormal
/// basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneDecomposition {
    /// λ refined to the converged dual eigenvector.
    #[serde(with = "serde_complex::scalar")]
    pub lambda: Complex64,
    /// Unit f with T*f ≈ conj(λ)f; X₀ = {x : ⟨x, f⟩ = 0}.
    pub functional: VectorState,
    /// ‖T*f − conj(λ)f‖.
    pub functional_residual: f64,
    /// Orthonormal basis of X₀.
    pub basis: Vec<VectorState>,
    /// BᴴTB for the basis matrix B.
    pub compressed: OperatorSpec,
    /// max over basis vectors b of ‖Tb − B·BᴴTb‖: the part of T(X₀) that
    /// leaves X₀.
    pub invariance_residual: f64,
}

impl HyperplaneDecomposition {
    /// λ⁻¹·T₀, the operator that must be recurrent on X₀.
    pub fn normalized_compression(&self) -> OperatorSpec {
        OperatorSpec::scaled(self.lambda.inv(), self.compressed.clone())
    }

    pub fn max_functional_overlap(&self) -> f64 {
        self.basis
            .iter()
            .map(|b| b.inner(&self.functional).norm())
            .fold(0.0, f64::max)
    }
}

const RESTARTS: u64 = 3;
const ITERATIONS: usize = 30;
const RESIDUAL_TOL: f64 = 1e-10;
/// Iteration continues past RESIDUAL_TOL towards rounding level, since the
/// leak of T(X₀) out of X₀ is the functional residual itself.
const TARGET_RESIDUAL: f64 = 1e-15;
const SEED: u64 = 0x6879_7065;

/// Splits off the hyperplane X₀ = ker x₀* for an eigenvalue λ of T.
///
/// The dual eigenvector comes from shifted inverse iteration on T* with up
/// to three random restarts. λ must be within `tol·max(1, |λ|)` of a point of
/// σ(T); defective eigenvalues are refused as inconclusive.
pub fn hyperplane_restriction(op: &OperatorSpec, lambda: Complex64, tol: f64) -> Result<HyperplaneDecomposition> {
    let dim = op.validate()?;
    if dim < 2 {
        return Err(invalid("hyperplane restriction needs dim ≥ 2"));
    }
    if !vector::is_finite(lambda) || lambda.norm() == 0.0 {
        return Err(invalid("lambda must be finite and nonzero"));
    }
    let report = spectral::spectrum(op, SPREAD_TOL)?;
    let scale = lambda.norm().max(1.0);
    let nearest = report
        .points
        .iter()
        .map(|p| (p - lambda).norm())
        .fold(f64::INFINITY, f64::min);
    if nearest > tol * scale {
        return Err(invalid(format!(
            "lambda = {lambda} is not an eigenvalue (distance {nearest:e} to the spectrum)"
        )));
    }
    if let Some(cl) = report
        .clusters
        .iter()
        .min_by(|a, b| (a.value - lambda).norm().total_cmp(&(b.value - lambda).norm()))
    {
        if cl.geometric < cl.algebraic {
            return Err(Error::Inconclusive(format!(
                "eigenvalue {} is defective (geometric {} < algebraic {})",
                cl.value, cl.geometric, cl.algebraic
            )));
        }
    }

    let t = op.materialize();
    let a = t.adjoint();
    let norm = op.operator_norm_estimate()?.upper_bound.max(1.0);
    let target = lambda.conj();
    let shift = target + Complex64::from_polar(1e-9 * norm, 0.7);
    let mut shifted = a.clone();
    for i in 0..dim {
        shifted[(i, i)] -= shift;
    }
    let lu = shifted.lu();

    let mut best: Option<(Vec<Complex64>, Complex64, f64)> = None;
    for restart in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + restart);
        let mut f = random_unit_vector(&mut rng, dim).into_entries();
        for _ in 0..ITERATIONS {
            let Some(next) = lu.solve(&nalgebra::DVector::from_vec(f.clone())) else {
                break;
            };
            let nm = vector::norm(next.as_slice());
            if nm == 0.0 || !nm.is_finite() {
                break;
            }
            f = next.iter().map(|z| z / nm).collect();
            let (rho, res) = rayleigh(&a, &f);
            if best.as_ref().is_none_or(|b| res < b.2) {
                best = Some((f.clone(), rho, res));
            }
            if res <= TARGET_RESIDUAL * norm {
                break;
            }
        }
        if best.as_ref().is_some_and(|b| b.2 <= RESIDUAL_TOL * norm) {
            break;
        }
    }
    let Some((mut f, rho, functional_residual)) = best else {
        return Err(Error::Inconclusive("inverse iteration produced no dual eigenvector".into()));
    };
    if functional_residual > RESIDUAL_TOL * norm {
        return Err(Error::Inconclusive(format!(
            "dual eigenvector residual {functional_residual:e} above tolerance"
        )));
    }
    // Fix the phase so the largest entry is real and positive.
    let top = f
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("nonempty");
    let phase = top.conj() / top.norm();
    f.iter_mut().for_each(|z| *z *= phase);

    let basis = complement_basis(&f);
    let b = Mat::from_fn(dim, dim - 1, |i, j| basis[j][i]);
    let tb = &t * &b;
    let compressed = b.adjoint() * &tb;
    let leak = &tb - &b * &compressed;
    let invariance_residual = (0..dim - 1)
        .map(|j| vector::norm(leak.column(j).as_slice()))
        .fold(0.0, f64::max);

    Ok(HyperplaneDecomposition {
        lambda: rho.conj(),
        functional: VectorState::from_raw(f),
        functional_residual,
        basis: basis.into_iter().map(VectorState::from_raw).collect(),
        compressed: OperatorSpec::from_matrix(&compressed),
        invariance_residual,
    })
}

/// Rayleigh quotient ⟨Af, f⟩ for unit f and the residual ‖Af − ρf‖.
fn rayleigh(a: &Mat, f: &[Complex64]) -> (Complex64, f64) {
    let af: Vec<Complex64> = (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * f[j]).sum())
        .collect();
    let rho = vector::inner(&af, f);
    let r: Vec<Complex64> = af.iter().zip(f).map(|(x, y)| x - rho * y).collect();
    (rho, vector::norm(&r))
}

/// Orthonormal basis of {x : ⟨x, f⟩ = 0} by Gram–Schmidt (applied twice)
/// over the standard basis, least-aligned coordinates first.
fn complement_basis(f: &[Complex64]) -> Vec<Vec<Complex64>> {
    let dim = f.len();
    let mut order: Vec<usize> = (0..dim).collect();
    // Negligible entries tie, so coordinate order survives rounding noise.
    let key = |i: usize| if f[i].norm() <= 1e-8 { 0.0 } else { f[i].norm() };
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
    let mut accepted: Vec<Vec<Complex64>> = vec![f.to_vec()];
    for i in order {
        if accepted.len() == dim {
            break;
        }
        let mut v = VectorState::basis(dim, i).into_entries();
        for _ in 0..2 {
            for q in &accepted {
                let c = vector::inner(&v, q);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nm = vector::norm(&v);
        if nm > 1e-6 {
            accepted.push(v.into_iter().map(|z| z / nm).collect());
        }
    }
    accepted.remove(0);
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::recurrence::{detect_recurrence, DetectionParams};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dev(a: &Mat, b: &Mat) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_splits_off_first_coordinate() {
        let op = OperatorSpec::diagonal(vec![c(2.0, 0.0), c(0.0, 2.0), c(-2.0, 0.0)]);
        let h = hyperplane_restriction(&op, c(2.0, 0.0), 1e-8).unwrap();
        assert!((h.functional.entries()[0] - c(1.0, 0.0)).norm() < 1e-12);
        let want = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0, 2.0), c(-2.0, 0.0)]));
        assert!(dev(&h.compressed.materialize(), &want) < 1e-12);
        assert!(h.invariance_residual < 1e-12);
        assert!(h.max_functional_overlap() < 1e-12);
        let p = DetectionParams::new(1e-9, 100).unwrap();
        let x = VectorState::from_real(&[1.0, 1.0]).unwrap();
        let v = detect_recurrence(&h.normalized_compression(), &x, &p).unwrap();
        assert_eq!(v.certificates[0].n, 4);
    }

    #[test]
    fn identity_compresses_to_identity() {
        let op = OperatorSpec::identity(2);
        let h = hyperplane_restriction(&op, c(1.0, 0.0), 1e-8).unwrap();
        assert!(dev(&h.compressed.materialize(), &Mat::identity(1, 1)) < 1e-12);
    }

    #[test]
    fn vacuous_unequal_moduli() {
        let op = OperatorSpec::diagonal(vec![c(1.0, 0.0), c(2.0, 0.0)]);
        let h = hyperplane_restriction(&op, c(1.0, 0.0), 1e-8).unwrap();
        assert!((h.compressed.materialize()[(0, 0)] - c(2.0, 0.0)).norm() < 1e-12);
        let p = DetectionParams::new(0.1, 10_000).unwrap();
        let v = detect_recurrence(&h.normalized_compression(), &VectorState::basis(1, 0), &p).unwrap();
        assert!(!v.is_certified());
    }

    #[test]
    fn rejects_non_eigenvalue_and_defective() {
        let op = OperatorSpec::diagonal(vec![c(1.0, 0.0), c(2.0, 0.0)]);
        assert!(matches!(
            hyperplane_restriction(&op, c(3.0, 0.0), 1e-8),
            Err(Error::InvalidInput(_))
        ));
        let j = generators::jordan_block(2, c(1.0, 0.0));
        assert!(matches!(
            hyperplane_restriction(&j, c(1.0, 0.0), 1e-6),
            Err(Error::Inconclusive(_))
        ));
    }

    #[test]
    fn conjugated_operator_invariance() {
        let mut rng = generators::seeded(21, 0);
        let ev = generators::equal_modulus_eigenvalues(&mut rng, 5, 2.0, generators::Arguments::Rational);
        let p = generators::conjugated(&mut rng, "t", ev.clone(), generators::MAX_CONDITION);
        for &l in &ev {
            let h = hyperplane_restriction(&p.op, l, 1e-6).unwrap();
            assert!(h.invariance_residual < 1e-8, "{}", h.invariance_residual);
            assert!(h.max_functional_overlap() < 1e-10);
            assert_eq!(h.basis.len(), 4);
        }
    }
}

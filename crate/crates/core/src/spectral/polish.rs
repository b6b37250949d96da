use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::{self, Mat};
use crate::generators::random_unit_vector;
use crate::vector;

const STEPS: usize = 8;
const RESIDUAL_TOL: f64 = 1e-13;
/// Largest move of a root, relative to max(1, |z|); an m-fold root is
/// smeared over roughly ε^{1/m}, which stays below this for m ≤ 8.
const MAX_MOVE: f64 = 2e-2;
const SEED: u64 = 0x706f_6c69;

/// Moves each characteristic-polynomial root onto the Rayleigh quotient of
/// a converged right eigenvector of T.
///
/// A semisimple m-fold eigenvalue comes out of the polynomial smeared over a
/// disc of radius ~ε^{1/m}; Rayleigh-quotient iteration started inside that
/// disc lands on the eigenvalue itself. Roots whose iteration does not
/// converge are kept. The whole update is discarded if it moves the trace or
/// the determinant away from the matrix values by more than the raw roots did.
pub(crate) fn polish_eigenvalues(t: &Mat, roots: &[Complex64]) -> Vec<Complex64> {
    let n = t.nrows();
    let norm = dense::frobenius(t);
    if n == 0 || norm == 0.0 {
        return roots.to_vec();
    }
    let polished: Vec<Complex64> = roots
        .iter()
        .enumerate()
        .map(|(i, &z)| rayleigh_iteration(t, z, norm, i as u64).unwrap_or(z))
        .collect();

    let trace = t.trace();
    let det = t.clone().determinant();
    let trace_err = |p: &[Complex64]| (p.iter().sum::<Complex64>() - trace).norm();
    let det_err = |p: &[Complex64]| (p.iter().product::<Complex64>() - det).norm();
    let slack = 1e-12 * norm * n as f64;
    let det_slack = 1e-10 * det.norm().max(norm.powi(n as i32) * 1e-12);
    if trace_err(&polished) <= 10.0 * trace_err(roots) + slack
        && det_err(&polished) <= 10.0 * det_err(roots) + det_slack
    {
        polished
    } else {
        roots.to_vec()
    }
}

fn rayleigh_iteration(t: &Mat, z: Complex64, norm: f64, stream: u64) -> Option<Complex64> {
    let n = t.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    rng.set_stream(stream);
    let mut v = random_unit_vector(&mut rng, n).into_entries();
    let mut shift = z;
    for _ in 0..STEPS {
        let mut a = t.clone();
        // Nudge off the exact eigenvalue so the solve stays finite.
        let s = shift + Complex64::new(0.0, 1e-14 * norm);
        for i in 0..n {
            a[(i, i)] -= s;
        }
        let w = a.lu().solve(&DVector::from_vec(v.clone()))?;
        let wn = vector::norm(w.as_slice());
        if !(wn > 0.0 && wn.is_finite()) {
            break;
        }
        v = w.iter().map(|x| x / wn).collect();
        let (rho, res) = quotient(t, &v);
        shift = rho;
        if res <= RESIDUAL_TOL * norm {
            return ((rho - z).norm() <= MAX_MOVE * z.norm().max(1.0)).then_some(rho);
        }
    }
    None
}

/// vᴴTv and ‖Tv − (vᴴTv)v‖ for unit v.
fn quotient(t: &Mat, v: &[Complex64]) -> (Complex64, f64) {
    let tv = t * DVector::from_column_slice(v);
    let rho = vector::inner(tv.as_slice(), v);
    let r: Vec<Complex64> = tv.iter().zip(v).map(|(a, b)| a - rho * b).collect();
    (rho, vector::norm(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::spectral::{characteristic_polynomial, polynomial_roots};
    use crate::OperatorSpec;

    #[test]
    fn repeated_semisimple_eigenvalue_is_recovered() {
        let mut rng = generators::seeded(4, 0);
        let ev = vec![Complex64::new(0.0, 1.0); 4];
        let p = generators::conjugated(&mut rng, "rep", ev, 50.0);
        let raw = polynomial_roots(&characteristic_polynomial(&p.op).unwrap(), 1e-14).unwrap().roots;
        let spread = raw.iter().map(|z| (z - Complex64::new(0.0, 1.0)).norm()).fold(0.0, f64::max);
        let fixed = polish_eigenvalues(&p.op.materialize(), &raw);
        let err = fixed.iter().map(|z| (z - Complex64::new(0.0, 1.0)).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "raw spread {spread:e}, polished {err:e}");
    }

    #[test]
    fn simple_roots_stay_put() {
        let op = OperatorSpec::dense(vec![
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        ]);
        let raw = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let fixed = polish_eigenvalues(&op.materialize(), &raw);
        for (a, b) in raw.iter().zip(&fixed) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}

//! Small dense-matrix helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type Mat = DMatrix<Complex64>;

pub fn from_rows(rows: &[Vec<Complex64>]) -> Mat {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn to_rows(m: &Mat) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn frobenius(m: &Mat) -> f64 {
    crate::vector::norm(m.as_slice())
}

/// Elimination with complete pivoting. Returns the absolute pivots in the
/// order they were eliminated; pivots at or below `tol` end the sweep.
pub fn elimination_pivots(m: &Mat, tol: f64) -> Vec<f64> {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let mut pivots = Vec::new();
    for k in 0..rows.min(cols) {
        let mut best = (k, k, 0.0_f64);
        for i in k..rows {
            for j in k..cols {
                let v = a[(i, j)].norm();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        a.swap_rows(k, best.0);
        a.swap_columns(k, best.1);
        pivots.push(best.2);
        let p = a[(k, k)];
        for i in k + 1..rows {
            let f = a[(i, k)] / p;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in k..cols {
                let t = a[(k, j)];
                a[(i, j)] -= f * t;
            }
        }
    }
    pivots
}

/// Numerical rank: number of complete-pivoting pivots above `tol`.
pub fn rank(m: &Mat, tol: f64) -> usize {
    elimination_pivots(m, tol).len()
}

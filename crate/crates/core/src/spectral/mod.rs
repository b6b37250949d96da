//! σ(T), σ_p(T*) and the spectral necessary conditions for super-recurrence.
//!
//! In finite dimension every spectral point is its own connected component,
//! so "each component meets the circle |z| = R" reduces to "all eigenvalues
//! share one modulus". The adjoint's point spectrum is the conjugate
//! multiset of σ(T). Only the modulus is constrained; arguments are free.

mod charpoly;
mod polish;
mod roots;

pub use charpoly::{characteristic_polynomial, CharPoly};
pub use roots::{polynomial_roots, RootReport, MAX_SWEEPS};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::Result;
use crate::operator::{DenseRangeReport, OperatorSpec, DENSE_RANGE_TOL};
use crate::serde_complex;

/// Default modulus-spread tolerance for verdicts.
pub const SPREAD_TOL: f64 = 1e-6;
/// Spread above which a generator labels an operator as clearly violating
/// the circle condition.
pub const CLEAR_VIOLATION_SPREAD: f64 = 0.05;

const ROOT_TOL: f64 = 1e-14;
/// Computed eigenvalues closer than this (relative to max(1, ρ)) are treated
/// as one eigenvalue with algebraic multiplicity.
const CLUSTER_TOL: f64 = 1e-4;
/// Groups closer than this may still be one defective eigenvalue.
const WIDE_CLUSTER_TOL: f64 = 1e-2;
/// Relative coefficient perturbation under which a merged group must be an
/// exact multiple root.
const MULTIPLE_ROOT_REL: f64 = 1e-10;
/// Rank threshold relative to ‖T‖.
const RANK_TOL: f64 = 1e-8;
/// Pivots between RANK_TOL and this (relative to ‖T‖) are too close to call.
const RANK_GREY: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagonalizable {
    Yes,
    No,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenCluster {
    /// Refined common value of the clustered computed eigenvalues.
    #[serde(with = "serde_complex::scalar")]
    pub value: Complex64,
    pub algebraic: usize,
    pub geometric: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub dim: usize,
    /// σ(T) with multiplicity; members of a cluster carry its refined value.
    #[serde(with = "serde_complex::vec")]
    pub points: Vec<Complex64>,
    pub moduli: Vec<f64>,
    /// (max − min)/max of the moduli, 0 for the all-zero spectrum.
    pub modulus_spread: f64,
    pub circle_radius: Option<f64>,
    /// Point spectrum of the adjoint: conjugates of `points`.
    #[serde(with = "serde_complex::vec")]
    pub adjoint_points: Vec<Complex64>,
    pub diagonalizable: Diagonalizable,
    pub clusters: Vec<EigenCluster>,
    pub dense_range: bool,
    pub dense_range_report: DenseRangeReport,
    /// Set for truncated shifts, whose nilpotent spectrum says nothing about
    /// the infinite shift.
    pub truncation_artifact: bool,
    /// Largest |p(root)| when the characteristic-polynomial route was taken.
    pub root_residual: Option<f64>,
    /// Spread tolerance the report was computed with.
    pub tol: f64,
}

/// Pass/fail of a circle condition with the two extreme-modulus points as
/// witness on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleCheck {
    pub pass: bool,
    pub radius: f64,
    pub spread: f64,
    /// False for the all-zero spectrum: the check passes vacuously at R = 0,
    /// which is not an admissible circle.
    pub valid: bool,
    #[serde(with = "serde_complex::option")]
    pub witness_low: Option<Complex64>,
    #[serde(with = "serde_complex::option")]
    pub witness_high: Option<Complex64>,
}

/// σ(T) with structural shortcuts where the spectrum is known exactly.
pub fn spectrum(op: &OperatorSpec, tol: f64) -> Result<SpectrumReport> {
    let dim = op.validate()?;
    let mut root_residual = None;
    let mut truncation_artifact = false;
    let raw = structural_points(op, &mut root_residual, &mut truncation_artifact)?;
    let Multiplicities {
        verdict: diagonalizable,
        clusters,
        polished: points,
    } = diagonalizability(op, &raw)?;

    let moduli: Vec<f64> = points.iter().map(|z| z.norm()).collect();
    let modulus_spread = spread(&moduli);
    let mean = moduli.iter().sum::<f64>() / moduli.len() as f64;
    let circle_radius = (modulus_spread <= tol && mean > 0.0).then_some(mean);
    let adjoint_points = points.iter().map(Complex64::conj).collect();

    let dense_range_report = op.dense_range_check(DENSE_RANGE_TOL)?;

    Ok(SpectrumReport {
        dim,
        points,
        moduli,
        modulus_spread,
        circle_radius,
        adjoint_points,
        diagonalizable,
        clusters,
        dense_range: dense_range_report.dense_range,
        dense_range_report,
        truncation_artifact,
        root_residual,
        tol,
    })
}

fn structural_points(
    op: &OperatorSpec,
    root_residual: &mut Option<f64>,
    truncated: &mut bool,
) -> Result<Vec<Complex64>> {
    Ok(match op {
        OperatorSpec::Diagonal { entries } => entries.clone(),
        OperatorSpec::Scaled { c, inner } => structural_points(inner, root_residual, truncated)?
            .into_iter()
            .map(|z| c * z)
            .collect(),
        OperatorSpec::Power { p, inner } => structural_points(inner, root_residual, truncated)?
            .into_iter()
            .map(|z| z.powu(*p))
            .collect(),
        OperatorSpec::Polynomial { coeffs, inner } => {
            structural_points(inner, root_residual, truncated)?
                .into_iter()
                .map(|z| {
                    coeffs
                        .iter()
                        .rev()
                        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
                })
                .collect()
        }
        OperatorSpec::DirectSum { parts } => {
            let mut all = Vec::new();
            for p in parts {
                all.extend(structural_points(p, root_residual, truncated)?);
            }
            all
        }
        OperatorSpec::WeightedBackwardShift { dim, .. } => {
            *truncated = true;
            vec![Complex64::new(0.0, 0.0); *dim]
        }
        OperatorSpec::Dense { .. } => {
            let report = polynomial_roots(&characteristic_polynomial(op)?, ROOT_TOL)?;
            let r = root_residual.get_or_insert(0.0);
            *r = r.max(report.max_residual);
            polish::polish_eigenvalues(&op.materialize(), &report.roots)
        }
    })
}

fn spread(moduli: &[f64]) -> f64 {
    let max = moduli.iter().copied().fold(0.0, f64::max);
    let min = moduli.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        ((max - min) / max).clamp(0.0, 1.0)
    }
}

/// Index groups of points within CLUSTER_TOL·max(1, ρ) of each other
/// (single linkage).
fn cluster(points: &[Complex64]) -> Vec<Vec<usize>> {
    let scale = points.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = CLUSTER_TOL * scale;
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, g)) => g.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

struct Multiplicities {
    verdict: Diagonalizable,
    clusters: Vec<EigenCluster>,
    /// Input points with every member of a cluster replaced by the cluster
    /// value.
    polished: Vec<Complex64>,
}

/// Geometric vs algebraic multiplicity per eigenvalue cluster, geometric
/// multiplicity from the rank of T − λI.
///
/// A computed m-fold root is smeared over a disc of radius ~ε^{1/m}; the
/// cluster value is instead the nearby root of p^{(m−1)}, where it is simple.
fn diagonalizability(op: &OperatorSpec, points: &[Complex64]) -> Result<Multiplicities> {
    let m = op.materialize();
    let n = m.nrows();
    let norm = op.operator_norm_estimate()?.upper_bound;
    let mut charpoly = None;
    let mut verdict = Diagonalizable::Yes;
    let mut clusters = Vec::new();
    let mut polished = points.to_vec();
    let mut groups = cluster(points);
    if groups.len() > 1 && points.windows(2).any(|w| w[0] != w[1]) {
        let p = charpoly.get_or_insert_with(|| charpoly::faddeev_leverrier(&m));
        groups = merge_defective(points, groups, p);
    }
    for idx in groups {
        let group: Vec<Complex64> = idx.iter().map(|&i| points[i]).collect();
        let mut value = group[0];
        if group.iter().any(|z| *z != group[0]) {
            let mean = group.iter().sum::<Complex64>() / group.len() as f64;
            let p = charpoly.get_or_insert_with(|| charpoly::faddeev_leverrier(&m));
            value = roots::refine_multiple_root(p, mean, group.len());
            for &i in &idx {
                polished[i] = value;
            }
        }
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] -= value;
        }
        let geometric = if norm == 0.0 {
            n
        } else {
            let pivots = dense::elimination_pivots(&shifted, RANK_TOL * norm);
            if pivots.iter().any(|&p| p < RANK_GREY * norm) {
                verdict = Diagonalizable::Inconclusive;
            }
            n - pivots.len()
        };
        let algebraic = group.len();
        if geometric > algebraic {
            verdict = Diagonalizable::Inconclusive;
        } else if geometric < algebraic && verdict == Diagonalizable::Yes {
            verdict = Diagonalizable::No;
        }
        clusters.push(EigenCluster {
            value,
            algebraic,
            geometric,
        });
    }
    Ok(Multiplicities {
        verdict,
        clusters,
        polished,
    })
}

/// A defective m-fold eigenvalue is smeared over ~ε^{1/m}, wider than
/// CLUSTER_TOL. Neighbouring groups within WIDE_CLUSTER_TOL are merged when
/// the refined centre is an m-fold root of p up to MULTIPLE_ROOT_REL.
fn merge_defective(points: &[Complex64], mut groups: Vec<Vec<usize>>, p: &CharPoly) -> Vec<Vec<usize>> {
    let scale = points.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let centre = |g: &[usize]| g.iter().map(|&i| points[i]).sum::<Complex64>() / g.len() as f64;
    loop {
        let mut merged = false;
        'search: for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                if (centre(&groups[a]) - centre(&groups[b])).norm() > WIDE_CLUSTER_TOL * scale {
                    continue;
                }
                let union: Vec<usize> = groups[a].iter().chain(&groups[b]).copied().collect();
                let m = union.len();
                let c = roots::refine_multiple_root(p, centre(&union), m);
                if roots::is_numerical_multiple_root(p, c, m, MULTIPLE_ROOT_REL) {
                    let tail = groups.remove(b);
                    groups[a].extend(tail);
                    groups[a].sort_unstable();
                    merged = true;
                    break 'search;
                }
            }
        }
        if !merged {
            return groups;
        }
    }
}

fn circle_check(points: &[Complex64], tol: f64) -> CircleCheck {
    let moduli: Vec<f64> = points.iter().map(|z| z.norm()).collect();
    let s = spread(&moduli);
    let radius = moduli.iter().sum::<f64>() / moduli.len().max(1) as f64;
    let valid = radius > 0.0;
    let pass = s <= tol;
    let (mut witness_low, mut witness_high) = (None, None);
    if !pass {
        let lo = (0..points.len()).min_by(|&a, &b| moduli[a].total_cmp(&moduli[b]));
        let hi = (0..points.len()).max_by(|&a, &b| moduli[a].total_cmp(&moduli[b]));
        witness_low = lo.map(|i| points[i]);
        witness_high = hi.map(|i| points[i]);
    }
    CircleCheck {
        pass,
        radius,
        spread: s,
        valid,
        witness_low,
        witness_high,
    }
}

/// Every spectral point must lie on one circle |z| = R.
pub fn component_circle_check(report: &SpectrumReport, tol: f64) -> CircleCheck {
    circle_check(&report.points, tol)
}

/// σ_p(T*) must lie on one circle |z| = R.
pub fn adjoint_point_spectrum_check(report: &SpectrumReport, tol: f64) -> CircleCheck {
    circle_check(&report.adjoint_points, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn equal_modulus_diagonal() {
        let r = spectrum(&OperatorSpec::diagonal(vec![c(0.0, 2.0), c(2.0, 0.0)]), SPREAD_TOL).unwrap();
        assert_eq!(r.points, vec![c(0.0, 2.0), c(2.0, 0.0)]);
        assert_eq!(r.modulus_spread, 0.0);
        assert_eq!(r.circle_radius, Some(2.0));
        assert_eq!(r.adjoint_points, vec![c(0.0, -2.0), c(2.0, 0.0)]);
        assert_eq!(r.diagonalizable, Diagonalizable::Yes);
        assert!(r.dense_range);

        let check = component_circle_check(&r, SPREAD_TOL);
        assert!(check.pass && check.valid);
        assert_eq!(check.radius, 2.0);
        let adj = adjoint_point_spectrum_check(&r, SPREAD_TOL);
        assert!(adj.pass);
        assert_eq!(adj.radius, 2.0);
    }

    #[test]
    fn unequal_modulus_diagonal() {
        let r = spectrum(&OperatorSpec::diagonal(vec![c(1.0, 0.0), c(2.0, 0.0)]), SPREAD_TOL).unwrap();
        assert_eq!(r.modulus_spread, 0.5);
        assert_eq!(r.circle_radius, None);
        let check = component_circle_check(&r, SPREAD_TOL);
        assert!(!check.pass);
        assert_eq!(check.witness_low, Some(c(1.0, 0.0)));
        assert_eq!(check.witness_high, Some(c(2.0, 0.0)));
        assert!(!adjoint_point_spectrum_check(&r, SPREAD_TOL).pass);
    }

    #[test]
    fn power_of_diagonal() {
        let op = OperatorSpec::power(4, OperatorSpec::diagonal(vec![c(0.0, 1.0), c(-1.0, 0.0)]));
        let r = spectrum(&op, SPREAD_TOL).unwrap();
        assert_eq!(r.points, vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(r.circle_radius, Some(1.0));
        assert_eq!(r.diagonalizable, Diagonalizable::Yes);
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.clusters[0].geometric, 2);
    }

    #[test]
    fn truncated_shift_is_degenerate() {
        let r = spectrum(&OperatorSpec::shift(vec![2.0, 2.0], 3), SPREAD_TOL).unwrap();
        assert!(r.truncation_artifact);
        assert!(r.points.iter().all(|z| *z == c(0.0, 0.0)));
        assert_eq!(r.diagonalizable, Diagonalizable::No);
        assert!(!r.dense_range);
        let check = component_circle_check(&r, SPREAD_TOL);
        assert!(check.pass);
        assert!(!check.valid);
        assert_eq!(check.radius, 0.0);
    }

    #[test]
    fn jordan_block_is_not_diagonalizable() {
        let op = OperatorSpec::dense(vec![vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]]);
        let r = spectrum(&op, SPREAD_TOL).unwrap();
        assert_eq!(r.diagonalizable, Diagonalizable::No);
        assert_eq!(r.clusters.len(), 1);
        assert_eq!((r.clusters[0].algebraic, r.clusters[0].geometric), (2, 1));
        assert!(component_circle_check(&r, SPREAD_TOL).pass);
    }

    #[test]
    fn dense_identity_is_diagonalizable() {
        let r = spectrum(&OperatorSpec::dense_identity(3), SPREAD_TOL).unwrap();
        assert_eq!(r.diagonalizable, Diagonalizable::Yes);
        assert!(r.points.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-4));
    }

    #[test]
    fn unimodular_diagonal_has_many_adjoint_eigenvalues() {
        let thetas = [0.3, 1.1, 2.0, 4.4, 5.9];
        let op = OperatorSpec::diagonal(thetas.iter().map(|&t| Complex64::from_polar(1.0, t)).collect());
        let r = spectrum(&op, SPREAD_TOL).unwrap();
        let adj = adjoint_point_spectrum_check(&r, SPREAD_TOL);
        assert!(adj.pass);
        assert!((adj.radius - 1.0).abs() < 1e-12);
        assert_eq!(r.adjoint_points.len(), 5);
    }

    #[test]
    fn report_serializes_points_as_pairs() {
        let r = spectrum(&OperatorSpec::diagonal(vec![c(0.0, 2.0)]), SPREAD_TOL).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains(r#""points":[[0.0,2.0]]"#));
        assert!(s.contains(r#""diagonalizable":"yes""#));
    }
}

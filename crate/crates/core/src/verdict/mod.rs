//! Operator-level classification from spectral and dynamic evidence, and
//! the seeded property suite.

mod suite;

pub use suite::{
    commutant_residual_check, property_suite, CaseWitness, CommutantCheck, CommutantPair, PropertyTotal, SuiteCase,
    SuiteReport, SuiteSizes, PROPERTIES,
};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators;
use crate::operator::{DenseRangeReport, OperatorSpec, DENSE_RANGE_TOL};
use crate::recurrence::{
    detect_super_recurrence, verify_certificate, ClosestReturn, DetectionParams, ReturnCertificate, VerdictStatus,
};
use crate::serde_complex;
use crate::spectral::{self, CircleCheck, Diagonalizable, SpectrumReport, SPREAD_TOL};
use crate::vector::VectorState;

/// Diagonalizable with nonzero eigenvalues of one modulus: the eigenvectors
/// span ℂⁿ and each of them returns under a scalar multiple of T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientCheck {
    pub pass: bool,
    pub diagonalizable: Diagonalizable,
    pub modulus_spread: f64,
    pub min_modulus: f64,
    pub tol: f64,
}

pub fn sufficient_condition_check(op: &OperatorSpec, tol: f64) -> Result<SufficientCheck> {
    let report = spectral::spectrum(op, tol)?;
    Ok(sufficient_from_report(&report, tol))
}

fn sufficient_from_report(report: &SpectrumReport, tol: f64) -> SufficientCheck {
    let min_modulus = report.moduli.iter().copied().fold(f64::INFINITY, f64::min);
    SufficientCheck {
        pass: report.diagonalizable == Diagonalizable::Yes && report.modulus_spread <= tol && min_modulus > 0.0,
        diagonalizable: report.diagonalizable,
        modulus_spread: report.modulus_spread,
        min_modulus,
        tol,
    }
}

/// Probe count and threshold for the dynamic part of [`classify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub params: DetectionParams,
    /// Random unit probes, in addition to the standard basis.
    pub probes: usize,
    pub seed: u64,
    /// Fraction of certified probes needed for a dynamic verdict.
    pub threshold: f64,
    pub spread_tol: f64,
}

pub const DEFAULT_PROBES: usize = 16;
pub const DEFAULT_THRESHOLD: f64 = 0.9;

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            params: DetectionParams {
                epsilon: 1e-6,
                n_max: 10_000,
                n_min: 1,
            },
            probes: DEFAULT_PROBES,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            spread_tol: SPREAD_TOL,
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(crate::error::invalid("threshold must lie in [0, 1]"));
        }
        if !(self.spread_tol >= 0.0 && self.spread_tol.is_finite()) {
            return Err(crate::error::invalid("spread tolerance must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    SuperRecurrent,
    NotSuperRecurrent,
    Inconclusive,
}

/// A re-checkable reason for rejecting an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RefutationWitness {
    /// Two spectral points of different modulus.
    Spectral {
        #[serde(with = "serde_complex::scalar")]
        low: Complex64,
        #[serde(with = "serde_complex::scalar")]
        high: Complex64,
        spread: f64,
        tol: f64,
    },
    /// |det T| is negligible against the row norms.
    DenseRange { normalized_determinant: f64, tol: f64 },
}

impl RefutationWitness {
    /// Recomputes the failing check from scratch; true iff it fails again.
    pub fn replay(&self, op: &OperatorSpec) -> Result<bool> {
        match self {
            Self::Spectral { tol, .. } => {
                let report = spectral::spectrum(op, *tol)?;
                Ok(!spectral::component_circle_check(&report, *tol).pass)
            }
            Self::DenseRange { tol, .. } => Ok(!op.dense_range_check(*tol)?.dense_range),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub label: String,
    pub status: VerdictStatus,
    pub certificate: Option<ReturnCertificate>,
    pub closest: Option<ClosestReturn>,
}

/// Aggregate of the vector-level verdicts over all probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicSummary {
    pub status: VerdictStatus,
    pub probes: usize,
    pub certified: usize,
    pub fraction: f64,
    pub threshold: f64,
    pub results: Vec<ProbeResult>,
}

impl DynamicSummary {
    pub fn meets_threshold(&self) -> bool {
        self.probes > 0 && self.fraction >= self.threshold
    }

    /// Certified fraction among the random probes only.
    pub fn random_probes_certified(&self) -> (usize, usize) {
        let random: Vec<&ProbeResult> = self.results.iter().filter(|r| r.label.starts_with("random")).collect();
        let ok = random.iter().filter(|r| r.status == VerdictStatus::Certified).count();
        (ok, random.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub spectrum: Option<SpectrumReport>,
    pub circle: Option<CircleCheck>,
    pub adjoint: Option<CircleCheck>,
    pub sufficient: Option<SufficientCheck>,
    pub dense_range: DenseRangeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SRecClassification {
    pub operator_id: String,
    pub necessary_pass: bool,
    pub sufficient_pass: bool,
    pub dense_range: bool,
    pub dynamic: DynamicSummary,
    #[serde(rename = "final")]
    pub final_status: FinalStatus,
    pub witness: Option<RefutationWitness>,
    pub evidence: Evidence,
    pub notes: Vec<String>,
}

/// Standard basis followed by `count` seeded random unit vectors.
pub fn probe_vectors(dim: usize, count: usize, seed: u64) -> Vec<(String, VectorState)> {
    let mut out: Vec<(String, VectorState)> = (0..dim).map(|i| (format!("e{i}"), VectorState::basis(dim, i))).collect();
    let mut rng = generators::seeded(seed, 0);
    out.extend((0..count).map(|i| (format!("random{i}"), generators::random_unit_vector(&mut rng, dim))));
    out
}

/// Runs every probe through [`detect_super_recurrence`]; results keep probe
/// order regardless of scheduling.
pub fn dynamic_probing(op: &OperatorSpec, cfg: &ClassifyConfig) -> Result<DynamicSummary> {
    let dim = op.validate()?;
    let probes = probe_vectors(dim, cfg.probes, cfg.seed);
    let results: Vec<ProbeResult> = probes
        .par_iter()
        .map(|(label, x)| {
            let v = detect_super_recurrence(op, x, &cfg.params)?;
            Ok(ProbeResult {
                label: label.clone(),
                status: v.status,
                certificate: v.best().copied(),
                closest: v.closest,
            })
        })
        .collect::<Result<_>>()?;
    let certified = results.iter().filter(|r| r.status == VerdictStatus::Certified).count();
    let fraction = certified as f64 / results.len().max(1) as f64;
    let status = if certified > 0 {
        VerdictStatus::Certified
    } else {
        VerdictStatus::Inconclusive
    };
    Ok(DynamicSummary {
        status,
        probes: results.len(),
        certified,
        fraction,
        threshold: cfg.threshold,
        results,
    })
}

/// Operator-level verdict.
///
/// Rejection needs a replayable witness: a dense-range failure or two
/// spectral points of different modulus. Acceptance needs the sufficient
/// condition or at least `threshold` of the probes certified, on top of the
/// necessary checks. Anything else is inconclusive.
pub fn classify(op: &OperatorSpec, operator_id: &str, cfg: &ClassifyConfig) -> Result<SRecClassification> {
    cfg.validate()?;
    op.validate()?;
    let mut notes = Vec::new();
    let dense_range = op.dense_range_check(DENSE_RANGE_TOL)?;
    let dynamic = dynamic_probing(op, cfg)?;

    let spectrum = match spectral::spectrum(op, cfg.spread_tol) {
        Ok(r) => Some(r),
        Err(Error::NonConvergence { max_residual, .. }) => {
            notes.push(format!("spectrum did not converge (max residual {max_residual:e})"));
            None
        }
        Err(e) => return Err(e),
    };
    let circle = spectrum
        .as_ref()
        .map(|r| spectral::component_circle_check(r, cfg.spread_tol));
    let adjoint = spectrum
        .as_ref()
        .map(|r| spectral::adjoint_point_spectrum_check(r, cfg.spread_tol));
    let sufficient = spectrum.as_ref().map(|r| sufficient_from_report(r, cfg.spread_tol));

    let necessary_pass = matches!((&circle, &adjoint), (Some(c), Some(a)) if c.pass && a.pass && c.valid);
    let sufficient_pass = sufficient.as_ref().is_some_and(|s| s.pass);

    let mut witness = None;
    let final_status = if !dense_range.dense_range {
        witness = Some(RefutationWitness::DenseRange {
            normalized_determinant: dense_range.normalized_determinant,
            tol: DENSE_RANGE_TOL,
        });
        if dynamic.certified > 0 {
            notes.push(format!(
                "{} of {} probes certified although the range is not dense",
                dynamic.certified, dynamic.probes
            ));
        }
        FinalStatus::NotSuperRecurrent
    } else if let Some(c) = circle.as_ref().filter(|c| !c.pass) {
        witness = Some(RefutationWitness::Spectral {
            low: c.witness_low.expect("failed check has witnesses"),
            high: c.witness_high.expect("failed check has witnesses"),
            spread: c.spread,
            tol: cfg.spread_tol,
        });
        FinalStatus::NotSuperRecurrent
    } else if necessary_pass && (sufficient_pass || dynamic.meets_threshold()) {
        FinalStatus::SuperRecurrent
    } else {
        if spectrum.is_some() && !sufficient_pass {
            notes.push(format!(
                "sufficient condition fails and only {} of {} probes certified",
                dynamic.certified, dynamic.probes
            ));
        }
        FinalStatus::Inconclusive
    };
    if spectrum.as_ref().is_some_and(|r| r.truncation_artifact) {
        notes.push("truncated shift: finite dynamics are a truncation artifact".into());
    }

    Ok(SRecClassification {
        operator_id: operator_id.to_string(),
        necessary_pass,
        sufficient_pass,
        dense_range: dense_range.dense_range,
        dynamic,
        final_status,
        witness,
        evidence: Evidence {
            spectrum,
            circle,
            adjoint,
            sufficient,
            dense_range,
        },
        notes,
    })
}

/// Replays every certified probe of a classification against `op`;
/// returns the largest replayed residual.
pub fn replay_probes(op: &OperatorSpec, c: &SRecClassification, cfg: &ClassifyConfig) -> Result<f64> {
    let dim = op.validate()?;
    let probes = probe_vectors(dim, cfg.probes, cfg.seed);
    let mut worst: f64 = 0.0;
    for ((_, x), r) in probes.iter().zip(&c.dynamic.results) {
        if let Some(cert) = &r.certificate {
            worst = worst.max(verify_certificate(op, x, cert)?);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sufficient_examples() {
        let ok = sufficient_condition_check(&OperatorSpec::diagonal(vec![c(0.0, 2.0), c(2.0, 0.0)]), SPREAD_TOL);
        assert!(ok.unwrap().pass);
        let j = generators::jordan_block(2, c(1.0, 0.0));
        let r = sufficient_condition_check(&j, SPREAD_TOL).unwrap();
        assert!(!r.pass);
        assert_eq!(r.diagonalizable, Diagonalizable::No);
        let r = sufficient_condition_check(&OperatorSpec::diagonal(vec![c(1.0, 0.0), c(2.0, 0.0)]), SPREAD_TOL).unwrap();
        assert!(!r.pass);
        assert!((r.modulus_spread - 0.5).abs() < 1e-15);
    }

    #[test]
    fn diag_2i_2_is_super_recurrent() {
        let op = OperatorSpec::diagonal(vec![c(0.0, 2.0), c(2.0, 0.0)]);
        let cfg = ClassifyConfig::default();
        let r = classify(&op, "diag(2i,2)", &cfg).unwrap();
        assert_eq!(r.final_status, FinalStatus::SuperRecurrent);
        assert!(r.necessary_pass && r.sufficient_pass && r.dense_range);
        assert_eq!(r.dynamic.probes, 2 + DEFAULT_PROBES);
        assert_eq!(r.dynamic.certified, r.dynamic.probes);
        assert!(r.witness.is_none());
        assert!(replay_probes(&op, &r, &cfg).unwrap() <= 1e-6);
    }

    #[test]
    fn degenerate_diagonal_rejected_on_range_with_probe_at_e1() {
        let op = OperatorSpec::diagonal(vec![c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let r = classify(&op, "example", &ClassifyConfig::default()).unwrap();
        assert_eq!(r.final_status, FinalStatus::NotSuperRecurrent);
        assert!(matches!(r.witness, Some(RefutationWitness::DenseRange { .. })));
        assert!(r.witness.as_ref().unwrap().replay(&op).unwrap());
        assert_eq!(r.dynamic.results[0].status, VerdictStatus::Certified);
        assert!(!r.notes.is_empty());
    }

    #[test]
    fn unequal_moduli_rejected_with_spectral_witness() {
        let op = OperatorSpec::diagonal(vec![c(1.0, 0.0), c(2.0, 0.0)]);
        let r = classify(&op, "control", &ClassifyConfig::default()).unwrap();
        assert_eq!(r.final_status, FinalStatus::NotSuperRecurrent);
        match r.witness.as_ref().unwrap() {
            RefutationWitness::Spectral { low, high, .. } => {
                assert_eq!(*low, c(1.0, 0.0));
                assert_eq!(*high, c(2.0, 0.0));
            }
            w => panic!("unexpected witness {w:?}"),
        }
        assert!(r.witness.unwrap().replay(&op).unwrap());
    }

    #[test]
    fn jordan_block_is_inconclusive() {
        let j = generators::jordan_block(3, c(1.0, 0.0));
        let r = classify(&j, "jordan", &ClassifyConfig::default()).unwrap();
        assert!(!r.sufficient_pass);
        assert_eq!(r.final_status, FinalStatus::Inconclusive);
        assert!(r.witness.is_none());
    }

    #[test]
    fn scaling_keeps_final_status() {
        let op = OperatorSpec::diagonal(vec![c(0.0, 2.0), c(2.0, 0.0)]);
        let cfg = ClassifyConfig::default();
        let a = classify(&op, "t", &cfg).unwrap();
        let b = classify(&OperatorSpec::scaled(c(-0.3, 5.0), op), "ct", &cfg).unwrap();
        assert_eq!(a.final_status, b.final_status);
    }

    #[test]
    fn probes_are_seeded() {
        let a = probe_vectors(3, 4, 9);
        let b = probe_vectors(3, 4, 9);
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);
        assert_eq!(a[0].1, VectorState::basis(3, 0));
        assert_ne!(probe_vectors(3, 4, 10)[3], a[3]);
    }

    #[test]
    fn classification_round_trips_through_json() {
        let op = OperatorSpec::diagonal(vec![c(1.0, 0.0), c(2.0, 0.0)]);
        let r = classify(&op, "control", &ClassifyConfig::default()).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"final\":\"not_super_recurrent\""));
        let back: SRecClassification = serde_json::from_str(&s).unwrap();
        assert_eq!(back.final_status, r.final_status);
    }
}

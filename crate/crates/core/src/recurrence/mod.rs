//! Recurrence and super-recurrence of individual vectors.
//!
//! Detection scans the renormalized orbit. A return at n with scalar λ is
//! recorded as a [`ReturnCertificate`], and every certificate is replayed by
//! [`verify_certificate`] before it is emitted, so a stored residual is the
//! replayed one. Dynamics alone never refute: a scan that finds nothing is
//! inconclusive.

mod hyperplane;
mod perturbed;
mod refine;

pub use hyperplane::{hyperplane_restriction, HyperplaneDecomposition};
pub use perturbed::{perturbed_characterization_check, PerturbedCheck};
pub use refine::{refine_srec_vector, NestedBallTrace};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operator::OperatorSpec;
use crate::orbit::{unit_gap, OrbitWalker};
use crate::serde_complex;
use crate::vector::{self, VectorState};

/// Certificates collected per scan before it stops.
pub const MAX_CERTIFICATES: usize = 10;
/// Longest orbit a certificate may be replayed along.
pub const MAX_REPLAY: u64 = 100_000_000;
/// Floor of the default n_max.
pub const MIN_DEFAULT_BUDGET: u64 = 10_000;

// Candidates whose replay misses ε are discarded; after this many misses the
// scan stops replaying, to keep a borderline orbit from costing O(n²).
const MAX_REPLAY_MISSES: usize = 2 * MAX_CERTIFICATES;
// Replay renormalizes by this exact power of two.
const REPLAY_EXPONENT: i32 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Relative return tolerance: a return needs ‖λTⁿx − x‖ ≤ ε‖x‖.
    pub epsilon: f64,
    pub n_max: u64,
    #[serde(default = "one")]
    pub n_min: u64,
}

fn one() -> u64 {
    1
}

impl DetectionParams {
    pub fn new(epsilon: f64, n_max: u64) -> Result<Self> {
        let p = Self {
            epsilon,
            n_max,
            n_min: 1,
        };
        p.validate()?;
        Ok(p)
    }

    /// n_max = max(10⁴, ⌈1/ε⌉ᵏ) for k distinct eigenvalue arguments, the
    /// pigeonhole bound for the equal-modulus diagonalizable case.
    pub fn with_default_budget(epsilon: f64, k: usize) -> Result<Self> {
        let side = (1.0 / epsilon).ceil();
        let side = if side.is_finite() && side < u64::MAX as f64 { side as u64 } else { u64::MAX };
        let budget = (0..k).fold(1u64, |acc, _| acc.saturating_mul(side));
        Self::new(epsilon, budget.max(MIN_DEFAULT_BUDGET))
    }

    pub fn with_n_min(mut self, n_min: u64) -> Result<Self> {
        self.n_min = n_min;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if self.n_min == 0 {
            return Err(invalid("n_min must be at least 1"));
        }
        if self.n_min > self.n_max {
            return Err(invalid(format!(
                "n_min {} exceeds n_max {}",
                self.n_min, self.n_max
            )));
        }
        Ok(())
    }
}

/// λTⁿx ≈ x with λ = lambda·2^scale_log2; the exponent keeps λ representable
/// when |λ| = R⁻ⁿ leaves the double range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnCertificate {
    pub n: u64,
    #[serde(with = "serde_complex::scalar")]
    pub lambda: Complex64,
    /// ‖λTⁿx − x‖/‖x‖ as replayed.
    pub residual: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub scale_log2: i32,
}

fn is_zero(v: &i32) -> bool {
    *v == 0
}

impl ReturnCertificate {
    /// Certificate with an ordinary double λ and no residual yet.
    pub fn new(n: u64, lambda: Complex64) -> Self {
        Self {
            n,
            lambda,
            residual: f64::NAN,
            scale_log2: 0,
        }
    }

    /// λ as a double; under- or overflows when `scale_log2` is large.
    pub fn lambda_value(&self) -> Complex64 {
        scale_pow2(self.lambda, self.scale_log2)
    }

    /// The certificate for cT: (cT)ⁿ = cⁿTⁿ, so λ becomes λ/cⁿ.
    pub fn rescaled(&self, c: Complex64) -> Self {
        let (m, e) = pow_split(c.inv(), self.n);
        let mut out = *self;
        out.lambda = self.lambda * m;
        out.scale_log2 = self.scale_log2.saturating_add(e);
        out
    }
}

/// z·2^e without intermediate overflow for |e| beyond the exponent range.
fn scale_pow2(mut z: Complex64, mut e: i32) -> Complex64 {
    while e != 0 {
        let step = e.clamp(-1000, 1000);
        z *= 2f64.powi(step);
        e -= step;
    }
    z
}

/// zⁿ as mantissa·2^exponent.
fn pow_split(z: Complex64, n: u64) -> (Complex64, i32) {
    let (mut m, mut e) = (Complex64::new(1.0, 0.0), 0i32);
    let (mut base, mut be) = (z, 0i32);
    let mut k = n;
    let renorm = |v: &mut Complex64, x: &mut i32| {
        let a = v.norm();
        if a > 0.0 && a.is_finite() {
            let s = a.log2().round() as i32;
            *v = scale_pow2(*v, -s);
            *x = x.saturating_add(s);
        }
    };
    renorm(&mut base, &mut be);
    while k > 0 {
        if k & 1 == 1 {
            m *= base;
            e = e.saturating_add(be);
            renorm(&mut m, &mut e);
        }
        base = base * base;
        be = be.saturating_mul(2);
        renorm(&mut base, &mut be);
        k >>= 1;
    }
    (m, e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Certified,
    RefutedBySpectrum,
    Inconclusive,
}

/// Smallest residual seen during a scan, kept for inconclusive reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosestReturn {
    pub n: u64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceVerdict {
    pub status: VerdictStatus,
    pub certificates: Vec<ReturnCertificate>,
    pub params: DetectionParams,
    pub notes: String,
    pub closest: Option<ClosestReturn>,
    /// The operator contains a truncated shift, whose nilpotent dynamics
    /// say nothing about the infinite shift.
    #[serde(default)]
    pub truncation_artifact: bool,
    pub reached_kernel: bool,
}

impl RecurrenceVerdict {
    pub fn is_certified(&self) -> bool {
        self.status == VerdictStatus::Certified
    }

    pub fn best(&self) -> Option<&ReturnCertificate> {
        self.certificates
            .iter()
            .min_by(|a, b| a.residual.total_cmp(&b.residual))
    }
}

pub(crate) fn has_shift(op: &OperatorSpec) -> bool {
    match op {
        OperatorSpec::WeightedBackwardShift { .. } => true,
        OperatorSpec::Dense { .. } | OperatorSpec::Diagonal { .. } => false,
        OperatorSpec::DirectSum { parts } => parts.iter().any(has_shift),
        OperatorSpec::Scaled { inner, .. }
        | OperatorSpec::Power { inner, .. }
        | OperatorSpec::Polynomial { inner, .. } => has_shift(inner),
    }
}

fn check_inputs(op: &OperatorSpec, x: &VectorState) -> Result<()> {
    let dim = op.validate()?;
    if dim != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x.dim(),
        });
    }
    if x.is_zero() {
        return Err(invalid("base vector must be nonzero"));
    }
    Ok(())
}

/// ‖λTⁿx − x‖/‖x‖ by direct application of T, n times, without the log
/// ledger. Iterates are rescaled by exact powers of two whenever they leave
/// [2⁻⁵⁰⁰, 2⁵⁰⁰], and the exponent is folded into λ exactly.
pub fn verify_certificate(op: &OperatorSpec, x: &VectorState, cert: &ReturnCertificate) -> Result<f64> {
    check_inputs(op, x)?;
    if cert.n == 0 || cert.n > MAX_REPLAY {
        return Err(invalid(format!(
            "certificate n = {} outside [1, {MAX_REPLAY}]",
            cert.n
        )));
    }
    if !vector::is_finite(cert.lambda) {
        return Err(invalid("certificate scalar must be finite"));
    }
    let hi = 2f64.powi(REPLAY_EXPONENT);
    let lo = 2f64.powi(-REPLAY_EXPONENT);
    let mut y = x.entries().to_vec();
    let mut e: i32 = 0;
    for _ in 0..cert.n {
        y = op.apply_raw(&y);
        let nm = vector::norm(&y);
        if nm == 0.0 {
            // λ·0 − x = −x.
            return Ok(1.0);
        }
        if nm > hi {
            y.iter_mut().for_each(|z| *z *= lo);
            e += REPLAY_EXPONENT;
        } else if nm < lo {
            y.iter_mut().for_each(|z| *z *= hi);
            e -= REPLAY_EXPONENT;
        }
    }
    // Bring λ to unit size first so λ·y cannot overflow before the exponent
    // is applied.
    let s = if cert.lambda.norm() > 0.0 { cert.lambda.norm().log2().round() as i32 } else { 0 };
    let lambda = scale_pow2(cert.lambda, -s);
    let total = e.saturating_add(cert.scale_log2).saturating_add(s);
    let diff: Vec<Complex64> = y
        .iter()
        .zip(x.entries())
        .map(|(v, xi)| scale_pow2(lambda * v, total) - xi)
        .collect();
    Ok(vector::norm(&diff) / x.norm())
}

struct Scan<'a> {
    op: &'a OperatorSpec,
    x: &'a VectorState,
    params: DetectionParams,
    certificates: Vec<ReturnCertificate>,
    misses: usize,
    closest: Option<ClosestReturn>,
}

impl<'a> Scan<'a> {
    fn note_closest(&mut self, n: u64, residual: f64) {
        if self.closest.is_none_or(|c| residual < c.residual) {
            self.closest = Some(ClosestReturn { n, residual });
        }
    }

    /// Replays a candidate and keeps it when the replay meets ε.
    fn offer(&mut self, mut cert: ReturnCertificate) -> Result<()> {
        if self.misses >= MAX_REPLAY_MISSES {
            return Ok(());
        }
        let r = verify_certificate(self.op, self.x, &cert)?;
        if r <= self.params.epsilon {
            cert.residual = r;
            self.certificates.push(cert);
        } else {
            self.misses += 1;
        }
        Ok(())
    }

    fn run<F>(mut self, mut candidate: F) -> Result<RecurrenceVerdict>
    where
        F: FnMut(&OrbitWalker, f64) -> Option<(f64, ReturnCertificate)>,
    {
        self.params.validate()?;
        check_inputs(self.op, self.x)?;
        let mut walker = OrbitWalker::new(self.op, self.x)?;
        let log_x = self.x.norm().ln();
        while walker.n() < self.params.n_max && self.certificates.len() < MAX_CERTIFICATES {
            if !walker.advance() {
                break;
            }
            if walker.n() < self.params.n_min {
                continue;
            }
            if let Some((residual, cert)) = candidate(&walker, log_x) {
                self.note_closest(walker.n(), residual);
                if residual <= self.params.epsilon {
                    self.offer(cert)?;
                }
            }
        }
        let reached_kernel = walker.reached_kernel();
        let truncation_artifact = has_shift(self.op);
        let status = if self.certificates.is_empty() {
            VerdictStatus::Inconclusive
        } else {
            VerdictStatus::Certified
        };
        let mut notes = Vec::new();
        match status {
            VerdictStatus::Certified => notes.push(format!(
                "{} certificate(s), first at n = {}",
                self.certificates.len(),
                self.certificates[0].n
            )),
            _ if reached_kernel => notes.push(format!(
                "reached kernel at n = {}; not super-recurrent along this orbit",
                walker.n() + 1
            )),
            _ => notes.push(format!("no return within n ≤ {}", self.params.n_max)),
        }
        if self.misses > 0 {
            notes.push(format!("{} candidate(s) failed replay", self.misses));
        }
        if truncation_artifact {
            notes.push("truncation artifact: operator contains a truncated shift".into());
        }
        Ok(RecurrenceVerdict {
            status,
            certificates: self.certificates,
            params: self.params,
            notes: notes.join("; "),
            closest: self.closest,
            truncation_artifact,
            reached_kernel,
        })
    }
}

/// Scans n ∈ [n_min, n_max] for ‖Tⁿx − x‖ ≤ ε‖x‖ (λ = 1).
pub fn detect_recurrence(
    op: &OperatorSpec,
    x: &VectorState,
    params: &DetectionParams,
) -> Result<RecurrenceVerdict> {
    let x_hat = x.normalized();
    let scan = Scan {
        op,
        x,
        params: *params,
        certificates: Vec::new(),
        misses: 0,
        closest: None,
    };
    scan.run(|w, log_x| {
        // ‖Tⁿx − x‖/‖x‖ = ‖e^{L − log‖x‖}·dir − x̂‖.
        let rel = w.log_magnitude() - log_x;
        if rel > 1.0 {
            return Some((rel.exp() - 1.0, ReturnCertificate::new(w.n(), Complex64::new(1.0, 0.0))));
        }
        let s = rel.exp();
        let diff: Vec<Complex64> = w
            .direction()
            .iter()
            .zip(x_hat.entries())
            .map(|(d, xi)| d * s - xi)
            .collect();
        Some((
            vector::norm(&diff),
            ReturnCertificate::new(w.n(), Complex64::new(1.0, 0.0)),
        ))
    })
}

/// Scans n ∈ [n_min, n_max] for a scalar return: the optimal residual
/// minₗ‖λTⁿx − x‖/‖x‖ is the projective gap between x and Tⁿx, attained at
/// λ = ⟨x, Tⁿx⟩/‖Tⁿx‖².
pub fn detect_super_recurrence(
    op: &OperatorSpec,
    x: &VectorState,
    params: &DetectionParams,
) -> Result<RecurrenceVerdict> {
    let x_hat = x.normalized();
    let scan = Scan {
        op,
        x,
        params: *params,
        certificates: Vec::new(),
        misses: 0,
        closest: None,
    };
    scan.run(|w, log_x| {
        let gap = unit_gap(x_hat.entries(), w.direction());
        let cert = optimal_certificate(w.n(), x_hat.entries(), w.direction(), log_x - w.log_magnitude());
        Some((gap, cert))
    })
}

/// λ = ⟨x̂, dir⟩·e^{log_scale}; log_scale = log‖x‖ − log‖Tⁿx‖.
fn optimal_certificate(n: u64, x_hat: &[Complex64], dir: &[Complex64], log_scale: f64) -> ReturnCertificate {
    let c = vector::inner(x_hat, dir);
    let mut cert = ReturnCertificate::new(n, c);
    if log_scale.abs() < 600.0 {
        cert.lambda = c * log_scale.exp();
    } else {
        let e = (log_scale / std::f64::consts::LN_2).round();
        cert.lambda = c * (log_scale - e * std::f64::consts::LN_2).exp();
        cert.scale_log2 = e.clamp(i32::MIN as f64, i32::MAX as f64) as i32;
    }
    cert
}

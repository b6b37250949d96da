use std::fmt::Write as _;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{classify, ClassifyConfig, FinalStatus, RefutationWitness};
use crate::dense::{self, Mat};
use crate::error::{invalid, Result};
use crate::generators::{self, Arguments, Planted, MAX_CONDITION, RADII};
use crate::operator::OperatorSpec;
use crate::orbit::best_scalar;
use crate::recurrence::hyperplane_restriction;
use crate::recurrence::{detect_recurrence, detect_super_recurrence, verify_certificate, DetectionParams, ReturnCertificate};
use crate::vector::VectorState;

pub const PROPERTIES: [&str; 8] = [
    "commutant_invariance",
    "polynomial_images",
    "similarity_transfer",
    "direct_sum_factors",
    "power_equivalence",
    "spectral_necessity",
    "hyperplane_recurrence",
    "dense_srec",
];

const VECTOR_EPS: f64 = 1e-6;
const VECTOR_N_MAX: u64 = 10_000;
const POWER_EPS: f64 = 1e-5;
const TRANSFER_TOL: f64 = 1e-10;
const COMMUTANT_SLACK: f64 = 1e-10;
const HYPERPLANE_EPS: f64 = 1e-4;
const HYPERPLANE_N_MAX: u64 = 100_000;
const INVARIANCE_TOL: f64 = 1e-8;
const POWERS: [u32; 3] = [2, 3, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSizes {
    /// Generated dimensions lie in [2, max_dim].
    pub max_dim: usize,
    /// Cases per property.
    pub cases: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self { max_dim: 6, cases: 50 }
    }
}

/// What is needed to re-run a failing case by hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseWitness {
    pub operator: OperatorSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auxiliary: Option<OperatorSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<VectorState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<ReturnCertificate>,
    /// Residual that broke the property, when one did.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl CaseWitness {
    fn operator(op: &OperatorSpec) -> Self {
        Self {
            operator: op.clone(),
            auxiliary: None,
            vector: None,
            certificate: None,
            residual: None,
            bound: None,
        }
    }

    fn with_vector(mut self, x: &VectorState) -> Self {
        self.vector = Some(x.clone());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCase {
    pub index: usize,
    pub generator: String,
    pub property: String,
    pub pass: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<CaseWitness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyTotal {
    pub property: String,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub sizes: SuiteSizes,
    pub cases: Vec<SuiteCase>,
    pub totals: Vec<PropertyTotal>,
    pub passed: usize,
    pub failed: usize,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }

    /// One JSON object per case, then one for the totals.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for c in &self.cases {
            out.push_str(&serde_json::to_string(c).map_err(|e| invalid(e.to_string()))?);
            out.push('\n');
        }
        let summary = serde_json::json!({
            "seed": self.seed,
            "sizes": self.sizes,
            "totals": self.totals,
            "passed": self.passed,
            "failed": self.failed,
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        Ok(out)
    }

    /// `index,generator,property,pass,witness_ref`; the reference points at
    /// the case line of the JSON report.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,generator,property,pass,witness_ref\n");
        for c in &self.cases {
            let wref = if c.witness.is_some() {
                format!("case-{}", c.index)
            } else {
                String::new()
            };
            let _ = writeln!(out, "{},{},{},{},{}", c.index, c.generator, c.property, c.pass, wref);
        }
        out
    }
}

struct Outcome {
    generator: String,
    pass: bool,
    detail: String,
    witness: Option<CaseWitness>,
}

impl Outcome {
    fn new(generator: String, pass: bool, detail: String, witness: impl FnOnce() -> CaseWitness) -> Self {
        Self {
            witness: (!pass).then(witness),
            generator,
            pass,
            detail,
        }
    }
}

/// Runs every property on `sizes.cases` seeded cases. Each case draws from
/// its own stream, so the report does not depend on scheduling.
pub fn property_suite(seed: u64, sizes: SuiteSizes) -> Result<SuiteReport> {
    if sizes.max_dim < 2 {
        return Err(invalid("suite needs max_dim ≥ 2"));
    }
    if sizes.max_dim > 16 {
        return Err(invalid("suite dimensions are capped at 16"));
    }
    let mut tasks: Vec<(usize, usize)> = Vec::new();
    for p in 0..PROPERTIES.len() {
        let extra = usize::from(PROPERTIES[p] == "direct_sum_factors");
        tasks.extend((0..sizes.cases + extra).map(|i| (p, i)));
    }
    let outcomes: Vec<Outcome> = tasks
        .par_iter()
        .map(|&(p, i)| {
            let mut rng = generators::seeded(seed, ((p as u64) << 32) | i as u64);
            let dim = rng.gen_range(2..=sizes.max_dim);
            run_case(p, i, sizes.cases, &mut rng, dim)
        })
        .collect::<Result<_>>()?;

    let cases: Vec<SuiteCase> = tasks
        .iter()
        .zip(outcomes)
        .enumerate()
        .map(|(index, (&(p, _), o))| SuiteCase {
            index,
            generator: o.generator,
            property: PROPERTIES[p].to_string(),
            pass: o.pass,
            detail: o.detail,
            witness: o.witness,
        })
        .collect();
    let totals = PROPERTIES
        .iter()
        .map(|name| {
            let of: Vec<&SuiteCase> = cases.iter().filter(|c| c.property == *name).collect();
            let passed = of.iter().filter(|c| c.pass).count();
            PropertyTotal {
                property: name.to_string(),
                passed,
                failed: of.len() - passed,
            }
        })
        .collect();
    let passed = cases.iter().filter(|c| c.pass).count();
    Ok(SuiteReport {
        seed,
        sizes,
        failed: cases.len() - passed,
        passed,
        cases,
        totals,
    })
}

fn run_case(property: usize, i: usize, cases: usize, rng: &mut ChaCha8Rng, dim: usize) -> Result<Outcome> {
    match PROPERTIES[property] {
        "commutant_invariance" => commutant_case(rng, dim),
        "polynomial_images" => polynomial_case(rng, dim),
        "similarity_transfer" => similarity_case(rng, dim, i),
        "direct_sum_factors" if i == cases => direct_sum_control(),
        "direct_sum_factors" => direct_sum_case(rng, dim),
        "power_equivalence" => power_case(rng, dim, POWERS[i % POWERS.len()]),
        "spectral_necessity" => necessity_case(rng, dim, i),
        "hyperplane_recurrence" => hyperplane_case(rng, dim),
        "dense_srec" => dense_srec_case(rng, dim),
        _ => unreachable!("property list is fixed"),
    }
}

fn vector_params() -> DetectionParams {
    DetectionParams {
        epsilon: VECTOR_EPS,
        n_max: VECTOR_N_MAX,
        n_min: 1,
    }
}

/// V·D·V⁻¹ with D equal-modulus with rational arguments, so every vector
/// returns exactly at some n ≤ 120.
fn certified_operator(rng: &mut ChaCha8Rng, dim: usize, radius: Option<f64>) -> Planted {
    let r = radius.unwrap_or_else(|| *RADII.choose(rng).expect("nonempty"));
    let ev = generators::equal_modulus_eigenvalues(rng, dim, r, Arguments::Rational);
    if dim == 1 {
        return generators::diagonal(format!("diag_equal_rational_d1_r{r}"), ev);
    }
    generators::conjugated(rng, format!("conj_equal_rational_d{dim}_r{r}"), ev, MAX_CONDITION)
}

fn unequal_operator(rng: &mut ChaCha8Rng, dim: usize) -> Planted {
    let ev = generators::unequal_modulus_eigenvalues(rng, dim, spectral_violation());
    generators::conjugated(rng, format!("conj_unequal_d{dim}"), ev, MAX_CONDITION)
}

fn spectral_violation() -> f64 {
    crate::spectral::CLEAR_VIOLATION_SPREAD
}

/// J₂(λ) ⊕ diag(equal moduli), |λ| = R; defective, so not diagonalizable.
fn jordan_matrix(rng: &mut ChaCha8Rng, dim: usize) -> (Mat, String) {
    let r = *RADII.choose(rng).expect("nonempty");
    let lambda = generators::polar(r, generators::rational_turn(rng));
    let rest = generators::equal_modulus_eigenvalues(rng, dim - 2, r, Arguments::Rational);
    let m = Mat::from_fn(dim, dim, |i, j| match (i, j) {
        (0, 0) | (1, 1) => lambda,
        (0, 1) => Complex64::new(1.0, 0.0),
        _ if i == j => rest[i - 2],
        _ => Complex64::new(0.0, 0.0),
    });
    (m, format!("jordan2_plus_diag_d{dim}_r{r}"))
}

fn conjugate(rng: &mut ChaCha8Rng, m: &Mat) -> OperatorSpec {
    let (v, v_inv, _) = generators::conjugator(rng, m.nrows(), MAX_CONDITION);
    OperatorSpec::dense(dense::to_rows(&(&v * m * &v_inv)))
}

/// One (n, λ) of a commuting pair check: absolute residuals at x and Sx and
/// the bound ‖S‖·‖λTⁿx − x‖.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutantPair {
    pub certificate: ReturnCertificate,
    pub residual_x: f64,
    pub residual_sx: f64,
    pub bound: f64,
    /// residual_sx − bound; nonpositive up to rounding.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutantCheck {
    pub pass: bool,
    pub norm_bound: f64,
    pub pairs: Vec<CommutantPair>,
    pub max_slack: f64,
}

/// For S commuting with T, λTⁿSx − Sx = S(λTⁿx − x), so
/// ‖λTⁿSx − Sx‖ ≤ ‖S‖·‖λTⁿx − x‖ for every certificate. Checked with the
/// rigorous upper bound on ‖S‖ and absolute slack `COMMUTANT_SLACK`.
pub fn commutant_residual_check(
    t: &OperatorSpec,
    s: &OperatorSpec,
    x: &VectorState,
    certificates: &[ReturnCertificate],
) -> Result<CommutantCheck> {
    let sx = s.apply(x)?;
    let norm_bound = s.operator_norm_estimate()?.upper_bound;
    let mut pairs = Vec::with_capacity(certificates.len());
    let mut max_slack = f64::NEG_INFINITY;
    for cert in certificates {
        let residual_x = verify_certificate(t, x, cert)? * x.norm();
        let residual_sx = if sx.is_zero() {
            0.0
        } else {
            verify_certificate(t, &sx, cert)? * sx.norm()
        };
        let bound = norm_bound * residual_x;
        let slack = residual_sx - bound;
        max_slack = max_slack.max(slack);
        pairs.push(CommutantPair {
            certificate: *cert,
            residual_x,
            residual_sx,
            bound,
            slack,
        });
    }
    Ok(CommutantCheck {
        pass: max_slack <= COMMUTANT_SLACK,
        norm_bound,
        pairs,
        max_slack,
    })
}

/// Detected certificates plus the optimal-λ pairs for n = 1, 2, 3, which are
/// far from returns and make the inequality non-vacuous.
fn commutant_certificates(t: &OperatorSpec, x: &VectorState) -> Result<Vec<ReturnCertificate>> {
    let mut certs = detect_super_recurrence(t, x, &vector_params())?.certificates;
    let mut y = x.clone();
    for n in 1..=3u64 {
        y = t.apply(&y)?;
        if !y.is_zero() {
            certs.push(ReturnCertificate::new(n, best_scalar(x, &y)?));
        }
    }
    Ok(certs)
}

fn commutant_case(rng: &mut ChaCha8Rng, dim: usize) -> Result<Outcome> {
    let t = certified_operator(rng, dim, None);
    let coeffs = generators::random_polynomial(rng, 3);
    let s = OperatorSpec::polynomial(coeffs, t.op.clone());
    let x = generators::random_unit_vector(rng, dim);
    let certs = commutant_certificates(&t.op, &x)?;
    let check = commutant_residual_check(&t.op, &s, &x, &certs)?;
    let worst = check.pairs.iter().max_by(|a, b| a.slack.total_cmp(&b.slack)).cloned();
    Ok(Outcome::new(
        t.label,
        check.pass,
        format!("pairs={} max_slack={:e}", check.pairs.len(), check.max_slack),
        || CaseWitness {
            auxiliary: Some(s.clone()),
            certificate: worst.as_ref().map(|w| w.certificate),
            residual: worst.as_ref().map(|w| w.residual_sx),
            bound: worst.as_ref().map(|w| w.bound),
            ..CaseWitness::operator(&t.op).with_vector(&x)
        },
    ))
}

fn polynomial_case(rng: &mut ChaCha8Rng, dim: usize) -> Result<Outcome> {
    let t = certified_operator(rng, dim, None);
    let coeffs = generators::random_polynomial(rng, 3);
    let p = OperatorSpec::polynomial(coeffs, t.op.clone());
    let x = generators::random_unit_vector(rng, dim);
    let params = vector_params();
    let vx = detect_super_recurrence(&t.op, &x, &params)?;
    let y = p.apply(&x)?;
    if y.norm() <= 1e-12 {
        // p(T)x = 0 is excluded by the property; redraws would change the
        // stream, so the case passes vacuously and says so.
        return Ok(Outcome::new(t.label, true, "p(T)x = 0, vacuous".into(), || unreachable!()));
    }
    let vy = detect_super_recurrence(&t.op, &y, &params)?;
    let pass = vx.is_certified() && vy.is_certified();
    Ok(Outcome::new(
        t.label,
        pass,
        format!(
            "x certified={} n={:?}; p(T)x certified={} n={:?}",
            vx.is_certified(),
            vx.best().map(|c| c.n),
            vy.is_certified(),
            vy.best().map(|c| c.n)
        ),
        || CaseWitness {
            auxiliary: Some(p.clone()),
            residual: vy.closest.map(|c| c.residual),
            ..CaseWitness::operator(&t.op).with_vector(&x)
        },
    ))
}

fn similarity_case(rng: &mut ChaCha8Rng, dim: usize, i: usize) -> Result<Outcome> {
    let r = *RADII.choose(rng).expect("nonempty");
    let (m, label) = match i % 4 {
        0 => {
            let ev = generators::equal_modulus_eigenvalues(rng, dim, r, Arguments::Rational);
            (diag_mat(&ev), format!("similar_equal_rational_d{dim}_r{r}"))
        }
        1 => {
            let ev = generators::equal_modulus_eigenvalues(rng, dim, r, Arguments::Irrational);
            (diag_mat(&ev), format!("similar_equal_irrational_d{dim}_r{r}"))
        }
        2 => {
            let ev = generators::unequal_modulus_eigenvalues(rng, dim, spectral_violation());
            (diag_mat(&ev), format!("similar_unequal_d{dim}"))
        }
        _ => {
            let (m, l) = jordan_matrix(rng, dim);
            (m, format!("similar_{l}"))
        }
    };
    let t = OperatorSpec::from_matrix(&m);
    let phi_t = conjugate(rng, &m);
    let cfg = ClassifyConfig::default();
    let a = classify(&t, "T", &cfg)?;
    let b = classify(&phi_t, "phi T phi^-1", &cfg)?;
    let pass = a.final_status == b.final_status;
    Ok(Outcome::new(
        label,
        pass,
        format!("T: {:?}, conjugate: {:?}", a.final_status, b.final_status),
        || CaseWitness {
            auxiliary: Some(phi_t.clone()),
            ..CaseWitness::operator(&t)
        },
    ))
}

fn diag_mat(ev: &[Complex64]) -> Mat {
    Mat::from_diagonal(&nalgebra::DVector::from_column_slice(ev))
}

fn direct_sum_case(rng: &mut ChaCha8Rng, dim: usize) -> Result<Outcome> {
    let d1 = rng.gen_range(1..dim);
    let r = *RADII.choose(rng).expect("nonempty");
    let a = certified_operator(rng, d1, Some(r));
    let b = certified_operator(rng, dim - d1, Some(r));
    let sum = OperatorSpec::direct_sum(vec![a.op.clone(), b.op.clone()]);
    let x = generators::random_unit_vector(rng, dim);
    let parts = x.split(&[d1, dim - d1]);
    let params = vector_params();
    let vs = detect_super_recurrence(&sum, &x, &params)?;
    let va = detect_super_recurrence(&a.op, &parts[0], &params)?;
    let vb = detect_super_recurrence(&b.op, &parts[1], &params)?;
    // The sum's certificate restricted to a component: its absolute residual
    // can only shrink.
    let mut restricted_ok = true;
    if let Some(cert) = vs.best() {
        let total = cert.residual * x.norm();
        for (op, p) in [(&a.op, &parts[0]), (&b.op, &parts[1])] {
            let r = verify_certificate(op, p, cert)? * p.norm();
            restricted_ok &= r <= total + 1e-12;
        }
    }
    let pass = !vs.is_certified() || (va.is_certified() && vb.is_certified() && restricted_ok);
    Ok(Outcome::new(
        format!("sum_{}_{}", a.label, b.label),
        pass,
        format!(
            "sum certified={} factors certified=({}, {}) restriction ok={restricted_ok}",
            vs.is_certified(),
            va.is_certified(),
            vb.is_certified()
        ),
        || CaseWitness {
            certificate: vs.best().copied(),
            ..CaseWitness::operator(&sum).with_vector(&x)
        },
    ))
}

/// diag(1) ⊕ diag(2): both summands are super-recurrent, the sum is not.
fn direct_sum_control() -> Result<Outcome> {
    let sum = OperatorSpec::direct_sum(vec![
        OperatorSpec::diagonal(vec![Complex64::new(1.0, 0.0)]),
        OperatorSpec::diagonal(vec![Complex64::new(2.0, 0.0)]),
    ]);
    let cfg = ClassifyConfig::default();
    let c = classify(&sum, "diag(1)+diag(2)", &cfg)?;
    let replayed = match &c.witness {
        Some(w) => w.replay(&sum)?,
        None => false,
    };
    let factors_ok = [1.0, 2.0].iter().all(|&v| {
        let f = OperatorSpec::diagonal(vec![Complex64::new(v, 0.0)]);
        classify(&f, "factor", &cfg).is_ok_and(|r| r.final_status == FinalStatus::SuperRecurrent)
    });
    let pass = c.final_status == FinalStatus::NotSuperRecurrent && replayed && factors_ok;
    Ok(Outcome::new(
        "control_sum_diag1_diag2".into(),
        pass,
        format!("sum: {:?}, witness replayed={replayed}, factors super-recurrent={factors_ok}", c.final_status),
        || CaseWitness::operator(&sum),
    ))
}

fn power_case(rng: &mut ChaCha8Rng, dim: usize, p: u32) -> Result<Outcome> {
    let t = certified_operator(rng, dim, None);
    let tp = OperatorSpec::power(p, t.op.clone());
    let x = generators::random_unit_vector(rng, dim);
    let params = vector_params();

    // T^p → T: (n, λ) for T^p is (p·n, λ) for T with the same residual.
    let vp = detect_super_recurrence(&tp, &x, &params)?;
    let mut worst_diff: f64 = 0.0;
    let mut failing = None;
    for cert in &vp.certificates {
        let r1 = verify_certificate(&tp, &x, cert)?;
        let lifted = ReturnCertificate {
            n: cert.n * p as u64,
            ..*cert
        };
        let r2 = verify_certificate(&t.op, &x, &lifted)?;
        if (r1 - r2).abs() > worst_diff {
            worst_diff = (r1 - r2).abs();
            failing = Some(lifted);
        }
    }
    // T → T^p at the looser tolerance.
    let vt = detect_super_recurrence(&t.op, &x, &params)?;
    let loose = DetectionParams {
        epsilon: POWER_EPS,
        ..params
    };
    let vp_loose = detect_super_recurrence(&tp, &x, &loose)?;
    let pass = vp.is_certified() && worst_diff <= TRANSFER_TOL && vt.is_certified() && vp_loose.is_certified();
    Ok(Outcome::new(
        format!("{}_p{p}", t.label),
        pass,
        format!(
            "T^p certified={} transfer diff={worst_diff:e}; T certified={} T^p at 1e-5 certified={}",
            vp.is_certified(),
            vt.is_certified(),
            vp_loose.is_certified()
        ),
        || CaseWitness {
            auxiliary: Some(tp.clone()),
            certificate: failing,
            residual: Some(worst_diff),
            bound: Some(TRANSFER_TOL),
            ..CaseWitness::operator(&t.op).with_vector(&x)
        },
    ))
}

fn necessity_case(rng: &mut ChaCha8Rng, dim: usize, i: usize) -> Result<Outcome> {
    let cfg = ClassifyConfig::default();
    let (op, label, kind) = match i % 3 {
        0 => {
            let t = certified_operator(rng, dim, None);
            (t.op, t.label, 0)
        }
        1 => {
            let t = unequal_operator(rng, dim);
            (t.op, format!("control_{}", t.label), 1)
        }
        _ => {
            let (m, l) = jordan_matrix(rng, dim);
            (conjugate(rng, &m), format!("control_conj_{l}"), 2)
        }
    };
    let c = classify(&op, &label, &cfg)?;
    let spectral_ok = c.evidence.circle.as_ref().is_some_and(|k| k.pass) && c.evidence.adjoint.as_ref().is_some_and(|k| k.pass);
    let dynamic = c.dynamic.meets_threshold();
    let core = !dynamic || spectral_ok;
    let replayed = match &c.witness {
        Some(w) => w.replay(&op)?,
        None => false,
    };
    let pass = core
        && match kind {
            // Rejected, with a witness that fails again on replay.
            1 => !dynamic && c.final_status == FinalStatus::NotSuperRecurrent && replayed,
            // Defective: never accepted, rejected only with a spectral witness.
            2 => {
                !c.sufficient_pass
                    && match c.final_status {
                        FinalStatus::Inconclusive => true,
                        FinalStatus::NotSuperRecurrent => {
                            replayed && matches!(c.witness, Some(RefutationWitness::Spectral { .. }))
                        }
                        FinalStatus::SuperRecurrent => false,
                    }
            }
            _ => true,
        };
    Ok(Outcome::new(
        label,
        pass,
        format!(
            "certified {}/{} probes, circle+adjoint pass={spectral_ok}, final={:?}",
            c.dynamic.certified, c.dynamic.probes, c.final_status
        ),
        || CaseWitness {
            residual: c.evidence.circle.as_ref().map(|k| k.spread),
            bound: Some(cfg.spread_tol),
            ..CaseWitness::operator(&op)
        },
    ))
}

fn hyperplane_case(rng: &mut ChaCha8Rng, dim: usize) -> Result<Outcome> {
    let t = certified_operator(rng, dim, None);
    let report = crate::spectral::spectrum(&t.op, crate::spectral::SPREAD_TOL)?;
    let params = DetectionParams {
        epsilon: HYPERPLANE_EPS,
        n_max: HYPERPLANE_N_MAX,
        n_min: 1,
    };
    let mut worst_invariance: f64 = 0.0;
    let mut failures = Vec::new();
    let mut witness = None;
    for cl in &report.clusters {
        // μ = conj(λ) is the adjoint eigenvalue; the restriction is indexed by λ.
        let h = match hyperplane_restriction(&t.op, cl.value, 1e-6) {
            Ok(h) => h,
            Err(e) => {
                failures.push(format!("λ={}: {e}", cl.value));
                continue;
            }
        };
        worst_invariance = worst_invariance.max(h.invariance_residual);
        if h.invariance_residual > INVARIANCE_TOL {
            failures.push(format!("λ={}: invariance {:e}", cl.value, h.invariance_residual));
        }
        let compressed = h.normalized_compression();
        let d0 = dim - 1;
        let mut probes: Vec<VectorState> = (0..d0).map(|i| VectorState::basis(d0, i)).collect();
        probes.extend((0..4).map(|_| generators::random_unit_vector(rng, d0)));
        for x in probes {
            let v = detect_recurrence(&compressed, &x, &params)?;
            if !v.is_certified() {
                failures.push(format!("λ={}: probe not recurrent", cl.value));
                witness.get_or_insert_with(|| CaseWitness {
                    auxiliary: Some(compressed.clone()),
                    residual: v.closest.map(|c| c.residual),
                    bound: Some(HYPERPLANE_EPS),
                    ..CaseWitness::operator(&t.op).with_vector(&x)
                });
                break;
            }
        }
    }
    let pass = failures.is_empty();
    Ok(Outcome::new(
        t.label.clone(),
        pass,
        format!(
            "eigenvalues={} max invariance={worst_invariance:e} failures={}",
            report.clusters.len(),
            failures.join(" | ")
        ),
        || witness.unwrap_or_else(|| CaseWitness::operator(&t.op)),
    ))
}

fn dense_srec_case(rng: &mut ChaCha8Rng, dim: usize) -> Result<Outcome> {
    let t = certified_operator(rng, dim, None);
    let cfg = ClassifyConfig {
        seed: rng.gen(),
        ..ClassifyConfig::default()
    };
    let c = classify(&t.op, &t.label, &cfg)?;
    let (ok, total) = c.dynamic.random_probes_certified();
    let pass = ok == total && c.final_status == FinalStatus::SuperRecurrent;
    Ok(Outcome::new(
        t.label.clone(),
        pass,
        format!("random probes certified {ok}/{total}, final={:?}", c.final_status),
        || CaseWitness::operator(&t.op),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_is_deterministic() {
        let sizes = SuiteSizes { max_dim: 4, cases: 4 };
        let a = property_suite(7, sizes).unwrap();
        let failures: Vec<_> = a.cases.iter().filter(|c| !c.pass).collect();
        assert!(failures.is_empty(), "{failures:#?}");
        assert_eq!(a.cases.len(), 8 * 4 + 1);
        let b = property_suite(7, sizes).unwrap();
        assert_eq!(a.to_json_lines().unwrap(), b.to_json_lines().unwrap());
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn csv_has_one_row_per_case() {
        let r = property_suite(1, SuiteSizes { max_dim: 3, cases: 1 }).unwrap();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), r.cases.len() + 1);
        assert!(csv.starts_with("index,generator,property,pass,witness_ref"));
    }

    #[test]
    fn commutant_bound_is_tight_for_scalar_commutant() {
        let t = OperatorSpec::diagonal(vec![Complex64::new(0.0, 2.0), Complex64::new(2.0, 0.0)]);
        let s = OperatorSpec::scaled(Complex64::new(3.0, 0.0), OperatorSpec::identity(2));
        let x = VectorState::from_real(&[1.0, 0.5]).unwrap();
        let certs = commutant_certificates(&t, &x).unwrap();
        let r = commutant_residual_check(&t, &s, &x, &certs).unwrap();
        assert!(r.pass);
        for p in &r.pairs {
            assert!((p.residual_sx - 3.0 * p.residual_x).abs() <= 1e-12 * (1.0 + p.residual_x));
        }
    }

    #[test]
    fn rejects_tiny_dims() {
        assert!(property_suite(1, SuiteSizes { max_dim: 1, cases: 1 }).is_err());
    }
}

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_inputs, detect_super_recurrence, DetectionParams, ReturnCertificate};
use crate::error::{invalid, Result};
use crate::generators::random_unit_vector;
use crate::operator::OperatorSpec;
use crate::orbit::OrbitWalker;
use crate::vector::VectorState;

/// Nested closed balls B(cₖ, rₖ) ⊂ B(cₖ₋₁, rₖ₋₁) with a return (nₖ, λₖ)
/// attached to each level. Every point y of the last ball satisfies
/// ‖λₖT^{nₖ}y − y‖ ≤ 2^{1−k}·scale for every recorded level k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedBallTrace {
    /// centers[0] and radii[0] are the seed ball.
    pub centers: Vec<VectorState>,
    pub radii: Vec<f64>,
    /// certificates[k − 1] is the return of level k, certified at centers[k].
    pub certificates: Vec<ReturnCertificate>,
    /// Absolute residual bound 2^{1−k}·scale promised for level k.
    pub bounds: Vec<f64>,
    /// The seed radius.
    pub scale: f64,
    pub complete: bool,
    pub failure: Option<String>,
}

impl NestedBallTrace {
    pub fn final_center(&self) -> &VectorState {
        self.centers.last().expect("seed center is always present")
    }

    pub fn levels(&self) -> usize {
        self.certificates.len()
    }
}

// Candidate centers are drawn from the inner quarter of the current ball, so
// any radius up to half the current one keeps the next ball inside it.
const CENTER_FRACTION: f64 = 0.25;
const SHRINK: f64 = 0.49;
const SEED: u64 = 0x6e65_7374;

/// ‖λTⁿ‖ bounded by the Frobenius norm, with columns Tⁿeᵢ taken from the
/// renormalized orbit so that no column overflows.
fn power_frobenius(op: &OperatorSpec, dim: usize, cert: &ReturnCertificate) -> Result<f64> {
    let mut logs = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut w = OrbitWalker::new(op, &VectorState::basis(dim, i))?;
        while w.n() < cert.n {
            if !w.advance() {
                break;
            }
        }
        if w.n() == cert.n {
            logs.push(w.log_magnitude());
        }
    }
    let Some(top) = logs.iter().copied().reduce(f64::max) else {
        return Ok(0.0);
    };
    let sum: f64 = logs.iter().map(|l| (2.0 * (l - top)).exp()).sum();
    let log_norm = top + 0.5 * sum.ln() + cert.lambda.norm().ln() + cert.scale_log2 as f64 * std::f64::consts::LN_2;
    Ok(log_norm.exp() * (1.0 + 1e-10))
}

/// Runs the nested-ball construction for `depth` levels.
///
/// Level k picks a point of the current ball, certifies a return at it with
/// absolute residual at most 2^{−k−1}·scale and n larger than the previous
/// level's, then shrinks the radius until the bound 2^{1−k}·scale holds on the
/// whole new ball by continuity: ‖λTⁿy − y‖ ≤ aₖ + (‖λTⁿ‖ + 1)·rₖ.
pub fn refine_srec_vector(
    op: &OperatorSpec,
    seed_center: &VectorState,
    seed_radius: f64,
    depth: usize,
    params: &DetectionParams,
) -> Result<NestedBallTrace> {
    params.validate()?;
    check_inputs(op, seed_center)?;
    if !(seed_radius > 0.0 && seed_radius.is_finite()) {
        return Err(invalid("seed radius must be positive and finite"));
    }
    let dim = seed_center.dim();
    let scale = seed_radius;
    let mut trace = NestedBallTrace {
        centers: vec![seed_center.clone()],
        radii: vec![seed_radius],
        certificates: Vec::new(),
        bounds: Vec::new(),
        scale,
        complete: false,
        failure: None,
    };
    let mut n_prev = 0u64;
    for k in 1..=depth {
        let (center, radius) = (trace.final_center().clone(), *trace.radii.last().expect("seeded"));
        let target = 2f64.powi(1 - k as i32) * scale;
        let n_min = params.n_min.max(n_prev + 1);
        if n_min > params.n_max {
            trace.failure = Some(format!("level {k}: return times exhausted below n_max = {}", params.n_max));
            return Ok(trace);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ k as u64);
        let offset = random_unit_vector(&mut rng, dim).scale(Complex64::new(CENTER_FRACTION * radius, 0.0));
        let mut found = None;
        for candidate in [center.add(&offset), center.clone()] {
            if candidate.is_zero() {
                continue;
            }
            let eps = (0.25 * target / candidate.norm()).min(params.epsilon).min(0.5);
            let level_params = DetectionParams {
                epsilon: eps,
                n_max: params.n_max,
                n_min,
            };
            let v = detect_super_recurrence(op, &candidate, &level_params)?;
            if let Some(cert) = v.certificates.first() {
                found = Some((candidate, *cert));
                break;
            }
        }
        let Some((c_k, cert)) = found else {
            trace.failure = Some(format!(
                "level {k}: no return with n in [{n_min}, {}] inside the ball",
                params.n_max
            ));
            return Ok(trace);
        };
        let a_k = cert.residual * c_k.norm();
        let lip = power_frobenius(op, dim, &cert)? + 1.0;
        let r_k = (SHRINK * radius).min(0.99 * (target - a_k) / lip);
        if !(r_k > 0.0) {
            trace.failure = Some(format!("level {k}: no admissible radius"));
            return Ok(trace);
        }
        n_prev = cert.n;
        trace.centers.push(c_k);
        trace.radii.push(r_k);
        trace.certificates.push(cert);
        trace.bounds.push(target);
    }
    trace.complete = true;
    Ok(trace)
}

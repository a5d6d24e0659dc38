//! Ball-shaped enclosing regions for the optimal weight vector.
//!
//! Each screening rule encloses the unknown optimum `w*` at regularization
//! `C` in a ball derived from necessary optimality conditions at a smaller
//! reference value `C_ref <= C`. Over a ball with center `m` and radius `r`,
//! the margin `z_i^T w` of sample `i` ranges exactly over
//! `[z_i^T m - r ||z_i||, z_i^T m + r ||z_i||]`, which is what
//! [`ball_bounds`] evaluates.
//!
//! Everything is expressed through dual coefficients: a center is stored as
//! `beta` with `m = sum_j beta_j z_j`, so `z_i^T m = (Q beta)_i` and
//! `||m||^2 = beta^T Q beta` need only kernel evaluations.

use crate::error::{Error, Result};
use crate::kernel::KernelOracle;
use crate::screening::{BoundPair, ReferenceSolution, SelectionVector};

/// Squared radii may dip this far below zero before being treated as an
/// inconsistency rather than round-off.
const RADIUS_SQ_SLACK: f64 = 1e-9;

/// Enclosing ball in the feature space, represented through dual weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    /// Center coefficients: `m = sum_j beta_j z_j`.
    pub beta: Vec<f64>,
    pub radius: f64,
    /// `(Q beta)_i` for every sample, i.e. `z_i^T m`.
    pub center_dot: Vec<f64>,
    /// `||m||^2 = beta^T Q beta`.
    pub center_norm_sq: f64,
}

fn radius_from_sq(radius_sq: f64) -> Result<f64> {
    if radius_sq >= 0.0 {
        Ok(radius_sq.sqrt())
    } else if radius_sq >= -RADIUS_SQ_SLACK {
        Ok(0.0)
    } else {
        Err(Error::NegativeRadius(radius_sq))
    }
}

fn check_c_pair(c_ref: f64, c: f64) -> Result<()> {
    if !(c_ref.is_finite() && c_ref > 0.0 && c.is_finite() && c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "C values must be positive and finite, got C_ref = {c_ref}, C = {c}"
        )));
    }
    if c < c_ref {
        return Err(Error::InvalidArgument(format!(
            "screening target C = {c} must be at least the reference C_ref = {c_ref}"
        )));
    }
    Ok(())
}

/// First ball: combines the optimality of the reference solution with the
/// feasibility of its rescaling. Center `(C + C_ref)/(2 C_ref) * w_ref`,
/// radius `(C - C_ref)/(2 C_ref) * ||w_ref||`. Costs no kernel work.
pub fn ball_bt1(reference: &ReferenceSolution, c: f64) -> Result<Ball> {
    check_c_pair(reference.c_ref, c)?;
    let scale = (c + reference.c_ref) / (2.0 * reference.c_ref);
    let radius = (c - reference.c_ref) / (2.0 * reference.c_ref) * reference.norm_sq.sqrt();
    Ok(Ball {
        beta: reference.alpha.iter().map(|a| scale * a).collect(),
        radius,
        center_dot: reference.margins.iter().map(|m| scale * m).collect(),
        center_norm_sq: scale * scale * reference.norm_sq,
    })
}

/// Second ball: combines the reference solution with one lower-bounding
/// selection `s_hat` of the hinge terms. Center `(w_ref + C z_s)/2` with
/// `z_s = sum_{i in s_hat} z_i`; squared radius
/// `||m||^2 + C (xi_ref - |s_hat|)`.
pub fn ball_bt2(
    reference: &ReferenceSolution,
    s_hat: &SelectionVector,
    c: f64,
    oracle: &KernelOracle,
) -> Result<Ball> {
    let qs = oracle.q_matvec(&s_hat.to_dense())?;
    ball_bt2_with_qs(reference, s_hat, c, &qs)
}

/// [`ball_bt2`] with `(Q s_hat)` supplied by the caller; the path driver
/// maintains that product incrementally across steps.
pub fn ball_bt2_with_qs(
    reference: &ReferenceSolution,
    s_hat: &SelectionVector,
    c: f64,
    qs: &[f64],
) -> Result<Ball> {
    check_c_pair(reference.c_ref, c)?;
    let n = reference.alpha.len();
    if s_hat.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: s_hat.len() });
    }
    if qs.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: qs.len() });
    }
    let beta: Vec<f64> = reference
        .alpha
        .iter()
        .zip(s_hat.iter())
        .map(|(&a, s)| 0.5 * (a + if s { c } else { 0.0 }))
        .collect();
    let center_dot: Vec<f64> =
        reference.margins.iter().zip(qs).map(|(&m, &q)| 0.5 * (m + c * q)).collect();
    // ||m||^2 = (N + 2 C alpha^T (Q s) + C^2 s^T (Q s)) / 4.
    let alpha_qs: f64 = reference.alpha.iter().zip(qs).map(|(a, q)| a * q).sum();
    let s_qs: f64 = s_hat.iter().zip(qs).map(|(s, &q)| if s { q } else { 0.0 }).sum();
    let center_norm_sq = (0.25 * (reference.norm_sq + 2.0 * c * alpha_qs + c * c * s_qs)).max(0.0);
    let radius = radius_from_sq(center_norm_sq + c * (reference.xi - s_hat.count() as f64))?;
    Ok(Ball { beta, radius, center_dot, center_norm_sq })
}

/// First ball in its general form: any feasible primal point
/// `(w_tilde, xi_tilde)` (given through dual coefficients `feas_beta` and a
/// hinge value `feas_xi` at least the true hinge loss of `w_tilde`) combined
/// with the optimum at an arbitrary `C_check <= C` (given as `opt`).
/// [`ball_bt1`] is this with both arguments set to the reference solution.
#[allow(dead_code)] // exercised by tests; production code uses `ball_bt1`
pub(crate) fn ball_bt1_general(
    oracle: &KernelOracle,
    feas_beta: &[f64],
    feas_xi: f64,
    opt: &ReferenceSolution,
    c: f64,
) -> Result<Ball> {
    check_c_pair(opt.c_ref, c)?;
    let q_feas = oracle.q_matvec(feas_beta)?;
    let feas_norm_sq: f64 = feas_beta.iter().zip(&q_feas).map(|(b, q)| b * q).sum();
    let cross: f64 = feas_beta.iter().zip(&opt.margins).map(|(b, m)| b * m).sum();
    let ratio = c / opt.c_ref;
    let beta: Vec<f64> =
        feas_beta.iter().zip(&opt.alpha).map(|(&b, &a)| 0.5 * (b + ratio * a)).collect();
    let center_dot: Vec<f64> =
        q_feas.iter().zip(&opt.margins).map(|(&q, &m)| 0.5 * (q + ratio * m)).collect();
    let center_norm_sq =
        (0.25 * (feas_norm_sq + 2.0 * ratio * cross + ratio * ratio * opt.norm_sq)).max(0.0);
    let radius = radius_from_sq(center_norm_sq - ratio * opt.norm_sq + c * (feas_xi - opt.xi))?;
    Ok(Ball { beta, radius, center_dot, center_norm_sq })
}

/// Second ball in its general form: any feasible `(w_tilde, xi_tilde)`
/// combined with any selection vector. [`ball_bt2`] is this with the
/// reference solution and the maximizing selection.
#[allow(dead_code)] // exercised by tests; production code uses `ball_bt2`
pub(crate) fn ball_bt2_general(
    oracle: &KernelOracle,
    feas_beta: &[f64],
    feas_xi: f64,
    s_hat: &SelectionVector,
    c: f64,
) -> Result<Ball> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be positive and finite, got {c}")));
    }
    let q_feas = oracle.q_matvec(feas_beta)?;
    let qs = oracle.q_matvec(&s_hat.to_dense())?;
    let feas_norm_sq: f64 = feas_beta.iter().zip(&q_feas).map(|(b, q)| b * q).sum();
    let feas_qs: f64 = feas_beta.iter().zip(&qs).map(|(b, q)| b * q).sum();
    let s_qs: f64 = s_hat.iter().zip(&qs).map(|(s, &q)| if s { q } else { 0.0 }).sum();
    let beta: Vec<f64> = feas_beta
        .iter()
        .zip(s_hat.iter())
        .map(|(&b, s)| 0.5 * (b + if s { c } else { 0.0 }))
        .collect();
    let center_dot: Vec<f64> = q_feas.iter().zip(&qs).map(|(&q, &sq)| 0.5 * (q + c * sq)).collect();
    let center_norm_sq = (0.25 * (feas_norm_sq + 2.0 * c * feas_qs + c * c * s_qs)).max(0.0);
    let radius = radius_from_sq(center_norm_sq + c * (feas_xi - s_hat.count() as f64))?;
    Ok(Ball { beta, radius, center_dot, center_norm_sq })
}

/// Margin bounds of sample `i` over a ball: `z_i^T m -/+ r ||z_i||`.
pub fn ball_bounds(ball: &Ball, i: usize, oracle: &KernelOracle) -> BoundPair {
    let zn = oracle.q_diag(i).max(0.0).sqrt();
    BoundPair {
        lower: ball.center_dot[i] - ball.radius * zn,
        upper: ball.center_dot[i] + ball.radius * zn,
    }
}

/// Closed-form lower margin bound equal to [`ball_bt1`] + [`ball_bounds`],
/// written directly in dual quantities:
/// `(C+C_ref)/(2C_ref) (Q a)_i - (C-C_ref)/(2C_ref) sqrt(a^T Q a * Q_ii)`
/// with `a = alpha_ref`.
pub fn bt1_dual_form(
    reference: &ReferenceSolution,
    c: f64,
    i: usize,
    oracle: &KernelOracle,
) -> Result<f64> {
    check_c_pair(reference.c_ref, c)?;
    if i >= reference.margins.len() {
        return Err(Error::IndexOutOfRange { index: i, n: reference.margins.len() });
    }
    let denom = 2.0 * reference.c_ref;
    Ok((c + reference.c_ref) / denom * reference.margins[i]
        - (c - reference.c_ref) / denom * (reference.norm_sq * oracle.q_diag(i)).sqrt())
}

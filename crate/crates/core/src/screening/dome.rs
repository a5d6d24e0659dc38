//! Dome-shaped enclosing region built from two bracketing optima.
//!
//! When solutions at `C_a <= C` and `C_b >= C` are both available, the
//! optimum at `C` is confined to the dome
//! `{ w : ||w||^2 <= gamma_b,  w_a^T w >= gamma_a }`
//! where `gamma_a = ||w_a||^2` and `gamma_b = ||w_b||^2`: the squared norm
//! of the optimum is nondecreasing in C, and the inner product with a
//! smaller-C optimum can only grow. Margin extrema over the dome have two
//! regimes: the sphere tangent point when it satisfies the half-space
//! constraint, otherwise the rim of the cut disc.

use crate::error::{Error, Result};
use crate::kernel::KernelOracle;
use crate::screening::{BoundPair, ReferenceSolution};

/// `gamma_b` may fall this far below `gamma_a`, relative to the norm scale,
/// before the pair is rejected as inconsistent rather than treated as
/// round-off from finite-tolerance solves.
const GAMMA_RTOL: f64 = 1e-6;

/// Margin bounds of sample `i` over the dome determined by the reference at
/// `C_a` (supplying `w_a` and `gamma_a`) and the squared norm `gamma_b` of a
/// solution at some `C_b >= c`.
pub fn dome_bounds(
    ref_a: &ReferenceSolution,
    gamma_b: f64,
    c: f64,
    i: usize,
    oracle: &KernelOracle,
) -> Result<BoundPair> {
    validate(ref_a, gamma_b, c)?;
    if i >= ref_a.margins.len() {
        return Err(Error::IndexOutOfRange { index: i, n: ref_a.margins.len() });
    }
    Ok(eval(ref_a, gamma_b, i, oracle))
}

pub(crate) fn validate(ref_a: &ReferenceSolution, gamma_b: f64, c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) || c < ref_a.c_ref {
        return Err(Error::InvalidArgument(format!(
            "dome target C = {c} must be finite and at least C_a = {}",
            ref_a.c_ref
        )));
    }
    let slack = GAMMA_RTOL * ref_a.norm_sq.max(1.0);
    if !gamma_b.is_finite() || gamma_b < ref_a.norm_sq - slack {
        return Err(Error::InvalidArgument(format!(
            "gamma_b = {gamma_b} must be at least gamma_a = {} (norms grow with C)",
            ref_a.norm_sq
        )));
    }
    Ok(())
}

/// Bound evaluation with arguments already validated.
pub(crate) fn eval(
    ref_a: &ReferenceSolution,
    gamma_b: f64,
    i: usize,
    oracle: &KernelOracle,
) -> BoundPair {
    let q_ii = oracle.q_diag(i);
    if q_ii <= 0.0 {
        return BoundPair { lower: 0.0, upper: 0.0 };
    }
    let gamma_a = ref_a.norm_sq;
    // Round-off may leave gamma_b a hair under gamma_a; the dome is then a point.
    let gamma_b = gamma_b.max(gamma_a);
    let zn = q_ii.sqrt();
    let sqrt_gb = gamma_b.sqrt();
    let wa_dot = ref_a.margins[i]; // z_i^T w_a
    let threshold = if sqrt_gb > 0.0 { gamma_a / sqrt_gb } else { 0.0 };

    // Rim value: w on the plane w_a^T w = gamma_a decomposes as w_a + v with
    // v orthogonal to w_a and ||v||^2 <= gamma_b - gamma_a, so the margin
    // moves by at most sqrt((gamma_b - gamma_a)) * ||z_i orth w_a||.
    let rim_shift = || {
        let perp_sq = (gamma_a * q_ii - wa_dot * wa_dot).max(0.0);
        if gamma_a <= 0.0 {
            0.0 // unreachable: gamma_a = 0 always satisfies the tangent check
        } else {
            ((gamma_b - gamma_a).max(0.0) / gamma_a * perp_sq).sqrt()
        }
    };

    let lower = if -wa_dot / zn >= threshold { -sqrt_gb * zn } else { wa_dot - rim_shift() };
    let upper = if wa_dot / zn >= threshold { sqrt_gb * zn } else { wa_dot + rim_shift() };
    BoundPair { lower, upper }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_libsvm_str, ParseOptions};
    use crate::kernel::Kernel;
    use crate::screening::make_reference;
    use crate::solver::{solve, SolverConfig};

    fn reference_at(text: &str, c: f64) -> (KernelOracle, ReferenceSolution) {
        let ds = parse_libsvm_str(text, ParseOptions::default()).unwrap();
        let oracle = KernelOracle::new(ds, Kernel::Linear).unwrap();
        let sol = solve(&oracle, c, &SolverConfig::default().with_tolerance(1e-12), None).unwrap();
        let reference = make_reference(&sol);
        (oracle, reference)
    }

    #[test]
    fn equal_gammas_pin_bounds_to_reference_margins() {
        let (oracle, reference) = reference_at("+1 1:1 2:0.5\n-1 1:-0.5 2:1\n+1 2:-2\n", 0.7);
        for i in 0..3 {
            let b = dome_bounds(&reference, reference.norm_sq, 0.7, i, &oracle).unwrap();
            assert!((b.lower - reference.margins[i]).abs() < 1e-9, "sample {i}");
            assert!((b.upper - reference.margins[i]).abs() < 1e-9, "sample {i}");
        }
    }

    #[test]
    fn wider_overall_norm_widens_bounds() {
        let (oracle, reference) = reference_at("+1 1:1\n-1 1:-2\n+1 2:1\n", 0.4);
        let tight = dome_bounds(&reference, reference.norm_sq, 0.4, 0, &oracle).unwrap();
        let wide = dome_bounds(&reference, 4.0 * reference.norm_sq + 1.0, 0.4, 0, &oracle).unwrap();
        assert!(wide.lower <= tight.lower + 1e-12);
        assert!(wide.upper >= tight.upper - 1e-12);
    }

    #[test]
    fn ball_cap_never_exceeds_the_sphere_bound() {
        let (oracle, reference) = reference_at("+1 1:1 2:1\n-1 1:-1 2:2\n-1 2:-1\n", 0.6);
        let gamma_b = reference.norm_sq * 1.7;
        for i in 0..3 {
            let b = dome_bounds(&reference, gamma_b, 0.9, i, &oracle).unwrap();
            let sphere = gamma_b.sqrt() * oracle.q_diag(i).sqrt();
            assert!(b.lower >= -sphere - 1e-12);
            assert!(b.upper <= sphere + 1e-12);
            assert!(b.lower <= b.upper);
        }
    }

    #[test]
    fn zero_reference_norm_degenerates_to_the_full_ball() {
        // A dataset whose optimum at tiny C has w != 0 is typical, so build
        // the degenerate case directly: gamma_a = 0 means no half-space cut.
        let ds = parse_libsvm_str("+1 1:1\n-1 2:1\n", ParseOptions::default()).unwrap();
        let oracle = KernelOracle::new(ds, Kernel::Linear).unwrap();
        let reference = ReferenceSolution {
            c_ref: 0.5,
            alpha: vec![0.0, 0.0],
            margins: vec![0.0, 0.0],
            norm_sq: 0.0,
            xi: 2.0,
        };
        let b = dome_bounds(&reference, 2.0, 0.5, 0, &oracle).unwrap();
        let sphere = 2.0f64.sqrt();
        assert!((b.lower + sphere).abs() < 1e-12);
        assert!((b.upper - sphere).abs() < 1e-12);
    }

    #[test]
    fn rejects_inconsistent_arguments() {
        let (oracle, reference) = reference_at("+1 1:1\n-1 1:-1\n", 0.8);
        // gamma_b far below gamma_a.
        assert!(dome_bounds(&reference, reference.norm_sq / 2.0, 0.8, 0, &oracle).is_err());
        // target C below C_a.
        assert!(dome_bounds(&reference, reference.norm_sq, 0.4, 0, &oracle).is_err());
        // out-of-range sample index.
        assert!(dome_bounds(&reference, reference.norm_sq, 0.8, 5, &oracle).is_err());
    }

    #[test]
    fn zero_feature_sample_is_pinned_to_zero() {
        let ds = parse_libsvm_str("+1 1:1\n-1\n", ParseOptions::default()).unwrap();
        let oracle = KernelOracle::new(ds, Kernel::Linear).unwrap();
        let sol = solve(&oracle, 0.5, &SolverConfig::default(), None).unwrap();
        let reference = make_reference(&sol);
        let b = dome_bounds(&reference, reference.norm_sq + 1.0, 0.5, 1, &oracle).unwrap();
        assert_eq!(b, BoundPair { lower: 0.0, upper: 0.0 });
    }
}

//! Margin bounds over the intersection of the two screening balls.
//!
//! Both balls contain the optimum, so bounding margins over their (smaller)
//! intersection can only tighten the per-ball bounds. The extremum of a
//! linear functional over a lens has three regimes, depending on where the
//! functional's ball-tangent point falls: inside ball 2 (ball-1 bound is
//! already exact), inside ball 1 (ball-2 bound exact), or on the rim circle
//! where both sphere constraints are active.

use crate::error::{Error, Result};
use crate::kernel::KernelOracle;
use crate::screening::ball::{ball_bounds, Ball};
use crate::screening::BoundPair;

/// Centers closer than this are treated as concentric.
const CONCENTRIC_EPS: f64 = 1e-12;
/// Center gaps may exceed the radius sum by this much before the balls are
/// declared disjoint (an inconsistency, since both must hold the optimum).
const DISJOINT_SLACK: f64 = 1e-9;

/// Precomputed geometry shared by all per-sample intersection bound queries.
#[derive(Debug, Clone)]
pub struct IntersectionGeometry {
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    /// Ball 1 lies inside ball 2 (or the centers coincide and ball 1 is
    /// smaller): the intersection is ball 1.
    Ball1,
    /// Symmetric case: the intersection is ball 2.
    Ball2,
    /// Proper lens.
    Lens {
        phi_norm: f64,
        /// Distance from center 2 to the rim plane, along `phi = m1 - m2`.
        zeta: f64,
        /// Rim circle radius, `sqrt(r2^2 - zeta^2)`.
        kappa: f64,
        /// Case threshold `(zeta - ||phi||) / r1`.
        t_ball1: f64,
        /// Case threshold `zeta / r2`.
        t_ball2: f64,
        /// `z_i^T phi` per sample.
        phi_dot: Vec<f64>,
        /// `z_i^T psi` per sample, `psi = m2 + zeta * phi / ||phi||`.
        psi_dot: Vec<f64>,
    },
}

impl IntersectionGeometry {
    /// Classifies the pair and precomputes per-sample projections.
    pub fn new(ball1: &Ball, ball2: &Ball) -> Result<Self> {
        let n = ball1.center_dot.len();
        if ball2.center_dot.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: ball2.center_dot.len() });
        }
        // ||phi||^2 = ||m1||^2 - 2 m1.m2 + ||m2||^2 with m1.m2 = beta1^T (Q beta2).
        let m1_m2: f64 = ball1.beta.iter().zip(&ball2.center_dot).map(|(b, q)| b * q).sum();
        let phi_norm_sq = (ball1.center_norm_sq - 2.0 * m1_m2 + ball2.center_norm_sq).max(0.0);
        let phi_norm = phi_norm_sq.sqrt();
        let (r1, r2) = (ball1.radius, ball2.radius);

        if phi_norm <= CONCENTRIC_EPS {
            return Ok(IntersectionGeometry {
                kind: if r1 <= r2 { Kind::Ball1 } else { Kind::Ball2 },
            });
        }
        if phi_norm + r1 <= r2 {
            return Ok(IntersectionGeometry { kind: Kind::Ball1 });
        }
        if phi_norm + r2 <= r1 {
            return Ok(IntersectionGeometry { kind: Kind::Ball2 });
        }
        if phi_norm > r1 + r2 + DISJOINT_SLACK {
            return Err(Error::DisjointBalls(phi_norm - r1 - r2));
        }

        // Proper lens. Neither radius can be zero here: a zero-radius ball
        // either sits inside the other (handled above) or is disjoint.
        let zeta = (phi_norm_sq + r2 * r2 - r1 * r1) / (2.0 * phi_norm);
        // Clamp covers exact tangency and the disjoint slack band.
        let kappa = (r2 * r2 - zeta * zeta).max(0.0).sqrt();
        let phi_dot: Vec<f64> =
            ball1.center_dot.iter().zip(&ball2.center_dot).map(|(a, b)| a - b).collect();
        let psi_dot: Vec<f64> = ball2
            .center_dot
            .iter()
            .zip(&phi_dot)
            .map(|(&c2, &p)| c2 + zeta / phi_norm * p)
            .collect();
        Ok(IntersectionGeometry {
            kind: Kind::Lens {
                phi_norm,
                zeta,
                kappa,
                t_ball1: (zeta - phi_norm) / r1,
                t_ball2: zeta / r2,
                phi_dot,
                psi_dot,
            },
        })
    }

    /// True when the pair degenerated to a single ball.
    pub fn is_single_ball(&self) -> bool {
        !matches!(self.kind, Kind::Lens { .. })
    }

    /// For a proper lens, the rim plane's distance from center 2 along
    /// `m1 - m2` and the rim circle radius; `None` for single-ball cases.
    pub fn rim(&self) -> Option<(f64, f64)> {
        match &self.kind {
            Kind::Lens { zeta, kappa, .. } => Some((*zeta, *kappa)),
            _ => None,
        }
    }
}

/// Margin bounds of sample `i` over the intersection of the two balls.
///
/// Dominates the individual ball bounds: the lower bound is never below
/// either ball's, the upper never above.
pub fn intersection_bounds(
    ball1: &Ball,
    ball2: &Ball,
    i: usize,
    oracle: &KernelOracle,
    geometry: &IntersectionGeometry,
) -> BoundPair {
    let q_ii = oracle.q_diag(i);
    if q_ii <= 0.0 {
        // Zero feature vector: its margin is identically zero.
        return BoundPair { lower: 0.0, upper: 0.0 };
    }
    match &geometry.kind {
        Kind::Ball1 => ball_bounds(ball1, i, oracle),
        Kind::Ball2 => ball_bounds(ball2, i, oracle),
        Kind::Lens { phi_norm, zeta: _, kappa, t_ball1, t_ball2, phi_dot, psi_dot } => {
            let zn = q_ii.sqrt();
            let cos = phi_dot[i] / (zn * phi_norm);
            // ||component of z_i orthogonal to phi||, clamped for round-off.
            let perp = (q_ii - phi_dot[i] * phi_dot[i] / (phi_norm * phi_norm)).max(0.0).sqrt();

            let t = -cos;
            let lower = if t < *t_ball1 {
                ball_bounds(ball1, i, oracle).lower
            } else if t > *t_ball2 {
                ball_bounds(ball2, i, oracle).lower
            } else {
                psi_dot[i] - kappa * perp
            };

            let t = cos;
            let upper = if t < *t_ball1 {
                ball_bounds(ball1, i, oracle).upper
            } else if t > *t_ball2 {
                ball_bounds(ball2, i, oracle).upper
            } else {
                psi_dot[i] + kappa * perp
            };

            BoundPair { lower, upper }
        }
    }
}

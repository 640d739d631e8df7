//! Two-point sphere-sampled gradient estimation.
//!
//! At a point `x` the estimator draws a direction `u` uniform on the unit
//! sphere of `R^p`, samples the oracle twice with the same noise realization,
//! and forms
//!
//! ```text
//! g = (p / delta) * (F(x + delta u, xi) - F(x, xi)) * u
//! ```
//!
//! `g` is an unbiased estimate of the gradient of the ball-smoothed cost
//! `f^s(x, delta) = E_{v in B^p}[f(x + delta v)]`, which is within
//! `delta * lf` of the true gradient, and its second moment is bounded by
//! `2 p |grad f|^2 + (1/2) p^2 delta^2 lf^2` in the noiseless case. Using one
//! noise draw at both points is essential: with independent draws the
//! difference would carry `(p/delta) * (F-level noise)` variance, which
//! explodes as delta shrinks.
//!
//! `delta` may not go below `1e-10 * (1 + |x|)`: past that the two sampled
//! values agree in nearly all mantissa bits and the quotient is cancellation
//! noise, so the call is refused rather than silently degraded.

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::oracle::{Problem, XiSample};

/// Relative scale of the smallest usable smoothing radius.
const DELTA_FLOOR_SCALE: f64 = 1e-10;

/// Directions with Gaussian norm below this are resampled (never observed in
/// practice; guards the normalization).
const DEGENERATE_NORM: f64 = 1e-30;

/// One two-point gradient estimate. Every estimate costs exactly two oracle
/// calls; the engine counts them.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub grad: Array1<f64>,
    pub delta_used: f64,
}

/// Uniform draw from the unit sphere in `R^p`: normalize a standard Gaussian
/// vector, redrawing in the (measure-zero) degenerate case.
pub fn sample_sphere<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let v = Array1::from_iter((0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = v.dot(&v).sqrt();
        if norm >= DEGENERATE_NORM {
            return v / norm;
        }
    }
}

/// Smallest smoothing radius the estimator accepts at `x`. The norm is
/// rescaled by the largest entry so the floor stays finite even when the
/// squared norm would overflow.
pub fn delta_floor(x: ArrayView1<f64>) -> f64 {
    let peak = x.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if peak == 0.0 || !peak.is_finite() {
        return DELTA_FLOOR_SCALE * (1.0 + peak);
    }
    let scaled: f64 = x.iter().map(|&v| (v / peak) * (v / peak)).sum();
    DELTA_FLOOR_SCALE * (1.0 + peak * scaled.sqrt())
}

/// The estimate at a pre-drawn direction and noise realization.
pub fn two_point_estimate(
    problem: &Problem,
    agent: usize,
    x: ArrayView1<f64>,
    delta: f64,
    u: &Array1<f64>,
    xi: &XiSample,
) -> Result<Estimate> {
    debug_assert_eq!(x.len(), problem.p());
    debug_assert_eq!(u.len(), problem.p());
    let delta_valid = delta.is_finite() && delta > 0.0;
    if !delta_valid {
        return Err(Error::DeltaNotPositive { delta });
    }
    let floor = delta_floor(x);
    if !floor.is_finite() {
        return Err(Error::NonFinite {
            context: "query point",
        });
    }
    if delta < floor {
        return Err(Error::DeltaBelowFloor { delta, floor });
    }

    let mut shifted = x.to_owned();
    shifted.scaled_add(delta, u);
    let far = problem.oracle(agent, shifted.view(), xi);
    let near = problem.oracle(agent, x, xi);
    let scale = (problem.p() as f64 / delta) * (far - near);
    if !scale.is_finite() {
        return Err(Error::NonFinite {
            context: "two-point oracle difference",
        });
    }
    Ok(Estimate {
        grad: u.mapv(|v| v * scale),
        delta_used: delta,
    })
}

/// Draw direction and noise from `rng` in the stream contract order
/// (direction first, then noise) and form the estimate. This is the call the
/// engine makes once per agent per iteration.
pub fn two_point_sampled<R: Rng + ?Sized>(
    problem: &Problem,
    agent: usize,
    x: ArrayView1<f64>,
    delta: f64,
    rng: &mut R,
) -> Result<Estimate> {
    let u = sample_sphere(problem.p(), rng);
    let xi = problem.draw_xi(rng);
    two_point_estimate(problem, agent, x, delta, &u, &xi)
}

// =============================================================================
// tests
// =============================================================================

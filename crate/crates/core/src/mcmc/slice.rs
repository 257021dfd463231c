use rand::Rng;

use crate::scalar::Scalar;

/// Outcome of an elliptical slice move expressed as an angle on the ellipse
/// `current·cos θ + prior_draw·sin θ`.
#[derive(Debug, Clone, Copy)]
pub struct EllipseMove<F> {
    pub cos: F,
    pub sin: F,
    pub loglik: F,
    /// Number of log-likelihood evaluations, including the accepted one.
    pub evaluations: usize,
}

const MAX_SHRINKS: usize = 200;

/// Elliptical slice move in angle space.
///
/// `loglik_at(cos θ, sin θ)` evaluates the log-likelihood at the point on the
/// ellipse. The bracket shrinks towards θ = 0, which is the current state,
/// so the loop always terminates; after `MAX_SHRINKS` shrinks the current
/// state is returned.
pub fn elliptical_slice_angle<F, R, L>(
    current_loglik: F,
    mut loglik_at: L,
    rng: &mut R,
) -> EllipseMove<F>
where
    F: Scalar,
    R: Rng + ?Sized,
    L: FnMut(F, F) -> F,
{
    let threshold = current_loglik + F::open01(rng).ln();
    let mut theta = F::uniform(F::zero(), F::TAU(), rng);
    let mut lo = theta - F::TAU();
    let mut hi = theta;
    for evaluations in 1..=MAX_SHRINKS {
        let (sin, cos) = theta.sin_cos();
        let ll = loglik_at(cos, sin);
        if ll > threshold {
            return EllipseMove {
                cos,
                sin,
                loglik: ll,
                evaluations,
            };
        }
        if theta < F::zero() {
            lo = theta;
        } else {
            hi = theta;
        }
        theta = F::uniform(lo, hi, rng);
    }
    EllipseMove {
        cos: F::one(),
        sin: F::zero(),
        loglik: current_loglik,
        evaluations: MAX_SHRINKS,
    }
}

/// One elliptical slice sampling step on a coefficient vector.
///
/// `prior_draw` must come from the same zero-mean Gaussian prior as
/// `coeffs`. The returned vector leaves `prior(coeffs)·exp(loglik(coeffs))`
/// invariant.
pub fn elliptical_slice_step<F, R, L>(
    coeffs: &[F],
    prior_draw: &[F],
    mut loglik: L,
    rng: &mut R,
) -> Vec<F>
where
    F: Scalar,
    R: Rng + ?Sized,
    L: FnMut(&[F]) -> F,
{
    assert_eq!(coeffs.len(), prior_draw.len());
    let current = loglik(coeffs);
    let mut buf = vec![F::zero(); coeffs.len()];
    let mv = elliptical_slice_angle(
        current,
        |c, s| {
            combine(coeffs, prior_draw, c, s, &mut buf);
            loglik(&buf)
        },
        rng,
    );
    combine(coeffs, prior_draw, mv.cos, mv.sin, &mut buf);
    buf
}

#[inline]
fn combine<F: Scalar>(a: &[F], b: &[F], c: F, s: F, out: &mut [F]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = x * c + y * s;
    }
}

use crate::kernel::RffGp;
use crate::scalar::{log1m_sigmoid, log_sigmoid, Scalar};

/// GP-dependent part of the augmented likelihood:
/// `Σ_accepted ln σ(g) + Σ_rejected ln(1 - σ(g))`.
///
/// Baseline factors do not depend on the GP and are omitted. Points are
/// `(time, covariates)` pairs; covariate dimensions are assumed to match.
pub fn log_likelihood_gp<F: Scalar>(
    gp: &RffGp<F>,
    accepted: &[(F, &[F])],
    rejected: &[(F, &[F])],
) -> F {
    let acc: F = accepted
        .iter()
        .map(|&(t, x)| log_sigmoid(gp.evaluate_unchecked(t, x)))
        .sum();
    let rej: F = rejected
        .iter()
        .map(|&(t, x)| log1m_sigmoid(gp.evaluate_unchecked(t, x)))
        .sum();
    acc + rej
}

/// Per-point log-likelihood contribution given the GP value.
#[inline]
pub(crate) fn point_loglik<F: Scalar>(g: F, accepted: bool) -> F {
    if accepted {
        log_sigmoid(g)
    } else {
        log1m_sigmoid(g)
    }
}

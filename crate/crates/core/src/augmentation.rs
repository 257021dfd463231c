//! Thinning-based data augmentation.
//!
//! A survival time is the first accepted point of a Poisson process with
//! intensity `λ₀`, each point `p` being accepted with probability
//! `σ(g(p, X))`. Given the accepted time, the rejected points form a Poisson
//! process with intensity `λ₀(t)(1 - σ(g(t, X)))` on `[0, T)`, which is what
//! [`resample_rejected_sets`] draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::baseline::Baseline;
use crate::error::{Error, Result};
use crate::kernel::RffGp;
use crate::model::{AugmentedState, Censoring, Dataset};
use crate::scalar::{sigmoid, Scalar};

/// Grid resolution of the exact fallback used by the imputation routines.
pub const FALLBACK_GRID: usize = 2048;

/// Draws a Poisson(`mean`) count.
pub fn poisson_count<F: Scalar, R: Rng + ?Sized>(mean: F, rng: &mut R) -> usize {
    let mean = mean.as_f64();
    if !(mean > 0.0) {
        return 0;
    }
    Poisson::new(mean)
        .map(|p| p.sample(rng) as usize)
        .unwrap_or(0)
}

/// Points of a `λ₀` Poisson process on `(0, horizon)` via the mapping theorem:
/// `n ~ Poisson(Λ₀(h))` uniforms on `(0, Λ₀(h))` pushed through `Λ₀⁻¹`.
pub fn sample_candidate_points<F: Scalar, R: Rng + ?Sized>(
    baseline: &Baseline<F>,
    horizon: F,
    rng: &mut R,
) -> Vec<F> {
    let total = baseline.cumulative_hazard(horizon);
    let n = poisson_count(total, rng);
    (0..n)
        .map(|_| baseline.inverse_cumulative_hazard(total * F::open01(rng)))
        .filter(|&a| a > F::zero() && a < horizon)
        .collect()
}

/// Keeps each candidate independently with probability `1 - σ(v)`.
pub fn thin_candidates<F: Scalar, R: Rng + ?Sized>(
    candidates: &[F],
    gp_values: &[F],
    rng: &mut R,
) -> Result<Vec<F>> {
    if candidates.len() != gp_values.len() {
        return Err(Error::LengthMismatch {
            left: candidates.len(),
            right: gp_values.len(),
        });
    }
    Ok(candidates
        .iter()
        .zip(gp_values)
        .filter(|&(_, &v)| F::open01(rng) < F::one() - sigmoid(v))
        .map(|(&a, _)| a)
        .collect())
}

/// Rejected points for one datum on `(0, horizon)`.
pub fn sample_rejected_points<F: Scalar, R: Rng + ?Sized>(
    baseline: &Baseline<F>,
    gp: &RffGp<F>,
    x: &[F],
    horizon: F,
    rng: &mut R,
) -> Vec<F> {
    let candidates = sample_candidate_points(baseline, horizon, rng);
    let values: Vec<F> = candidates
        .iter()
        .map(|&a| gp.evaluate_unchecked(a, x))
        .collect();
    thin_candidates(&candidates, &values, rng).expect("lengths agree by construction")
}

/// Per-datum random stream derived from a sweep seed.
pub(crate) fn substream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index as u64);
    r
}

/// Replaces every `Gᵢ` by a fresh draw given the current baseline and GP.
///
/// Each datum uses its own substream derived from one seed drawn from `rng`,
/// so the result does not depend on how the work is scheduled.
pub fn resample_rejected_sets<F: Scalar, R: Rng + ?Sized>(
    dataset: &Dataset<F>,
    state: &mut AugmentedState<F>,
    rng: &mut R,
) {
    let seed: u64 = rng.random();
    let baseline = state.baseline;
    let gp = &state.gp;
    let data = &dataset.data;
    state
        .latent
        .par_iter_mut()
        .with_min_len(64)
        .enumerate()
        .for_each(|(i, lat)| {
            let mut r = substream(seed, i);
            let horizon = lat.accepted.unwrap_or(data[i].time);
            lat.rejected =
                sample_rejected_points(&baseline, gp, &data[i].covariates, horizon, &mut r);
        });
}

/// Generative simulation of one survival time.
///
/// Walks the `λ₀` process forward with unit-exponential gaps in `Λ₀` space
/// and returns the first accepted point together with the rejected prefix.
pub fn sample_event_time<F: Scalar, R: Rng + ?Sized>(
    baseline: &Baseline<F>,
    gp: &RffGp<F>,
    x: &[F],
    rng: &mut R,
    max_candidates: usize,
) -> Result<(F, Vec<F>)> {
    let mut u = F::zero();
    let mut rejected = Vec::new();
    for _ in 0..max_candidates {
        u += F::exp1(rng);
        let t = baseline.inverse_cumulative_hazard(u);
        if F::open01(rng) < sigmoid(gp.evaluate_unchecked(t, x)) {
            return Ok((t, rejected));
        }
        rejected.push(t);
    }
    Err(Error::CandidateBudgetExceeded {
        budget: max_candidates,
    })
}

/// First accepted point if it falls at or below `limit`; `None` otherwise.
/// Stops simulating as soon as the process passes `limit`.
fn first_event_before<F: Scalar, R: Rng + ?Sized>(
    baseline: &Baseline<F>,
    gp: &RffGp<F>,
    x: &[F],
    limit: F,
    rng: &mut R,
) -> Option<F> {
    let u_limit = baseline.cumulative_hazard(limit);
    let mut u = F::zero();
    loop {
        u += F::exp1(rng);
        if u > u_limit {
            return None;
        }
        let t = baseline.inverse_cumulative_hazard(u);
        if F::open01(rng) < sigmoid(gp.evaluate_unchecked(t, x)) {
            return Some(t.min(limit));
        }
    }
}

/// Event time conditioned on `T ≤ bound`.
pub fn impute_left_censored<F: Scalar, R: Rng + ?Sized>(
    baseline: &Baseline<F>,
    gp: &RffGp<F>,
    x: &[F],
    bound: F,
    rng: &mut R,
    max_attempts: usize,
) -> F {
    impute_interval_censored(baseline, gp, x, F::zero(), bound, rng, max_attempts)
}

/// Event time conditioned on `T ∈ [lower, upper]`: rejection from the
/// generative process, then an exact grid inversion of the truncated law if
/// `max_attempts` draws all miss the window.
pub fn impute_interval_censored<F: Scalar, R: Rng + ?Sized>(
    baseline: &Baseline<F>,
    gp: &RffGp<F>,
    x: &[F],
    lower: F,
    upper: F,
    rng: &mut R,
    max_attempts: usize,
) -> F {
    for _ in 0..max_attempts {
        if let Some(t) = first_event_before(baseline, gp, x, upper, rng) {
            if t >= lower {
                return t;
            }
        }
    }
    truncated_grid_draw(baseline, gp, x, lower, upper, FALLBACK_GRID, rng)
}

/// Inverse-CDF draw from the event-time law truncated to `[lower, upper]`,
/// with the cumulative hazard integrated on a uniform grid.
pub fn truncated_grid_draw<F: Scalar, R: Rng + ?Sized>(
    baseline: &Baseline<F>,
    gp: &RffGp<F>,
    x: &[F],
    lower: F,
    upper: F,
    points: usize,
    rng: &mut R,
) -> F {
    let n = points.max(2);
    let h = (upper - lower) / F::from_count(n - 1);
    let grid: Vec<F> = (0..n).map(|k| lower + h * F::from_count(k)).collect();
    // Hazard integrated against dΛ₀ so an infinite λ₀(0) is harmless.
    let sig: Vec<F> = grid
        .iter()
        .map(|&t| sigmoid(gp.evaluate_unchecked(t, x)))
        .collect();
    let mut cum = vec![F::zero(); n];
    for k in 1..n {
        let d_lambda0 =
            baseline.cumulative_hazard(grid[k]) - baseline.cumulative_hazard(grid[k - 1]);
        cum[k] = cum[k - 1] + d_lambda0 * (sig[k - 1] + sig[k]) / F::of(2.0);
    }
    let total = cum[n - 1];
    let u = F::open01(rng);
    if !(total > F::zero()) {
        return lower + (upper - lower) * u;
    }
    // Solve 1 - exp(-H) = u (1 - exp(-H_total)).
    let target = -(-(u * -(-total).exp_m1())).ln_1p();
    let k = cum.partition_point(|&c| c < target).clamp(1, n - 1);
    let (c0, c1) = (cum[k - 1], cum[k]);
    let frac = if c1 > c0 {
        (target - c0) / (c1 - c0)
    } else {
        F::zero()
    };
    (grid[k - 1] + frac * h).max(lower).min(upper)
}

/// Refreshes imputed event times of left- and interval-censored data.
pub fn refresh_imputations<F: Scalar, R: Rng + ?Sized>(
    dataset: &Dataset<F>,
    state: &mut AugmentedState<F>,
    max_attempts: usize,
    rng: &mut R,
) {
    if !dataset.data.iter().any(|d| d.censoring.needs_imputation()) {
        return;
    }
    let seed: u64 = rng.random();
    let baseline = state.baseline;
    let gp = &state.gp;
    state
        .latent
        .par_iter_mut()
        .with_min_len(16)
        .zip(dataset.data.par_iter())
        .enumerate()
        .for_each(|(i, (lat, d))| {
            let window = match d.censoring {
                Censoring::Left => Some((F::zero(), d.time)),
                Censoring::Interval { lower } => Some((lower, d.time)),
                _ => None,
            };
            if let Some((lo, hi)) = window {
                let mut r = substream(seed, i);
                let t = impute_interval_censored(
                    &baseline,
                    gp,
                    &d.covariates,
                    lo,
                    hi,
                    &mut r,
                    max_attempts,
                );
                // Keep the accepted point strictly positive.
                lat.accepted = Some(if t > F::zero() { t } else { hi * F::of(1e-12) });
            }
        });
}

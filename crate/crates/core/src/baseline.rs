//! Parametric baseline hazards.
//!
//! Two families are supported, both written so that a zero GP (σ = 1/2)
//! centres the random hazard on the familiar parametric form:
//!
//! * Weibull: `λ₀(t) = 2β t^(α-1)`, `Λ₀(t) = (2β/α) t^α`
//! * Exponential: `λ₀(t) = 2Ω`, `Λ₀(t) = 2Ω t`
//!
//! Gamma priors are shape/rate throughout. The scale parameter (β or Ω) has a
//! conjugate gamma update given the augmented point process; the Weibull
//! shape α is updated with a reflected random-walk Metropolis step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BaselinePriors, GammaPrior};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Weibull,
    Exponential,
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "weibull" => Ok(Self::Weibull),
            "exponential" => Ok(Self::Exponential),
            other => Err(Error::InvalidConfig(format!("unknown baseline '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct WeibullBaseline<F> {
    pub alpha: F,
    pub beta: F,
    pub prior_beta: GammaPrior<F>,
    pub alpha_lower: F,
    pub alpha_upper: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ExponentialBaseline<F> {
    pub omega: F,
    pub prior_omega: GammaPrior<F>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar", tag = "kind", rename_all = "lowercase")]
pub enum Baseline<F> {
    Weibull(WeibullBaseline<F>),
    Exponential(ExponentialBaseline<F>),
}

impl<F: Scalar> WeibullBaseline<F> {
    pub fn new(alpha: F, beta: F) -> Self {
        let priors = BaselinePriors::default();
        Self {
            alpha,
            beta,
            prior_beta: priors.scale,
            alpha_lower: priors.alpha_lower,
            alpha_upper: priors.alpha_upper,
        }
    }

    pub fn in_support(&self, alpha: F) -> bool {
        alpha > self.alpha_lower && alpha < self.alpha_upper
    }

    /// Log of the unnormalised conditional density of α:
    /// `(α-1) Σ ln p - (2β/α) Σ h^α` on the prior support.
    pub fn log_alpha_posterior(&self, alpha: F, sum_log_points: F, horizons: &[F]) -> F {
        if !self.in_support(alpha) {
            return F::neg_infinity();
        }
        let sum_pow: F = horizons.iter().map(|&h| h.powf(alpha)).sum();
        (alpha - F::one()) * sum_log_points - F::of(2.0) * self.beta / alpha * sum_pow
    }

    /// Log acceptance ratio for the move `from -> to` under the symmetric
    /// reflected proposal.
    pub fn alpha_log_ratio(&self, from: F, to: F, sum_log_points: F, horizons: &[F]) -> F {
        let lp_to = self.log_alpha_posterior(to, sum_log_points, horizons);
        if lp_to == F::neg_infinity() {
            return F::neg_infinity();
        }
        lp_to - self.log_alpha_posterior(from, sum_log_points, horizons)
    }

    /// One Metropolis step for α. Returns the updated baseline and whether the
    /// proposal was accepted.
    pub fn metropolis_update_alpha<R: Rng + ?Sized>(
        &self,
        all_points: &[F],
        horizons: &[F],
        step: F,
        rng: &mut R,
    ) -> (Self, bool) {
        let sum_log_points: F = all_points.iter().map(|p| p.ln()).sum();
        self.metropolis_update_alpha_with_stat(sum_log_points, horizons, step, rng)
    }

    /// As [`Self::metropolis_update_alpha`] with `Σ ln p` precomputed.
    pub fn metropolis_update_alpha_with_stat<R: Rng + ?Sized>(
        &self,
        sum_log_points: F,
        horizons: &[F],
        step: F,
        rng: &mut R,
    ) -> (Self, bool) {
        let proposal = reflect(
            self.alpha + step * F::std_normal(rng),
            self.alpha_lower,
            self.alpha_upper,
        );
        let log_ratio = self.alpha_log_ratio(self.alpha, proposal, sum_log_points, horizons);
        if accept(log_ratio, rng) {
            (
                Self {
                    alpha: proposal,
                    ..*self
                },
                true,
            )
        } else {
            (*self, false)
        }
    }
}

/// Metropolis accept/reject on a log ratio.
pub(crate) fn accept<F: Scalar, R: Rng + ?Sized>(log_ratio: F, rng: &mut R) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= F::zero() || F::open01(rng).ln() < log_ratio
}

/// Folds `x` into `[lo, hi]` by mirror reflection at both ends.
pub fn reflect<F: Scalar>(x: F, lo: F, hi: F) -> F {
    let width = hi - lo;
    let period = width + width;
    let mut y = (x - lo) % period;
    if y < F::zero() {
        y += period;
    }
    if y > width {
        y = period - y;
    }
    lo + y
}

impl<F: Scalar> ExponentialBaseline<F> {
    pub fn new(omega: F) -> Self {
        Self {
            omega,
            prior_omega: BaselinePriors::default().scale,
        }
    }
}

impl<F: Scalar> Baseline<F> {
    pub fn weibull(alpha: F, beta: F) -> Self {
        Baseline::Weibull(WeibullBaseline::new(alpha, beta))
    }

    pub fn exponential(omega: F) -> Self {
        Baseline::Exponential(ExponentialBaseline::new(omega))
    }

    pub fn kind(&self) -> BaselineKind {
        match self {
            Baseline::Weibull(_) => BaselineKind::Weibull,
            Baseline::Exponential(_) => BaselineKind::Exponential,
        }
    }

    /// Replace the priors with those from a configuration.
    pub fn with_priors(mut self, priors: &BaselinePriors<F>) -> Self {
        match &mut self {
            Baseline::Weibull(w) => {
                w.prior_beta = priors.scale;
                w.alpha_lower = priors.alpha_lower;
                w.alpha_upper = priors.alpha_upper;
            }
            Baseline::Exponential(e) => e.prior_omega = priors.scale,
        }
        self
    }

    /// β for Weibull, Ω for Exponential.
    pub fn scale(&self) -> F {
        match self {
            Baseline::Weibull(w) => w.beta,
            Baseline::Exponential(e) => e.omega,
        }
    }

    pub fn with_scale(mut self, scale: F) -> Self {
        match &mut self {
            Baseline::Weibull(w) => w.beta = scale,
            Baseline::Exponential(e) => e.omega = scale,
        }
        self
    }

    pub fn scale_prior(&self) -> GammaPrior<F> {
        match self {
            Baseline::Weibull(w) => w.prior_beta,
            Baseline::Exponential(e) => e.prior_omega,
        }
    }

    pub fn alpha(&self) -> Option<F> {
        match self {
            Baseline::Weibull(w) => Some(w.alpha),
            Baseline::Exponential(_) => None,
        }
    }

    /// `λ₀(t)`; errors on `t <= 0`.
    pub fn hazard_at(&self, t: F) -> Result<F> {
        if !(t > F::zero()) {
            return Err(Error::NonPositiveTime {
                index: 0,
                time: t.as_f64(),
            });
        }
        Ok(self.hazard_unchecked(t))
    }

    #[inline]
    pub(crate) fn hazard_unchecked(&self, t: F) -> F {
        match self {
            Baseline::Weibull(w) => F::of(2.0) * w.beta * t.powf(w.alpha - F::one()),
            Baseline::Exponential(e) => F::of(2.0) * e.omega,
        }
    }

    /// `Λ₀(t) = ∫₀ᵗ λ₀(s) ds`.
    #[inline]
    pub fn cumulative_hazard(&self, t: F) -> F {
        self.scale() * self.unit_cumulative_hazard(t)
    }

    /// `Λ₀(t)` with the scale parameter divided out: `2t^α/α` or `2t`.
    #[inline]
    pub fn unit_cumulative_hazard(&self, t: F) -> F {
        if t <= F::zero() {
            return F::zero();
        }
        match self {
            Baseline::Weibull(w) => F::of(2.0) * t.powf(w.alpha) / w.alpha,
            Baseline::Exponential(_) => F::of(2.0) * t,
        }
    }

    /// `Λ₀⁻¹(u)`.
    #[inline]
    pub fn inverse_cumulative_hazard(&self, u: F) -> F {
        if u <= F::zero() {
            return F::zero();
        }
        match self {
            Baseline::Weibull(w) => (u * w.alpha / (F::of(2.0) * w.beta)).powf(w.alpha.recip()),
            Baseline::Exponential(e) => u / (F::of(2.0) * e.omega),
        }
    }

    /// Conjugate update of the scale parameter.
    ///
    /// `total_point_count` is `|G| + |T|` over all data and `cumhaz_sum` is
    /// `Σ Λ₀(hᵢ)/scale` over every horizon. Draws from
    /// `Gamma(a₀ + M, b₀ + cumhaz_sum)` (shape/rate).
    pub fn gibbs_update_scale<R: Rng + ?Sized>(
        &self,
        total_point_count: usize,
        cumhaz_sum: F,
        rng: &mut R,
    ) -> Self {
        let post = self.scale_posterior(total_point_count, cumhaz_sum);
        self.with_scale(post.sample(rng))
    }

    pub fn scale_posterior(&self, total_point_count: usize, cumhaz_sum: F) -> GammaPrior<F> {
        let prior = self.scale_prior();
        GammaPrior::new(
            prior.shape + F::from_count(total_point_count),
            prior.rate + cumhaz_sum,
        )
    }
}

/// Maximum-likelihood starting values for the baseline.
///
/// The fitted hazard is the centred form (`β t^(α-1)` or `Ω`), matching the
/// model's hazard at a zero GP. `event_times` are the uncensored times and
/// `exposure_times` every observed horizon (including right-censored ones).
/// Falls back to the prior mean of the scale when there are no events.
pub fn fit_initial<F: Scalar>(
    kind: BaselineKind,
    event_times: &[F],
    exposure_times: &[F],
    priors: &BaselinePriors<F>,
) -> Baseline<F> {
    let n_events = F::from_count(event_times.len());
    let fallback_scale = priors.scale.mean();
    let baseline = match kind {
        BaselineKind::Exponential => {
            let total: F = exposure_times.iter().copied().sum();
            let omega = if event_times.is_empty() || !(total > F::zero()) {
                fallback_scale
            } else {
                n_events / total
            };
            Baseline::exponential(omega)
        }
        BaselineKind::Weibull => {
            let lo = F::of(0.05).max(priors.alpha_lower + F::of(1e-3));
            let hi = F::of(2.25).min(priors.alpha_upper - F::of(1e-3));
            if event_times.is_empty() || lo >= hi {
                let alpha = (lo + hi) / F::of(2.0);
                Baseline::weibull(alpha, fallback_scale)
            } else {
                let sum_log: F = event_times.iter().map(|t| t.ln()).sum();
                let profile = |alpha: F| {
                    let s: F = exposure_times.iter().map(|t| t.powf(alpha)).sum();
                    n_events * (n_events * alpha / s).ln() + (alpha - F::one()) * sum_log
                };
                let alpha = maximise_1d(profile, lo, hi);
                let s: F = exposure_times.iter().map(|t| t.powf(alpha)).sum();
                Baseline::weibull(alpha, n_events * alpha / s)
            }
        }
    };
    baseline.with_priors(priors)
}

/// Grid scan followed by golden-section refinement.
fn maximise_1d<F: Scalar>(f: impl Fn(F) -> F, lo: F, hi: F) -> F {
    let n = 64;
    let h = (hi - lo) / F::from_count(n);
    let best = (0..=n)
        .map(|i| lo + h * F::from_count(i))
        .map(|x| (x, f(x)))
        .filter(|(_, v)| v.is_finite())
        .fold(
            (lo, F::neg_infinity()),
            |a, b| if b.1 > a.1 { b } else { a },
        )
        .0;
    let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
    let g = F::of(0.618_033_988_749_894_9);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    (a + b) / F::of(2.0)
}

//! Observations, datasets, chain configuration and the augmented chain state.
//!
//! Covariates are used exactly as supplied. Negative values are accepted: the
//! interaction kernel multiplies them into the time kernels, so a covariate
//! sign flip flips the corresponding GP component. Scale matters for the same
//! reason; the CLI offers min-max scaling to [0, 1].

use serde::{Deserialize, Serialize};

use crate::baseline::{Baseline, BaselineKind};
use crate::error::{Error, Result};
use crate::kernel::RffGp;
use crate::scalar::Scalar;

/// Observation type of a survival time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub enum Censoring<F> {
    /// Event observed at `time`.
    Exact,
    /// Event happened after `time`.
    Right,
    /// Event happened at or before `time`.
    Left,
    /// Event happened inside `[lower, time]`.
    Interval { lower: F },
}

impl<F: Scalar> Censoring<F> {
    /// Status code used by the tabular file format.
    pub fn status_code(&self) -> u8 {
        match self {
            Censoring::Right => 0,
            Censoring::Exact => 1,
            Censoring::Left => 2,
            Censoring::Interval { .. } => 3,
        }
    }

    /// Whether the datum contributes an accepted point to the thinned process.
    pub fn has_event(&self) -> bool {
        !matches!(self, Censoring::Right)
    }

    pub fn needs_imputation(&self) -> bool {
        matches!(self, Censoring::Left | Censoring::Interval { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SurvivalDatum<F> {
    /// Event time, censoring time, or upper bound of the censoring window.
    pub time: F,
    pub censoring: Censoring<F>,
    pub covariates: Vec<F>,
}

impl<F: Scalar> SurvivalDatum<F> {
    pub fn exact(time: F, covariates: Vec<F>) -> Self {
        Self {
            time,
            censoring: Censoring::Exact,
            covariates,
        }
    }

    pub fn right(time: F, covariates: Vec<F>) -> Self {
        Self {
            time,
            censoring: Censoring::Right,
            covariates,
        }
    }

    pub fn left(time: F, covariates: Vec<F>) -> Self {
        Self {
            time,
            censoring: Censoring::Left,
            covariates,
        }
    }

    pub fn interval(lower: F, upper: F, covariates: Vec<F>) -> Self {
        Self {
            time: upper,
            censoring: Censoring::Interval { lower },
            covariates,
        }
    }

    /// Lower end of the window in which the event time is known to lie.
    pub fn lower_time(&self) -> F {
        match self.censoring {
            Censoring::Interval { lower } => lower,
            Censoring::Left => F::zero(),
            Censoring::Exact | Censoring::Right => self.time,
        }
    }

    fn check(&self, index: usize, dim: usize) -> Result<()> {
        if !(self.time > F::zero()) || !self.time.is_finite() {
            return Err(Error::NonPositiveTime {
                index,
                time: self.time.as_f64(),
            });
        }
        if self.covariates.len() != dim {
            return Err(Error::DimensionMismatch {
                index,
                expected: dim,
                found: self.covariates.len(),
            });
        }
        if let Some(column) = self.covariates.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteCovariate { index, column });
        }
        if let Censoring::Interval { lower } = self.censoring {
            if !(lower >= F::zero() && lower < self.time) {
                return Err(Error::BadInterval {
                    index,
                    lower: lower.as_f64(),
                    upper: self.time.as_f64(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Dataset<F> {
    pub data: Vec<SurvivalDatum<F>>,
    pub dim: usize,
    pub covariate_names: Option<Vec<String>>,
}

impl<F: Scalar> Dataset<F> {
    /// Builds and validates a dataset.
    pub fn new(data: Vec<SurvivalDatum<F>>, dim: usize) -> Result<Self> {
        validate_dataset(Self {
            data,
            dim,
            covariate_names: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        self.covariate_names = Some(names);
        self
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Subset by row indices, preserving order of `rows`.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            data: rows.iter().map(|&i| self.data[i].clone()).collect(),
            dim: self.dim,
            covariate_names: self.covariate_names.clone(),
        }
    }

    pub fn max_time(&self) -> F {
        self.data
            .iter()
            .map(|d| d.time)
            .fold(F::zero(), |a, b| a.max(b))
    }
}

/// Checks every dataset invariant and returns the dataset unchanged.
pub fn validate_dataset<F: Scalar>(raw: Dataset<F>) -> Result<Dataset<F>> {
    if raw.data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (i, datum) in raw.data.iter().enumerate() {
        datum.check(i, raw.dim)?;
    }
    if let Some(names) = &raw.covariate_names {
        if names.len() != raw.dim {
            return Err(Error::DimensionMismatch {
                index: 0,
                expected: raw.dim,
                found: names.len(),
            });
        }
    }
    Ok(raw)
}

/// Gamma prior, shape/rate parameterisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct GammaPrior<F> {
    pub shape: F,
    pub rate: F,
}

impl<F: Scalar> GammaPrior<F> {
    pub fn new(shape: F, rate: F) -> Self {
        Self { shape, rate }
    }

    pub fn mean(&self) -> F {
        self.shape / self.rate
    }

    pub fn variance(&self) -> F {
        self.shape / (self.rate * self.rate)
    }

    /// Log density up to the normalising constant.
    pub fn log_density_unnorm(&self, x: F) -> F {
        if x <= F::zero() {
            return F::neg_infinity();
        }
        (self.shape - F::one()) * x.ln() - self.rate * x
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> F {
        F::gamma(self.shape, self.rate, rng)
    }
}

/// Log-normal prior: `ln x ~ Normal(mu, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LogNormalPrior<F> {
    pub mu: F,
    pub sigma: F,
}

impl<F: Scalar> LogNormalPrior<F> {
    pub fn new(mu: F, sigma: F) -> Self {
        Self { mu, sigma }
    }

    /// Log density of `ln x` under the prior (i.e. with respect to d ln x).
    pub fn log_density_of_log(&self, log_x: F) -> F {
        let z = (log_x - self.mu) / self.sigma;
        -(z * z) / F::of(2.0)
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> F {
        F::normal(self.mu, self.sigma, rng).exp()
    }
}

/// Hyperpriors for the baseline hazard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct BaselinePriors<F> {
    /// Prior on β (Weibull) or Ω (Exponential).
    pub scale: GammaPrior<F>,
    /// Support of the uniform prior on the Weibull shape α.
    pub alpha_lower: F,
    pub alpha_upper: F,
}

impl<F: Scalar> Default for BaselinePriors<F> {
    fn default() -> Self {
        Self {
            scale: GammaPrior::new(F::one(), F::one()),
            alpha_lower: F::zero(),
            alpha_upper: F::of(2.3),
        }
    }
}

/// Hyperpriors for every kernel block (shared across blocks).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct KernelPriors<F> {
    pub lengthscale: LogNormalPrior<F>,
    pub variance: GammaPrior<F>,
}

impl<F: Scalar> Default for KernelPriors<F> {
    fn default() -> Self {
        Self {
            lengthscale: LogNormalPrior::new(F::zero(), F::one()),
            variance: GammaPrior::new(F::of(2.0), F::of(2.0)),
        }
    }
}

/// Random-walk step sizes for the Metropolis moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ProposalScales<F> {
    pub alpha: F,
    pub log_lengthscale: F,
    pub log_variance: F,
    /// Adapt the step sizes during burn-in; frozen afterwards.
    pub adapt: bool,
}

impl<F: Scalar> Default for ProposalScales<F> {
    fn default() -> Self {
        Self {
            alpha: F::of(0.1),
            log_lengthscale: F::of(0.3),
            log_variance: F::of(0.3),
            adapt: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ChainConfig<F> {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Random features per kernel block.
    pub m: usize,
    pub baseline_kind: BaselineKind,
    pub baseline_priors: BaselinePriors<F>,
    pub kernel_priors: KernelPriors<F>,
    pub proposals: ProposalScales<F>,
    /// Candidate budget for generative event-time simulation.
    pub max_candidates: usize,
    /// Rejection attempts before the grid-inversion fallback in imputation.
    pub impute_max_attempts: usize,
    /// When false the GP coefficients and hyperparameters are held fixed.
    pub update_gp: bool,
    /// When false the baseline parameters are held fixed.
    pub update_baseline: bool,
}

impl<F: Scalar> Default for ChainConfig<F> {
    fn default() -> Self {
        Self {
            n_iterations: 5000,
            burn_in: 2000,
            thin: 5,
            seed: 0,
            m: 50,
            baseline_kind: BaselineKind::Weibull,
            baseline_priors: BaselinePriors::default(),
            kernel_priors: KernelPriors::default(),
            proposals: ProposalScales::default(),
            max_candidates: 100_000,
            impute_max_attempts: 1000,
            update_gp: true,
            update_baseline: true,
        }
    }
}

impl<F: Scalar> ChainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_iterations == 0 {
            return fail("n_iterations must be positive");
        }
        if self.burn_in + 1 > self.n_iterations {
            return fail("burn_in must be below n_iterations");
        }
        if self.thin == 0 {
            return fail("thin must be positive");
        }
        if self.m == 0 {
            return fail("feature count m must be at least 1");
        }
        let bp = &self.baseline_priors;
        if !(bp.scale.shape > F::zero() && bp.scale.rate > F::zero()) {
            return fail("baseline scale prior must have positive shape and rate");
        }
        if !(bp.alpha_lower >= F::zero() && bp.alpha_lower < bp.alpha_upper) {
            return fail("alpha support must satisfy 0 <= lower < upper");
        }
        let kp = &self.kernel_priors;
        if !(kp.variance.shape > F::zero() && kp.variance.rate > F::zero()) {
            return fail("kernel variance prior must have positive shape and rate");
        }
        if !(kp.lengthscale.sigma > F::zero()) {
            return fail("lengthscale prior sigma must be positive");
        }
        if self.max_candidates == 0 || self.impute_max_attempts == 0 {
            return fail("candidate budgets must be positive");
        }
        Ok(())
    }
}

/// Latent variables attached to one observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LatentDatum<F> {
    /// Accepted point: the observed time, the imputed time, or `None` when
    /// the datum is right-censored.
    pub accepted: Option<F>,
    /// Rejected points of the thinned process, all below the horizon.
    pub rejected: Vec<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState<F: Scalar> {
    pub latent: Vec<LatentDatum<F>>,
    pub baseline: Baseline<F>,
    pub gp: RffGp<F>,
}

impl<F: Scalar> AugmentedState<F> {
    /// Fresh state: no rejected points, accepted points at observed times and
    /// at the window midpoints for left/interval data.
    pub fn initial(dataset: &Dataset<F>, baseline: Baseline<F>, gp: RffGp<F>) -> Self {
        let latent = dataset
            .data
            .iter()
            .map(|d| {
                let accepted = match d.censoring {
                    Censoring::Exact => Some(d.time),
                    Censoring::Right => None,
                    Censoring::Left | Censoring::Interval { .. } => {
                        Some((d.lower_time() + d.time) / F::of(2.0))
                    }
                };
                LatentDatum {
                    accepted,
                    rejected: Vec::new(),
                }
            })
            .collect();
        Self {
            latent,
            baseline,
            gp,
        }
    }

    /// Upper end of the window on which the datum's rejected points live.
    pub fn horizon(&self, dataset: &Dataset<F>, i: usize) -> F {
        self.latent[i].accepted.unwrap_or(dataset.data[i].time)
    }

    pub fn total_rejected(&self) -> usize {
        self.latent.iter().map(|l| l.rejected.len()).sum()
    }

    pub fn total_accepted(&self) -> usize {
        self.latent.iter().filter(|l| l.accepted.is_some()).count()
    }

    /// Structural invariants: points below horizons, imputed times inside
    /// their censoring windows.
    pub fn check_invariants(&self, dataset: &Dataset<F>) -> bool {
        if self.latent.len() != dataset.len() {
            return false;
        }
        self.latent.iter().zip(&dataset.data).all(|(lat, d)| {
            let accepted_ok = match (d.censoring, lat.accepted) {
                (Censoring::Exact, Some(t)) => t == d.time,
                (Censoring::Right, None) => true,
                (Censoring::Left, Some(t)) => t > F::zero() && t <= d.time,
                (Censoring::Interval { lower }, Some(t)) => t >= lower && t <= d.time,
                _ => false,
            };
            let h = lat.accepted.unwrap_or(d.time);
            accepted_ok && lat.rejected.iter().all(|&g| g >= F::zero() && g < h)
        })
    }
}

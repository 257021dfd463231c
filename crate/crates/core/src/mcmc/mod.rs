//! Gibbs sampler over the augmented model.
//!
//! One iteration runs, in order:
//!
//! 1. imputation of left/interval-censored event times,
//! 2. resampling of every rejected set `Gᵢ`,
//! 3. the conjugate scale update and (Weibull) the Metropolis α update,
//! 4. the GP sweep: elliptical slice on the RFF coefficients, then one
//!    Metropolis move per lengthscale and per variance.

mod diagnostics;
mod geweke;
pub(crate) mod likelihood;
pub(crate) mod slice;

pub use diagnostics::effective_sample_size;
pub use geweke::{geweke_joint_check, GewekeConfig, GewekeReport, GewekeStat};
pub use likelihood::log_likelihood_gp;
pub use slice::{elliptical_slice_angle, elliptical_slice_step, EllipseMove};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augmentation::{refresh_imputations, resample_rejected_sets};
use crate::baseline::{fit_initial, Baseline};
use crate::error::{Error, Result};
use crate::kernel::{sample_prior_rff, GpPoints, GpUpdater, KernelHypers, RffGp};
use crate::model::{AugmentedState, Censoring, ChainConfig, Dataset};
use crate::scalar::Scalar;

const TARGET_ACCEPTANCE: f64 = 0.44;
const ADAPT_BATCH: usize = 50;

/// One recorded posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Snapshot<F> {
    pub iteration: usize,
    pub baseline: Baseline<F>,
    pub gp: RffGp<F>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Diagnostics<F> {
    /// Augmented-data log-likelihood at every iteration.
    pub loglik_trace: Vec<F>,
    /// Effective sample size of the post-burn-in log-likelihood trace.
    pub loglik_ess: F,
    pub alpha_acceptance: F,
    pub lengthscale_acceptance: Vec<F>,
    pub variance_acceptance: Vec<F>,
    pub mean_rejected_points: F,
    pub mean_slice_evaluations: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PosteriorSamples<F> {
    pub dim: usize,
    pub snapshots: Vec<Snapshot<F>>,
    pub diagnostics: Diagnostics<F>,
}

impl<F: Scalar> PosteriorSamples<F> {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Posterior mean of the baseline scale parameter.
    pub fn mean_scale(&self) -> F {
        self.snapshots.iter().map(|s| s.baseline.scale()).sum::<F>() / F::from_count(self.len())
    }
}

#[derive(Debug, Clone, Default)]
struct Counter {
    accepted: usize,
    proposed: usize,
}

impl Counter {
    fn record(&mut self, ok: bool) {
        self.proposed += 1;
        self.accepted += ok as usize;
    }

    fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Random-walk step with batch-wise adaptation during burn-in.
#[derive(Debug, Clone)]
struct Tuned<F> {
    step: F,
    batch: Counter,
    total: Counter,
    batches: usize,
}

impl<F: Scalar> Tuned<F> {
    fn new(step: F) -> Self {
        Self {
            step,
            batch: Counter::default(),
            total: Counter::default(),
            batches: 0,
        }
    }

    fn record(&mut self, ok: bool) {
        self.batch.record(ok);
        self.total.record(ok);
    }

    fn adapt(&mut self) {
        if self.batch.proposed == 0 {
            return;
        }
        self.batches += 1;
        let gain = (1.0 / (self.batches as f64).sqrt()).min(0.5);
        let delta = gain * (self.batch.rate() - TARGET_ACCEPTANCE);
        self.step *= F::of(delta.exp());
        self.batch = Counter::default();
    }
}

/// Owns one chain: dataset reference, configuration and the augmented state.
pub struct Sampler<'a, F: Scalar> {
    dataset: &'a Dataset<F>,
    config: ChainConfig<F>,
    state: AugmentedState<F>,
    alpha: Tuned<F>,
    lengthscale: Vec<Tuned<F>>,
    variance: Vec<Tuned<F>>,
    iteration: usize,
    /// Mutation hook for sampler-validation tests: drop `M` from the
    /// posterior shape of the scale update.
    pub(crate) corrupt_scale_shape: bool,
    /// Run every update as if there were no data.
    pub(crate) ignore_data: bool,
}

/// Summary of one iteration.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo<F> {
    pub loglik: F,
    pub rejected_points: usize,
    pub slice_evaluations: usize,
}

impl<'a, F: Scalar> Sampler<'a, F> {
    /// Initial state: maximum-likelihood baseline, kernel hyperparameters at
    /// their prior centres, prior frequencies and zero coefficients.
    pub fn new<R: Rng + ?Sized>(
        dataset: &'a Dataset<F>,
        config: ChainConfig<F>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let events: Vec<F> = dataset
            .data
            .iter()
            .filter(|d| d.censoring.has_event())
            .map(|d| match d.censoring {
                Censoring::Interval { lower } => (lower + d.time) / F::of(2.0),
                _ => d.time,
            })
            .collect();
        let exposure: Vec<F> = dataset
            .data
            .iter()
            .map(|d| match d.censoring {
                Censoring::Interval { lower } => (lower + d.time) / F::of(2.0),
                _ => d.time,
            })
            .collect();
        let baseline = fit_initial(
            config.baseline_kind,
            &events,
            &exposure,
            &config.baseline_priors,
        );
        let blocks = dataset.dim + 1;
        let priors = config.kernel_priors;
        let hypers = KernelHypers {
            variance: vec![priors.variance.mean(); blocks],
            lengthscale: vec![priors.lengthscale.mu.exp(); blocks],
            priors,
        };
        let mut gp = sample_prior_rff(config.m, hypers, dataset.dim, rng)?;
        gp.coefficients.iter_mut().for_each(|c| *c = F::zero());
        Self::from_state(dataset, config, baseline, gp)
    }

    /// Start from explicit baseline and GP values.
    pub fn from_state(
        dataset: &'a Dataset<F>,
        config: ChainConfig<F>,
        baseline: Baseline<F>,
        gp: RffGp<F>,
    ) -> Result<Self> {
        config.validate()?;
        if gp.dim() != dataset.dim {
            return Err(Error::DimensionMismatch {
                index: 0,
                expected: dataset.dim,
                found: gp.dim(),
            });
        }
        if baseline.kind() != config.baseline_kind {
            return Err(Error::InvalidConfig(
                "baseline kind differs from configuration".into(),
            ));
        }
        let blocks = gp.blocks();
        let p = config.proposals;
        Ok(Self {
            dataset,
            state: AugmentedState::initial(
                dataset,
                baseline.with_priors(&config.baseline_priors),
                gp,
            ),
            alpha: Tuned::new(p.alpha),
            lengthscale: vec![Tuned::new(p.log_lengthscale); blocks],
            variance: vec![Tuned::new(p.log_variance); blocks],
            iteration: 0,
            corrupt_scale_shape: false,
            ignore_data: false,
            config,
        })
    }

    pub fn state(&self) -> &AugmentedState<F> {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut AugmentedState<F> {
        &mut self.state
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// One full Gibbs sweep.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StepInfo<F>> {
        let ds = self.dataset;
        if !self.ignore_data {
            refresh_imputations(ds, &mut self.state, self.config.impute_max_attempts, rng);
            resample_rejected_sets(ds, &mut self.state, rng);
        }
        if self.config.update_baseline {
            self.update_baseline(rng)?;
        }
        let points = if self.ignore_data {
            GpPoints::new(ds.dim)
        } else {
            GpPoints::from_state(ds, &self.state)
        };
        let mut slice_evaluations = 0;
        let gp_loglik = if self.config.update_gp {
            let gp = &mut self.state.gp;
            let mut up = GpUpdater::new(gp, &points);
            slice_evaluations = up.ess_coefficients(gp, rng);
            for j in 0..gp.blocks() {
                let ok = up.update_lengthscale(gp, j, self.lengthscale[j].step, rng);
                self.lengthscale[j].record(ok);
                let ok = up.update_variance(gp, j, self.variance[j].step, rng);
                self.variance[j].record(ok);
            }
            up.loglik()
        } else {
            GpUpdater::new(&self.state.gp, &points).loglik()
        };
        let loglik = gp_loglik + self.baseline_loglik();
        if !loglik.is_finite() {
            return Err(Error::NonFiniteLikelihood {
                iteration: self.iteration,
                context: self.dump_state(),
            });
        }
        self.iteration += 1;
        if self.config.proposals.adapt
            && self.iteration <= self.config.burn_in
            && self.iteration.is_multiple_of(ADAPT_BATCH)
        {
            self.alpha.adapt();
            self.lengthscale.iter_mut().for_each(Tuned::adapt);
            self.variance.iter_mut().for_each(Tuned::adapt);
        }
        Ok(StepInfo {
            loglik,
            rejected_points: self.state.total_rejected(),
            slice_evaluations,
        })
    }

    fn horizons(&self) -> Vec<F> {
        (0..self.dataset.len())
            .map(|i| self.state.horizon(self.dataset, i))
            .collect()
    }

    fn update_baseline<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let (count, horizons) = if self.ignore_data {
            (0, Vec::new())
        } else {
            (
                self.state.total_rejected() + self.state.total_accepted(),
                self.horizons(),
            )
        };
        let b = self.state.baseline;
        let unit: F = horizons.iter().map(|&h| b.unit_cumulative_hazard(h)).sum();
        if !unit.is_finite() {
            return Err(Error::NonFiniteLikelihood {
                iteration: self.iteration,
                context: format!(
                    "cumulative baseline exposure overflowed; {}",
                    self.dump_state()
                ),
            });
        }
        let mut post = b.scale_posterior(count, unit);
        if self.corrupt_scale_shape {
            post.shape = b.scale_prior().shape;
        }
        let scale = post.sample(rng);
        if !(scale > F::zero() && scale.is_finite()) {
            return Err(Error::NonFiniteLikelihood {
                iteration: self.iteration,
                context: format!("scale draw {scale} from {post:?}"),
            });
        }
        self.state.baseline = b.with_scale(scale);

        if let Baseline::Weibull(w) = self.state.baseline {
            let sum_log: F = if self.ignore_data {
                F::zero()
            } else {
                self.state
                    .latent
                    .iter()
                    .flat_map(|l| l.accepted.iter().chain(&l.rejected))
                    .map(|p| p.ln())
                    .sum()
            };
            let (next, ok) =
                w.metropolis_update_alpha_with_stat(sum_log, &horizons, self.alpha.step, rng);
            self.alpha.record(ok);
            self.state.baseline = Baseline::Weibull(next);
        }
        Ok(())
    }

    /// `Σ ln λ₀(p) - Σ Λ₀(hᵢ)` over the augmented points.
    fn baseline_loglik(&self) -> F {
        if self.ignore_data {
            return F::zero();
        }
        let b = &self.state.baseline;
        let points: F = self
            .state
            .latent
            .iter()
            .flat_map(|l| l.accepted.iter().chain(&l.rejected))
            .map(|&p| b.hazard_unchecked(p).ln())
            .sum();
        let cum: F = self
            .horizons()
            .iter()
            .map(|&h| b.cumulative_hazard(h))
            .sum();
        points - cum
    }

    fn dump_state(&self) -> String {
        let snap = Snapshot {
            iteration: self.iteration,
            baseline: self.state.baseline,
            gp: self.state.gp.clone(),
        };
        serde_json::to_string(&snap).unwrap_or_else(|e| format!("<unserialisable state: {e}>"))
    }

    /// Runs the configured number of iterations and collects thinned
    /// snapshots after burn-in.
    pub fn run<R: Rng + ?Sized>(mut self, rng: &mut R) -> Result<PosteriorSamples<F>> {
        let cfg = self.config.clone();
        let mut snapshots = Vec::new();
        let mut trace = Vec::with_capacity(cfg.n_iterations);
        let mut rejected_total = 0usize;
        let mut slice_total = 0usize;
        for it in 0..cfg.n_iterations {
            let info = self.step(rng)?;
            trace.push(info.loglik);
            if it >= cfg.burn_in {
                rejected_total += info.rejected_points;
                slice_total += info.slice_evaluations;
                if (it + 1 - cfg.burn_in).is_multiple_of(cfg.thin) {
                    snapshots.push(Snapshot {
                        iteration: it,
                        baseline: self.state.baseline,
                        gp: self.state.gp.clone(),
                    });
                }
            }
        }
        let kept = F::from_count(cfg.n_iterations - cfg.burn_in);
        let rate = |c: &Counter| F::of(c.rate());
        let diagnostics = Diagnostics {
            loglik_ess: effective_sample_size(&trace[cfg.burn_in..]),
            loglik_trace: trace,
            alpha_acceptance: rate(&self.alpha.total),
            lengthscale_acceptance: self.lengthscale.iter().map(|t| rate(&t.total)).collect(),
            variance_acceptance: self.variance.iter().map(|t| rate(&t.total)).collect(),
            mean_rejected_points: F::from_count(rejected_total) / kept,
            mean_slice_evaluations: F::from_count(slice_total) / kept,
        };
        Ok(PosteriorSamples {
            dim: self.dataset.dim,
            snapshots,
            diagnostics,
        })
    }
}

/// Fits the model: builds a sampler from the dataset and runs it.
pub fn run_chain<F: Scalar, R: Rng + ?Sized>(
    dataset: &Dataset<F>,
    config: &ChainConfig<F>,
    rng: &mut R,
) -> Result<PosteriorSamples<F>> {
    Sampler::new(dataset, config.clone(), rng)?.run(rng)
}

/// [`run_chain`] with the random stream derived from `config.seed`.
pub fn run_chain_seeded<F: Scalar>(
    dataset: &Dataset<F>,
    config: &ChainConfig<F>,
) -> Result<PosteriorSamples<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    run_chain(dataset, config, &mut rng)
}

//! Successive-conditional simulation check of the whole sampler.
//!
//! Alternating "draw data given parameters" with "one sampler transition
//! given data" leaves the prior invariant when every conditional update is
//! correct. The report compares chain moments with analytic prior moments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augmentation::sample_event_time;
use crate::baseline::{Baseline, BaselineKind, WeibullBaseline};
use crate::error::{Error, Result};
use crate::kernel::{sample_prior_rff, KernelHypers};
use crate::model::{
    BaselinePriors, ChainConfig, Dataset, KernelPriors, LatentDatum, ProposalScales, SurvivalDatum,
};
use crate::scalar::Scalar;

use super::Sampler;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeConfig {
    pub baseline_kind: BaselineKind,
    /// Observations per simulated dataset (kept small).
    pub n_data: usize,
    pub dim: usize,
    pub m: usize,
    pub alternations: usize,
    pub baseline_priors: BaselinePriors<f64>,
    pub kernel_priors: KernelPriors<f64>,
    /// Skip the data entirely so every update is a prior draw.
    pub flat_likelihood: bool,
    /// Drop the point count from the scale-update shape (mutation check).
    pub corrupt_scale_update: bool,
    pub batches: usize,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        Self {
            baseline_kind: BaselineKind::Exponential,
            n_data: 4,
            dim: 1,
            m: 3,
            alternations: 10_000,
            baseline_priors: BaselinePriors {
                // Keeps simulated times clear of under/overflow when α → 0.
                alpha_lower: 0.5,
                ..Default::default()
            },
            kernel_priors: KernelPriors::default(),
            flat_likelihood: false,
            corrupt_scale_update: false,
            batches: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeStat {
    pub name: String,
    pub prior_mean: f64,
    pub chain_mean: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeReport {
    pub stats: Vec<GewekeStat>,
    /// Simulated datasets that exhausted the candidate budget and were redrawn.
    pub redraws: usize,
    /// Alternation at which the chain produced a non-finite state, if any.
    /// Statistics then cover the alternations before it.
    pub diverged_at: Option<usize>,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.stats.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }
}

struct Tracked {
    name: String,
    prior_mean: f64,
    trace: Vec<f64>,
}

/// Standard error of a chain mean by non-overlapping batch means.
fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = (xs.len() / batches).max(1);
    let means: Vec<f64> = xs
        .chunks_exact(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let b = means.len() as f64;
    let m = means.iter().sum::<f64>() / b;
    let v = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1.0);
    (v / b).sqrt()
}

pub fn geweke_joint_check<R: Rng + ?Sized>(
    config: &GewekeConfig,
    rng: &mut R,
) -> Result<GewekeReport> {
    let blocks = config.dim + 1;
    let bp = config.baseline_priors;
    let kp = config.kernel_priors;

    // Parameters drawn from the prior.
    let scale = bp.scale.sample(rng);
    let baseline = match config.baseline_kind {
        BaselineKind::Exponential => Baseline::exponential(scale),
        BaselineKind::Weibull => Baseline::Weibull(WeibullBaseline::new(
            f64::uniform(bp.alpha_lower, bp.alpha_upper, rng),
            scale,
        )),
    }
    .with_priors(&bp);
    let hypers = KernelHypers::sample_prior(blocks, kp, rng);
    let gp = sample_prior_rff(config.m, hypers, config.dim, rng)?;

    let covariates: Vec<Vec<f64>> = (0..config.n_data)
        .map(|_| {
            (0..config.dim)
                .map(|_| f64::uniform(0.0, 1.0, rng))
                .collect()
        })
        .collect();
    let placeholder = Dataset::new(
        covariates
            .iter()
            .map(|x| SurvivalDatum::exact(1.0, x.clone()))
            .collect(),
        config.dim,
    )?;

    let chain_config = ChainConfig {
        n_iterations: 1,
        burn_in: 0,
        thin: 1,
        m: config.m,
        baseline_kind: config.baseline_kind,
        baseline_priors: bp,
        kernel_priors: kp,
        proposals: ProposalScales {
            adapt: false,
            ..Default::default()
        },
        ..Default::default()
    };

    let mut tracked = vec![Tracked {
        name: "scale".into(),
        prior_mean: bp.scale.mean(),
        trace: Vec::new(),
    }];
    if config.baseline_kind == BaselineKind::Weibull {
        tracked.push(Tracked {
            name: "alpha".into(),
            prior_mean: (bp.alpha_lower + bp.alpha_upper) / 2.0,
            trace: Vec::new(),
        });
    }
    for j in 0..blocks {
        tracked.push(Tracked {
            name: format!("variance[{j}]"),
            prior_mean: kp.variance.mean(),
            trace: Vec::new(),
        });
        tracked.push(Tracked {
            name: format!("log_lengthscale[{j}]"),
            prior_mean: kp.lengthscale.mu,
            trace: Vec::new(),
        });
        tracked.push(Tracked {
            name: format!("coef_norm2[{j}]"),
            // E‖wⱼ‖² = 2m · E[σⱼ²]/m.
            prior_mean: 2.0 * kp.variance.mean(),
            trace: Vec::new(),
        });
    }

    let mut dataset = placeholder;
    let mut current_baseline = baseline;
    let mut current_gp = gp;
    let mut redraws = 0;
    let mut diverged_at = None;
    for alternation in 0..config.alternations {
        // (a) data given parameters, with the rejected prefix as latent state.
        let mut latent = Vec::with_capacity(config.n_data);
        if !config.flat_likelihood {
            for (i, x) in covariates.iter().enumerate() {
                let (t, g) = loop {
                    match sample_event_time(&current_baseline, &current_gp, x, rng, 100_000) {
                        Ok((t, g)) if t > 0.0 && t.is_finite() => break (t, g),
                        _ => redraws += 1,
                    }
                };
                dataset.data[i].time = t;
                latent.push(LatentDatum {
                    accepted: Some(t),
                    rejected: g,
                });
            }
        }
        // (b) one transition given data.
        let mut sampler = Sampler::from_state(
            &dataset,
            chain_config.clone(),
            current_baseline,
            current_gp.clone(),
        )?;
        sampler.corrupt_scale_shape = config.corrupt_scale_update;
        sampler.ignore_data = config.flat_likelihood;
        if !config.flat_likelihood {
            sampler.state_mut().latent = latent;
        }
        match sampler.step(rng) {
            Ok(_) => {}
            Err(Error::NonFiniteLikelihood { .. }) if alternation >= 2 * config.batches => {
                diverged_at = Some(alternation);
                break;
            }
            Err(e) => return Err(e),
        }
        current_baseline = sampler.state().baseline;
        current_gp = sampler.state().gp.clone();

        let mut k = 0;
        tracked[k].trace.push(current_baseline.scale());
        k += 1;
        if let Some(a) = current_baseline.alpha() {
            tracked[k].trace.push(a);
            k += 1;
        }
        for j in 0..blocks {
            tracked[k].trace.push(current_gp.hypers.variance[j]);
            tracked[k + 1]
                .trace
                .push(current_gp.hypers.lengthscale[j].ln());
            let norm2: f64 = current_gp.block_coefficients(j).iter().map(|c| c * c).sum();
            tracked[k + 2].trace.push(norm2);
            k += 3;
        }
    }

    let stats = tracked
        .into_iter()
        .map(|t| {
            let n = t.trace.len() as f64;
            let chain_mean = t.trace.iter().sum::<f64>() / n;
            let std_error = batch_means_se(&t.trace, config.batches);
            GewekeStat {
                z: (chain_mean - t.prior_mean) / std_error,
                name: t.name,
                prior_mean: t.prior_mean,
                chain_mean,
                std_error,
            }
        })
        .collect();
    Ok(GewekeReport {
        stats,
        redraws,
        diverged_at,
    })
}

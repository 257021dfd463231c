//! Bayesian survival analysis with a Gaussian-process-modulated hazard.
//!
//! The hazard of an individual with covariates `x` is
//! `λ(t | x) = λ₀(t) · σ(l(t, x))`, where `λ₀` is a parametric baseline
//! (Weibull or exponential), `σ` is the logistic function and `l` is a
//! Gaussian process with an additive-product kernel approximated by random
//! Fourier features. Inference runs a Gibbs sampler on the process augmented
//! with the points removed by thinning, which makes the likelihood tractable
//! under right, left and interval censoring.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision for the common cases.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augmentation;
pub mod baseline;
pub mod error;
pub mod io;
pub mod kernel;
pub mod mcmc;
pub mod model;
pub mod predict;
pub mod scalar;

pub use baseline::{Baseline, BaselineKind, ExponentialBaseline, WeibullBaseline};
pub use error::{Error, Result};
pub use kernel::{KernelHypers, RffGp};
pub use mcmc::{run_chain, run_chain_seeded, PosteriorSamples, Sampler, Snapshot};
pub use model::{
    AugmentedState, BaselinePriors, Censoring, ChainConfig, Dataset, GammaPrior, KernelPriors,
    LatentDatum, LogNormalPrior, ProposalScales, SurvivalDatum,
};
pub use predict::{
    concordance_index, cross_validate, kaplan_meier, survival_curve, KaplanMeier, SurvivalCurve,
};
pub use scalar::Scalar;

pub type Dataset64 = Dataset<f64>;
pub type SurvivalDatum64 = SurvivalDatum<f64>;
pub type ChainConfig64 = ChainConfig<f64>;
pub type Baseline64 = Baseline<f64>;
pub type RffGp64 = RffGp<f64>;
pub type PosteriorSamples64 = PosteriorSamples<f64>;
pub type SurvivalCurve64 = SurvivalCurve<f64>;

pub type Dataset32 = Dataset<f32>;
pub type SurvivalDatum32 = SurvivalDatum<f32>;
pub type ChainConfig32 = ChainConfig<f32>;
pub type Baseline32 = Baseline<f32>;
pub type RffGp32 = RffGp<f32>;
pub type PosteriorSamples32 = PosteriorSamples<f32>;
pub type SurvivalCurve32 = SurvivalCurve<f32>;

//! Time-covariate interaction kernel and its random Fourier feature
//! approximation.
//!
//! The kernel is `K((t,X),(s,Y)) = K₀(t,s) + Σⱼ XⱼYⱼ Kⱼ(t,s)` with every `Kⱼ`
//! squared exponential in time. The approximate GP is
//!
//! ```text
//! g(t, X) = g₀(t) + Σⱼ Xⱼ gⱼ(t),   gⱼ(t) = Σₖ aₖʲ cos(sₖʲ t) + bₖʲ sin(sₖʲ t)
//! ```
//!
//! with `aₖʲ, bₖʲ ~ N(0, σⱼ²/m)` and `sₖʲ ~ N(0, 1/(2π φⱼ))`. The `1/m` factor
//! keeps `Var gⱼ(t) = σⱼ²` for every `m`. The frequency variance
//! `1/(2πφⱼ)` implies the stationary covariance `σⱼ² exp(-τ²/(4πφⱼ))`, which
//! is what [`implied_se_kernel`] returns for `freq_var = 1/(2πφⱼ)`.

mod update;

pub use update::{update_hypers_and_coeffs, GpMoveStats, GpPoints, GpUpdater};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::KernelPriors;
use crate::scalar::Scalar;

/// Hyperparameters for the `d + 1` kernel blocks (block 0 is the pure time
/// kernel, block `j` multiplies covariate `j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct KernelHypers<F> {
    pub variance: Vec<F>,
    pub lengthscale: Vec<F>,
    pub priors: KernelPriors<F>,
}

impl<F: Scalar> KernelHypers<F> {
    /// Same variance and lengthscale on every block.
    pub fn uniform(blocks: usize, variance: F, lengthscale: F) -> Self {
        Self {
            variance: vec![variance; blocks],
            lengthscale: vec![lengthscale; blocks],
            priors: KernelPriors::default(),
        }
    }

    /// Draw every hyperparameter from its prior.
    pub fn sample_prior<R: Rng + ?Sized>(
        blocks: usize,
        priors: KernelPriors<F>,
        rng: &mut R,
    ) -> Self {
        let mut variance = Vec::with_capacity(blocks);
        let mut lengthscale = Vec::with_capacity(blocks);
        for _ in 0..blocks {
            variance.push(priors.variance.sample(rng));
            lengthscale.push(priors.lengthscale.sample(rng));
        }
        Self {
            variance,
            lengthscale,
            priors,
        }
    }

    pub fn blocks(&self) -> usize {
        self.variance.len()
    }
}

/// Frequency variance implied by a lengthscale: `1/(2πφ)`.
#[inline]
pub fn frequency_variance<F: Scalar>(lengthscale: F) -> F {
    (F::TAU() * lengthscale).recip()
}

/// `sigma2 · exp(-freq_var · τ²/2)`: the covariance of a random-feature
/// expansion with Gaussian frequencies of variance `freq_var`, as `m → ∞`.
#[inline]
pub fn implied_se_kernel<F: Scalar>(tau: F, sigma2: F, freq_var: F) -> F {
    sigma2 * (-freq_var * tau * tau / F::of(2.0)).exp()
}

/// Exact composite kernel between `(t, X)` and `(s, Y)`.
pub fn composite_kernel<F: Scalar>(
    t: F,
    x: &[F],
    s: F,
    y: &[F],
    hypers: &KernelHypers<F>,
) -> Result<F> {
    let d = hypers.blocks() - 1;
    if x.len() != d || y.len() != d {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: d,
            found: if x.len() != d { x.len() } else { y.len() },
        });
    }
    let tau = t - s;
    let block = |j: usize| {
        implied_se_kernel(
            tau,
            hypers.variance[j],
            frequency_variance(hypers.lengthscale[j]),
        )
    };
    let mut k = block(0);
    for j in 0..d {
        k += x[j] * y[j] * block(j + 1);
    }
    Ok(k)
}

/// Random Fourier feature approximation of the GP.
///
/// Coefficients are stored block by block: block `j` occupies
/// `coefficients[2mj .. 2m(j+1)]`, cosine weights first, then sine weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct RffGp<F> {
    pub m: usize,
    /// `(d+1)·m` frequencies, block-major.
    pub frequencies: Vec<F>,
    /// `(d+1)·2m` coefficients.
    pub coefficients: Vec<F>,
    pub hypers: KernelHypers<F>,
}

impl<F: Scalar> RffGp<F> {
    pub fn blocks(&self) -> usize {
        self.hypers.blocks()
    }

    /// Covariate dimension `d`.
    pub fn dim(&self) -> usize {
        self.blocks() - 1
    }

    pub fn block_frequencies(&self, j: usize) -> &[F] {
        &self.frequencies[j * self.m..(j + 1) * self.m]
    }

    pub fn block_coefficients(&self, j: usize) -> &[F] {
        &self.coefficients[2 * j * self.m..2 * (j + 1) * self.m]
    }

    /// Cosine coefficients `aₖʲ`.
    pub fn cos_coefficients(&self, j: usize) -> &[F] {
        &self.block_coefficients(j)[..self.m]
    }

    /// Sine coefficients `bₖʲ`.
    pub fn sin_coefficients(&self, j: usize) -> &[F] {
        &self.block_coefficients(j)[self.m..]
    }

    /// Prior standard deviation of each coefficient in block `j`.
    pub fn coefficient_sd(&self, j: usize) -> F {
        (self.hypers.variance[j] / F::from_count(self.m)).sqrt()
    }

    /// A GP that is identically `value` everywhere (one zero-frequency
    /// feature in the time block, all covariate blocks zero).
    pub fn constant(value: F, dim: usize) -> Self {
        let blocks = dim + 1;
        let mut coefficients = vec![F::zero(); 2 * blocks];
        coefficients[0] = value;
        Self {
            m: 1,
            frequencies: vec![F::zero(); blocks],
            coefficients,
            hypers: KernelHypers::uniform(blocks, F::one(), F::one()),
        }
    }

    /// `gⱼ(t)`.
    #[inline]
    pub fn block_value(&self, j: usize, t: F) -> F {
        let freqs = self.block_frequencies(j);
        let coefs = self.block_coefficients(j);
        let (a, b) = coefs.split_at(self.m);
        let mut acc = F::zero();
        for k in 0..self.m {
            let (s, c) = (freqs[k] * t).sin_cos();
            acc += a[k] * c + b[k] * s;
        }
        acc
    }

    /// `g(t, X) = g₀(t) + Σⱼ Xⱼ gⱼ(t)`.
    pub fn evaluate(&self, t: F, x: &[F]) -> Result<F> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                index: 0,
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.evaluate_unchecked(t, x))
    }

    #[inline]
    pub(crate) fn evaluate_unchecked(&self, t: F, x: &[F]) -> F {
        let mut g = self.block_value(0, t);
        for (j, &xj) in x.iter().enumerate() {
            if xj != F::zero() {
                g += xj * self.block_value(j + 1, t);
            }
        }
        g
    }
}

/// Fresh frequencies and coefficients drawn from the prior given `hypers`.
pub fn sample_prior_rff<F: Scalar, R: Rng + ?Sized>(
    m: usize,
    hypers: KernelHypers<F>,
    d: usize,
    rng: &mut R,
) -> Result<RffGp<F>> {
    if m == 0 {
        return Err(Error::InvalidConfig(
            "feature count m must be at least 1".into(),
        ));
    }
    if hypers.blocks() != d + 1 || hypers.lengthscale.len() != d + 1 {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: d + 1,
            found: hypers.blocks(),
        });
    }
    let blocks = d + 1;
    let mut frequencies = Vec::with_capacity(blocks * m);
    let mut coefficients = Vec::with_capacity(blocks * 2 * m);
    for j in 0..blocks {
        let freq_sd = frequency_variance(hypers.lengthscale[j]).sqrt();
        frequencies.extend((0..m).map(|_| freq_sd * F::std_normal(rng)));
        let coef_sd = (hypers.variance[j] / F::from_count(m)).sqrt();
        coefficients.extend((0..2 * m).map(|_| coef_sd * F::std_normal(rng)));
    }
    Ok(RffGp {
        m,
        frequencies,
        coefficients,
        hypers,
    })
}

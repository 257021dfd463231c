//! Floating-point abstraction shared by every numeric routine in the crate.
//!
//! All model code is written against [`Scalar`], which is implemented for
//! `f32` and `f64`. Random variate generation is routed through the trait so
//! that generic code does not need to carry `Distribution<F>` bounds around.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// floating point: f32 or f64
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn of(x: f64) -> Self;

    fn from_count(n: usize) -> Self {
        Self::of(n as f64)
    }

    fn as_f64(self) -> f64;

    /// Uniform draw on the open interval (0, 1).
    fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Unit-rate exponential draw.
    fn exp1<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma draw with shape/rate parameterisation.
    fn gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self;

    fn normal<R: Rng + ?Sized>(mean: Self, sd: Self, rng: &mut R) -> Self {
        mean + sd * Self::std_normal(rng)
    }

    fn uniform<R: Rng + ?Sized>(lo: Self, hi: Self, rng: &mut R) -> Self {
        lo + (hi - lo) * Self::open01(rng)
    }
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <Open01 as Distribution<$t>>::sample(&Open01, rng)
            }

            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <StandardNormal as Distribution<$t>>::sample(&StandardNormal, rng)
            }

            #[inline]
            fn exp1<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <Exp1 as Distribution<$t>>::sample(&Exp1, rng)
            }

            fn gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self {
                Gamma::new(shape, 1.0 / rate)
                    .expect("gamma parameters must be positive and finite")
                    .sample(rng)
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Logistic sigmoid, evaluated without overflow for either sign of `x`.
#[inline]
pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `ln σ(x)`, computed as `-softplus(-x)`.
#[inline]
pub fn log_sigmoid<F: Scalar>(x: F) -> F {
    -softplus(-x)
}

/// `ln(1 - σ(x)) = ln σ(-x)`.
#[inline]
pub fn log1m_sigmoid<F: Scalar>(x: F) -> F {
    -softplus(x)
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

//! Synthetic data generators with known ground truth.

use rand::Rng;
use statrs::function::erf::erfc;

use crate::model::{Dataset, SurvivalDatum};
use crate::scalar::Scalar;

/// Standard normal upper tail `1 - Φ(z)`.
fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// A finite normal mixture truncated to the positive half-line.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMixture {
    /// `(weight, mean, sd)` triples.
    pub components: Vec<(f64, f64, f64)>,
}

impl TruncatedMixture {
    fn untruncated_tail(&self, t: f64) -> f64 {
        self.components
            .iter()
            .map(|&(w, mu, sd)| w * upper_tail((t - mu) / sd))
            .sum()
    }

    /// `P(T > t)` for the law restricted to `t ≥ 0`.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        self.untruncated_tail(t) / self.untruncated_tail(0.0)
    }

    /// Rejection sampling from the untruncated mixture.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u = f64::open01(rng);
            let mut acc = 0.0;
            let mut chosen = self.components[self.components.len() - 1];
            for &c in &self.components {
                acc += c.0;
                if u < acc {
                    chosen = c;
                    break;
                }
            }
            let t = f64::normal(chosen.1, chosen.2, rng);
            if t > 0.0 {
                return t;
            }
        }
    }
}

/// True survival functions of the two groups of the crossing experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingTruth {
    pub group0: TruncatedMixture,
    pub group1: TruncatedMixture,
}

impl Default for CrossingTruth {
    fn default() -> Self {
        Self {
            group0: TruncatedMixture {
                components: vec![(1.0, 3.0, 0.8)],
            },
            group1: TruncatedMixture {
                components: vec![(0.4, 4.0, 1.0), (0.6, 2.0, 0.8)],
            },
        }
    }
}

impl CrossingTruth {
    pub fn survival(&self, group: usize, t: f64) -> f64 {
        match group {
            0 => self.group0.survival(t),
            _ => self.group1.survival(t),
        }
    }

    /// Rows `(t, S₀(t), S₁(t))` on the given grid.
    pub fn tabulate(&self, grid: &[f64]) -> Vec<(f64, f64, f64)> {
        grid.iter()
            .map(|&t| (t, self.survival(0, t), self.survival(1, t)))
            .collect()
    }

    /// Sign changes of `S₀ - S₁` on `(lo, hi)`, each located by bisection.
    pub fn crossings(&self, lo: f64, hi: f64) -> Vec<f64> {
        let diff = |t: f64| self.survival(0, t) - self.survival(1, t);
        sign_changes(diff, lo, hi, 2000)
    }
}

/// Roots of `f` on `(lo, hi)` found by scanning `steps` cells and bisecting
/// each sign change.
pub fn sign_changes(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let h = (hi - lo) / steps as f64;
    let mut roots = Vec::new();
    let mut a = lo;
    let mut fa = f(a);
    for k in 1..=steps {
        let b = lo + h * k as f64;
        let fb = f(b);
        if fa == 0.0 || fa.signum() != fb.signum() && fb != 0.0 {
            let (mut x0, mut x1) = (a, b);
            for _ in 0..80 {
                let mid = 0.5 * (x0 + x1);
                if f(x0).signum() == f(mid).signum() {
                    x0 = mid;
                } else {
                    x1 = mid;
                }
            }
            roots.push(0.5 * (x0 + x1));
        }
        a = b;
        fa = fb;
    }
    roots
}

/// Two-group crossing-survival data: `n_per_group` draws from each truncated
/// law, a group indicator covariate and `noisy_covariates` uniform-[0, 1]
/// nuisance covariates. Every time is observed.
pub fn generate_crossing_synthetic<F: Scalar, R: Rng + ?Sized>(
    n_per_group: usize,
    noisy_covariates: usize,
    rng: &mut R,
) -> (Dataset<F>, CrossingTruth) {
    let truth = CrossingTruth::default();
    let mut data = Vec::with_capacity(2 * n_per_group);
    for group in 0..2 {
        let law = if group == 0 {
            &truth.group0
        } else {
            &truth.group1
        };
        for _ in 0..n_per_group {
            let t = law.sample(rng);
            let mut x = vec![F::from_count(group)];
            x.extend((0..noisy_covariates).map(|_| F::of(f64::open01(rng))));
            data.push(SurvivalDatum::exact(F::of(t), x));
        }
    }
    let mut names = vec!["group".to_string()];
    names.extend((1..=noisy_covariates).map(|j| format!("noise{j}")));
    let ds = Dataset::new(data, 1 + noisy_covariates)
        .expect("generated times are positive")
        .with_names(names);
    (ds, truth)
}

/// Proportional-hazards data with one covariate `x ~ U(0, 1)`:
/// `T ~ Exponential(rate · exp(effect · (x - 1/2)))`, right-censored by an
/// independent `Exponential(censor_rate)` time when `censor_rate > 0`.
pub fn generate_proportional_hazards<F: Scalar, R: Rng + ?Sized>(
    n: usize,
    rate: f64,
    effect: f64,
    censor_rate: f64,
    rng: &mut R,
) -> Dataset<F> {
    let data = (0..n)
        .map(|_| {
            let x = f64::open01(rng);
            let t = f64::exp1(rng) / (rate * (effect * (x - 0.5)).exp());
            let c = if censor_rate > 0.0 {
                f64::exp1(rng) / censor_rate
            } else {
                f64::INFINITY
            };
            if t <= c {
                SurvivalDatum::exact(F::of(t), vec![F::of(x)])
            } else {
                SurvivalDatum::right(F::of(c), vec![F::of(x)])
            }
        })
        .collect();
    Dataset::new(data, 1)
        .expect("generated times are positive")
        .with_names(vec!["x".into()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn survival_starts_at_one_and_decreases() {
        let truth = CrossingTruth::default();
        for g in 0..2 {
            assert_eq!(truth.survival(g, 0.0), 1.0);
            let mut prev = 1.0;
            for i in 1..200 {
                let s = truth.survival(g, i as f64 * 0.05);
                assert!(s <= prev);
                prev = s;
            }
            assert!(truth.survival(g, 12.0) < 1e-6);
        }
    }

    #[test]
    fn truth_curves_cross_once() {
        let roots = CrossingTruth::default().crossings(0.5, 6.0);
        assert_eq!(roots.len(), 1, "{roots:?}");
        assert!(roots[0] > 2.0 && roots[0] < 4.0, "{roots:?}");
    }

    #[test]
    fn group0_mean_matches_truncated_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let law = CrossingTruth::default().group0;
        let n = 100_000;
        let mean = (0..n).map(|_| law.sample(&mut rng)).sum::<f64>() / n as f64;
        // Truncated-normal mean by quadrature of the survival function.
        let steps = 20_000;
        let h = 12.0 / steps as f64;
        let quad: f64 = (0..steps)
            .map(|k| {
                let a = k as f64 * h;
                0.5 * h * (law.survival(a) + law.survival(a + h))
            })
            .sum();
        assert!((quad - 3.0).abs() < 1e-3, "{quad}");
        let se = 0.8 / (n as f64).sqrt();
        assert!((mean - quad).abs() < 3.0 * se, "{mean} vs {quad}");
    }

    #[test]
    fn crossing_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (ds, _) = generate_crossing_synthetic::<f64, _>(150, 3, &mut rng);
        assert_eq!(ds.len(), 300);
        assert_eq!(ds.dim, 4);
        let (ds, _) = generate_crossing_synthetic::<f64, _>(25, 0, &mut rng);
        assert_eq!(ds.dim, 1);
        assert!(ds.data.iter().all(|d| d.time > 0.0));
    }
}

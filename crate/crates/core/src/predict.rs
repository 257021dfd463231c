//! Posterior hazard and survival curves, concordance index, Kaplan-Meier and
//! cross-validation.
//!
//! Hazards are integrated against `dΛ₀`: on each subinterval
//! `∫ λ₀ σ(g) ≈ ΔΛ₀ · (σ(g(a)) + σ(g(b)))/2`. This is the trapezoid rule for
//! the bounded factor `σ(g)`, so a Weibull baseline with `α < 1` (infinite
//! `λ₀(0)`) is handled without special cases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::RffGp;
use crate::mcmc::{run_chain, PosteriorSamples, Snapshot};
use crate::model::{Censoring, ChainConfig, Dataset};
use crate::scalar::{sigmoid, Scalar};

/// Minimum number of quadrature subintervals over `[0, max grid]`.
pub const MIN_SUBINTERVALS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SurvivalCurve<F> {
    pub grid: Vec<F>,
    pub mean: Vec<F>,
    pub lower: Vec<F>,
    pub upper: Vec<F>,
}

/// GP values at `t0 + k·h`, `k = 0..count`, using the angle-addition
/// recurrence per feature.
pub fn gp_on_uniform_grid<F: Scalar>(gp: &RffGp<F>, x: &[F], t0: F, h: F, count: usize) -> Vec<F> {
    let mut out = vec![F::zero(); count];
    for j in 0..gp.blocks() {
        let w = if j == 0 { F::one() } else { x[j - 1] };
        if w == F::zero() {
            continue;
        }
        let freqs = gp.block_frequencies(j);
        let a = gp.cos_coefficients(j);
        let b = gp.sin_coefficients(j);
        for k in 0..gp.m {
            let (mut s, mut c) = (freqs[k] * t0).sin_cos();
            let (ds, dc) = (freqs[k] * h).sin_cos();
            let (ak, bk) = (a[k] * w, b[k] * w);
            for (i, o) in out.iter_mut().enumerate() {
                if i % 64 == 0 && i > 0 {
                    // Resynchronise to bound drift.
                    let (s2, c2) = (freqs[k] * (t0 + h * F::from_count(i))).sin_cos();
                    s = s2;
                    c = c2;
                }
                *o += ak * c + bk * s;
                let nc = c * dc - s * ds;
                s = s * dc + c * ds;
                c = nc;
            }
        }
    }
    out
}

/// `λ₀(t)·σ(g(t, X))` on a grid of positive times.
pub fn hazard_curve<F: Scalar>(sample: &Snapshot<F>, x: &[F], grid: &[F]) -> Result<Vec<F>> {
    grid.iter()
        .map(|&t| Ok(sample.baseline.hazard_at(t)? * sigmoid(sample.gp.evaluate(t, x)?)))
        .collect()
}

fn check_grid<F: Scalar>(grid: &[F]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Grid("grid is empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid[0] < F::zero() {
        return Err(Error::Grid(
            "grid values must be finite and nonnegative".into(),
        ));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Grid("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Cumulative hazard of one snapshot at every grid point, integrated from 0.
/// Each grid interval is split into at least `ceil(min_sub / intervals)`
/// uniform pieces.
pub fn cumulative_hazard_curve<F: Scalar>(
    sample: &Snapshot<F>,
    x: &[F],
    grid: &[F],
    min_sub: usize,
) -> Vec<F> {
    let mut knots = Vec::with_capacity(grid.len() + 1);
    if grid[0] > F::zero() {
        knots.push(F::zero());
    }
    knots.extend_from_slice(grid);
    let intervals = (knots.len() - 1).max(1);
    let per = min_sub.div_ceil(intervals).max(1);
    let b = &sample.baseline;
    let mut h_at_knots = Vec::with_capacity(knots.len());
    h_at_knots.push(F::zero());
    let mut acc = F::zero();
    for w in knots.windows(2) {
        let step = (w[1] - w[0]) / F::from_count(per);
        let sig: Vec<F> = gp_on_uniform_grid(&sample.gp, x, w[0], step, per + 1)
            .into_iter()
            .map(sigmoid)
            .collect();
        let mut prev_cum = b.cumulative_hazard(w[0]);
        for i in 1..=per {
            let t = if i == per {
                w[1]
            } else {
                w[0] + step * F::from_count(i)
            };
            let cum = b.cumulative_hazard(t);
            acc += (cum - prev_cum) * (sig[i - 1] + sig[i]) / F::of(2.0);
            prev_cum = cum;
        }
        h_at_knots.push(acc);
    }
    if grid[0] > F::zero() {
        h_at_knots.remove(0);
    }
    h_at_knots
}

/// Type-7 sample quantile of sorted data.
fn quantile_sorted<F: Scalar>(sorted: &[F], q: f64) -> F {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = F::of(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Posterior survival curve with pointwise 2.5% / 97.5% bands.
pub fn survival_curve<F: Scalar>(
    posterior: &PosteriorSamples<F>,
    x: &[F],
    grid: &[F],
) -> Result<SurvivalCurve<F>> {
    survival_curve_with(posterior, x, grid, MIN_SUBINTERVALS, (0.025, 0.975))
}

pub fn survival_curve_with<F: Scalar>(
    posterior: &PosteriorSamples<F>,
    x: &[F],
    grid: &[F],
    min_sub: usize,
    band: (f64, f64),
) -> Result<SurvivalCurve<F>> {
    check_grid(grid)?;
    if x.len() != posterior.dim {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: posterior.dim,
            found: x.len(),
        });
    }
    if posterior.is_empty() {
        return Err(Error::InvalidConfig("posterior has no snapshots".into()));
    }
    let curves: Vec<Vec<F>> = posterior
        .snapshots
        .par_iter()
        .map(|s| {
            cumulative_hazard_curve(s, x, grid, min_sub)
                .into_iter()
                .map(|h| (-h).exp())
                .collect()
        })
        .collect();
    let n = F::from_count(curves.len());
    let mut mean = Vec::with_capacity(grid.len());
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    let mut column = Vec::with_capacity(curves.len());
    for k in 0..grid.len() {
        column.clear();
        column.extend(curves.iter().map(|c| c[k]));
        let m = column.iter().copied().sum::<F>() / n;
        column.sort_by(|a, b| a.partial_cmp(b).expect("survival values are finite"));
        let lo = quantile_sorted(&column, band.0).min(m);
        let hi = quantile_sorted(&column, band.1).max(m);
        mean.push(m.min(F::one()));
        lower.push(lo);
        upper.push(hi);
    }
    Ok(SurvivalCurve {
        grid: grid.to_vec(),
        mean,
        lower,
        upper,
    })
}

/// Posterior mean of `∫₀^horizon λ(s | X) ds`; higher means earlier death.
pub fn model_risk_score<F: Scalar>(
    posterior: &PosteriorSamples<F>,
    x: &[F],
    horizon: F,
) -> Result<F> {
    if !(horizon > F::zero()) {
        return Err(Error::NonPositiveTime {
            index: 0,
            time: horizon.as_f64(),
        });
    }
    if x.len() != posterior.dim {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: posterior.dim,
            found: x.len(),
        });
    }
    let total: F = posterior
        .snapshots
        .par_iter()
        .map(|s| cumulative_hazard_curve(s, x, &[horizon], MIN_SUBINTERVALS)[0])
        .collect::<Vec<F>>()
        .into_iter()
        .sum();
    Ok(total / F::from_count(posterior.len().max(1)))
}

/// Harrell-style concordance index with ties in risk counted as 1/2.
///
/// `observed[i]` is false for a right-censored time. A pair is admissible
/// when the earlier time is an observed event; pairs with equal times are
/// admissible only if exactly one of them is observed (the observed one is
/// taken as earlier).
pub fn concordance_index<F: Scalar>(
    risk_scores: &[F],
    times: &[F],
    observed: &[bool],
) -> Result<F> {
    let n = times.len();
    if risk_scores.len() != n || observed.len() != n {
        return Err(Error::LengthMismatch {
            left: risk_scores.len(),
            right: if observed.len() != n {
                observed.len()
            } else {
                n
            },
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        times[a]
            .partial_cmp(&times[b])
            .expect("times are finite")
            .then(observed[b].cmp(&observed[a]))
    });
    let half = F::of(0.5);
    let mut concordant = F::zero();
    let mut admissible = 0usize;
    for (pos, &i) in order.iter().enumerate() {
        if !observed[i] {
            continue;
        }
        for &j in &order[pos + 1..] {
            if times[j] == times[i] && observed[j] {
                continue;
            }
            admissible += 1;
            if risk_scores[i] > risk_scores[j] {
                concordant += F::one();
            } else if risk_scores[i] == risk_scores[j] {
                concordant += half;
            }
        }
    }
    if admissible == 0 {
        return Err(Error::NoAdmissiblePairs);
    }
    Ok(concordant / F::from_count(admissible))
}

/// Product-limit estimate as a right-continuous step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct KaplanMeier<F> {
    /// Distinct event times, increasing.
    pub times: Vec<F>,
    /// Survival just after each event time.
    pub survival: Vec<F>,
}

impl<F: Scalar> KaplanMeier<F> {
    pub fn at(&self, t: F) -> F {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            F::one()
        } else {
            self.survival[k - 1]
        }
    }
}

pub fn kaplan_meier<F: Scalar>(times: &[F], observed: &[bool]) -> Result<KaplanMeier<F>> {
    if times.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if times.len() != observed.len() {
        return Err(Error::LengthMismatch {
            left: times.len(),
            right: observed.len(),
        });
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).expect("times are finite"));
    let mut at_risk = times.len();
    let mut s = F::one();
    let mut out = KaplanMeier {
        times: Vec::new(),
        survival: Vec::new(),
    };
    let mut k = 0;
    while k < order.len() {
        let t = times[order[k]];
        let mut events = 0;
        let mut leaving = 0;
        while k < order.len() && times[order[k]] == t {
            events += observed[order[k]] as usize;
            leaving += 1;
            k += 1;
        }
        if events > 0 {
            s *= F::one() - F::from_count(events) / F::from_count(at_risk);
            out.times.push(t);
            out.survival.push(s);
        }
        at_risk -= leaving;
    }
    Ok(out)
}

/// Time and event indicator used for ranking: left-censored data use their
/// bound, interval-censored data the window midpoint.
pub fn ranking_outcome<F: Scalar>(datum: &crate::model::SurvivalDatum<F>) -> (F, bool) {
    match datum.censoring {
        Censoring::Exact | Censoring::Left => (datum.time, true),
        Censoring::Right => (datum.time, false),
        Censoring::Interval { lower } => ((lower + datum.time) / F::of(2.0), true),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult<F> {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub c_index: Result<F>,
}

/// Shuffled assignment of `n` rows to `k` folds; sizes differ by at most one.
pub fn fold_assignment<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, &i) in idx.iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// k-fold cross-validated concordance. Chain failures abort the whole run;
/// a fold without admissible pairs reports `NoAdmissiblePairs` in its slot.
pub fn cross_validate<F: Scalar, R: Rng + ?Sized>(
    dataset: &Dataset<F>,
    config: &ChainConfig<F>,
    k: usize,
    rng: &mut R,
) -> Result<Vec<FoldResult<F>>> {
    let n = dataset.len();
    if k < 2 {
        return Err(Error::InvalidConfig(
            "cross-validation needs at least 2 folds".into(),
        ));
    }
    if n < k {
        return Err(Error::InvalidConfig(format!(
            "{n} rows cannot fill {k} folds"
        )));
    }
    let folds = fold_assignment(n, k, rng);
    let seeds: Vec<u64> = (0..k).map(|_| rng.random()).collect();
    folds
        .par_iter()
        .zip(seeds.par_iter())
        .enumerate()
        .map(|(f, (test, &seed))| {
            let mut in_test = vec![false; n];
            test.iter().for_each(|&i| in_test[i] = true);
            let train_rows: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let train = dataset.subset(&train_rows);
            let mut frng = ChaCha8Rng::seed_from_u64(seed);
            let posterior = run_chain(&train, config, &mut frng)?;
            let horizon = train.max_time();
            let mut scores = Vec::with_capacity(test.len());
            let mut times = Vec::with_capacity(test.len());
            let mut observed = Vec::with_capacity(test.len());
            for &i in test {
                let d = &dataset.data[i];
                scores.push(model_risk_score(&posterior, &d.covariates, horizon)?);
                let (t, o) = ranking_outcome(d);
                times.push(t);
                observed.push(o);
            }
            Ok(FoldResult {
                fold: f,
                train_size: train_rows.len(),
                test_size: test.len(),
                c_index: concordance_index(&scores, &times, &observed),
            })
        })
        .collect()
}

//! End-to-end acceptance checks. Each test prints one line of the form
//! `criterion N: PASS|FAIL <detail>` before asserting, so
//! `cargo test --test acceptance -- --nocapture` gives a readable report.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sgpsurv::augmentation::{
    impute_interval_censored, impute_left_censored, resample_rejected_sets, sample_event_time,
};
use sgpsurv::io::{generate_crossing_synthetic, generate_proportional_hazards, sign_changes};
use sgpsurv::kernel::{frequency_variance, implied_se_kernel, sample_prior_rff};
use sgpsurv::mcmc::{geweke_joint_check, GewekeConfig};
use sgpsurv::predict::{cumulative_hazard_curve, FoldResult};
use sgpsurv::{
    concordance_index, cross_validate, run_chain_seeded, survival_curve, AugmentedState, Baseline,
    BaselineKind, BaselinePriors, ChainConfig, Dataset, GammaPrior, KernelHypers, KernelPriors,
    RffGp, Sampler, Snapshot, SurvivalDatum,
};

fn report(criterion: u32, pass: bool, detail: String) {
    println!(
        "criterion {criterion}: {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// One-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Event-time CDF of a frozen model tabulated by composite Simpson
/// integration of `λ₀(s)·σ(g(s, x))` with the GP evaluated directly.
struct CdfTable {
    step: f64,
    cumhaz: Vec<f64>,
}

impl CdfTable {
    fn new(hazard: impl Fn(f64) -> f64, t_max: f64, cells: usize) -> Self {
        let step = t_max / cells as f64;
        let mut cumhaz = vec![0.0; cells + 1];
        for k in 0..cells {
            let a = k as f64 * step;
            let b = a + step;
            let simpson = step / 6.0 * (hazard(a) + 4.0 * hazard(0.5 * (a + b)) + hazard(b));
            cumhaz[k + 1] = cumhaz[k] + simpson;
        }
        Self { step, cumhaz }
    }

    fn cdf(&self, t: f64) -> f64 {
        let pos = (t / self.step).clamp(0.0, (self.cumhaz.len() - 1) as f64);
        let k = (pos.floor() as usize).min(self.cumhaz.len() - 2);
        let frac = pos - k as f64;
        let h = self.cumhaz[k] + frac * (self.cumhaz[k + 1] - self.cumhaz[k]);
        1.0 - (-h).exp()
    }
}

/// The frozen model shared by the augmentation and imputation checks:
/// Weibull α = 1.5, β = 0.5 and one prior GP draw with `d = 1`.
fn frozen_model() -> (Baseline<f64>, RffGp<f64>, Vec<f64>, CdfTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let baseline = Baseline::weibull(1.5, 0.5);
    let gp = sample_prior_rff(50, KernelHypers::uniform(2, 1.0, 1.0), 1, &mut rng).unwrap();
    let x = vec![0.4];
    let hazard = |s: f64| {
        let l0 = 2.0 * 0.5 * s.powf(0.5);
        l0 / (1.0 + (-gp.evaluate(s, &x).unwrap()).exp())
    };
    let table = CdfTable::new(hazard, 40.0, 200_000);
    (baseline, gp, x, table)
}

#[test]
fn criterion_01_crossing_reproduction() {
    crossing_run(1, 0, 0.10);
}

#[test]
fn criterion_02_noisy_covariates() {
    crossing_run(2, 3, 0.15);
}

fn crossing_run(criterion: u32, noisy: usize, tolerance: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(150 + noisy as u64);
    let (ds, truth) = generate_crossing_synthetic::<f64, _>(150, noisy, &mut rng);
    let config = ChainConfig {
        seed: 7,
        ..Default::default()
    };
    let posterior = run_chain_seeded(&ds, &config).unwrap();
    let grid: Vec<f64> = (0..=550).map(|k| 0.5 + 0.01 * k as f64).collect();
    let mut sup = [0.0f64; 2];
    let mut means = Vec::new();
    for group in 0..2 {
        let mut x = vec![group as f64];
        x.extend(std::iter::repeat_n(0.5, noisy));
        let curve = survival_curve(&posterior, &x, &grid).unwrap();
        sup[group] = grid
            .iter()
            .zip(&curve.mean)
            .map(|(&t, &s)| (s - truth.survival(group, t)).abs())
            .fold(0.0, f64::max);
        means.push(curve.mean);
    }
    let diff = |t: f64| {
        let k = (((t - 0.5) / 0.01).round() as usize).min(grid.len() - 1);
        means[0][k] - means[1][k]
    };
    let crossings = sign_changes(diff, 0.5, 6.0, grid.len() - 1);
    let pass = sup[0] < tolerance && sup[1] < tolerance && !crossings.is_empty();
    report(
        criterion,
        pass,
        format!(
            "n=150/group noisy={noisy}: sup|S-S*| = {:.4} / {:.4} (< {tolerance}), crossings at {}",
            sup[0],
            sup[1],
            crossings
                .iter()
                .map(|c| format!("{c:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

#[test]
fn criterion_03_event_time_law() {
    let (baseline, gp, x, table) = frozen_model();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut draws: Vec<f64> = (0..10_000)
        .map(|_| {
            sample_event_time(&baseline, &gp, &x, &mut rng, 100_000)
                .unwrap()
                .0
        })
        .collect();
    let ks = ks_statistic(&mut draws, |t| table.cdf(t));
    report(
        3,
        ks < 0.02,
        format!("KS = {ks:.4} over 10^4 draws (< 0.02)"),
    );
}

#[test]
fn criterion_04_rejected_set_law() {
    let ds = Dataset::new(vec![SurvivalDatum::exact(1.0, vec![])], 0).unwrap();
    let mut state =
        AugmentedState::initial(&ds, Baseline::exponential(1.0), RffGp::constant(0.0, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let counts: Vec<f64> = (0..10_000)
        .map(|_| {
            resample_rejected_sets(&ds, &mut state, &mut rng);
            state.latent[0].rejected.len() as f64
        })
        .collect();
    let (m, v) = mean_var(&counts);
    let n = counts.len() as f64;
    // Poisson(1): Var(mean) = 1/n, Var(sample variance) ≈ (μ₄ − σ⁴)/n = 3/n.
    let se_mean = (1.0 / n).sqrt();
    let se_var = (3.0 / n).sqrt();
    let pass = (m - 1.0).abs() < 3.0 * se_mean && (v - 1.0).abs() < 3.0 * se_var;
    report(
        4,
        pass,
        format!(
            "|G| mean {m:.4} (±{:.4}), variance {v:.4} (±{:.4})",
            3.0 * se_mean,
            3.0 * se_var
        ),
    );
}

/// Mean and variance of a density known up to a constant in log space,
/// by trapezoid integration on `(0, upper]`.
fn quadrature_moments(log_density: impl Fn(f64) -> f64, upper: f64, cells: usize) -> (f64, f64) {
    let h = upper / cells as f64;
    let pts: Vec<f64> = (1..=cells).map(|k| k as f64 * h).collect();
    let logs: Vec<f64> = pts.iter().map(|&x| log_density(x)).collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let z: f64 = w.iter().sum();
    let mean = pts.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / z;
    let var = pts
        .iter()
        .zip(&w)
        .map(|(x, w)| (x - mean).powi(2) * w)
        .sum::<f64>()
        / z;
    (mean, var)
}

#[test]
fn criterion_05_conjugate_scale_update() {
    let prior = GammaPrior::new(2.0, 0.5);
    let priors = BaselinePriors {
        scale: prior,
        ..Default::default()
    };
    let horizons = [0.3, 1.1, 0.8, 2.0];
    let m_points = 7usize;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, baseline, alpha) in [
        (
            "exponential",
            Baseline::exponential(1.0).with_priors(&priors),
            1.0,
        ),
        (
            "weibull",
            Baseline::weibull(1.3, 1.0).with_priors(&priors),
            1.3,
        ),
    ] {
        // Prior × likelihood written out directly from the hazard formulas.
        let log_post = |s: f64| {
            let log_prior = (prior.shape - 1.0) * s.ln() - prior.rate * s;
            let exposure: f64 = horizons
                .iter()
                .map(|h: &f64| 2.0 * s / alpha * h.powf(alpha))
                .sum();
            log_prior + m_points as f64 * (2.0 * s).ln() - exposure
        };
        let (qm, qv) = quadrature_moments(log_post, 40.0, 400_000);
        let unit_sum: f64 = horizons
            .iter()
            .map(|&h| baseline.unit_cumulative_hazard(h))
            .sum();
        let draws: Vec<f64> = (0..100_000)
            .map(|_| {
                baseline
                    .gibbs_update_scale(m_points, unit_sum, &mut rng)
                    .scale()
            })
            .collect();
        let (m, v) = mean_var(&draws);
        let n = draws.len() as f64;
        // Gamma(k, ·) has excess kurtosis 6/k.
        let k = qm * qm / qv;
        let se_m = (qv / n).sqrt();
        let se_v = (qv * qv * (2.0 + 6.0 / k) / n).sqrt();
        let ok = (m - qm).abs() < 3.0 * se_m && (v - qv).abs() < 3.0 * se_v;
        let algebra = baseline.scale_posterior(m_points, unit_sum);
        let exact = (algebra.shape - (prior.shape + 7.0)).abs() < 1e-12
            && (algebra.rate - (prior.rate + unit_sum)).abs() < 1e-12;
        pass &= ok && exact;
        lines.push(format!(
            "{name}: mean {m:.4} vs {qm:.4}, var {v:.5} vs {qv:.5}, shape/rate algebra {}",
            if exact { "exact" } else { "wrong" }
        ));
    }
    report(5, pass, lines.join("; "));
}

/// Largest deviation between the draw-averaged feature covariance and the
/// squared-exponential kernel on a grid of lags.
fn rff_sup_error(m: usize, draws: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (sigma2, phi) = (1.3, 0.8);
    let lags: Vec<f64> = (0..=60).map(|k| 0.05 * k as f64).collect();
    let mut acc = vec![0.0; lags.len()];
    let t0 = 0.7;
    for _ in 0..draws {
        let gp =
            sample_prior_rff::<f64, _>(m, KernelHypers::uniform(1, sigma2, phi), 0, rng).unwrap();
        let var = gp.coefficient_sd(0).powi(2);
        for (a, &tau) in acc.iter_mut().zip(&lags) {
            let s = t0 + tau;
            *a += gp
                .block_frequencies(0)
                .iter()
                .map(|&w| var * ((w * t0).cos() * (w * s).cos() + (w * t0).sin() * (w * s).sin()))
                .sum::<f64>();
        }
    }
    lags.iter()
        .zip(&acc)
        .map(|(&tau, &a)| {
            // Characteristic function of N(0, 1/(2πφ)) at τ.
            let oracle = sigma2 * (-tau * tau / (4.0 * std::f64::consts::PI * phi)).exp();
            let library = implied_se_kernel(tau, sigma2, frequency_variance(phi));
            assert!((oracle - library).abs() < 1e-12);
            (a / draws as f64 - oracle).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_06_rff_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let e50 = rff_sup_error(50, 200, &mut rng);
    let e400 = rff_sup_error(400, 200, &mut rng);
    report(
        6,
        e50 < 0.05 && e400 < 0.02,
        format!("sup error {e50:.4} at m=50 (< 0.05), {e400:.4} at m=400 (< 0.02)"),
    );
}

#[test]
fn criterion_07_survival_vanishes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for iteration in 0..100 {
        let hypers = KernelHypers::sample_prior(2, KernelPriors::default(), &mut rng);
        let gp = sample_prior_rff(50, hypers, 1, &mut rng).unwrap();
        let x = [rng.random::<f64>()];
        let snap = Snapshot {
            iteration,
            baseline: Baseline::weibull(1.5, 0.5),
            gp,
        };
        let h = cumulative_hazard_curve(&snap, &x, &[50.0], 20_000)[0];
        worst = worst.max((-h).exp());
    }
    report(
        7,
        worst < 0.01,
        format!("max S(50) over 100 prior draws = {worst:.3e} (< 0.01)"),
    );
}

#[test]
fn criterion_08_sampler_correctness() {
    let mut lines = Vec::new();
    let mut pass = true;
    for (kind, seed) in [(BaselineKind::Exponential, 81), (BaselineKind::Weibull, 82)] {
        let config = GewekeConfig {
            baseline_kind: kind,
            ..Default::default()
        };
        let report = geweke_joint_check(&config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let z = report.max_abs_z();
        pass &= z < 4.0;
        lines.push(format!("{kind:?} geweke max|z| = {z:.2}"));
    }
    let corrupted = GewekeConfig {
        corrupt_scale_update: true,
        ..Default::default()
    };
    // A corrupted chain may also diverge outright, which counts as detected.
    let corrupted = geweke_joint_check(&corrupted, &mut ChaCha8Rng::seed_from_u64(83)).unwrap();
    let z = corrupted.max_abs_z();
    pass &= z > 6.0;
    lines.push(format!(
        "corrupted scale update max|z| = {z:.1} (> 6){}",
        corrupted
            .diverged_at
            .map(|a| format!(", diverged at alternation {a}"))
            .unwrap_or_default()
    ));

    // Without the GP (σ ≡ 1) the exponential model is conjugate:
    // Ω | T ~ Gamma(a₀ + n, b₀ + 2ΣT).
    let mut rng = ChaCha8Rng::seed_from_u64(84);
    let n = 40;
    let data: Vec<_> = (0..n)
        .map(|_| SurvivalDatum::exact(-rng.random::<f64>().ln(), vec![rng.random()]))
        .collect();
    let total: f64 = data.iter().map(|d| d.time).sum();
    let ds = Dataset::new(data, 1).unwrap();
    let config = ChainConfig {
        n_iterations: 20_100,
        burn_in: 100,
        thin: 1,
        baseline_kind: BaselineKind::Exponential,
        update_gp: false,
        ..Default::default()
    };
    let prior = config.baseline_priors.scale;
    let sampler = Sampler::from_state(
        &ds,
        config,
        Baseline::exponential(1.0),
        RffGp::constant(40.0, 1),
    )
    .unwrap();
    let post = sampler.run(&mut rng).unwrap();
    let draws: Vec<f64> = post.snapshots.iter().map(|s| s.baseline.scale()).collect();
    let (m, v) = mean_var(&draws);
    let (shape, rate) = (prior.shape + n as f64, prior.rate + 2.0 * total);
    let (em, ev) = (shape / rate, shape / (rate * rate));
    let k = draws.len() as f64;
    let ok = (m - em).abs() < 3.0 * (ev / k).sqrt()
        && (v - ev).abs() < 3.0 * (ev * ev * (2.0 + 6.0 / shape) / k).sqrt();
    pass &= ok;
    lines.push(format!(
        "no-GP submodel mean {m:.4} vs {em:.4}, var {v:.5} vs {ev:.5}"
    ));
    report(8, pass, lines.join("; "));
}

/// Pairwise enumeration of the concordance rules.
fn brute_force_c_index(risk: &[f64], times: &[f64], observed: &[bool]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..times.len() {
        for j in i + 1..times.len() {
            let earlier = if times[i] < times[j] {
                observed[i].then_some((i, j))
            } else if times[j] < times[i] {
                observed[j].then_some((j, i))
            } else if observed[i] != observed[j] {
                Some(if observed[i] { (i, j) } else { (j, i) })
            } else {
                None
            };
            if let Some((a, b)) = earlier {
                den += 1.0;
                if risk[a] > risk[b] {
                    num += 1.0;
                } else if risk[a] == risk[b] {
                    num += 0.5;
                }
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

#[test]
fn criterion_09_concordance_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=60);
        // Small value sets force ties in both times and scores.
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(1..15) as f64).collect();
        let risk: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..8) as f64 * 0.25)
            .collect();
        let observed: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
        let lib = concordance_index(&risk, &times, &observed).ok();
        if lib != brute_force_c_index(&risk, &times, &observed) {
            mismatches += 1;
        }
    }
    let n = 5000;
    let times: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let observed: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    let risk: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let c = concordance_index(&risk, &times, &observed).unwrap();
    report(
        9,
        mismatches == 0 && (c - 0.5).abs() < 0.02,
        format!("{mismatches} mismatches in 100 instances; random scores C = {c:.4}"),
    );
}

fn mean_c_index(folds: &[FoldResult<f64>]) -> f64 {
    let values: Vec<f64> = folds
        .iter()
        .filter_map(|f| f.c_index.clone().ok())
        .collect();
    values.iter().sum::<f64>() / values.len() as f64
}

#[test]
fn criterion_10_cross_validated_discrimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let ds = generate_proportional_hazards::<f64, _>(200, 1.0, 4.0, 0.25, &mut rng);
    let config = ChainConfig {
        n_iterations: 1500,
        burn_in: 500,
        thin: 5,
        ..Default::default()
    };
    let real = mean_c_index(
        &cross_validate(&ds, &config, 10, &mut ChaCha8Rng::seed_from_u64(11)).unwrap(),
    );
    let mut permuted = ds.clone();
    let mut covariates: Vec<Vec<f64>> = ds.data.iter().map(|d| d.covariates.clone()).collect();
    covariates.shuffle(&mut rng);
    for (d, x) in permuted.data.iter_mut().zip(covariates) {
        d.covariates = x;
    }
    let baseline = mean_c_index(
        &cross_validate(&permuted, &config, 10, &mut ChaCha8Rng::seed_from_u64(11)).unwrap(),
    );
    report(
        10,
        real >= 0.65 && real >= baseline + 0.1,
        format!("10-fold mean C = {real:.3} (>= 0.65), permuted {baseline:.3}"),
    );
}

#[test]
fn criterion_11_censoring_machinery() {
    let (baseline, gp, x, table) = frozen_model();
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let bound = 1.0;
    let mut left: Vec<f64> = (0..10_000)
        .map(|_| impute_left_censored(&baseline, &gp, &x, bound, &mut rng, 1000))
        .collect();
    let f_bound = table.cdf(bound);
    let ks_left = ks_statistic(&mut left, |t| table.cdf(t.min(bound)) / f_bound);
    let (lo, hi) = (0.5, 1.5);
    let (f_lo, f_hi) = (table.cdf(lo), table.cdf(hi));
    let mut interval: Vec<f64> = (0..10_000)
        .map(|_| impute_interval_censored(&baseline, &gp, &x, lo, hi, &mut rng, 1000))
        .collect();
    let ks_interval = ks_statistic(&mut interval, |t| {
        (table.cdf(t.clamp(lo, hi)) - f_lo) / (f_hi - f_lo)
    });

    // Unit-rate exponential times, 30% right-censored by an independent
    // Exponential(3/7) clock. With σ(g) ≈ 1/2 the matching Ω is 1.
    let data: Vec<_> = (0..300)
        .map(|_| {
            let t = -rng.random::<f64>().ln();
            let c = -rng.random::<f64>().ln() * 7.0 / 3.0;
            let xi = vec![rng.random::<f64>()];
            if t <= c {
                SurvivalDatum::exact(t, xi)
            } else {
                SurvivalDatum::right(c, xi)
            }
        })
        .collect();
    let censored = data.iter().filter(|d| !d.censoring.has_event()).count() as f64 / 300.0;
    let ds = Dataset::new(data, 1).unwrap();
    let config = ChainConfig {
        n_iterations: 2000,
        burn_in: 1000,
        thin: 5,
        baseline_kind: BaselineKind::Exponential,
        seed: 12,
        ..Default::default()
    };
    let omega = run_chain_seeded(&ds, &config).unwrap().mean_scale();
    let pass = ks_left < 0.02 && ks_interval < 0.02 && (0.6..=1.6).contains(&omega);
    report(
        11,
        pass,
        format!(
            "KS left {ks_left:.4}, interval {ks_interval:.4} (< 0.02); {:.0}% censored fit Ω = {omega:.3} (in [0.6, 1.6])",
            100.0 * censored
        ),
    );
}

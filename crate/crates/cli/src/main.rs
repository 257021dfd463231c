use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sgpsurv::io::{
    generate_crossing_synthetic, generate_proportional_hazards, parse_covariates_str,
    parse_dataset_str, write_dataset_string, Checkpoint, MinMaxScaling, RunManifest, StageTiming,
};
use sgpsurv::predict::cross_validate;
use sgpsurv::{run_chain, survival_curve, BaselineKind, ChainConfig, Dataset, Error, GammaPrior};

const OUT_DIR_ENV: &str = "SGPSURV_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "sgpsurv-out";

#[derive(Parser)]
#[command(
    name = "sgpsurv",
    version,
    about = "Gaussian-process survival analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and write a checkpoint, manifest and diagnostics.
    Fit(FitArgs),
    /// Posterior survival curves for covariate vectors.
    Predict(PredictArgs),
    /// k-fold cross-validated concordance index.
    Evaluate(EvaluateArgs),
    /// Write a synthetic dataset and its true survival functions.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = BaselineArg::Weibull)]
    baseline: BaselineArg,
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    #[arg(long = "burn-in", default_value_t = 2000)]
    burn_in: usize,
    #[arg(long, default_value_t = 5)]
    thin: usize,
    /// Random Fourier features per kernel block.
    #[arg(long, default_value_t = 50)]
    features: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML file whose keys override the corresponding flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gamma prior on the baseline scale: shape.
    #[arg(long)]
    scale_shape: Option<f64>,
    /// Gamma prior on the baseline scale: rate.
    #[arg(long)]
    scale_rate: Option<f64>,
    /// Upper end of the uniform prior on the Weibull shape.
    #[arg(long)]
    alpha_upper: Option<f64>,
    /// Log-normal prior on each lengthscale: location of the log.
    #[arg(long)]
    lengthscale_mu: Option<f64>,
    /// Log-normal prior on each lengthscale: scale of the log.
    #[arg(long)]
    lengthscale_sigma: Option<f64>,
    /// Gamma prior on each kernel variance: shape.
    #[arg(long)]
    variance_shape: Option<f64>,
    /// Gamma prior on each kernel variance: rate.
    #[arg(long)]
    variance_rate: Option<f64>,
    /// Rescale every covariate to [0, 1] before fitting.
    #[arg(long)]
    scale_covariates: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BaselineArg {
    Weibull,
    Exponential,
}

impl From<BaselineArg> for BaselineKind {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::Weibull => BaselineKind::Weibull,
            BaselineArg::Exponential => BaselineKind::Exponential,
        }
    }
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    baseline: Option<BaselineArg>,
    iters: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    features: Option<usize>,
    seed: Option<u64>,
    scale_shape: Option<f64>,
    scale_rate: Option<f64>,
    alpha_upper: Option<f64>,
    lengthscale_mu: Option<f64>,
    lengthscale_sigma: Option<f64>,
    variance_shape: Option<f64>,
    variance_rate: Option<f64>,
    scale_covariates: Option<bool>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Output directory [default: $SGPSURV_OUT_DIR or ./sgpsurv-out].
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// CSV with a header row; columns named like the training covariates
    /// are selected, otherwise every column is used in order.
    #[arg(long)]
    covariates: PathBuf,
    /// Evaluation grid as "start:stop:points".
    #[arg(long)]
    grid: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..))]
    folds: u64,
    /// Directory for the machine-readable summary [default: $SGPSURV_OUT_DIR or ./sgpsurv-out].
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Generator {
    Crossing,
    Ph,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Generator::Crossing)]
    generator: Generator,
    /// Rows per group (crossing) or in total (ph).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Extra uniform nuisance covariates (crossing only).
    #[arg(long, default_value_t = 0)]
    noisy: usize,
    /// Log hazard ratio between x = 1 and x = 0 (ph only).
    #[arg(long, default_value_t = 4.0)]
    effect: f64,
    /// Rate of the independent exponential censoring clock (ph only).
    #[arg(long, default_value_t = 0.0)]
    censor_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset path; the true survival table goes to `<stem>.truth.csv`.
    #[arg(long)]
    out: PathBuf,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. }
            | Error::AtLine { .. }
            | Error::NonPositiveTime { .. }
            | Error::DimensionMismatch { .. }
            | Error::BadInterval { .. }
            | Error::NonFiniteCovariate { .. }
            | Error::EmptyDataset
            | Error::LengthMismatch { .. } => 3,
            Error::InvalidConfig(_) | Error::Grid(_) => 4,
            Error::NonFiniteLikelihood { .. }
            | Error::CandidateBudgetExceeded { .. }
            | Error::NoAdmissiblePairs => 5,
            Error::Checkpoint(_) | Error::Io(_) => 6,
        };
        let message = match &e {
            Error::NonFiniteLikelihood { iteration, .. } => {
                format!("non-finite log-likelihood at iteration {iteration}")
            }
            other => other.to_string(),
        };
        Failure { code, message }
    }
}

fn config_failure(message: String) -> Failure {
    Failure { code: 4, message }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 6,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Simulate(a) => simulate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!(
                "error: {}",
                f.message.split_whitespace().collect::<Vec<_>>().join(" ")
            );
            ExitCode::from(f.code)
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_failure(path, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn to_json(value: &impl Serialize) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| Failure {
        code: 6,
        message: e.to_string(),
    })
}

/// Chain settings after applying the config file on top of the flags.
struct Resolved {
    config: ChainConfig<f64>,
    scale_covariates: bool,
}

fn resolve(model: &ModelArgs) -> CliResult<Resolved> {
    let mut m = model.clone();
    if let Some(path) = &model.config {
        let text = String::from_utf8(read_bytes(path)?)
            .map_err(|e| config_failure(format!("{}: {e}", path.display())))?;
        let file: ConfigFile = toml::from_str(&text)
            .map_err(|e| config_failure(format!("{}: {e}", path.display())))?;
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = file.$field { m.$field = v; } )* };
        }
        macro_rules! take_opt {
            ($($field:ident),*) => { $( if file.$field.is_some() { m.$field = file.$field; } )* };
        }
        take!(
            baseline,
            iters,
            burn_in,
            thin,
            features,
            seed,
            scale_covariates
        );
        take_opt!(
            scale_shape,
            scale_rate,
            alpha_upper,
            lengthscale_mu,
            lengthscale_sigma,
            variance_shape,
            variance_rate
        );
    }
    let mut config = ChainConfig::<f64> {
        n_iterations: m.iters,
        burn_in: m.burn_in,
        thin: m.thin,
        m: m.features,
        seed: m.seed,
        baseline_kind: m.baseline.into(),
        ..Default::default()
    };
    let bp = &mut config.baseline_priors;
    bp.scale = GammaPrior::new(
        m.scale_shape.unwrap_or(bp.scale.shape),
        m.scale_rate.unwrap_or(bp.scale.rate),
    );
    if let Some(a) = m.alpha_upper {
        bp.alpha_upper = a;
    }
    let kp = &mut config.kernel_priors;
    if let Some(v) = m.lengthscale_mu {
        kp.lengthscale.mu = v;
    }
    if let Some(v) = m.lengthscale_sigma {
        kp.lengthscale.sigma = v;
    }
    kp.variance = GammaPrior::new(
        m.variance_shape.unwrap_or(kp.variance.shape),
        m.variance_rate.unwrap_or(kp.variance.rate),
    );
    config.validate()?;
    Ok(Resolved {
        config,
        scale_covariates: m.scale_covariates,
    })
}

fn load_dataset(path: &Path) -> CliResult<(Vec<u8>, Dataset<f64>)> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    })?;
    let ds = parse_dataset_str(&text)?;
    Ok((bytes, ds))
}

fn fit(args: FitArgs) -> CliResult<()> {
    let resolved = resolve(&args.model)?;
    let out = out_dir(args.out);
    std::fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;

    let started = Instant::now();
    let (bytes, ds) = load_dataset(&args.data)?;
    let parse_seconds = started.elapsed().as_secs_f64();
    let mut manifest = RunManifest::new(
        resolved.config.seed,
        &bytes,
        serde_json::json!({
            "data": args.data.display().to_string(),
            "scale_covariates": resolved.scale_covariates,
            "chain": resolved.config,
        }),
    );
    manifest.stages.push(StageTiming {
        stage: "parse".into(),
        seconds: parse_seconds,
    });
    let names = ds.covariate_names.clone().unwrap_or_default();
    let scaling = resolved.scale_covariates.then(|| MinMaxScaling::fit(&ds));
    let fit_ds = match &scaling {
        Some(s) => s.apply_dataset(&ds),
        None => ds,
    };
    let config = resolved.config;
    let posterior = manifest.time("sample", || {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        run_chain(&fit_ds, &config, &mut rng)
    })?;
    let checkpoint = Checkpoint::new(names, scaling, config, posterior);
    let json = checkpoint.to_json()?;
    let diagnostics = to_json(&checkpoint.posterior.diagnostics)?;
    manifest.time("write", || -> CliResult<()> {
        write_file(&out.join("checkpoint.json"), &json)?;
        write_file(&out.join("diagnostics.json"), &diagnostics)
    })?;
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    write_file(&out.join("manifest.json"), to_json(&manifest)?)?;
    let d = &checkpoint.posterior.diagnostics;
    println!(
        "{} snapshots written to {}; log-likelihood ESS {:.1}",
        checkpoint.posterior.len(),
        out.display(),
        d.loglik_ess
    );
    Ok(())
}

fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let grid_error = |msg: &str| Failure::from(Error::Grid(format!("'{text}': {msg}")));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(grid_error("expected start:stop:points"));
    }
    let start: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| grid_error("bad start"))?;
    let stop: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| grid_error("bad stop"))?;
    let points: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| grid_error("bad point count"))?;
    if !(start.is_finite() && stop.is_finite()) || start < 0.0 || stop <= 0.0 {
        return Err(grid_error(
            "bounds must be finite, start nonnegative and stop positive",
        ));
    }
    if stop <= start || points < 2 {
        return Err(grid_error("grid must be increasing with at least 2 points"));
    }
    let h = (stop - start) / (points - 1) as f64;
    Ok((0..points)
        .map(|k| {
            if k + 1 == points {
                stop
            } else {
                start + h * k as f64
            }
        })
        .collect())
}

fn predict(args: PredictArgs) -> CliResult<()> {
    let checkpoint = Checkpoint::<f64>::load(&args.checkpoint)?;
    let grid = parse_grid(&args.grid)?;
    let text = String::from_utf8(read_bytes(&args.covariates)?).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", args.covariates.display()),
    })?;
    let (header, rows) = parse_covariates_str::<f64>(&text)?;
    let names = &checkpoint.covariate_names;
    let selection: Vec<usize> = if !names.is_empty() && names.iter().all(|n| header.contains(n)) {
        names
            .iter()
            .map(|n| header.iter().position(|h| h == n).unwrap())
            .collect()
    } else {
        (0..header.len()).collect()
    };
    if selection.len() != checkpoint.dim {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: checkpoint.dim,
            found: selection.len(),
        }
        .into());
    }
    let mut out = String::from("t,mean,lower,upper\n");
    for (i, row) in rows.iter().enumerate() {
        let x: Vec<f64> = selection.iter().map(|&c| row[c]).collect();
        let x = checkpoint.prepare_covariates(&x);
        let curve =
            survival_curve(&checkpoint.posterior, &x, &grid).map_err(|e| Error::AtLine {
                line: i + 2,
                source: Box::new(e),
            })?;
        for k in 0..grid.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                curve.grid[k], curve.mean[k], curve.lower[k], curve.upper[k]
            ));
        }
    }
    write_file(&args.out, out)?;
    println!(
        "{} curves of {} points written to {}",
        rows.len(),
        grid.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FoldSummary {
    /// 1-based.
    fold: usize,
    train_size: usize,
    test_size: usize,
    c_index: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct EvaluationSummary {
    data: String,
    dataset_sha256: String,
    folds: Vec<FoldSummary>,
    mean_c_index: Option<f64>,
    seed: u64,
    chain: ChainConfig<f64>,
}

fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let resolved = resolve(&args.model)?;
    let (bytes, ds) = load_dataset(&args.data)?;
    let ds = if resolved.scale_covariates {
        MinMaxScaling::fit(&ds).apply_dataset(&ds)
    } else {
        ds
    };
    let config = resolved.config;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let results = cross_validate(&ds, &config, args.folds as usize, &mut rng)?;
    let folds: Vec<FoldSummary> = results
        .into_iter()
        .map(|r| FoldSummary {
            fold: r.fold + 1,
            train_size: r.train_size,
            test_size: r.test_size,
            c_index: r.c_index.as_ref().ok().copied(),
            error: r.c_index.err().map(|e| e.to_string()),
        })
        .collect();
    for f in &folds {
        match (f.c_index, &f.error) {
            (Some(c), _) => println!("fold {}: C-index {c:.4} (test n={})", f.fold, f.test_size),
            (None, Some(e)) => println!("fold {}: {e}", f.fold),
            _ => unreachable!(),
        }
    }
    let values: Vec<f64> = folds.iter().filter_map(|f| f.c_index).collect();
    let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
    match mean {
        Some(m) => println!("mean C-index {m:.4} over {} folds", values.len()),
        None => println!("mean C-index undefined: no fold had admissible pairs"),
    }
    let summary = EvaluationSummary {
        data: args.data.display().to_string(),
        dataset_sha256: sgpsurv::io::fingerprint(&bytes),
        folds,
        mean_c_index: mean,
        seed: config.seed,
        chain: config,
    };
    let out = out_dir(args.out);
    std::fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;
    write_file(&out.join("evaluation.json"), to_json(&summary)?)
}

fn truth_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.truth.csv"))
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let grid: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
    let (ds, truth) = match args.generator {
        Generator::Crossing => {
            let (ds, truth) =
                generate_crossing_synthetic::<f64, _>(args.n as usize, args.noisy, &mut rng);
            let mut table = String::from("t,s0,s1\n");
            for (t, s0, s1) in truth.tabulate(&grid) {
                table.push_str(&format!("{t},{s0},{s1}\n"));
            }
            (ds, table)
        }
        Generator::Ph => {
            if args.censor_rate.is_nan() || args.censor_rate < 0.0 {
                return Err(config_failure("--censor-rate must be nonnegative".into()));
            }
            let ds = generate_proportional_hazards::<f64, _>(
                args.n as usize,
                1.0,
                args.effect,
                args.censor_rate,
                &mut rng,
            );
            let mut table = String::from("t,s_x0,s_x0.5,s_x1\n");
            for &t in &grid {
                let s = |x: f64| (-(args.effect * (x - 0.5)).exp() * t).exp();
                table.push_str(&format!("{t},{},{},{}\n", s(0.0), s(0.5), s(1.0)));
            }
            (ds, table)
        }
    };
    write_file(&args.out, write_dataset_string(&ds))?;
    let truth_out = truth_path(&args.out);
    write_file(&truth_out, truth)?;
    println!(
        "{} rows written to {}; true survival in {}",
        ds.len(),
        args.out.display(),
        truth_out.display()
    );
    Ok(())
}

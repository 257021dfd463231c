//! Versioned JSON checkpoints and run manifests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mcmc::PosteriorSamples;
use crate::model::ChainConfig;
use crate::scalar::Scalar;

use super::table::MinMaxScaling;

pub const CHECKPOINT_FORMAT: &str = "sgpsurv-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Name of the floating-point type, recorded so a checkpoint is never read
/// back at a different precision.
pub fn scalar_name<F: Scalar>() -> &'static str {
    if std::mem::size_of::<F>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

/// Everything needed to predict from a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Checkpoint<F> {
    pub format: String,
    pub version: u32,
    pub scalar: String,
    pub dim: usize,
    pub covariate_names: Vec<String>,
    /// Present when covariates were rescaled before fitting; prediction
    /// inputs must go through the same map.
    pub scaling: Option<MinMaxScaling<F>>,
    pub config: ChainConfig<F>,
    pub posterior: PosteriorSamples<F>,
}

impl<F: Scalar> Checkpoint<F> {
    pub fn new(
        covariate_names: Vec<String>,
        scaling: Option<MinMaxScaling<F>>,
        config: ChainConfig<F>,
        posterior: PosteriorSamples<F>,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            scalar: scalar_name::<F>().into(),
            dim: posterior.dim,
            covariate_names,
            scaling,
            config,
            posterior,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
            scalar: String,
        }
        let header: Header = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unknown format '{}'",
                header.format
            )));
        }
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                header.version
            )));
        }
        if header.scalar != scalar_name::<F>() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} values, reader expects {}",
                header.scalar,
                scalar_name::<F>()
            )));
        }
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Maps a raw covariate vector into the space the model was fitted in.
    pub fn prepare_covariates(&self, x: &[F]) -> Vec<F> {
        match &self.scaling {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        }
    }
}

/// Lower-case hex SHA-256 of the given bytes.
pub fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Provenance record written next to every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub seed: u64,
    pub dataset_sha256: String,
    pub config: serde_json::Value,
    /// Seconds since the Unix epoch at the start of the run.
    pub started_at: u64,
    pub wall_clock_seconds: f64,
    pub stages: Vec<StageTiming>,
}

impl RunManifest {
    pub fn new(seed: u64, dataset_bytes: &[u8], config: serde_json::Value) -> Self {
        let started_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            software: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            dataset_sha256: fingerprint(dataset_bytes),
            config,
            started_at,
            wall_clock_seconds: 0.0,
            stages: Vec::new(),
        }
    }

    /// Runs `f` and records its duration under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = std::time::Instant::now();
        let out = f();
        let seconds = start.elapsed().as_secs_f64();
        self.stages.push(StageTiming {
            stage: stage.into(),
            seconds,
        });
        self.wall_clock_seconds += seconds;
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

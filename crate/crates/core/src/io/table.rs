//! Comma-separated dataset files.
//!
//! Header row required. Columns `time` and `status` are mandatory; `time2`
//! is required when any row is interval-censored. Every other column is a
//! covariate, in header order. Status codes: 0 right-censored, 1 observed,
//! 2 left-censored, 3 interval-censored with `time` as the lower and `time2`
//! as the upper bound.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{validate_dataset, Censoring, Dataset, SurvivalDatum};
use crate::scalar::Scalar;

fn parse_num<F: Scalar>(field: &str, line: usize, column: &str) -> Result<F> {
    field
        .trim()
        .parse::<f64>()
        .map(F::of)
        .map_err(|_| Error::Parse {
            line,
            message: format!("column '{column}': cannot parse '{field}' as a number"),
        })
}

pub fn parse_dataset_str<F: Scalar>(text: &str) -> Result<Dataset<F>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let time_col = find("time").ok_or(Error::Parse {
        line: 1,
        message: "missing 'time' column".into(),
    })?;
    let status_col = find("status").ok_or(Error::Parse {
        line: 1,
        message: "missing 'status' column".into(),
    })?;
    let time2_col = find("time2");
    let cov_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != time_col && c != status_col && Some(c) != time2_col)
        .collect();
    let names: Vec<String> = cov_cols.iter().map(|&c| header[c].clone()).collect();
    let dim = cov_cols.len();

    let mut data = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let time: F = parse_num(&record[time_col], line, "time")?;
        let covariates = cov_cols
            .iter()
            .map(|&c| parse_num(&record[c], line, &header[c]))
            .collect::<Result<Vec<F>>>()?;
        let datum = match record[status_col].trim() {
            "0" => SurvivalDatum::right(time, covariates),
            "1" => SurvivalDatum::exact(time, covariates),
            "2" => SurvivalDatum::left(time, covariates),
            "3" => {
                let c = time2_col.ok_or(Error::Parse {
                    line,
                    message: "status 3 requires a 'time2' column".into(),
                })?;
                let upper: F = parse_num(&record[c], line, "time2")?;
                SurvivalDatum::interval(time, upper, covariates)
            }
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown status '{other}'"),
                })
            }
        };
        data.push(datum);
    }
    let ds = Dataset {
        data,
        dim,
        covariate_names: Some(names),
    };
    validate_dataset(ds).map_err(|e| match e {
        Error::NonPositiveTime { index, .. }
        | Error::BadInterval { index, .. }
        | Error::DimensionMismatch { index, .. }
        | Error::NonFiniteCovariate { index, .. } => Error::AtLine {
            line: index + 2,
            source: Box::new(e),
        },
        other => other,
    })
}

pub fn parse_dataset<F: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<F>> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_dataset_str(&text)
}

/// Default covariate names `x1..xd`.
pub fn default_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("x{j}")).collect()
}

/// Serialises in the format read by [`parse_dataset_str`]. Numbers use the
/// shortest representation that parses back to the same value.
pub fn write_dataset_string<F: Scalar>(ds: &Dataset<F>) -> String {
    let names = ds
        .covariate_names
        .clone()
        .unwrap_or_else(|| default_names(ds.dim));
    let has_interval = ds
        .data
        .iter()
        .any(|d| matches!(d.censoring, Censoring::Interval { .. }));
    let mut out = String::from("time,status");
    if has_interval {
        out.push_str(",time2");
    }
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for d in &ds.data {
        let (first, second) = match d.censoring {
            Censoring::Interval { lower } => (lower, Some(d.time)),
            _ => (d.time, None),
        };
        write!(out, "{},{}", first, d.censoring.status_code()).unwrap();
        if has_interval {
            match second {
                Some(t2) => write!(out, ",{t2}").unwrap(),
                None => out.push(','),
            }
        }
        for x in &d.covariates {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset<F: Scalar>(ds: &Dataset<F>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_dataset_string(ds))?;
    Ok(())
}

/// Min-max scaling of each covariate to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct MinMaxScaling<F> {
    pub min: Vec<F>,
    pub max: Vec<F>,
}

impl<F: Scalar> MinMaxScaling<F> {
    pub fn fit(ds: &Dataset<F>) -> Self {
        let mut min = vec![F::infinity(); ds.dim];
        let mut max = vec![F::neg_infinity(); ds.dim];
        for d in &ds.data {
            for (j, &x) in d.covariates.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Self { min, max }
    }

    /// Constant columns map to 0.
    pub fn apply(&self, x: &[F]) -> Vec<F> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let range = self.max[j] - self.min[j];
                if range > F::zero() {
                    (v - self.min[j]) / range
                } else {
                    F::zero()
                }
            })
            .collect()
    }

    pub fn apply_dataset(&self, ds: &Dataset<F>) -> Dataset<F> {
        let mut out = ds.clone();
        for d in &mut out.data {
            d.covariates = self.apply(&d.covariates);
        }
        out
    }
}

/// Reads a covariate-only table (header row, one vector per line).
pub fn parse_covariates_str<F: Scalar>(text: &str) -> Result<(Vec<String>, Vec<Vec<F>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let values = header
            .iter()
            .zip(record.iter())
            .map(|(h, v)| parse_num(v, line, h))
            .collect::<Result<Vec<F>>>()?;
        rows.push(values);
    }
    Ok((header, rows))
}

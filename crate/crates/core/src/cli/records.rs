//! On-disk result formats.
//!
//! `records.csv` starts with the line `# schema: ada2ms.records/v1`, then a
//! header `t,lr,alpha,loss,best_loss,rms.<tensor>...` with one `rms.` column
//! per parameter tensor in problem order, then one row per step. Floats are
//! written in shortest round-trip scientific notation; `alpha` is empty for
//! optimizers without a switching exponent.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::RunRecord;
use crate::error::Result;
use crate::params::ParamTensor;

pub const RECORDS_SCHEMA: &str = "ada2ms.records/v1";
pub const SUMMARY_SCHEMA: &str = "ada2ms.summary/v1";
pub const STATS_SCHEMA: &str = "ada2ms.stats/v1";
pub const SWEEP_SCHEMA: &str = "ada2ms.sweep/v1";

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const BEST_PARAMS_FILE: &str = "best_params.json";
pub const FINAL_PARAMS_FILE: &str = "final_params.json";

/// Format a float for CSV output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

/// CSV writer preceded by a schema comment line.
pub fn csv_writer(path: &Path, schema: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# schema: {schema}")?;
    Ok(csv::Writer::from_writer(out))
}

pub struct RecordWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl RecordWriter {
    pub fn create(path: &Path, tensor_names: &[String]) -> Result<Self> {
        let mut inner = csv_writer(path, RECORDS_SCHEMA)?;
        let mut header: Vec<String> = ["t", "lr", "alpha", "loss", "best_loss"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(tensor_names.iter().map(|n| format!("rms.{n}")));
        inner.write_record(&header)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &RunRecord) -> Result<()> {
        let mut row = vec![
            r.t.to_string(),
            fmt_f64(r.lr),
            r.alpha.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.loss),
            fmt_f64(r.best_loss),
        ];
        row.extend(r.update_rms.iter().copied().map(fmt_f64));
        self.inner.write_record(&row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: String,
    pub config_hash: String,
    pub problem: String,
    pub optimizer: String,
    pub seed: u64,
    /// Configured step budget.
    pub steps: u64,
    /// Steps actually taken (fewer on divergence).
    pub steps_completed: u64,
    pub best_loss: Option<f64>,
    pub best_step: u64,
    pub final_loss: Option<f64>,
    /// Full-data loss at the final parameters.
    pub final_full_loss: Option<f64>,
    /// Full-data loss at the best parameters.
    pub best_full_loss: Option<f64>,
    /// Full-data accuracy at the best parameters, for classifiers.
    pub best_accuracy: Option<f64>,
    pub diverged: bool,
    pub wall_time_s: f64,
}

impl RunSummary {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Finite values only; JSON has no NaN or infinity.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Serialize)]
struct ParamsFile<'a> {
    tensors: &'a [ParamTensor],
}

pub fn write_params(path: &Path, params: &[ParamTensor]) -> Result<()> {
    write_json(path, &ParamsFile { tensors: params })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [2.67e-2, 1e-7, 0.1 + 0.2, -3.5, 0.0, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(2.67e-2), "2.67e-2");
    }
}

//! The `sweep` subcommand.
//!
//! Config:
//!
//! ```toml
//! [base]                     # a complete run config
//! steps = 2000
//! seed = 1
//! # [base.problem], [base.optimizer], [base.lr], [base.alpha] ...
//!
//! [grid]                     # every axis optional, defaults to the base value
//! optimizer = ["sgdm", "adamw", "ada2ms"]
//! seed = [1, 2]
//! peak_lr = [1e-3, 1e-2]
//! switch_frac = [0.4, 0.6]
//! alpha_schedule = [true, false]   # false: alpha fixed at 1
//!
//! [peak_lr_by_optimizer]     # used when grid.peak_lr is absent
//! sgdm = 0.05
//! ```
//!
//! The switching exponent only matters for Ada2MS, so other optimizers get
//! the default exponent policy; cells whose resolved configs coincide run
//! once. Each cell writes into `<out>/<optimizer>-seed<seed>-<hash12>/` and a
//! cell whose `summary.json` carries the same config hash is not rerun.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::records::{csv_writer, fmt_f64, RunSummary, SUMMARY_FILE, SWEEP_SCHEMA};
use super::train::execute_run;
use super::{resolve_out_dir, CommonArgs, ExitStatus};
use crate::error::{Error, Result};
use crate::optim::OptimizerKind;
use crate::schedule::AlphaPolicy;

pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub optimizer: Option<Vec<OptimizerKind>>,
    pub seed: Option<Vec<u64>>,
    pub peak_lr: Option<Vec<f64>>,
    pub switch_frac: Option<Vec<f64>>,
    pub alpha_schedule: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    #[serde(default)]
    pub grid: SweepGrid,
    #[serde(default)]
    pub peak_lr_by_optimizer: BTreeMap<OptimizerKind, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

/// One resolved grid cell.
#[derive(Debug, Clone)]
pub struct Cell {
    pub name: String,
    pub config: RunConfig,
    pub hash: String,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub summary: RunSummary,
    /// Completed in an earlier invocation.
    pub resumed: bool,
}

fn axis<T: Clone>(values: &Option<Vec<T>>, base: T) -> Result<Vec<T>> {
    match values {
        Some(v) if v.is_empty() => Err(Error::Config("grid axes must not be empty".into())),
        Some(v) => Ok(v.clone()),
        None => Ok(vec![base]),
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Expand the grid into resolved, deduplicated cells in grid order.
    /// Returns the cells and the number of duplicates dropped.
    pub fn cells(&self) -> Result<(Vec<Cell>, usize)> {
        let base = &self.base;
        let base_frac = match base.alpha {
            AlphaPolicy::Schedule { switch_frac } => switch_frac,
            AlphaPolicy::Constant { .. } => match AlphaPolicy::default() {
                AlphaPolicy::Schedule { switch_frac } => switch_frac,
                AlphaPolicy::Constant { .. } => unreachable!(),
            },
        };
        let optimizers = axis(&self.grid.optimizer, base.optimizer.kind)?;
        let seeds = axis(&self.grid.seed, base.seed)?;
        let fracs = axis(&self.grid.switch_frac, base_frac)?;
        let schedules: Vec<Option<bool>> = match &self.grid.alpha_schedule {
            Some(v) if v.is_empty() => {
                return Err(Error::Config("grid axes must not be empty".into()))
            }
            Some(v) => v.iter().copied().map(Some).collect(),
            None => vec![None],
        };

        let mut seen = HashSet::new();
        let mut cells = Vec::new();
        let mut duplicates = 0;
        for &kind in &optimizers {
            let default_peak = self
                .peak_lr_by_optimizer
                .get(&kind)
                .copied()
                .unwrap_or(base.lr.peak);
            let peaks = axis(&self.grid.peak_lr, default_peak)?;
            for &seed in &seeds {
                for &peak in &peaks {
                    for &frac in &fracs {
                        for &sched in &schedules {
                            let mut cfg = base.clone();
                            cfg.out_dir = None;
                            cfg.optimizer.kind = kind;
                            cfg.seed = seed;
                            cfg.lr.peak = peak;
                            cfg.alpha = match sched {
                                Some(false) => AlphaPolicy::Constant { value: 1.0 },
                                Some(true) => AlphaPolicy::Schedule { switch_frac: frac },
                                None if self.grid.switch_frac.is_some() => {
                                    AlphaPolicy::Schedule { switch_frac: frac }
                                }
                                None => base.alpha,
                            };
                            if kind != OptimizerKind::Ada2ms {
                                cfg.alpha = AlphaPolicy::default();
                            }
                            let config = cfg.resolve()?.config;
                            let hash = config.hash();
                            if !seen.insert(hash.clone()) {
                                duplicates += 1;
                                continue;
                            }
                            cells.push(Cell {
                                name: format!("{kind}-seed{seed}-{}", &hash[..12]),
                                config,
                                hash,
                            });
                        }
                    }
                }
            }
        }
        Ok((cells, duplicates))
    }
}

fn completed(dir: &Path, hash: &str) -> Option<RunSummary> {
    let summary = RunSummary::read(&dir.join(SUMMARY_FILE)).ok()?;
    (summary.config_hash == hash).then_some(summary)
}

/// Run (or resume) every cell under `out`, cells in parallel.
pub fn run_sweep(cells: &[Cell], out: &Path) -> Result<Vec<CellResult>> {
    std::fs::create_dir_all(out)?;
    cells
        .par_iter()
        .map(|cell| {
            let dir = out.join(&cell.name);
            if let Some(summary) = completed(&dir, &cell.hash) {
                return Ok(CellResult {
                    cell: cell.clone(),
                    summary,
                    resumed: true,
                });
            }
            let run = cell.config.resolve()?;
            let summary = execute_run(&run, &dir)?;
            Ok(CellResult {
                cell: cell.clone(),
                summary,
                resumed: false,
            })
        })
        .collect()
}

pub const SWEEP_HEADER: [&str; 15] = [
    "cell",
    "optimizer",
    "seed",
    "peak_lr",
    "switch_frac",
    "alpha_schedule",
    "config_hash",
    "steps_completed",
    "best_loss",
    "best_step",
    "final_loss",
    "best_full_loss",
    "final_full_loss",
    "best_accuracy",
    "diverged",
];

pub fn write_sweep(path: &Path, results: &[CellResult]) -> Result<()> {
    let mut w = csv_writer(path, SWEEP_SCHEMA)?;
    w.write_record(SWEEP_HEADER)?;
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for r in results {
        let c = &r.cell.config;
        let (frac, scheduled) = match c.alpha {
            AlphaPolicy::Schedule { switch_frac } => (fmt_f64(switch_frac), "true"),
            AlphaPolicy::Constant { .. } => (String::new(), "false"),
        };
        let ada = c.optimizer.kind == OptimizerKind::Ada2ms;
        w.write_record([
            r.cell.name.clone(),
            c.optimizer.kind.to_string(),
            c.seed.to_string(),
            fmt_f64(c.lr.peak),
            if ada { frac } else { String::new() },
            if ada {
                scheduled.to_string()
            } else {
                String::new()
            },
            r.cell.hash.clone(),
            r.summary.steps_completed.to_string(),
            opt(r.summary.best_loss),
            r.summary.best_step.to_string(),
            opt(r.summary.final_loss),
            opt(r.summary.best_full_loss),
            opt(r.summary.final_full_loss),
            opt(r.summary.best_accuracy),
            r.summary.diverged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_sweep(args: &CommonArgs) -> Result<ExitStatus> {
    let mut cfg = SweepConfig::from_toml(&std::fs::read_to_string(&args.config)?)?;
    if let Some(seed) = args.seed {
        cfg.base.seed = seed;
    }
    let (cells, duplicates) = cfg.cells()?;
    if duplicates > 0 {
        eprintln!("warning: dropped {duplicates} duplicate grid cell(s)");
    }
    let out = resolve_out_dir(args.out.as_deref(), cfg.out_dir.as_deref());
    let results = run_sweep(&cells, &out)?;
    write_sweep(&out.join(SWEEP_FILE), &results)?;
    let resumed = results.iter().filter(|r| r.resumed).count();
    let diverged = results.iter().filter(|r| r.summary.diverged).count();
    println!(
        "{} cells ({} resumed, {} diverged) -> {}",
        results.len(),
        resumed,
        diverged,
        out.display()
    );
    Ok(if diverged > 0 {
        ExitStatus::Diverged
    } else {
        ExitStatus::Success
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"
[base]
steps = 20
seed = 1
[base.problem]
kind = "rosenbrock"
[base.optimizer]
kind = "ada2ms"
[base.lr]
peak = 1e-3

[grid]
optimizer = ["sgdm", "adamw", "ada2ms"]
seed = [1, 2]
"#;

    #[test]
    fn grid_cardinality() {
        let (cells, dup) = SweepConfig::from_toml(SWEEP).unwrap().cells().unwrap();
        assert_eq!((cells.len(), dup), (6, 0));
    }

    #[test]
    fn exponent_axes_collapse_for_other_optimizers() {
        let text = format!("{SWEEP}switch_frac = [0.4, 0.6]\n");
        let (cells, dup) = SweepConfig::from_toml(&text).unwrap().cells().unwrap();
        // sgdm and adamw ignore switch_frac
        assert_eq!((cells.len(), dup), (8, 4));
    }

    #[test]
    fn repeated_values_are_dropped() {
        let text = SWEEP.replace("seed = [1, 2]", "seed = [1, 1, 2]");
        let (cells, dup) = SweepConfig::from_toml(&text).unwrap().cells().unwrap();
        assert_eq!((cells.len(), dup), (6, 3));
    }

    #[test]
    fn per_optimizer_rates() {
        let text = format!("{SWEEP}\n[peak_lr_by_optimizer]\nsgdm = 0.05\n");
        let (cells, _) = SweepConfig::from_toml(&text).unwrap().cells().unwrap();
        for c in cells {
            let want = if c.config.optimizer.kind == OptimizerKind::Sgdm {
                0.05
            } else {
                1e-3
            };
            assert_eq!(c.config.lr.peak, want);
        }
    }
}

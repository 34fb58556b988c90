//! The `train` subcommand.

use std::path::Path;
use std::time::Instant;

use super::config::{ResolvedRun, RunConfig};
use super::records::{
    finite, write_json, write_params, RecordWriter, RunSummary, BEST_PARAMS_FILE, CONFIG_FILE,
    FINAL_PARAMS_FILE, RECORDS_FILE, SUMMARY_FILE, SUMMARY_SCHEMA,
};
use super::{resolve_out_dir, CommonArgs, ExitStatus};
use crate::bench::train;
use crate::error::Result;

pub fn cmd_train(args: &CommonArgs) -> Result<ExitStatus> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let run = config.resolve()?;
    let dir = resolve_out_dir(args.out.as_deref(), run.config.out_dir.as_deref());
    let summary = execute_run(&run, &dir)?;
    println!(
        "{}: best_loss={} final_loss={} steps={} -> {}",
        summary.config_hash.get(..12).unwrap_or_default(),
        show(summary.best_loss),
        show(summary.final_loss),
        summary.steps_completed,
        dir.display()
    );
    if summary.diverged {
        eprintln!("run diverged at step {}", summary.steps_completed);
        return Ok(ExitStatus::Diverged);
    }
    Ok(ExitStatus::Success)
}

fn show(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), |v| format!("{v:e}"))
}

/// Execute a resolved run into `dir`. The summary is written last, so its
/// presence marks a completed run.
pub fn execute_run(run: &ResolvedRun, dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(dir)?;
    let summary_path = dir.join(SUMMARY_FILE);
    if summary_path.exists() {
        std::fs::remove_file(&summary_path)?;
    }
    std::fs::write(dir.join(CONFIG_FILE), run.config.to_toml())?;

    let names: Vec<String> = run
        .problem
        .init_params()
        .iter()
        .map(|p| p.name().to_string())
        .collect();
    let mut writer = RecordWriter::create(&dir.join(RECORDS_FILE), &names)?;
    let start = Instant::now();
    let outcome = train(run.problem.as_ref(), &run.train, &mut |r| writer.write(r))?;
    let wall_time_s = start.elapsed().as_secs_f64();
    writer.finish()?;

    write_params(&dir.join(BEST_PARAMS_FILE), &outcome.best_params)?;
    write_params(&dir.join(FINAL_PARAMS_FILE), &outcome.final_params)?;
    let summary = RunSummary {
        schema: SUMMARY_SCHEMA.into(),
        config_hash: run.config.hash(),
        problem: run.config.problem.name().into(),
        optimizer: run.config.optimizer.kind.to_string(),
        seed: run.config.seed,
        steps: run.config.steps,
        steps_completed: outcome.records.len() as u64,
        best_loss: finite(outcome.best_loss),
        best_step: outcome.best_step,
        final_loss: finite(outcome.final_loss),
        final_full_loss: finite(run.problem.full_loss(&outcome.final_params)),
        best_full_loss: finite(run.problem.full_loss(&outcome.best_params)),
        best_accuracy: run.problem.accuracy(&outcome.best_params),
        diverged: outcome.diverged,
        wall_time_s,
    };
    write_json(&summary_path, &summary)?;
    Ok(summary)
}

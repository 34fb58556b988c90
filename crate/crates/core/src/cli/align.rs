//! The `align` subcommand.
//!
//! Config:
//!
//! ```toml
//! batch_size = 32
//!
//! [reference]
//! optimizer = "adamw"
//! lr = 1e-3
//! lambda = 0.01
//!
//! [target]
//! optimizer = "ada2ms"
//!
//! [problem]                  # any run-config problem
//! kind = "mlp"
//! width = 32
//! n = 512
//! seed = 7
//!
//! [probe]
//! steps = 200
//! burn_in = 100
//! lr = 1e-4
//! seed = 1
//!
//! [hyperparams]              # optional betas and epsilon for both probes
//! beta1 = 0.9
//! ```
//!
//! Both optimizers are probed on the same mini-batch sequence; the target
//! rate is the reference rate scaled by the ratio of mean update norms and
//! the weight decay is scaled inversely, keeping their product fixed. The
//! pair is printed and written to `aligned.toml`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ProblemSpec;
use super::records::fmt_f64;
use super::{resolve_out_dir, AlignArgs, ExitStatus, Fixture};
use crate::error::{Error, Result};
use crate::optim::{
    align_hyperparams, measure_update_norm, table2_entry, OptimizerKind, ProbeConfig, Table2Model,
    TABLE2,
};
use crate::params::HyperParams;

pub const ALIGNED_FILE: &str = "aligned.toml";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub optimizer: OptimizerKind,
}

fn default_batch_size() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignConfig {
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub reference: ReferenceSpec,
    pub target: TargetSpec,
    pub problem: ProblemSpec,
    pub probe: ProbeConfig,
    #[serde(default)]
    pub hyperparams: HyperParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub reference_norm: f64,
    pub target_norm: f64,
    pub lr: f64,
    pub lambda: f64,
}

#[derive(Serialize)]
struct AlignedFile<'a> {
    reference: &'a ReferenceSpec,
    target: AlignedTarget,
    norms: Norms,
}

#[derive(Serialize)]
struct AlignedTarget {
    optimizer: OptimizerKind,
    lr: f64,
    lambda: f64,
}

#[derive(Serialize)]
struct Norms {
    reference: f64,
    target: f64,
}

impl AlignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Probe both optimizers and derive the target pair.
    pub fn align(&self) -> Result<Alignment> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        self.hyperparams.validate()?;
        let mut problem_spec = self.problem.clone();
        if let ProblemSpec::NoisyQuadratic { seed, .. }
        | ProblemSpec::Logistic { seed, .. }
        | ProblemSpec::Mlp { seed, .. }
        | ProblemSpec::Synthetic { seed, .. } = &mut problem_spec
        {
            seed.get_or_insert(self.probe.seed);
        }
        let problem = problem_spec.build(self.batch_size);
        let hp = self.hyperparams.with_lambda(self.reference.lambda);
        let reference =
            measure_update_norm(self.reference.optimizer, problem.as_ref(), &hp, &self.probe)?;
        let target =
            measure_update_norm(self.target.optimizer, problem.as_ref(), &hp, &self.probe)?;
        let (lr, lambda) = align_hyperparams(
            self.reference.lr,
            self.reference.lambda,
            reference.mean_l2,
            target.mean_l2,
        )?;
        Ok(Alignment {
            reference_norm: reference.mean_l2,
            target_norm: target.mean_l2,
            lr,
            lambda,
        })
    }
}

pub fn cmd_align(args: &AlignArgs) -> Result<ExitStatus> {
    if let Some(Fixture::Table2) = args.fixture {
        return print_table2(args.opt.as_deref(), args.model.as_deref());
    }
    let path = args
        .config
        .as_deref()
        .expect("clap requires --config without --fixture");
    let mut cfg = AlignConfig::from_toml(&std::fs::read_to_string(path)?)?;
    if let Some(seed) = args.seed {
        cfg.probe.seed = seed;
    }
    let a = cfg.align()?;
    println!("reference_norm = {}", fmt_f64(a.reference_norm));
    println!("target_norm = {}", fmt_f64(a.target_norm));
    println!("peak_lr = {}", fmt_f64(a.lr));
    println!("weight_decay = {}", fmt_f64(a.lambda));
    let dir = resolve_out_dir(args.out.as_deref(), cfg.out_dir.as_deref());
    write_aligned(&dir, &cfg, &a)?;
    Ok(ExitStatus::Success)
}

fn write_aligned(dir: &Path, cfg: &AlignConfig, a: &Alignment) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let file = AlignedFile {
        reference: &cfg.reference,
        target: AlignedTarget {
            optimizer: cfg.target.optimizer,
            lr: a.lr,
            lambda: a.lambda,
        },
        norms: Norms {
            reference: a.reference_norm,
            target: a.target_norm,
        },
    };
    std::fs::write(
        dir.join(ALIGNED_FILE),
        toml::to_string(&file).expect("alignment serialises"),
    )?;
    Ok(())
}

/// Print published peak rates (and the weight decays they imply). With both
/// an optimizer and a model, prints `key = value` lines; otherwise a CSV
/// table of every matching pair.
fn print_table2(opt: Option<&str>, model: Option<&str>) -> Result<ExitStatus> {
    let model: Option<Table2Model> = model.map(str::parse).transpose()?;
    let entries: Vec<_> = match opt {
        Some(name) => vec![table2_entry(name)
            .ok_or_else(|| Error::Config(format!("no fixture row for optimizer `{name}`")))?],
        None => TABLE2.iter().collect(),
    };
    if let ([entry], Some(m)) = (entries.as_slice(), model) {
        println!("optimizer = {}", entry.optimizer);
        println!("model = {}", m.as_str());
        println!("peak_lr = {}", fmt_f64(entry.peak_lr(m)));
        println!("weight_decay = {}", fmt_f64(entry.weight_decay(m)));
        return Ok(ExitStatus::Success);
    }
    let models = model.map_or(Table2Model::ALL.to_vec(), |m| vec![m]);
    println!("optimizer,model,peak_lr,weight_decay");
    for e in entries {
        for &m in &models {
            println!(
                "{},{},{},{}",
                e.optimizer,
                m.as_str(),
                fmt_f64(e.peak_lr(m)),
                fmt_f64(e.weight_decay(m))
            );
        }
    }
    Ok(ExitStatus::Success)
}

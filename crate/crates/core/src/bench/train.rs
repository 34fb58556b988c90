use serde::{Deserialize, Serialize};

use super::{BatchKey, Problem};
use crate::error::{Error, Result};
use crate::optim::{self, OptimizerKind};
use crate::params::{init_state, HyperParams, ParamTensor};
use crate::schedule::{AlphaPolicy, LrSchedule};

/// Which loss decides the returned extremal point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BestLossMode {
    /// The raw mini-batch loss.
    #[default]
    Raw,
    /// An exponential moving average of the mini-batch loss.
    Ema { beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub kind: OptimizerKind,
    pub hp: HyperParams,
    pub lr: LrSchedule,
    pub alpha: AlphaPolicy,
    pub steps: u64,
    pub batch_seed: u64,
    pub best_loss: BestLossMode,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.lr.total_steps != self.steps {
            return Err(Error::Config(format!(
                "learning-rate schedule covers {} steps, run has {}",
                self.lr.total_steps, self.steps
            )));
        }
        self.hp.validate()?;
        self.lr.validate()?;
        self.alpha.validate(self.steps)?;
        if let BestLossMode::Ema { beta } = self.best_loss {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::Config(format!(
                    "best-loss EMA beta {beta} not in [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// One row of the per-step log.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub t: u64,
    pub lr: f64,
    /// Switching exponent; only Ada2MS has one.
    pub alpha: Option<f64>,
    pub loss: f64,
    pub best_loss: f64,
    /// Update RMS per tensor, in parameter order.
    pub update_rms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at which the best tracked loss was observed.
    pub best_params: Vec<ParamTensor>,
    pub best_loss: f64,
    /// Step whose mini-batch produced `best_loss` (0 if none did).
    pub best_step: u64,
    pub final_params: Vec<ParamTensor>,
    /// Last finite mini-batch loss.
    pub final_loss: f64,
    pub records: Vec<RunRecord>,
    pub diverged: bool,
}

/// Run `cfg.steps` optimizer steps on `problem`, streaming each record to
/// `sink`. Every step draws a batch, evaluates loss and gradient at the
/// current parameters, keeps those parameters if the tracked loss improves,
/// then applies the optimizer. A non-finite loss or gradient stops the run
/// with `diverged` set; records up to that point are kept.
pub fn train(
    problem: &dyn Problem,
    cfg: &TrainConfig,
    sink: &mut dyn FnMut(&RunRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut params = problem.init_params();
    let mut state = init_state(&params)?;
    let mut best_params = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_step = 0;
    let mut final_loss = f64::NAN;
    let mut ema: Option<f64> = None;
    let mut records = Vec::with_capacity(cfg.steps as usize);
    let mut diverged = false;

    for t in 1..=cfg.steps {
        let batch = BatchKey::new(cfg.batch_seed, t);
        let (loss, grads) = problem.loss_and_grad(&params, batch);
        if !loss.is_finite() {
            diverged = true;
            break;
        }
        final_loss = loss;
        let tracked = match cfg.best_loss {
            BestLossMode::Raw => loss,
            BestLossMode::Ema { beta } => {
                let next = ema.map_or(loss, |e| beta * e + (1.0 - beta) * loss);
                ema = Some(next);
                next
            }
        };
        if tracked < best_loss {
            best_loss = tracked;
            best_step = t;
            best_params.clone_from(&params);
        }

        let lr = cfg.lr.lr_at(t)?;
        let alpha = cfg.alpha.alpha_at(t, cfg.steps)?;
        let report = match optim::step(
            cfg.kind,
            &mut params,
            &mut state,
            &grads,
            lr,
            alpha,
            &cfg.hp,
        ) {
            Ok(r) => r,
            Err(Error::NonFiniteGradient { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let record = RunRecord {
            t,
            lr,
            alpha: (cfg.kind == OptimizerKind::Ada2ms).then_some(alpha),
            loss,
            best_loss,
            update_rms: report.tensors.iter().map(|u| u.rms).collect(),
        };
        sink(&record)?;
        records.push(record);
    }

    Ok(TrainOutcome {
        best_params,
        best_loss,
        best_step,
        final_params: params,
        final_loss,
        records,
        diverged,
    })
}

//! Run configuration files.
//!
//! Configs are TOML. A run config looks like:
//!
//! ```toml
//! steps = 5000
//! seed = 42
//! batch_size = 32
//!
//! [problem]
//! kind = "noisy_quadratic"   # rosenbrock | logistic | mlp | synthetic
//! d = 100
//! condition = 100.0
//! noise = 0.01
//!
//! [optimizer]
//! kind = "ada2ms"            # sgdm | adamw | ada2ms
//! lambda = 0.0
//!
//! [lr]
//! kind = "wsds"              # wsds | wsd
//! peak = 1e-2
//!
//! [alpha]
//! mode = "schedule"          # or: mode = "constant", value = 0.5
//! switch_frac = 0.6
//! ```
//!
//! Omitted values take their defaults; [`RunConfig::resolve`] fills them in
//! and the filled-in config is what gets written next to the results.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{
    logistic_problem, mlp_problem, noisy_quadratic, rosenbrock, synthetic_gradient, BestLossMode,
    Problem, TrainConfig,
};
use crate::error::{Error, Result};
use crate::optim::OptimizerKind;
use crate::params::{GradModel, HyperParams};
use crate::rng::derive_seed;
use crate::schedule::{AlphaPolicy, LrKind, LrSchedule, DEFAULT_ETA_INIT, DEFAULT_MIN_FRACTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    NoisyQuadratic {
        d: usize,
        condition: f64,
        noise: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Rosenbrock,
    Logistic {
        n: usize,
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Mlp {
        width: usize,
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Synthetic {
        mu: f64,
        sigma_f: f64,
        sigma: f64,
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NoisyQuadratic { .. } => "noisy_quadratic",
            Self::Rosenbrock => "rosenbrock",
            Self::Logistic { .. } => "logistic",
            Self::Mlp { .. } => "mlp",
            Self::Synthetic { .. } => "synthetic",
        }
    }

    fn seed_mut(&mut self) -> Option<&mut Option<u64>> {
        match self {
            Self::NoisyQuadratic { seed, .. }
            | Self::Logistic { seed, .. }
            | Self::Mlp { seed, .. }
            | Self::Synthetic { seed, .. } => Some(seed),
            Self::Rosenbrock => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("problem: {m}")));
        match *self {
            Self::NoisyQuadratic {
                d,
                condition,
                noise,
                ..
            } => {
                if d == 0 {
                    return bad("d must be at least 1");
                }
                if !(condition >= 1.0 && condition.is_finite()) {
                    return bad("condition must be >= 1");
                }
                if !(noise >= 0.0 && noise.is_finite()) {
                    return bad("noise must be nonnegative");
                }
            }
            Self::Logistic { n, d, .. } if n == 0 || d == 0 => return bad("n and d must be >= 1"),
            Self::Mlp { width, n, .. } if width == 0 || n < 2 => {
                return bad("width must be >= 1 and n >= 2")
            }
            Self::Synthetic {
                mu,
                sigma_f,
                sigma,
                d,
                ..
            } => {
                GradModel::new(mu, sigma_f, sigma, d)
                    .map_err(|e| Error::Config(format!("problem: {e}")))?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Build the problem. Unset data seeds must have been filled in by
    /// [`RunConfig::resolve`].
    pub fn build(&self, batch_size: usize) -> Box<dyn Problem> {
        let seed = |s: Option<u64>| s.unwrap_or(0);
        match *self {
            Self::NoisyQuadratic {
                d,
                condition,
                noise,
                seed: s,
            } => Box::new(noisy_quadratic(d, condition, noise, seed(s))),
            Self::Rosenbrock => Box::new(rosenbrock()),
            Self::Logistic { n, d, seed: s } => {
                Box::new(logistic_problem(n, d, batch_size, seed(s)))
            }
            Self::Mlp { width, n, seed: s } => Box::new(mlp_problem(width, n, batch_size, seed(s))),
            Self::Synthetic {
                mu,
                sigma_f,
                sigma,
                d,
                seed: s,
            } => Box::new(synthetic_gradient(
                GradModel {
                    mu,
                    sigma_f,
                    sigma,
                    d,
                },
                seed(s),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub lambda: f64,
}

fn default_beta1() -> f64 {
    HyperParams::default().beta1
}

fn default_beta2() -> f64 {
    HyperParams::default().beta2
}

fn default_epsilon() -> f64 {
    HyperParams::default().epsilon
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind, hp: HyperParams) -> Self {
        Self {
            kind,
            beta1: hp.beta1,
            beta2: hp.beta2,
            epsilon: hp.epsilon,
            lambda: hp.lambda,
        }
    }

    pub fn hp(&self) -> HyperParams {
        HyperParams {
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSpec {
    #[serde(default = "default_lr_kind")]
    pub kind: LrKind,
    pub peak: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t3: Option<u64>,
}

fn default_lr_kind() -> LrKind {
    LrKind::Wsds
}

impl LrSpec {
    pub fn schedule(&self, steps: u64) -> Result<LrSchedule> {
        let mut s = LrSchedule::with_defaults(self.kind, self.peak, steps)?;
        s.eta_init = self.init.unwrap_or(DEFAULT_ETA_INIT.min(self.peak));
        s.eta_min = self.min.unwrap_or(DEFAULT_MIN_FRACTION * self.peak);
        s.t1 = self.t1.unwrap_or(s.t1);
        s.t2 = self.t2.unwrap_or(s.t2.max(s.t1));
        s.t3 = self.t3.unwrap_or(s.t3.max(s.t2));
        s.validate()?;
        Ok(s)
    }
}

fn default_batch_size() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub steps: u64,
    /// Master seed: drives mini-batch draws and, unless set in `[problem]`,
    /// data generation.
    pub seed: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub best_loss: BestLossMode,
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    pub lr: LrSpec,
    #[serde(default)]
    pub alpha: AlphaPolicy,
}

/// Everything needed to execute a run.
pub struct ResolvedRun {
    pub config: RunConfig,
    pub problem: Box<dyn Problem>,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Fill in every defaulted value and validate. The result is stable
    /// under a second `resolve`.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let mut config = self.clone();
        if config.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if config.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        config.problem.validate()?;
        if let Some(seed) = config.problem.seed_mut() {
            seed.get_or_insert(derive_seed(self.seed, 0x7072_6f62));
        }
        let lr = config.lr.schedule(config.steps)?;
        config.lr.init = Some(lr.eta_init);
        config.lr.min = Some(lr.eta_min);
        config.lr.t1 = Some(lr.t1);
        config.lr.t2 = Some(lr.t2);
        config.lr.t3 = Some(lr.t3);
        let train = TrainConfig {
            kind: config.optimizer.kind,
            hp: config.optimizer.hp(),
            lr,
            alpha: config.alpha,
            steps: config.steps,
            batch_seed: config.seed,
            best_loss: config.best_loss,
        };
        train.validate()?;
        let problem = config.problem.build(config.batch_size);
        Ok(ResolvedRun {
            config,
            problem,
            train,
        })
    }

    /// SHA-256 of the canonical TOML text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

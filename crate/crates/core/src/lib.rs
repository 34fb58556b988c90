//! Ada2MS: an optimizer that mixes elementwise (AdamW-like) and global
//! (momentum-SGD-like) second-moment normalisation through a scheduled
//! switching exponent, together with its two limiting optimizers, learning
//! rate schedules, a Monte Carlo lab for update statistics, desk-scale
//! benchmark problems, and a batch command-line front end.

pub mod bench;
pub mod cli;
pub mod error;
pub mod optim;
pub mod params;
pub mod rng;
pub mod schedule;
pub mod statlab;

pub use error::{Error, Result};
pub use optim::{
    ada2ms_alpha0_reference_step, ada2ms_step, adamw_step, align_hyperparams, sgdw_step,
    OptimizerKind, UpdateReport,
};
pub use params::{decay_mask, init_state, GradModel, HyperParams, OptimizerState, ParamTensor};
pub use schedule::{AlphaPolicy, AlphaSchedule, LrKind, LrSchedule};

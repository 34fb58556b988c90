//! Optimizer steppers.
//!
//! Every stepper is a state transition: it validates the gradients, updates
//! the moment estimates in `state`, moves `params`, and reports the update
//! vector `u` (the quantity scaled by `-eta`, without the decay term).
//!
//! The adaptive steppers store their moments already bias-corrected by
//! running the EMA with the reformulated decay rate
//! `(beta - beta^t) / (1 - beta^t)`, which is zero at `t = 1`.

mod align;

pub use align::{
    align_hyperparams, measure_update_norm, table2_entry, NormProbe, ProbeConfig, Table2Entry,
    Table2Model, TABLE2, TABLE2_REFERENCE, TABLE2_REFERENCE_LAMBDA,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{decay_mask, HyperParams, OptimizerState, ParamTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Momentum SGD with decoupled weight decay. Uses `beta1` as the
    /// momentum coefficient.
    Sgdm,
    Adamw,
    Ada2ms,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [Self::Sgdm, Self::Adamw, Self::Ada2ms];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sgdm => "sgdm",
            Self::Adamw => "adamw",
            Self::Ada2ms => "ada2ms",
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgdm" | "sgdw" => Ok(Self::Sgdm),
            "adamw" => Ok(Self::Adamw),
            "ada2ms" => Ok(Self::Ada2ms),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorUpdate {
    pub name: String,
    pub update: Vec<f64>,
    pub l2: f64,
    pub rms: f64,
}

impl TensorUpdate {
    fn new(name: &str, update: Vec<f64>) -> Self {
        let l2 = l2_norm(&update);
        let rms = l2 / (update.len() as f64).sqrt();
        Self {
            name: name.to_string(),
            update,
            l2,
            rms,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReport {
    /// Step index just completed.
    pub t: u64,
    pub tensors: Vec<TensorUpdate>,
}

impl UpdateReport {
    /// l2 norm of the concatenated update over all tensors.
    pub fn total_l2(&self) -> f64 {
        self.tensors.iter().map(|u| u.l2 * u.l2).sum::<f64>().sqrt()
    }

    pub fn total_len(&self) -> usize {
        self.tensors.iter().map(|u| u.update.len()).sum()
    }

    pub fn total_rms(&self) -> f64 {
        let n = self.total_len();
        if n == 0 {
            0.0
        } else {
            self.total_l2() / (n as f64).sqrt()
        }
    }
}

pub(crate) fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `beta^t` for a 1-based step.
pub fn beta_pow(beta: f64, t: u64) -> f64 {
    match i32::try_from(t) {
        Ok(t) => beta.powi(t),
        Err(_) => beta.powf(t as f64),
    }
}

/// Reformulated decay rate `(beta - beta^t) / (1 - beta^t)`. An EMA run with
/// this rate from any initial value equals the bias-corrected standard EMA.
pub fn reformulated_rate(beta: f64, t: u64) -> f64 {
    let bt = beta_pow(beta, t);
    (beta - bt) / (1.0 - bt)
}

fn check_inputs(params: &[ParamTensor], state: &OptimizerState, grads: &[Vec<f64>]) -> Result<()> {
    if grads.len() != params.len() || state.slots.len() != params.len() {
        return Err(Error::TensorCountMismatch {
            expected: params.len(),
            got: grads.len(),
        });
    }
    for ((p, g), slot) in params.iter().zip(grads).zip(&state.slots) {
        if g.len() != p.len() || slot.m.len() != p.len() {
            return Err(Error::ShapeMismatch {
                name: p.name().to_string(),
                expected: p.len(),
                got: g.len(),
            });
        }
        if let Some(index) = g.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient {
                name: p.name().to_string(),
                index,
            });
        }
    }
    Ok(())
}

/// Momentum SGD with decoupled decay:
/// `m <- beta m + g; theta <- theta - eta (m + lambda_l theta)`.
pub fn sgdw_step(
    params: &mut [ParamTensor],
    state: &mut OptimizerState,
    grads: &[Vec<f64>],
    eta: f64,
    beta: f64,
    lambda: f64,
) -> Result<UpdateReport> {
    check_inputs(params, state, grads)?;
    state.t += 1;
    let mut tensors = Vec::with_capacity(params.len());
    for ((p, g), slot) in params.iter_mut().zip(grads).zip(state.slots.iter_mut()) {
        let decay = decay_mask(p, lambda);
        for (m, &gi) in slot.m.iter_mut().zip(g) {
            *m = beta * *m + gi;
        }
        for (theta, &m) in p.values_mut().iter_mut().zip(&slot.m) {
            *theta -= eta * (m + decay * *theta);
        }
        tensors.push(TensorUpdate::new(&slot.name, slot.m.clone()));
    }
    Ok(UpdateReport {
        t: state.t,
        tensors,
    })
}

/// Which second moment goes under the square root.
#[derive(Clone, Copy)]
enum Normalizer {
    Elementwise,
    Global,
    Mixed(f64),
}

fn adaptive_step(
    params: &mut [ParamTensor],
    state: &mut OptimizerState,
    grads: &[Vec<f64>],
    eta: f64,
    hp: &HyperParams,
    normalizer: Normalizer,
) -> Result<UpdateReport> {
    check_inputs(params, state, grads)?;
    state.t += 1;
    let t = state.t;
    let b1 = reformulated_rate(hp.beta1, t);
    let b2 = reformulated_rate(hp.beta2, t);
    let mut tensors = Vec::with_capacity(params.len());
    for ((p, g), slot) in params.iter_mut().zip(grads).zip(state.slots.iter_mut()) {
        let decay = decay_mask(p, hp.lambda);
        let mut sq_norm = 0.0;
        for ((m, v), &gi) in slot.m.iter_mut().zip(slot.v.iter_mut()).zip(g) {
            *m = b1 * *m + (1.0 - b1) * gi;
            *v = b2 * *v + (1.0 - b2) * gi * gi;
            sq_norm += gi * gi;
        }
        slot.n = b2 * slot.n + (1.0 - b2) * sq_norm;
        let global = slot.n / p.len() as f64;

        let update: Vec<f64> = slot
            .m
            .iter()
            .zip(&slot.v)
            .map(|(&m, &v)| {
                let s = match normalizer {
                    Normalizer::Elementwise => v,
                    Normalizer::Global => global,
                    Normalizer::Mixed(alpha) => v.max(0.0).powf(alpha) * global.powf(1.0 - alpha),
                };
                m / (hp.epsilon + s.sqrt())
            })
            .collect();
        for (theta, &u) in p.values_mut().iter_mut().zip(&update) {
            *theta -= eta * (u + decay * *theta);
        }
        tensors.push(TensorUpdate::new(&slot.name, update));
    }
    Ok(UpdateReport { t, tensors })
}

/// AdamW with bias-corrected moments and decoupled decay on matrix
/// parameters.
pub fn adamw_step(
    params: &mut [ParamTensor],
    state: &mut OptimizerState,
    grads: &[Vec<f64>],
    eta: f64,
    hp: &HyperParams,
) -> Result<UpdateReport> {
    adaptive_step(params, state, grads, eta, hp, Normalizer::Elementwise)
}

/// Ada2MS: normalise by `s = v^alpha (n / |g|)^(1 - alpha)`. The endpoints
/// use `v` and `n / |g|` directly instead of the power form.
pub fn ada2ms_step(
    params: &mut [ParamTensor],
    state: &mut OptimizerState,
    grads: &[Vec<f64>],
    eta: f64,
    alpha: f64,
    hp: &HyperParams,
) -> Result<UpdateReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let normalizer = if alpha == 1.0 {
        Normalizer::Elementwise
    } else if alpha == 0.0 {
        Normalizer::Global
    } else {
        Normalizer::Mixed(alpha)
    };
    adaptive_step(params, state, grads, eta, hp, normalizer)
}

/// Globally normalised momentum written with plain EMAs and an explicit
/// bias-correction division:
///
/// ```text
/// m <- beta1 m + (1 - beta1) g
/// n <- beta2 n + (1 - beta2) |g|^2
/// theta <- theta - eta (m / (1 - beta1^t)) / (eps + sqrt(n / (1 - beta2^t) / d))
/// ```
///
/// No weight decay. `state.slots[..].m` and `.n` hold the uncorrected EMAs, so
/// a state used here must not be shared with the other adaptive steppers.
pub fn ada2ms_alpha0_reference_step(
    params: &mut [ParamTensor],
    state: &mut OptimizerState,
    grads: &[Vec<f64>],
    eta: f64,
    hp: &HyperParams,
) -> Result<UpdateReport> {
    check_inputs(params, state, grads)?;
    state.t += 1;
    let t = state.t;
    let c1 = 1.0 - beta_pow(hp.beta1, t);
    let c2 = 1.0 - beta_pow(hp.beta2, t);
    let mut tensors = Vec::with_capacity(params.len());
    for ((p, g), slot) in params.iter_mut().zip(grads).zip(state.slots.iter_mut()) {
        let d = p.len() as f64;
        for (m, &gi) in slot.m.iter_mut().zip(g) {
            *m = hp.beta1 * *m + (1.0 - hp.beta1) * gi;
        }
        let sq_norm: f64 = g.iter().map(|x| x * x).sum();
        slot.n = hp.beta2 * slot.n + (1.0 - hp.beta2) * sq_norm;
        let n_hat = slot.n / c2;
        let denom = hp.epsilon + (n_hat / d).sqrt();
        let update: Vec<f64> = slot.m.iter().map(|&m| (m / c1) / denom).collect();
        for (theta, &u) in p.values_mut().iter_mut().zip(&update) {
            *theta -= eta * u;
        }
        tensors.push(TensorUpdate::new(&slot.name, update));
    }
    Ok(UpdateReport { t, tensors })
}

/// Dispatch on `kind`. `alpha` is ignored by the non-switching optimizers.
pub fn step(
    kind: OptimizerKind,
    params: &mut [ParamTensor],
    state: &mut OptimizerState,
    grads: &[Vec<f64>],
    eta: f64,
    alpha: f64,
    hp: &HyperParams,
) -> Result<UpdateReport> {
    match kind {
        OptimizerKind::Sgdm => sgdw_step(params, state, grads, eta, hp.beta1, hp.lambda),
        OptimizerKind::Adamw => adamw_step(params, state, grads, eta, hp),
        OptimizerKind::Ada2ms => ada2ms_step(params, state, grads, eta, alpha, hp),
    }
}

#[cfg(test)]
mod tests;

//! Closed-form moments of the momentum buffers and update RMS norms.

use super::snr;
use crate::optim::beta_pow;
use crate::params::GradModel;

/// Step at which a moment is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Step(u64),
    /// The `t -> infinity` limit.
    Stationary,
}

impl Horizon {
    fn pow(self, beta: f64) -> f64 {
        match self {
            Horizon::Step(t) => beta_pow(beta, t),
            Horizon::Stationary => 0.0,
        }
    }
}

impl From<u64> for Horizon {
    fn from(t: u64) -> Self {
        Horizon::Step(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdmMoments {
    pub mean: f64,
    pub variance: f64,
    pub rms: f64,
}

/// Per-component mean, variance and RMS of the heavy-ball buffer
/// `m_t = beta m_{t-1} + g_t`.
pub fn cf_sgdm_moments(beta: f64, model: &GradModel, t: impl Into<Horizon>) -> SgdmMoments {
    let t = t.into();
    let mean = (1.0 - t.pow(beta)) / (1.0 - beta) * model.mu;
    let variance = (1.0 - t.pow(beta * beta)) / (1.0 - beta * beta) * model.total_variance();
    SgdmMoments {
        mean,
        variance,
        rms: (mean * mean + variance).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamMoments {
    /// Mean of the uncorrected first moment.
    pub mean: f64,
    /// Variance of the uncorrected first moment.
    pub variance: f64,
    /// RMS norm of the bias-corrected update `m_hat / sqrt(v_hat)`.
    pub rms_update: f64,
}

pub fn cf_adam_moments(beta1: f64, model: &GradModel, t: impl Into<Horizon>) -> AdamMoments {
    let t = t.into();
    let mean = (1.0 - t.pow(beta1)) * model.mu;
    let variance =
        (1.0 - beta1) / (1.0 + beta1) * (1.0 - t.pow(beta1 * beta1)) * model.total_variance();
    AdamMoments {
        mean,
        variance,
        rms_update: cf_update_rms(beta1, model, t),
    }
}

/// Mean of the uncorrected elementwise second moment.
pub fn cf_adam_second_moment(beta2: f64, model: &GradModel, t: impl Into<Horizon>) -> f64 {
    let t = t.into();
    (1.0 - t.pow(beta2)) * (model.mu * model.mu + model.total_variance())
}

/// Ratio-of-expectations RMS of a bias-corrected normalised update:
///
/// ```text
/// sqrt(k + SNR) / sqrt(1 + SNR),  k = (1 - b1)(1 + b1^t) / ((1 + b1)(1 - b1^t))
/// ```
///
/// Shared by the elementwise (AdamW) and global (alpha = 0) normalisers. A
/// noiseless model returns the `SNR -> infinity` limit 1 (0 if `mu` is 0 too).
pub fn cf_update_rms(beta1: f64, model: &GradModel, t: impl Into<Horizon>) -> f64 {
    let t = t.into();
    let bt = t.pow(beta1);
    let k = (1.0 - beta1) * (1.0 + bt) / ((1.0 + beta1) * (1.0 - bt));
    match snr(model) {
        Ok(snr) => ((k + snr) / (1.0 + snr)).sqrt(),
        Err(_) if model.mu != 0.0 => 1.0,
        Err(_) => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalMoments {
    /// `E |g|^2 = d (sigma_f^2 + mu^2 + sigma^2)`.
    pub expected_g_sq_norm: f64,
    /// Mean of the uncorrected global second moment.
    pub expected_n: f64,
    /// RMS norm of the globally normalised (alpha = 0) update.
    pub rms_alpha0: f64,
}

pub fn cf_global_moments(
    beta1: f64,
    beta2: f64,
    model: &GradModel,
    t: impl Into<Horizon>,
) -> GlobalMoments {
    let t = t.into();
    let d = model.d as f64;
    let expected_g_sq_norm =
        d * (model.sigma_f * model.sigma_f + model.mu * model.mu) + d * model.sigma * model.sigma;
    GlobalMoments {
        expected_g_sq_norm,
        expected_n: (1.0 - t.pow(beta2)) * expected_g_sq_norm,
        rms_alpha0: cf_update_rms(beta1, model, t),
    }
}

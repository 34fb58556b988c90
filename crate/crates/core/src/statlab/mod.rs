//! Statistics of optimizer updates under the synthetic gradient model:
//! closed-form moments and RMS norms, and Monte Carlo estimators that check
//! them.
//!
//! The model draws each gradient component as `mu + sigma_f a + sigma b` with
//! `a`, `b` standard normal, fresh at every step, so consecutive gradients are
//! independent and their variances add.

mod closed_form;
mod monte_carlo;

pub use closed_form::{
    cf_adam_moments, cf_adam_second_moment, cf_global_moments, cf_sgdm_moments, cf_update_rms,
    AdamMoments, GlobalMoments, Horizon, SgdmMoments,
};
pub use monte_carlo::{
    mc_estimate, mc_rms, Betas, McConfig, McEstimate, McKind, VectorMode, MIN_CHAINS,
};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::params::GradModel;

/// One stochastic gradient of length `model.d`.
pub fn sample_gradient<R: Rng + ?Sized>(model: &GradModel, rng: &mut R) -> Vec<f64> {
    (0..model.d)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            model.mu + model.sigma_f * a + model.sigma * b
        })
        .collect()
}

/// Signal-to-noise ratio `mu^2 / (sigma_f^2 + sigma^2)`.
pub fn snr(model: &GradModel) -> Result<f64> {
    let noise = model.total_variance();
    if noise == 0.0 {
        return Err(Error::ZeroNoise);
    }
    Ok(model.mu * model.mu / noise)
}

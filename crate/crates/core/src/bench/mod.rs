//! Desk-scale optimization problems and the training loop.

mod problems;
mod train;

pub use problems::{
    logistic_problem, mlp_problem, noisy_quadratic, rosenbrock, synthetic_gradient, Logistic, Mlp,
    NoisyQuadratic, Rosenbrock, SyntheticGradient,
};
pub use train::{train, BestLossMode, RunRecord, TrainConfig, TrainOutcome};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::params::ParamTensor;
use crate::rng::{derive_seed, stream_rng};

/// Identifies one mini-batch: the run's batch seed and the 1-based step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BatchKey {
    pub seed: u64,
    pub step: u64,
}

impl BatchKey {
    pub fn new(seed: u64, step: u64) -> Self {
        Self { seed, step }
    }
}

/// An objective with an exact gradient. Stochastic problems draw their
/// mini-batch (or gradient noise) from the `BatchKey`, so `loss` and `grad`
/// agree for a fixed key.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn init_params(&self) -> Vec<ParamTensor>;

    fn loss(&self, params: &[ParamTensor], batch: BatchKey) -> f64;

    fn loss_and_grad(&self, params: &[ParamTensor], batch: BatchKey) -> (f64, Vec<Vec<f64>>);

    fn grad(&self, params: &[ParamTensor], batch: BatchKey) -> Vec<Vec<f64>> {
        self.loss_and_grad(params, batch).1
    }

    /// Objective on the full data set (or its noise-free expectation).
    fn full_loss(&self, params: &[ParamTensor]) -> f64;

    /// Classification accuracy on the full data set, when meaningful.
    fn accuracy(&self, _params: &[ParamTensor]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Relative error with the denominator floored at this magnitude, so
/// near-zero gradient entries are judged on an absolute scale.
pub const GRADCHECK_FLOOR: f64 = 1e-3;

/// Compare `loss_and_grad` with central differences (step `h`) at `points`
/// random perturbations of the initial parameters, checking up to
/// `coords_per_point` coordinates each.
pub fn gradcheck(
    problem: &dyn Problem,
    points: usize,
    coords_per_point: usize,
    h: f64,
    seed: u64,
) -> GradCheck {
    let mut rng = stream_rng(derive_seed(seed, 0x6772_6164), 0);
    let base = problem.init_params();
    let mut max_rel: f64 = 0.0;
    let mut checked = 0;
    for point in 0..points {
        let mut params = base.clone();
        for p in params.iter_mut() {
            for v in p.values_mut() {
                *v += 0.5 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let batch = BatchKey::new(seed, point as u64 + 1);
        let (_, grad) = problem.loss_and_grad(&params, batch);
        let total: usize = params.iter().map(ParamTensor::len).sum();
        for _ in 0..coords_per_point.min(total) {
            let mut flat = rng.gen_range(0..total);
            let mut ti = 0;
            while flat >= params[ti].len() {
                flat -= params[ti].len();
                ti += 1;
            }
            let orig = params[ti].values()[flat];
            params[ti].values_mut()[flat] = orig + h;
            let up = problem.loss(&params, batch);
            params[ti].values_mut()[flat] = orig - h;
            let down = problem.loss(&params, batch);
            params[ti].values_mut()[flat] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = grad[ti][flat];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(GRADCHECK_FLOOR);
            max_rel = max_rel.max(rel);
            checked += 1;
        }
    }
    GradCheck {
        max_rel_error: max_rel,
        checked,
    }
}

//! Parameter tensors, optimizer state and hyperparameters shared by every
//! stepper.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named, shaped block of parameters. Values are stored flat in row-major
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if shape.contains(&0) {
            return Err(Error::InvalidTensor {
                name,
                reason: format!("zero extent in shape {shape:?}"),
            });
        }
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::InvalidTensor {
                name,
                reason: format!("{} values for shape {shape:?}", values.len()),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTensor {
                name,
                reason: format!("non-finite value at index {i}"),
            });
        }
        Ok(Self {
            name,
            shape,
            values,
        })
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(name, shape, vec![0.0; len])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Whether weight decay applies: any tensor of rank two or more.
    pub fn is_matrix(&self) -> bool {
        self.rank() >= 2
    }
}

/// Effective decay rate for `tensor`: `lambda` for matrix parameters
/// (rank >= 2), zero for scalars and vectors.
pub fn decay_mask(tensor: &ParamTensor, lambda: f64) -> f64 {
    if tensor.is_matrix() {
        lambda
    } else {
        0.0
    }
}

/// Moment estimates for one tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorState {
    pub name: String,
    /// First moment.
    pub m: Vec<f64>,
    /// Elementwise second moment.
    pub v: Vec<f64>,
    /// Global second moment (EMA of the squared gradient norm).
    pub n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub slots: Vec<TensorState>,
    /// Number of completed steps.
    pub t: u64,
}

impl OptimizerState {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Zero-initialised state with one slot per tensor, in order.
pub fn init_state(tensors: &[ParamTensor]) -> Result<OptimizerState> {
    let mut seen = HashSet::with_capacity(tensors.len());
    let mut slots = Vec::with_capacity(tensors.len());
    for tensor in tensors {
        if !seen.insert(tensor.name()) {
            return Err(Error::DuplicateTensor(tensor.name().to_string()));
        }
        slots.push(TensorState {
            name: tensor.name().to_string(),
            m: vec![0.0; tensor.len()],
            v: vec![0.0; tensor.len()],
            n: 0.0,
        });
    }
    Ok(OptimizerState { slots, t: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Weight-decay rate, applied to matrix parameters only.
    #[serde(default)]
    pub lambda: f64,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.99
}

fn default_epsilon() -> f64 {
    1e-12
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
            lambda: 0.0,
        }
    }
}

impl HyperParams {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, b: f64| {
            if (0.0..1.0).contains(&b) {
                Ok(())
            } else {
                Err(Error::InvalidHyperParam(format!(
                    "{name} = {b} not in [0, 1)"
                )))
            }
        };
        unit("beta1", self.beta1)?;
        unit("beta2", self.beta2)?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidHyperParam(format!(
                "epsilon = {} must be positive",
                self.epsilon
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidHyperParam(format!(
                "lambda = {} must be nonnegative",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Synthetic stochastic-gradient model: each component is
/// `mu + sigma_f * a + sigma * b` with `a`, `b` independent standard normals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradModel {
    pub mu: f64,
    pub sigma_f: f64,
    pub sigma: f64,
    pub d: usize,
}

impl GradModel {
    pub fn new(mu: f64, sigma_f: f64, sigma: f64, d: usize) -> Result<Self> {
        let m = Self {
            mu,
            sigma_f,
            sigma,
            d,
        };
        m.validate()?;
        Ok(m)
    }

    /// Positive mean chosen so that `mu^2 / (sigma_f^2 + sigma^2) = snr`.
    pub fn with_snr(snr: f64, sigma_f: f64, sigma: f64, d: usize) -> Result<Self> {
        let mu = (snr * (sigma_f * sigma_f + sigma * sigma)).sqrt();
        Self::new(mu, sigma_f, sigma, d)
    }

    pub fn total_variance(&self) -> f64 {
        self.sigma_f * self.sigma_f + self.sigma * self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite()
            || !(self.sigma_f >= 0.0 && self.sigma_f.is_finite())
            || !(self.sigma >= 0.0 && self.sigma.is_finite())
            || self.d == 0
        {
            return Err(Error::InvalidHyperParam(format!(
                "gradient model {self:?} needs finite mu, nonnegative sigmas and d >= 1"
            )));
        }
        Ok(())
    }
}

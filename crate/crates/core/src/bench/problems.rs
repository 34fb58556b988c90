use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{BatchKey, Problem};
use crate::params::{GradModel, ParamTensor};
use crate::rng::{derive_seed, stream_rng};

const INIT_DOMAIN: u64 = 0x696e_6974;
const NOISE_DOMAIN: u64 = 0x6e6f_6973;
const DATA_DOMAIN: u64 = 0x6461_7461;
const SHUFFLE_DOMAIN: u64 = 0x7368_7566;

fn normals(seed: u64, stream: u64, len: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Indices of the mini-batch for `batch`. The data are reshuffled at each
/// epoch boundary; a partial trailing batch is dropped.
fn batch_indices(n: usize, batch_size: usize, seed: u64, step: u64) -> Vec<usize> {
    if batch_size >= n {
        return (0..n).collect();
    }
    let per_epoch = (n / batch_size) as u64;
    let k = step.saturating_sub(1);
    let (epoch, slot) = (k / per_epoch, (k % per_epoch) as usize);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream_rng(derive_seed(seed, SHUFFLE_DOMAIN), epoch));
    perm[slot * batch_size..(slot + 1) * batch_size].to_vec()
}

// ---------------------------------------------------------------------------

/// `f(theta) = 1/2 sum kappa_i theta_i^2` with curvatures log-spaced in
/// `[1, condition]`. The mini-batch loss adds `sigma * xi . theta` with fresh
/// standard-normal `xi` per step, so its gradient is `kappa theta + sigma xi`.
#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    kappa: Vec<f64>,
    noise: f64,
    init: Vec<f64>,
    seed: u64,
}

pub fn noisy_quadratic(d: usize, condition: f64, noise: f64, seed: u64) -> NoisyQuadratic {
    let d = d.max(1);
    let kappa = (0..d)
        .map(|i| {
            if d == 1 {
                1.0
            } else {
                condition.powf(i as f64 / (d - 1) as f64)
            }
        })
        .collect();
    let mut rng = stream_rng(derive_seed(seed, INIT_DOMAIN), 0);
    let init = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    NoisyQuadratic {
        kappa,
        noise,
        init,
        seed,
    }
}

impl NoisyQuadratic {
    /// Same curvature with a caller-chosen starting point.
    pub fn with_init(mut self, init: Vec<f64>) -> Self {
        assert_eq!(init.len(), self.kappa.len());
        self.init = init;
        self
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    fn xi(&self, batch: BatchKey) -> Vec<f64> {
        if self.noise == 0.0 {
            return vec![0.0; self.kappa.len()];
        }
        normals(
            derive_seed(batch.seed ^ self.seed, NOISE_DOMAIN),
            batch.step,
            self.kappa.len(),
        )
    }
}

impl Problem for NoisyQuadratic {
    fn name(&self) -> &str {
        "noisy_quadratic"
    }

    fn init_params(&self) -> Vec<ParamTensor> {
        vec![ParamTensor::new("theta", vec![self.init.len()], self.init.clone()).unwrap()]
    }

    fn loss(&self, params: &[ParamTensor], batch: BatchKey) -> f64 {
        self.loss_and_grad(params, batch).0
    }

    fn loss_and_grad(&self, params: &[ParamTensor], batch: BatchKey) -> (f64, Vec<Vec<f64>>) {
        let xi = self.xi(batch);
        let theta = params[0].values();
        let mut loss = 0.0;
        let grad = theta
            .iter()
            .zip(&self.kappa)
            .zip(&xi)
            .map(|((&t, &k), &x)| {
                loss += 0.5 * k * t * t + self.noise * x * t;
                k * t + self.noise * x
            })
            .collect();
        (loss, vec![grad])
    }

    fn full_loss(&self, params: &[ParamTensor]) -> f64 {
        params[0]
            .values()
            .iter()
            .zip(&self.kappa)
            .map(|(t, k)| 0.5 * k * t * t)
            .sum()
    }
}

// ---------------------------------------------------------------------------

/// `(1 - x)^2 + 100 (y - x^2)^2` from the classic start `(-1.2, 1)`.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    init: [f64; 2],
}

pub fn rosenbrock() -> Rosenbrock {
    Rosenbrock { init: [-1.2, 1.0] }
}

impl Rosenbrock {
    pub fn at(x: f64, y: f64) -> Vec<ParamTensor> {
        vec![ParamTensor::new("xy", vec![2], vec![x, y]).unwrap()]
    }
}

impl Problem for Rosenbrock {
    fn name(&self) -> &str {
        "rosenbrock"
    }

    fn init_params(&self) -> Vec<ParamTensor> {
        Self::at(self.init[0], self.init[1])
    }

    fn loss(&self, params: &[ParamTensor], _batch: BatchKey) -> f64 {
        self.full_loss(params)
    }

    fn loss_and_grad(&self, params: &[ParamTensor], _batch: BatchKey) -> (f64, Vec<Vec<f64>>) {
        let (x, y) = (params[0].values()[0], params[0].values()[1]);
        let r = y - x * x;
        let gx = -2.0 * (1.0 - x) - 400.0 * x * r;
        let gy = 200.0 * r;
        (self.full_loss(params), vec![vec![gx, gy]])
    }

    fn full_loss(&self, params: &[ParamTensor]) -> f64 {
        let (x, y) = (params[0].values()[0], params[0].values()[1]);
        (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
    }
}

// ---------------------------------------------------------------------------

/// Binary logistic regression on two Gaussian clouds centred at `+-c`,
/// `c = (1.5, ..., 1.5)`. Parameters: `weight` `[1, d]` (decayed) and
/// `bias` `[1]` (not decayed), both starting at zero.
#[derive(Debug, Clone)]
pub struct Logistic {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    batch_size: usize,
    seed: u64,
}

pub fn logistic_problem(n: usize, d: usize, batch_size: usize, seed: u64) -> Logistic {
    let (n, d) = (n.max(1), d.max(1));
    let mut rng = stream_rng(derive_seed(seed, DATA_DOMAIN), 0);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as f64;
        let sign = if label == 1.0 { 1.0 } else { -1.0 };
        x.push(
            (0..d)
                .map(|_| sign * 1.5 + rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        y.push(label);
    }
    Logistic {
        x,
        y,
        batch_size: batch_size.max(1),
        seed,
    }
}

impl Logistic {
    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    fn eval(&self, params: &[ParamTensor], idx: &[usize], want_grad: bool) -> (f64, Vec<Vec<f64>>) {
        let w = params[0].values();
        let b = params[1].values()[0];
        let mut loss = 0.0;
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for &i in idx {
            let z = b + w.iter().zip(&self.x[i]).map(|(a, c)| a * c).sum::<f64>();
            // log(1 + e^z) - y z, computed stably
            loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - self.y[i] * z;
            if want_grad {
                let r = sigmoid(z) - self.y[i];
                for (g, xi) in gw.iter_mut().zip(&self.x[i]) {
                    *g += r * xi;
                }
                gb += r;
            }
        }
        let k = idx.len() as f64;
        gw.iter_mut().for_each(|g| *g /= k);
        (loss / k, vec![gw, vec![gb / k]])
    }

    fn all(&self) -> Vec<usize> {
        (0..self.y.len()).collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Problem for Logistic {
    fn name(&self) -> &str {
        "logistic"
    }

    fn init_params(&self) -> Vec<ParamTensor> {
        vec![
            ParamTensor::zeros("weight", vec![1, self.dim()]).unwrap(),
            ParamTensor::zeros("bias", vec![1]).unwrap(),
        ]
    }

    fn loss(&self, params: &[ParamTensor], batch: BatchKey) -> f64 {
        let idx = batch_indices(
            self.y.len(),
            self.batch_size,
            batch.seed ^ self.seed,
            batch.step,
        );
        self.eval(params, &idx, false).0
    }

    fn loss_and_grad(&self, params: &[ParamTensor], batch: BatchKey) -> (f64, Vec<Vec<f64>>) {
        let idx = batch_indices(
            self.y.len(),
            self.batch_size,
            batch.seed ^ self.seed,
            batch.step,
        );
        self.eval(params, &idx, true)
    }

    fn full_loss(&self, params: &[ParamTensor]) -> f64 {
        self.eval(params, &self.all(), false).0
    }

    fn accuracy(&self, params: &[ParamTensor]) -> Option<f64> {
        let w = params[0].values();
        let b = params[1].values()[0];
        let hits = self
            .x
            .iter()
            .zip(&self.y)
            .filter(|(x, &y)| {
                let z = b + w.iter().zip(x.iter()).map(|(a, c)| a * c).sum::<f64>();
                (z > 0.0) == (y == 1.0)
            })
            .count();
        Some(hits as f64 / self.y.len() as f64)
    }
}

// ---------------------------------------------------------------------------

/// One-hidden-layer tanh network with a softmax head on an interleaved
/// spiral (one arm per class). Parameters: `w1` `[width, 2]`, `b1`
/// `[width]`, `w2` `[classes, width]`, `b2` `[classes]`.
#[derive(Debug, Clone)]
pub struct Mlp {
    x: Vec<[f64; 2]>,
    y: Vec<usize>,
    width: usize,
    classes: usize,
    batch_size: usize,
    seed: u64,
}

pub const MLP_CLASSES: usize = 2;

pub fn mlp_problem(width: usize, n: usize, batch_size: usize, seed: u64) -> Mlp {
    let classes = MLP_CLASSES;
    let per_class = (n / classes).max(1);
    let mut x = Vec::with_capacity(per_class * classes);
    let mut y = Vec::with_capacity(per_class * classes);
    for i in 0..per_class {
        let r = (i as f64 + 1.0) / per_class as f64;
        for c in 0..classes {
            let angle = 1.75 * PI * r + 2.0 * PI * c as f64 / classes as f64;
            x.push([r * angle.cos(), r * angle.sin()]);
            y.push(c);
        }
    }
    Mlp {
        x,
        y,
        width: width.max(1),
        classes,
        batch_size: batch_size.max(1),
        seed,
    }
}

struct MlpView<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
}

impl Mlp {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn view<'a>(&self, params: &'a [ParamTensor]) -> MlpView<'a> {
        MlpView {
            w1: params[0].values(),
            b1: params[1].values(),
            w2: params[2].values(),
            b2: params[3].values(),
        }
    }

    fn forward(&self, p: &MlpView<'_>, x: &[f64; 2], hidden: &mut [f64], logits: &mut [f64]) {
        for (j, h) in hidden.iter_mut().enumerate() {
            *h = (p.w1[2 * j] * x[0] + p.w1[2 * j + 1] * x[1] + p.b1[j]).tanh();
        }
        for (k, z) in logits.iter_mut().enumerate() {
            let row = &p.w2[k * self.width..(k + 1) * self.width];
            *z = p.b2[k]
                + row
                    .iter()
                    .zip(hidden.iter())
                    .map(|(a, h)| a * h)
                    .sum::<f64>();
        }
    }

    /// Mean softmax cross-entropy over `idx`, with the gradient by manual
    /// backpropagation when requested.
    fn eval(&self, params: &[ParamTensor], idx: &[usize], want_grad: bool) -> (f64, Vec<Vec<f64>>) {
        let p = self.view(params);
        let (w, c) = (self.width, self.classes);
        let mut grads = vec![
            vec![0.0; 2 * w],
            vec![0.0; w],
            vec![0.0; c * w],
            vec![0.0; c],
        ];
        let mut hidden = vec![0.0; w];
        let mut logits = vec![0.0; c];
        let mut delta_h = vec![0.0; w];
        let mut loss = 0.0;
        for &i in idx {
            let x = &self.x[i];
            self.forward(&p, x, &mut hidden, &mut logits);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
            let log_norm = max + sum.ln();
            loss += log_norm - logits[self.y[i]];
            if !want_grad {
                continue;
            }
            delta_h.iter_mut().for_each(|d| *d = 0.0);
            for k in 0..c {
                let r = (logits[k] - log_norm).exp() - if k == self.y[i] { 1.0 } else { 0.0 };
                grads[3][k] += r;
                for j in 0..w {
                    grads[2][k * w + j] += r * hidden[j];
                    delta_h[j] += r * p.w2[k * w + j];
                }
            }
            for j in 0..w {
                let pre = delta_h[j] * (1.0 - hidden[j] * hidden[j]);
                grads[0][2 * j] += pre * x[0];
                grads[0][2 * j + 1] += pre * x[1];
                grads[1][j] += pre;
            }
        }
        let k = idx.len() as f64;
        for g in grads.iter_mut().flat_map(|g| g.iter_mut()) {
            *g /= k;
        }
        (loss / k, grads)
    }

    fn all(&self) -> Vec<usize> {
        (0..self.y.len()).collect()
    }

    /// All-zero parameters of the right shapes.
    pub fn zero_params(&self) -> Vec<ParamTensor> {
        let (w, c) = (self.width, self.classes);
        vec![
            ParamTensor::zeros("w1", vec![w, 2]).unwrap(),
            ParamTensor::zeros("b1", vec![w]).unwrap(),
            ParamTensor::zeros("w2", vec![c, w]).unwrap(),
            ParamTensor::zeros("b2", vec![c]).unwrap(),
        ]
    }

    pub fn class_priors(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.classes];
        for &y in &self.y {
            counts[y] += 1.0;
        }
        counts.iter().map(|c| c / self.y.len() as f64).collect()
    }
}

impl Problem for Mlp {
    fn name(&self) -> &str {
        "mlp"
    }

    fn init_params(&self) -> Vec<ParamTensor> {
        let (w, c) = (self.width, self.classes);
        let s = derive_seed(self.seed, INIT_DOMAIN);
        // wide first layer so the tanh units start spread over the spiral
        let w1 = normals(s, 0, 2 * w).iter().map(|v| 2.0 * v).collect();
        let scale2 = (1.0 / w as f64).sqrt();
        let w2 = normals(s, 1, c * w).iter().map(|v| v * scale2).collect();
        vec![
            ParamTensor::new("w1", vec![w, 2], w1).unwrap(),
            ParamTensor::zeros("b1", vec![w]).unwrap(),
            ParamTensor::new("w2", vec![c, w], w2).unwrap(),
            ParamTensor::zeros("b2", vec![c]).unwrap(),
        ]
    }

    fn loss(&self, params: &[ParamTensor], batch: BatchKey) -> f64 {
        let idx = batch_indices(
            self.len(),
            self.batch_size,
            batch.seed ^ self.seed,
            batch.step,
        );
        self.eval(params, &idx, false).0
    }

    fn loss_and_grad(&self, params: &[ParamTensor], batch: BatchKey) -> (f64, Vec<Vec<f64>>) {
        let idx = batch_indices(
            self.len(),
            self.batch_size,
            batch.seed ^ self.seed,
            batch.step,
        );
        self.eval(params, &idx, true)
    }

    fn full_loss(&self, params: &[ParamTensor]) -> f64 {
        self.eval(params, &self.all(), false).0
    }

    fn accuracy(&self, params: &[ParamTensor]) -> Option<f64> {
        let p = self.view(params);
        let mut hidden = vec![0.0; self.width];
        let mut logits = vec![0.0; self.classes];
        let hits = self
            .x
            .iter()
            .zip(&self.y)
            .filter(|(x, &y)| {
                self.forward(&p, x, &mut hidden, &mut logits);
                let best = (0..self.classes)
                    .max_by(|&a, &b| logits[a].total_cmp(&logits[b]))
                    .unwrap();
                best == y
            })
            .count();
        Some(hits as f64 / self.len() as f64)
    }
}

// ---------------------------------------------------------------------------

/// Linear objective whose gradient is a fresh draw from a [`GradModel`] each
/// step, independent of the parameters. Used to probe update statistics.
#[derive(Debug, Clone)]
pub struct SyntheticGradient {
    model: GradModel,
    seed: u64,
}

pub fn synthetic_gradient(model: GradModel, seed: u64) -> SyntheticGradient {
    SyntheticGradient { model, seed }
}

impl SyntheticGradient {
    fn sample(&self, batch: BatchKey) -> Vec<f64> {
        let mut rng = stream_rng(
            derive_seed(batch.seed ^ self.seed, NOISE_DOMAIN),
            batch.step,
        );
        crate::statlab::sample_gradient(&self.model, &mut rng)
    }
}

impl Problem for SyntheticGradient {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn init_params(&self) -> Vec<ParamTensor> {
        vec![ParamTensor::zeros("theta", vec![self.model.d]).unwrap()]
    }

    fn loss(&self, params: &[ParamTensor], batch: BatchKey) -> f64 {
        let g = self.sample(batch);
        params[0].values().iter().zip(&g).map(|(t, g)| t * g).sum()
    }

    fn loss_and_grad(&self, params: &[ParamTensor], batch: BatchKey) -> (f64, Vec<Vec<f64>>) {
        let g = self.sample(batch);
        let loss = params[0].values().iter().zip(&g).map(|(t, g)| t * g).sum();
        (loss, vec![g])
    }

    fn full_loss(&self, params: &[ParamTensor]) -> f64 {
        self.model.mu * params[0].values().iter().sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::gradcheck;

    fn key() -> BatchKey {
        BatchKey::new(1, 1)
    }

    #[test]
    fn quadratic_by_hand() {
        let q = noisy_quadratic(2, 2.0, 0.0, 0);
        assert_eq!(q.kappa(), &[1.0, 2.0]);
        let p = vec![ParamTensor::new("theta", vec![2], vec![1.0, 1.0]).unwrap()];
        let (loss, grad) = q.loss_and_grad(&p, key());
        assert_eq!(loss, 1.5);
        assert_eq!(grad[0], vec![1.0, 2.0]);
    }

    #[test]
    fn quadratic_minimum_has_noise_only_gradient() {
        let q = noisy_quadratic(4, 10.0, 0.3, 5);
        let p = vec![ParamTensor::zeros("theta", vec![4]).unwrap()];
        let (loss, grad) = q.loss_and_grad(&p, key());
        assert_eq!(loss, 0.0);
        assert_eq!(q.full_loss(&p), 0.0);
        let xi = q.xi(key());
        for (g, x) in grad[0].iter().zip(&xi) {
            assert_eq!(*g, 0.3 * x);
        }
    }

    #[test]
    fn rosenbrock_values() {
        let r = rosenbrock();
        let (l, g) = r.loss_and_grad(&Rosenbrock::at(1.0, 1.0), key());
        assert_eq!(l, 0.0);
        assert_eq!(g[0], vec![0.0, 0.0]);
        assert_eq!(r.full_loss(&Rosenbrock::at(0.0, 0.0)), 1.0);
        assert_eq!(r.full_loss(&Rosenbrock::at(-1.0, 1.0)), 4.0);
    }

    #[test]
    fn logistic_uninformative_predictor() {
        let l = logistic_problem(200, 3, 32, 9);
        let p = l.init_params();
        assert!((l.full_loss(&p) - std::f64::consts::LN_2).abs() < 1e-14);
        assert!(p[0].is_matrix() && !p[1].is_matrix());
    }

    #[test]
    fn mlp_dead_network_bias_gradient() {
        let m = mlp_problem(8, 90, 1000, 2);
        let p = m.zero_params();
        let (_, g) = m.eval(&p, &m.all(), true);
        let priors = m.class_priors();
        for k in 0..MLP_CLASSES {
            let expected = 1.0 / MLP_CLASSES as f64 - priors[k];
            assert!((g[3][k] - expected).abs() < 1e-15);
        }
        // hidden activations are zero, so nothing else moves
        assert!(g[0].iter().chain(&g[1]).chain(&g[2]).all(|v| *v == 0.0));
    }

    #[test]
    fn batches_cover_each_epoch_once() {
        let mut seen: Vec<usize> = (1..=4).flat_map(|s| batch_indices(20, 5, 7, s)).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..20).collect::<Vec<_>>());
        assert_ne!(batch_indices(20, 5, 7, 1), batch_indices(20, 5, 7, 5));
        assert_eq!(batch_indices(20, 5, 7, 3), batch_indices(20, 5, 7, 3));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let problems: Vec<Box<dyn Problem>> = vec![
            Box::new(noisy_quadratic(10, 100.0, 0.1, 3)),
            Box::new(rosenbrock()),
            Box::new(logistic_problem(64, 4, 16, 3)),
            Box::new(mlp_problem(6, 40, 8, 3)),
        ];
        for p in &problems {
            let r = gradcheck(p.as_ref(), 10, 10, 1e-6, 11);
            assert!(r.max_rel_error <= 1e-5, "{}: {:?}", p.name(), r);
        }
    }
}

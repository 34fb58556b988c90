//! Monte Carlo estimators for the update statistics.
//!
//! Each chain runs one optimizer recurrence for `t` steps on fresh gradients
//! from the model and contributes one sample. Chains are seeded by
//! `(master seed, chain index)` and reduced in chain order, so an estimate
//! is reproducible bit-for-bit however the chains are scheduled.
//!
//! Elementwise quantities simulate one scalar component: the components
//! are i.i.d., so a scalar chain has exactly the per-component law.
//! Quantities involving the global second moment need all `d` components.
//! [`VectorMode::Reduced`] tracks them through sufficient statistics: in an
//! orthonormal basis whose first axis is `1 / sqrt(d)`, the gradient is
//! `sqrt(d) mu + s Z` on that axis and isotropic noise on the other `d - 1`.
//! Only the axis coordinate of the momentum, the squared norm of its
//! orthogonal part and the global moment are needed. For an isotropic draw
//! `z` and fixed vector `m`, `<m, z> = |m| Z1` and `|z|^2 = Z1^2 + chi2(k - 1)`,
//! which gives an exact O(1)-per-step update of the same joint law.
//! [`VectorMode::Full`] simulates all `d` components and serves as a check.
//!
//! With [`McConfig::pooled`] set, the moment-buffer kinds (`Sgdm`,
//! `AdamFirstMoment`, `AdamSecondMoment`) instead run a `d`-component state
//! per chain and pool its components: the mean is the component average,
//! the variance the within-chain dispersion `sum (m_i - mean m)^2 / (d - 1)`,
//! both unbiased for the per-component values since components are i.i.d.
//! The reduced form of a linear buffer uses the same axis/orthogonal split;
//! the component average of `v` is the global moment over `d`. No reduced
//! form gives the dispersion of `v`, so its pooled variance is NaN unless
//! [`VectorMode::Full`] is used.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use super::sample_gradient;
use crate::error::{Error, Result};
use crate::optim::reformulated_rate;
use crate::params::GradModel;
use crate::rng::{stream_rng, StreamRng};

/// Smallest chain count accepted by [`mc_rms`].
pub const MIN_CHAINS: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum McKind {
    /// Heavy-ball buffer `m = beta1 m + g`.
    Sgdm,
    /// Uncorrected first-moment EMA.
    AdamFirstMoment,
    /// Uncorrected elementwise second-moment EMA.
    AdamSecondMoment,
    /// Bias-corrected `m / sqrt(v)`.
    AdamUpdate,
    /// Uncorrected global second moment (EMA of `|g|^2`).
    GlobalSecondMoment,
    /// Bias-corrected `m / sqrt(n / d)`.
    Alpha0Update,
    /// Bias-corrected `m / sqrt(v^alpha (n / d)^(1 - alpha))`.
    Ada2msUpdate(f64),
}

impl McKind {
    pub fn tag(&self) -> String {
        match self {
            Self::Sgdm => "sgdm".into(),
            Self::AdamFirstMoment => "adam_first_moment".into(),
            Self::AdamSecondMoment => "adam_second_moment".into(),
            Self::AdamUpdate => "adam_update".into(),
            Self::GlobalSecondMoment => "global_second_moment".into(),
            Self::Alpha0Update => "alpha0_update".into(),
            Self::Ada2msUpdate(a) => format!("ada2ms_update({a})"),
        }
    }

    fn is_vector(&self) -> bool {
        matches!(
            self,
            Self::GlobalSecondMoment | Self::Alpha0Update | Self::Ada2msUpdate(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Betas {
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for Betas {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VectorMode {
    /// Exact sufficient-statistic chains where available.
    #[default]
    Reduced,
    /// All `d` components.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub chains: u64,
    pub seed: u64,
    pub vector: VectorMode,
    /// Pool the components of a `d`-dimensional moment buffer; see the
    /// module docs. Ignored for other kinds and for `d = 1`.
    pub pooled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub tag: String,
    pub chains: u64,
    pub seed: u64,
    pub t: u64,
    /// Mean of the per-chain value (a component, or the component average
    /// for vector chains).
    pub mean: f64,
    pub mean_se: f64,
    /// Variance of the per-chain value, or for pooled chains the mean
    /// within-chain component variance.
    pub variance: f64,
    pub variance_se: f64,
    /// Root of the mean squared component.
    pub rms: f64,
    pub rms_se: f64,
}

#[derive(Debug, Clone, Copy)]
struct ChainSample {
    value: f64,
    /// Mean square over the chain's components.
    sq: f64,
    /// Unbiased within-chain component variance, for pooled chains.
    disp: f64,
}

impl ChainSample {
    fn single(value: f64, sq: f64) -> Self {
        Self {
            value,
            sq,
            disp: f64::NAN,
        }
    }
}

fn scalar_gradient(model: &GradModel, rng: &mut StreamRng) -> f64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    model.mu + model.sigma_f * a + model.sigma * b
}

fn scalar_chain(
    kind: McKind,
    b: Betas,
    model: &GradModel,
    t: u64,
    rng: &mut StreamRng,
) -> ChainSample {
    let (mut m, mut v) = (0.0_f64, 0.0_f64);
    for step in 1..=t {
        let g = scalar_gradient(model, rng);
        match kind {
            McKind::Sgdm => m = b.beta1 * m + g,
            McKind::AdamFirstMoment => m = b.beta1 * m + (1.0 - b.beta1) * g,
            McKind::AdamSecondMoment => v = b.beta2 * v + (1.0 - b.beta2) * g * g,
            _ => {
                let b1 = reformulated_rate(b.beta1, step);
                let b2 = reformulated_rate(b.beta2, step);
                m = b1 * m + (1.0 - b1) * g;
                v = b2 * v + (1.0 - b2) * g * g;
            }
        }
    }
    let value = match kind {
        McKind::AdamSecondMoment => v,
        McKind::AdamUpdate => m / v.sqrt(),
        _ => m,
    };
    ChainSample::single(value, value * value)
}

fn full_vector_chain(
    kind: McKind,
    b: Betas,
    model: &GradModel,
    t: u64,
    rng: &mut StreamRng,
) -> ChainSample {
    let d = model.d;
    let mut m = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut n = 0.0;
    for step in 1..=t {
        let g = sample_gradient(model, rng);
        let sq: f64 = g.iter().map(|x| x * x).sum();
        if kind == McKind::GlobalSecondMoment {
            n = b.beta2 * n + (1.0 - b.beta2) * sq;
            continue;
        }
        let b1 = reformulated_rate(b.beta1, step);
        let b2 = reformulated_rate(b.beta2, step);
        for i in 0..d {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        }
        n = b2 * n + (1.0 - b2) * sq;
    }
    if kind == McKind::GlobalSecondMoment {
        return ChainSample::single(n, n * n);
    }
    let alpha = match kind {
        McKind::Ada2msUpdate(a) => a,
        _ => 0.0,
    };
    let global = n / d as f64;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for i in 0..d {
        let s = if alpha == 1.0 {
            v[i]
        } else if alpha == 0.0 {
            global
        } else {
            v[i].powf(alpha) * global.powf(1.0 - alpha)
        };
        let u = m[i] / s.sqrt();
        sum += u;
        sum_sq += u * u;
    }
    ChainSample::single(sum / d as f64, sum_sq / d as f64)
}

fn reduced_vector_chain(
    kind: McKind,
    b: Betas,
    model: &GradModel,
    t: u64,
    rng: &mut StreamRng,
) -> ChainSample {
    let d = model.d;
    let dd = d as f64;
    let s = model.total_variance().sqrt();
    let axis_mean = dd.sqrt() * model.mu;
    let chi = |k: usize| ChiSquared::new(k as f64).ok();
    let chi_rest = chi(d - 1);
    let chi_perp = if d >= 2 { chi(d - 2) } else { None };

    if kind == McKind::GlobalSecondMoment {
        let mut n = 0.0;
        for _ in 0..t {
            let g0 = axis_mean + s * rng.sample::<f64, _>(StandardNormal);
            let rest = chi_rest.map_or(0.0, |c| c.sample(rng));
            n = b.beta2 * n + (1.0 - b.beta2) * (g0 * g0 + s * s * rest);
        }
        return ChainSample::single(n, n * n);
    }

    // axis coordinate of m, squared norm of its orthogonal part, global moment
    let (mut m0, mut r, mut n) = (0.0_f64, 0.0_f64, 0.0_f64);
    for step in 1..=t {
        let a = reformulated_rate(b.beta1, step);
        let a2 = reformulated_rate(b.beta2, step);
        let g0 = axis_mean + s * rng.sample::<f64, _>(StandardNormal);
        let (z1, rest) = if d >= 2 {
            let z1: f64 = rng.sample(StandardNormal);
            (z1, chi_perp.map_or(0.0, |c| c.sample(rng)))
        } else {
            (0.0, 0.0)
        };
        let perp_sq = s * s * (z1 * z1 + rest);
        m0 = a * m0 + (1.0 - a) * g0;
        r = a * a * r + 2.0 * a * (1.0 - a) * s * r.sqrt() * z1 + (1.0 - a) * (1.0 - a) * perp_sq;
        r = r.max(0.0);
        n = a2 * n + (1.0 - a2) * (g0 * g0 + perp_sq);
    }
    // u = m / sqrt(n / d): component mean <u, 1> / d and mean square |u|^2 / d
    ChainSample::single(m0 / n.sqrt(), (m0 * m0 + r) / n)
}

/// Rates `(a, c)` of the linear buffer update `m = a m + c x`.
fn buffer_rates(kind: McKind, b: Betas) -> (f64, f64) {
    match kind {
        McKind::Sgdm => (b.beta1, 1.0),
        McKind::AdamFirstMoment => (b.beta1, 1.0 - b.beta1),
        McKind::AdamSecondMoment => (b.beta2, 1.0 - b.beta2),
        _ => unreachable!("not a moment buffer"),
    }
}

fn pooled_full_chain(
    kind: McKind,
    b: Betas,
    model: &GradModel,
    t: u64,
    rng: &mut StreamRng,
) -> ChainSample {
    let (a, c) = buffer_rates(kind, b);
    let square = kind == McKind::AdamSecondMoment;
    let mut m = vec![0.0; model.d];
    for _ in 0..t {
        let g = sample_gradient(model, rng);
        for (mi, gi) in m.iter_mut().zip(&g) {
            let x = if square { gi * gi } else { *gi };
            *mi = a * *mi + c * x;
        }
    }
    let dd = model.d as f64;
    let mean = m.iter().sum::<f64>() / dd;
    ChainSample {
        value: mean,
        sq: m.iter().map(|x| x * x).sum::<f64>() / dd,
        disp: m.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (dd - 1.0),
    }
}

fn pooled_reduced_chain(
    kind: McKind,
    b: Betas,
    model: &GradModel,
    t: u64,
    rng: &mut StreamRng,
) -> ChainSample {
    let (a, c) = buffer_rates(kind, b);
    let dd = model.d as f64;
    let s = model.total_variance().sqrt();
    let axis_mean = dd.sqrt() * model.mu;
    if kind == McKind::AdamSecondMoment {
        let chi_rest = ChiSquared::new(dd - 1.0).ok();
        let mut n = 0.0;
        for _ in 0..t {
            let g0 = axis_mean + s * rng.sample::<f64, _>(StandardNormal);
            let rest = chi_rest.map_or(0.0, |x| x.sample(rng));
            n = a * n + c * (g0 * g0 + s * s * rest);
        }
        let mean = n / dd;
        return ChainSample {
            value: mean,
            sq: f64::NAN,
            disp: f64::NAN,
        };
    }
    let chi_perp = ChiSquared::new(dd - 2.0).ok();
    let (mut m0, mut r) = (0.0_f64, 0.0_f64);
    for _ in 0..t {
        let g0 = axis_mean + s * rng.sample::<f64, _>(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let rest = chi_perp.map_or(0.0, |x| x.sample(rng));
        m0 = a * m0 + c * g0;
        r = a * a * r + 2.0 * a * c * s * r.sqrt() * z1 + c * c * s * s * (z1 * z1 + rest);
        r = r.max(0.0);
    }
    ChainSample {
        value: m0 / dd.sqrt(),
        sq: (m0 * m0 + r) / dd,
        disp: r / (dd - 1.0),
    }
}

fn is_poolable(kind: McKind, cfg: &McConfig, model: &GradModel) -> bool {
    cfg.pooled
        && model.d >= 2
        && matches!(
            kind,
            McKind::Sgdm | McKind::AdamFirstMoment | McKind::AdamSecondMoment
        )
}

fn run_chain(
    kind: McKind,
    betas: Betas,
    model: &GradModel,
    t: u64,
    cfg: &McConfig,
    rng: &mut StreamRng,
) -> ChainSample {
    if is_poolable(kind, cfg, model) {
        return match cfg.vector {
            VectorMode::Reduced => pooled_reduced_chain(kind, betas, model, t, rng),
            VectorMode::Full => pooled_full_chain(kind, betas, model, t, rng),
        };
    }
    if !kind.is_vector() {
        return scalar_chain(kind, betas, model, t, rng);
    }
    let reducible = matches!(kind, McKind::GlobalSecondMoment | McKind::Alpha0Update)
        || kind == McKind::Ada2msUpdate(0.0);
    match cfg.vector {
        VectorMode::Reduced if reducible => reduced_vector_chain(kind, betas, model, t, rng),
        _ => full_vector_chain(kind, betas, model, t, rng),
    }
}

/// Estimate the statistics of `kind` after `t` steps from `cfg.chains`
/// independent chains. Any chain count of at least 2 is accepted; see
/// [`mc_rms`] for the checked entry point.
pub fn mc_estimate(
    kind: McKind,
    betas: Betas,
    model: &GradModel,
    t: u64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    model.validate()?;
    if cfg.chains < 2 {
        return Err(Error::TooFewChains {
            min: 2,
            got: cfg.chains,
        });
    }
    if t == 0 {
        return Err(Error::StepOutOfRange { t, total: 0 });
    }
    if let McKind::Ada2msUpdate(a) = kind {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::AlphaOutOfRange(a));
        }
    }
    let pooled = is_poolable(kind, cfg, model);
    let samples: Vec<ChainSample> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = stream_rng(cfg.seed, chain);
            run_chain(kind, betas, model, t, cfg, &mut rng)
        })
        .collect();
    if let Some(chain) = samples
        .iter()
        .position(|s| !(s.value.is_finite() && (s.sq.is_finite() || pooled)))
    {
        return Err(Error::NonFiniteChain {
            chain: chain as u64,
            seed: cfg.seed,
        });
    }

    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.value).sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for s in &samples {
        let dev = s.value - mean;
        m2 += dev * dev;
        m4 += dev.powi(4);
    }
    let mean_se = (m2 / (n - 1.0) / n).sqrt();
    let (variance, variance_se) = if pooled {
        let disp = samples.iter().map(|s| s.disp).sum::<f64>() / n;
        let disp_var = samples.iter().map(|s| (s.disp - disp).powi(2)).sum::<f64>() / (n - 1.0);
        (disp, (disp_var / n).sqrt())
    } else {
        let variance = m2 / (n - 1.0);
        let m4 = m4 / n;
        (variance, ((m4 - variance * variance).max(0.0) / n).sqrt())
    };

    let mean_sq = samples.iter().map(|s| s.sq).sum::<f64>() / n;
    let sq_var = samples
        .iter()
        .map(|s| (s.sq - mean_sq).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let rms = mean_sq.sqrt();
    let rms_se = if rms > 0.0 {
        (sq_var / n).sqrt() / (2.0 * rms)
    } else {
        0.0
    };

    Ok(McEstimate {
        tag: kind.tag(),
        chains: cfg.chains,
        seed: cfg.seed,
        t,
        mean,
        mean_se,
        variance,
        variance_se,
        rms,
        rms_se,
    })
}

/// Monte Carlo estimate with at least [`MIN_CHAINS`] chains, using exact
/// reduced chains for vector quantities where possible.
pub fn mc_rms(
    kind: McKind,
    betas: Betas,
    model: &GradModel,
    t: u64,
    chains: u64,
    seed: u64,
) -> Result<McEstimate> {
    if chains < MIN_CHAINS {
        return Err(Error::TooFewChains {
            min: MIN_CHAINS,
            got: chains,
        });
    }
    mc_estimate(
        kind,
        betas,
        model,
        t,
        &McConfig {
            chains,
            seed,
            vector: VectorMode::Reduced,
            pooled: false,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statlab::{
        cf_adam_moments, cf_adam_second_moment, cf_global_moments, cf_sgdm_moments,
    };

    fn model(mu: f64, d: usize) -> GradModel {
        GradModel::new(mu, 1.0, 0.5, d).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn sgdm_rms_matches_closed_form() {
        let m = model(0.3, 1);
        let est = mc_rms(McKind::Sgdm, Betas::default(), &m, 200, 100_000, 1).unwrap();
        let cf = cf_sgdm_moments(0.9, &m, 200);
        assert!((cf.rms - 3.9470).abs() < 1e-4);
        assert!(rel(est.rms, cf.rms) < 0.02, "{est:?}");
    }

    #[test]
    fn reduced_chains_agree_with_full_vectors() {
        // Both samplers target the same law; compare at matched precision.
        let m = model(0.3, 64);
        let b = Betas::default();
        for kind in [McKind::GlobalSecondMoment, McKind::Alpha0Update] {
            let run = |vector| {
                mc_estimate(
                    kind,
                    b,
                    &m,
                    40,
                    &McConfig {
                        chains: 4000,
                        seed: 9,
                        vector,
                        pooled: false,
                    },
                )
                .unwrap()
            };
            let (red, full) = (run(VectorMode::Reduced), run(VectorMode::Full));
            let tol = 4.0 * (red.rms_se.powi(2) + full.rms_se.powi(2)).sqrt();
            assert!(
                (red.rms - full.rms).abs() < tol,
                "{kind:?}: {red:?} vs {full:?}"
            );
            let tol = 4.0 * (red.mean_se.powi(2) + full.mean_se.powi(2)).sqrt();
            assert!(
                (red.mean - full.mean).abs() < tol,
                "{kind:?}: {red:?} vs {full:?}"
            );
        }
        let cf = cf_global_moments(0.9, 0.99, &m, 40);
        let n = mc_estimate(
            McKind::GlobalSecondMoment,
            b,
            &m,
            40,
            &McConfig {
                chains: 4000,
                seed: 2,
                vector: VectorMode::Reduced,
                pooled: false,
            },
        )
        .unwrap();
        assert!(rel(n.mean, cf.expected_n) < 0.01);
    }

    #[test]
    fn alpha0_limit_matches_full_simulation_in_both_endpoints() {
        let m = model(0.5, 16);
        let b = Betas::default();
        let cfg = McConfig {
            chains: 200,
            seed: 4,
            vector: VectorMode::Full,
            pooled: false,
        };
        let a = mc_estimate(McKind::Alpha0Update, b, &m, 30, &cfg).unwrap();
        let z = mc_estimate(McKind::Ada2msUpdate(0.0), b, &m, 30, &cfg).unwrap();
        assert_eq!(a.rms.to_bits(), z.rms.to_bits());
        let one = mc_estimate(McKind::Ada2msUpdate(1.0), b, &m, 30, &cfg).unwrap();
        let adam = cf_adam_moments(0.9, &m, 30).rms_update;
        assert!(rel(one.rms, adam) < 0.05);
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let m = model(0.3, 1);
        let a = mc_rms(McKind::AdamUpdate, Betas::default(), &m, 50, 2000, 7).unwrap();
        let b = mc_rms(McKind::AdamUpdate, Betas::default(), &m, 50, 2000, 7).unwrap();
        let c = mc_rms(McKind::AdamUpdate, Betas::default(), &m, 50, 2000, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.rms, c.rms);
    }

    #[test]
    fn standard_error_halves_when_chains_quadruple() {
        let m = model(0.3, 1);
        let b = Betas::default();
        let small = mc_rms(McKind::Sgdm, b, &m, 10, 10_000, 3).unwrap();
        let large = mc_rms(McKind::Sgdm, b, &m, 10, 40_000, 3).unwrap();
        for (s, l) in [
            (small.mean_se, large.mean_se),
            (small.rms_se, large.rms_se),
            (small.variance_se, large.variance_se),
        ] {
            let ratio = s / l;
            assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
        }
    }

    #[test]
    fn rejects_underpowered_or_invalid_requests() {
        let m = model(0.0, 1);
        let b = Betas::default();
        assert!(matches!(
            mc_rms(McKind::Sgdm, b, &m, 10, 999, 0),
            Err(Error::TooFewChains { .. })
        ));
        assert!(mc_rms(McKind::Ada2msUpdate(1.5), b, &m, 10, 1000, 0).is_err());
        assert!(mc_rms(McKind::Sgdm, b, &m, 0, 1000, 0).is_err());
    }

    #[test]
    fn adam_update_stays_in_range_across_snr() {
        let b = Betas::default();
        let mut prev: Option<McEstimate> = None;
        for snr in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let m = GradModel::with_snr(snr, 1.0, 0.5, 1).unwrap();
            let est = mc_rms(McKind::AdamUpdate, b, &m, 500, 5_000, 11).unwrap();
            assert!(
                est.rms > 0.2294 - 0.02 && est.rms < 1.0 + 0.02,
                "{snr}: {est:?}"
            );
            if let Some(p) = prev {
                assert!(est.rms >= p.rms - 3.0 * (est.rms_se + p.rms_se));
            }
            prev = Some(est);
        }
    }

    #[test]
    fn pooled_reduced_matches_full() {
        let b = Betas::default();
        let m = GradModel::new(0.3, 1.0, 0.5, 64).unwrap();
        for kind in [
            McKind::Sgdm,
            McKind::AdamFirstMoment,
            McKind::AdamSecondMoment,
        ] {
            let run = |vector| {
                let cfg = McConfig {
                    chains: 4000,
                    seed: 5,
                    vector,
                    pooled: true,
                };
                mc_estimate(kind, b, &m, 30, &cfg).unwrap()
            };
            let (red, full) = (run(VectorMode::Reduced), run(VectorMode::Full));
            let tol = 4.0 * (red.mean_se.powi(2) + full.mean_se.powi(2)).sqrt();
            assert!(
                (red.mean - full.mean).abs() < tol,
                "{kind:?}: {red:?} vs {full:?}"
            );
            if kind != McKind::AdamSecondMoment {
                let tol = 4.0 * (red.variance_se.powi(2) + full.variance_se.powi(2)).sqrt();
                assert!((red.variance - full.variance).abs() < tol, "{kind:?}");
            }
        }
    }

    #[test]
    fn pooled_moments_match_closed_form() {
        let b = Betas::default();
        let m = GradModel::new(0.3, 1.0, 0.5, 1000).unwrap();
        let cfg = McConfig {
            chains: 2000,
            seed: 8,
            vector: VectorMode::Reduced,
            pooled: true,
        };
        for t in [1, 10, 200] {
            let cf = cf_sgdm_moments(0.9, &m, t);
            let est = mc_estimate(McKind::Sgdm, b, &m, t, &cfg).unwrap();
            assert!(
                (est.mean - cf.mean).abs() < 4.0 * est.mean_se,
                "{t}: {est:?}"
            );
            assert!(
                (est.variance - cf.variance).abs() < 4.0 * est.variance_se,
                "{t}: {est:?}"
            );
            let v = mc_estimate(McKind::AdamSecondMoment, b, &m, t, &cfg).unwrap();
            let want = cf_adam_second_moment(0.99, &m, t);
            assert!((v.mean - want).abs() < 4.0 * v.mean_se, "{t}: {v:?}");
        }
    }
}

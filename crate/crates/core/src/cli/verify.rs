//! The `verify-stats` subcommand.
//!
//! Config (every table and key except `quantities` is optional; defaults are
//! shown):
//!
//! ```toml
//! seed = 20240501
//! chains = 100000
//! tolerance = 0.02          # relative error, per-step quantities
//! ratio_tolerance = 0.03    # relative error, update RMS ratios
//! quantities = ["sgdm_mean", "sgdm_variance", "sgdm_rms", "adam_m_mean",
//!               "adam_m_variance", "adam_v_mean", "global_n_mean",
//!               "adam_update_rms", "alpha0_update_rms",
//!               "ada2ms_update_bound", "sgdm_rms_contrast"]
//!
//! [grid]
//! beta1 = [0.9]
//! beta2 = [0.99]
//! mu = [0.0, 0.3]
//! sigma_f = [1.0]
//! sigma = [0.5]
//! t = [1, 10, 200]
//! ratio_t = [500]
//! d = [1000]
//!
//! [bounds]
//! alpha = [0.0, 0.25, 0.5, 0.75, 1.0]
//! snr = [0.01, 1.0, 100.0]
//! beta1 = 0.9
//! beta2 = 0.99
//! sigma_f = 1.0
//! sigma = 0.5
//! t = 500
//! d = 1000
//! chains = 32               # full d-dimensional chains per cell
//! lower = 0.2094
//! upper = 1.05
//! contrast_min = 3.0        # SGDM RMS must exceed this ...
//! contrast_snr = 100.0      # ... at SNRs at least this large
//! ```
//!
//! Moment-buffer rows pool the `d` components of each chain, so a chain
//! contributes `d` per-component samples.
//!
//! A row whose standard error, relative to its scale, exceeds its tolerance
//! is `underpowered`; any row that is not `pass` makes the exit status
//! nonzero.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::records::{csv_writer, fmt_f64, STATS_SCHEMA};
use super::{resolve_out_dir, CommonArgs, ExitStatus};
use crate::error::{Error, Result};
use crate::params::GradModel;
use crate::rng::derive_seed;
use crate::statlab::{
    cf_adam_moments, cf_adam_second_moment, cf_global_moments, cf_sgdm_moments, cf_update_rms,
    mc_estimate, Betas, McConfig, McEstimate, McKind, VectorMode,
};

pub const STATS_FILE: &str = "stats.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    SgdmMean,
    SgdmVariance,
    SgdmRms,
    AdamMMean,
    AdamMVariance,
    AdamVMean,
    GlobalNMean,
    AdamUpdateRms,
    Alpha0UpdateRms,
    Ada2msUpdateBound,
    SgdmRmsContrast,
}

impl Quantity {
    pub const ALL: [Quantity; 11] = [
        Quantity::SgdmMean,
        Quantity::SgdmVariance,
        Quantity::SgdmRms,
        Quantity::AdamMMean,
        Quantity::AdamMVariance,
        Quantity::AdamVMean,
        Quantity::GlobalNMean,
        Quantity::AdamUpdateRms,
        Quantity::Alpha0UpdateRms,
        Quantity::Ada2msUpdateBound,
        Quantity::SgdmRmsContrast,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SgdmMean => "sgdm_mean",
            Self::SgdmVariance => "sgdm_variance",
            Self::SgdmRms => "sgdm_rms",
            Self::AdamMMean => "adam_m_mean",
            Self::AdamMVariance => "adam_m_variance",
            Self::AdamVMean => "adam_v_mean",
            Self::GlobalNMean => "global_n_mean",
            Self::AdamUpdateRms => "adam_update_rms",
            Self::Alpha0UpdateRms => "alpha0_update_rms",
            Self::Ada2msUpdateBound => "ada2ms_update_bound",
            Self::SgdmRmsContrast => "sgdm_rms_contrast",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatGrid {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma_f: Vec<f64>,
    pub sigma: Vec<f64>,
    pub t: Vec<u64>,
    pub ratio_t: Vec<u64>,
    pub d: Vec<usize>,
}

impl Default for StatGrid {
    fn default() -> Self {
        Self {
            beta1: vec![0.9],
            beta2: vec![0.99],
            mu: vec![0.0, 0.3],
            sigma_f: vec![1.0],
            sigma: vec![0.5],
            t: vec![1, 10, 200],
            ratio_t: vec![500],
            d: vec![1000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundGrid {
    pub alpha: Vec<f64>,
    pub snr: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub sigma_f: f64,
    pub sigma: f64,
    pub t: u64,
    pub d: usize,
    pub chains: u64,
    pub lower: f64,
    pub upper: f64,
    pub contrast_min: f64,
    pub contrast_snr: f64,
}

impl Default for BoundGrid {
    fn default() -> Self {
        Self {
            alpha: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            snr: vec![0.01, 1.0, 100.0],
            beta1: 0.9,
            beta2: 0.99,
            sigma_f: 1.0,
            sigma: 0.5,
            t: 500,
            d: 1000,
            chains: 32,
            lower: 0.2294 - 0.02,
            upper: 1.0 + 0.05,
            contrast_min: 3.0,
            contrast_snr: 100.0,
        }
    }
}

fn default_seed() -> u64 {
    20240501
}

fn default_chains() -> u64 {
    100_000
}

fn default_tolerance() -> f64 {
    0.02
}

fn default_ratio_tolerance() -> f64 {
    0.03
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_chains")]
    pub chains: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_ratio_tolerance")]
    pub ratio_tolerance: f64,
    pub quantities: Vec<Quantity>,
    #[serde(default)]
    pub grid: StatGrid,
    #[serde(default)]
    pub bounds: BoundGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl VerifyConfig {
    /// Every quantity on the default grids.
    pub fn full() -> Self {
        Self {
            seed: default_seed(),
            chains: default_chains(),
            tolerance: default_tolerance(),
            ratio_tolerance: default_ratio_tolerance(),
            quantities: Quantity::ALL.to_vec(),
            grid: StatGrid::default(),
            bounds: BoundGrid::default(),
            out_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.quantities.is_empty() {
            return bad("quantities must list at least one quantity");
        }
        if self.chains < 2 || self.bounds.chains < 2 {
            return bad("chains must be at least 2");
        }
        if !(self.tolerance > 0.0 && self.ratio_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        let g = &self.grid;
        if [
            g.beta1.len(),
            g.beta2.len(),
            g.mu.len(),
            g.sigma_f.len(),
            g.sigma.len(),
            g.d.len(),
        ]
        .contains(&0)
        {
            return bad("every grid axis needs at least one value");
        }
        if g.t.contains(&0) || g.ratio_t.contains(&0) || self.bounds.t == 0 {
            return bad("steps must be at least 1");
        }
        let betas_ok = |b: &[f64]| b.iter().all(|&x| (0.0..1.0).contains(&x));
        if !betas_ok(&g.beta1)
            || !betas_ok(&g.beta2)
            || !betas_ok(&[self.bounds.beta1, self.bounds.beta2])
        {
            return bad("betas must lie in [0, 1)");
        }
        if self.bounds.alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad("bound alphas must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Underpowered,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Underpowered => "underpowered",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatRow {
    pub quantity: Quantity,
    /// Switching exponent, for bound rows.
    pub alpha: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub model: GradModel,
    pub t: u64,
    pub chains: u64,
    pub predicted: Option<f64>,
    pub estimated: f64,
    pub stderr: f64,
    /// `|estimated - predicted| / scale`.
    pub rel_err: Option<f64>,
    pub tolerance: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub status: Status,
}

/// One planned comparison before it is run.
struct Check {
    quantity: Quantity,
    kind: McKind,
    alpha: Option<f64>,
    betas: Betas,
    model: GradModel,
    t: u64,
    chains: u64,
    vector: VectorMode,
    tolerance: f64,
    predicted: Option<f64>,
    /// Normaliser for errors; the prediction itself unless that is zero.
    scale: f64,
    lower: Option<f64>,
    upper: Option<f64>,
}

fn plan(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let g = &cfg.grid;
    let mut checks = Vec::new();
    for &quantity in &cfg.quantities {
        if matches!(
            quantity,
            Quantity::Ada2msUpdateBound | Quantity::SgdmRmsContrast
        ) {
            plan_bounds(cfg, quantity, &mut checks)?;
            continue;
        }
        let ratio = matches!(
            quantity,
            Quantity::AdamUpdateRms | Quantity::Alpha0UpdateRms
        );
        let steps = if ratio { &g.ratio_t } else { &g.t };
        for &beta1 in &g.beta1 {
            for &beta2 in &g.beta2 {
                for &mu in &g.mu {
                    for &sigma_f in &g.sigma_f {
                        for &sigma in &g.sigma {
                            for &d in &g.d {
                                let model = GradModel::new(mu, sigma_f, sigma, d)?;
                                for &t in steps {
                                    checks.push(point_check(
                                        cfg,
                                        quantity,
                                        Betas { beta1, beta2 },
                                        model,
                                        t,
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(checks)
}

fn point_check(
    cfg: &VerifyConfig,
    quantity: Quantity,
    betas: Betas,
    model: GradModel,
    t: u64,
) -> Check {
    let sgdm = cf_sgdm_moments(betas.beta1, &model, t);
    let adam = cf_adam_moments(betas.beta1, &model, t);
    let global = cf_global_moments(betas.beta1, betas.beta2, &model, t);
    let (kind, predicted, fallback) = match quantity {
        Quantity::SgdmMean => (McKind::Sgdm, sgdm.mean, sgdm.variance.sqrt()),
        Quantity::SgdmVariance => (McKind::Sgdm, sgdm.variance, 0.0),
        Quantity::SgdmRms => (McKind::Sgdm, sgdm.rms, 0.0),
        Quantity::AdamMMean => (McKind::AdamFirstMoment, adam.mean, adam.variance.sqrt()),
        Quantity::AdamMVariance => (McKind::AdamFirstMoment, adam.variance, 0.0),
        Quantity::AdamVMean => (
            McKind::AdamSecondMoment,
            cf_adam_second_moment(betas.beta2, &model, t),
            0.0,
        ),
        Quantity::GlobalNMean => (McKind::GlobalSecondMoment, global.expected_n, 0.0),
        Quantity::AdamUpdateRms => (McKind::AdamUpdate, adam.rms_update, 0.0),
        Quantity::Alpha0UpdateRms => (McKind::Alpha0Update, global.rms_alpha0, 0.0),
        Quantity::Ada2msUpdateBound | Quantity::SgdmRmsContrast => unreachable!(),
    };
    let ratio = matches!(
        quantity,
        Quantity::AdamUpdateRms | Quantity::Alpha0UpdateRms
    );
    Check {
        quantity,
        kind,
        alpha: None,
        betas,
        model,
        t,
        chains: cfg.chains,
        vector: VectorMode::Reduced,
        tolerance: if ratio {
            cfg.ratio_tolerance
        } else {
            cfg.tolerance
        },
        predicted: Some(predicted),
        scale: if predicted != 0.0 {
            predicted.abs()
        } else {
            fallback
        },
        lower: None,
        upper: None,
    }
}

fn plan_bounds(cfg: &VerifyConfig, quantity: Quantity, checks: &mut Vec<Check>) -> Result<()> {
    let b = &cfg.bounds;
    let betas = Betas {
        beta1: b.beta1,
        beta2: b.beta2,
    };
    for &snr in &b.snr {
        let model = GradModel::with_snr(snr, b.sigma_f, b.sigma, b.d)?;
        if quantity == Quantity::SgdmRmsContrast {
            let predicted = cf_sgdm_moments(b.beta1, &model, b.t).rms;
            checks.push(Check {
                quantity,
                kind: McKind::Sgdm,
                alpha: None,
                betas,
                model,
                t: b.t,
                chains: cfg.chains,
                vector: VectorMode::Reduced,
                tolerance: cfg.tolerance,
                predicted: Some(predicted),
                scale: predicted,
                lower: (snr >= b.contrast_snr).then_some(b.contrast_min),
                upper: None,
            });
            continue;
        }
        for &alpha in &b.alpha {
            // the limiting exponents have a closed-form reference
            let predicted =
                (alpha == 0.0 || alpha == 1.0).then(|| cf_update_rms(b.beta1, &model, b.t));
            checks.push(Check {
                quantity,
                kind: McKind::Ada2msUpdate(alpha),
                alpha: Some(alpha),
                betas,
                model,
                t: b.t,
                chains: b.chains,
                vector: VectorMode::Full,
                tolerance: cfg.ratio_tolerance,
                predicted,
                scale: predicted.unwrap_or(1.0),
                lower: Some(b.lower),
                upper: Some(b.upper),
            });
        }
    }
    Ok(())
}

/// Seed of one check, derived from the master seed and the check's identity
/// so that adding or removing checks leaves the others unchanged.
fn check_seed(master: u64, c: &Check) -> u64 {
    let key = format!(
        "{}|{}|{:?}|{:e}|{:e}|{:e}|{:e}|{:e}|{}|{}",
        c.quantity.as_str(),
        c.kind.tag(),
        c.vector,
        c.betas.beta1,
        c.betas.beta2,
        c.model.mu,
        c.model.sigma_f,
        c.model.sigma,
        c.model.d,
        c.t
    );
    let digest = Sha256::digest(key.as_bytes());
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    derive_seed(master, u64::from_le_bytes(word))
}

fn pick(q: Quantity, e: &McEstimate) -> (f64, f64) {
    match q {
        Quantity::SgdmMean | Quantity::AdamMMean | Quantity::AdamVMean | Quantity::GlobalNMean => {
            (e.mean, e.mean_se)
        }
        Quantity::SgdmVariance | Quantity::AdamMVariance => (e.variance, e.variance_se),
        _ => (e.rms, e.rms_se),
    }
}

fn judge(c: &Check, estimated: f64, stderr: f64) -> (Option<f64>, Status) {
    let rel_err = c.predicted.map(|p| (estimated - p).abs() / c.scale);
    let in_bounds =
        c.lower.is_none_or(|lo| estimated > lo) && c.upper.is_none_or(|hi| estimated < hi);
    // a NaN standard error counts as underpowered
    let powered = stderr / c.scale <= c.tolerance;
    let status = if !estimated.is_finite() || !powered {
        Status::Underpowered
    } else if in_bounds && rel_err.is_none_or(|r| r <= c.tolerance) {
        Status::Pass
    } else {
        Status::Fail
    };
    (rel_err, status)
}

/// Run every planned comparison.
pub fn verify_stats(cfg: &VerifyConfig) -> Result<Vec<StatRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for c in plan(cfg)? {
        let mc = McConfig {
            chains: c.chains,
            seed: check_seed(cfg.seed, &c),
            vector: c.vector,
            pooled: true,
        };
        let est = mc_estimate(c.kind, c.betas, &c.model, c.t, &mc)?;
        let (estimated, stderr) = pick(c.quantity, &est);
        let (rel_err, status) = judge(&c, estimated, stderr);
        rows.push(StatRow {
            quantity: c.quantity,
            alpha: c.alpha,
            beta1: c.betas.beta1,
            beta2: c.betas.beta2,
            model: c.model,
            t: c.t,
            chains: c.chains,
            predicted: c.predicted,
            estimated,
            stderr,
            rel_err,
            tolerance: c.tolerance,
            lower: c.lower,
            upper: c.upper,
            status,
        });
    }
    Ok(rows)
}

pub const STATS_HEADER: [&str; 18] = [
    "quantity",
    "alpha",
    "beta1",
    "beta2",
    "mu",
    "sigma_f",
    "sigma",
    "t",
    "d",
    "chains",
    "predicted",
    "estimated",
    "stderr",
    "rel_err",
    "tolerance",
    "lower",
    "upper",
    "status",
];

pub fn write_stats(path: &std::path::Path, rows: &[StatRow]) -> Result<()> {
    let mut w = csv_writer(path, STATS_SCHEMA)?;
    w.write_record(STATS_HEADER)?;
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.quantity.as_str().to_string(),
            opt(r.alpha),
            fmt_f64(r.beta1),
            fmt_f64(r.beta2),
            fmt_f64(r.model.mu),
            fmt_f64(r.model.sigma_f),
            fmt_f64(r.model.sigma),
            r.t.to_string(),
            r.model.d.to_string(),
            r.chains.to_string(),
            opt(r.predicted),
            fmt_f64(r.estimated),
            fmt_f64(r.stderr),
            opt(r.rel_err),
            fmt_f64(r.tolerance),
            opt(r.lower),
            opt(r.upper),
            r.status.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_verify_stats(args: &CommonArgs) -> Result<ExitStatus> {
    let mut cfg = VerifyConfig::from_toml(&std::fs::read_to_string(&args.config)?)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let dir: PathBuf = resolve_out_dir(args.out.as_deref(), cfg.out_dir.as_deref());
    let rows = verify_stats(&cfg)?;
    std::fs::create_dir_all(&dir)?;
    std::fs::write(
        dir.join(super::records::CONFIG_FILE),
        toml::to_string(&cfg).expect("verify config serialises"),
    )?;
    write_stats(&dir.join(STATS_FILE), &rows)?;
    let failed: Vec<&StatRow> = rows.iter().filter(|r| r.status != Status::Pass).collect();
    for r in &failed {
        eprintln!(
            "{} {} (mu={}, t={}, alpha={:?}): predicted {:?}, estimated {} +- {}",
            r.status.as_str(),
            r.quantity.as_str(),
            r.model.mu,
            r.t,
            r.alpha,
            r.predicted,
            r.estimated,
            r.stderr
        );
    }
    println!(
        "{} of {} checks passed -> {}",
        rows.len() - failed.len(),
        rows.len(),
        dir.display()
    );
    Ok(if failed.is_empty() {
        ExitStatus::Success
    } else {
        ExitStatus::VerificationFailed
    })
}

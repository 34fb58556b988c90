//! Piecewise-linear learning-rate schedules (WSDS, WSD) and the
//! switching-exponent schedule that moves Ada2MS from AdamW-like to
//! globally normalised momentum updates.
//!
//! Steps are 1-based: the first optimizer step is `t = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrKind {
    /// Warmup, steady, decay, then a trailing steady phase at `eta_min`.
    Wsds,
    /// Warmup, steady, decay to `eta_min` at the final step.
    Wsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub kind: LrKind,
    pub eta_init: f64,
    pub eta_peak: f64,
    pub eta_min: f64,
    pub t1: u64,
    pub t2: u64,
    pub t3: u64,
    pub total_steps: u64,
}

/// Default warm-up initial rate.
pub const DEFAULT_ETA_INIT: f64 = 1e-7;
/// Default floor, as a fraction of the peak rate.
pub const DEFAULT_MIN_FRACTION: f64 = 0.01;

fn frac_step(frac: f64, total: u64) -> u64 {
    ((frac * total as f64).round() as u64).clamp(1, total)
}

impl LrSchedule {
    /// Standard breakpoints: warmup to 5%, steady to 60%, decay to 90% (WSDS)
    /// or to the end (WSD).
    pub fn with_defaults(kind: LrKind, eta_peak: f64, total_steps: u64) -> Result<Self> {
        if total_steps == 0 {
            return Err(Error::InvalidSchedule(
                "total_steps must be positive".into(),
            ));
        }
        let t1 = frac_step(0.05, total_steps);
        let t2 = frac_step(0.60, total_steps).max(t1);
        let t3 = match kind {
            LrKind::Wsds => frac_step(0.90, total_steps).max(t2),
            LrKind::Wsd => total_steps,
        };
        let s = Self {
            kind,
            eta_init: DEFAULT_ETA_INIT,
            eta_peak,
            eta_min: DEFAULT_MIN_FRACTION * eta_peak,
            t1,
            t2,
            t3,
            total_steps,
        };
        s.validate()?;
        Ok(s)
    }

    /// A flat schedule: every branch evaluates to `eta`.
    pub fn constant(eta: f64, total_steps: u64) -> Result<Self> {
        let s = Self {
            kind: LrKind::Wsd,
            eta_init: eta,
            eta_peak: eta,
            eta_min: eta,
            t1: 1,
            t2: total_steps,
            t3: total_steps,
            total_steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSchedule(msg));
        for (name, v) in [
            ("eta_init", self.eta_init),
            ("eta_peak", self.eta_peak),
            ("eta_min", self.eta_min),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if self.eta_init > self.eta_peak || self.eta_min > self.eta_peak {
            return bad("eta_init and eta_min must not exceed eta_peak".into());
        }
        if !(0 < self.t1 && self.t1 <= self.t2 && self.t2 <= self.t3 && self.t3 <= self.total_steps)
        {
            return bad(format!(
                "need 0 < t1 <= t2 <= t3 <= T, got ({}, {}, {}, {})",
                self.t1, self.t2, self.t3, self.total_steps
            ));
        }
        if self.kind == LrKind::Wsd && self.t3 != self.total_steps {
            return bad("WSD requires t3 = total_steps".into());
        }
        Ok(())
    }

    /// Learning rate at step `t`, `1 <= t <= total_steps`.
    pub fn lr_at(&self, t: u64) -> Result<f64> {
        if t == 0 || t > self.total_steps {
            return Err(Error::StepOutOfRange {
                t,
                total: self.total_steps,
            });
        }
        // Interpolate as (1 - f) a + f b so both endpoints are hit exactly.
        let lerp = |a: f64, b: f64, f: f64| (1.0 - f) * a + f * b;
        let lr = if t <= self.t1 {
            lerp(self.eta_init, self.eta_peak, t as f64 / self.t1 as f64)
        } else if t <= self.t2 {
            self.eta_peak
        } else if t <= self.t3 {
            let f = (t - self.t2) as f64 / (self.t3 - self.t2) as f64;
            lerp(self.eta_peak, self.eta_min, f)
        } else {
            // only reachable for WSDS
            self.eta_min
        };
        Ok(lr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSchedule {
    pub total_steps: u64,
    #[serde(default = "default_switch_frac")]
    pub switch_frac: f64,
}

fn default_switch_frac() -> f64 {
    0.6
}

impl AlphaSchedule {
    pub fn new(total_steps: u64) -> Self {
        Self {
            total_steps,
            switch_frac: default_switch_frac(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(Error::InvalidSchedule(
                "total_steps must be positive".into(),
            ));
        }
        if !(self.switch_frac > 0.0 && self.switch_frac <= 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "switch_frac = {} not in (0, 1]",
                self.switch_frac
            )));
        }
        Ok(())
    }

    /// Last step at which alpha is exactly 1: `switch_frac * T` rounded to
    /// the nearest integer, ties rounding down.
    pub fn switch_step(&self) -> u64 {
        let x = self.switch_frac * self.total_steps as f64;
        let floor = x.floor();
        let k = if x - floor > 0.5 { floor + 1.0 } else { floor };
        (k as u64).min(self.total_steps)
    }

    pub fn alpha_at(&self, t: u64) -> Result<f64> {
        if t == 0 || t > self.total_steps {
            return Err(Error::StepOutOfRange {
                t,
                total: self.total_steps,
            });
        }
        let k = self.switch_step();
        if t <= k {
            return Ok(1.0);
        }
        let span = (self.total_steps - k) as f64;
        Ok(1.0 - (t - k) as f64 / span)
    }
}

/// How the switching exponent is chosen each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaPolicy {
    /// The linear switch schedule.
    Schedule {
        #[serde(default = "default_switch_frac")]
        switch_frac: f64,
    },
    /// A fixed exponent for every step.
    Constant { value: f64 },
}

impl Default for AlphaPolicy {
    fn default() -> Self {
        Self::Schedule {
            switch_frac: default_switch_frac(),
        }
    }
}

impl AlphaPolicy {
    pub fn validate(&self, total_steps: u64) -> Result<()> {
        match *self {
            Self::Schedule { switch_frac } => AlphaSchedule {
                total_steps,
                switch_frac,
            }
            .validate(),
            Self::Constant { value } if (0.0..=1.0).contains(&value) => Ok(()),
            Self::Constant { value } => Err(Error::AlphaOutOfRange(value)),
        }
    }

    pub fn alpha_at(&self, t: u64, total_steps: u64) -> Result<f64> {
        match *self {
            Self::Schedule { switch_frac } => AlphaSchedule {
                total_steps,
                switch_frac,
            }
            .alpha_at(t),
            Self::Constant { value } => {
                if t == 0 || t > total_steps {
                    Err(Error::StepOutOfRange {
                        t,
                        total: total_steps,
                    })
                } else {
                    Ok(value)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> LrSchedule {
        LrSchedule {
            kind: LrKind::Wsds,
            eta_init: 1e-7,
            eta_peak: 1e-3,
            eta_min: 1e-5,
            t1: 100,
            t2: 600,
            t3: 900,
            total_steps: 1000,
        }
    }

    #[test]
    fn wsds_examples() {
        let s = example();
        assert_eq!(s.lr_at(100).unwrap(), 1e-3);
        assert!((s.lr_at(750).unwrap() - 5.05e-4).abs() < 1e-18);
        assert_eq!(s.lr_at(950).unwrap(), 1e-5);
        assert_eq!(s.lr_at(900).unwrap(), 1e-5);
        assert_eq!(s.lr_at(1000).unwrap(), 1e-5);
        assert!(s.lr_at(0).is_err());
        assert!(s.lr_at(1001).is_err());
    }

    #[test]
    fn wsd_ends_at_min() {
        let s = LrSchedule::with_defaults(LrKind::Wsd, 2e-3, 400).unwrap();
        assert_eq!(s.t3, 400);
        assert_eq!(s.lr_at(400).unwrap(), s.eta_min);
        assert_eq!(s.eta_min, 0.01 * 2e-3);
        assert_eq!(s.eta_init, 1e-7);
    }

    #[test]
    fn wsd_rejects_trailing_phase() {
        let mut s = example();
        s.kind = LrKind::Wsd;
        assert!(s.validate().is_err());
    }

    #[test]
    fn alpha_examples() {
        let a = AlphaSchedule::new(100);
        assert_eq!(a.alpha_at(50).unwrap(), 1.0);
        assert_eq!(a.alpha_at(60).unwrap(), 1.0);
        assert_eq!(a.alpha_at(80).unwrap(), 0.5);
        assert_eq!(a.alpha_at(100).unwrap(), 0.0);
        assert!(a.alpha_at(0).is_err());
    }

    #[test]
    fn switch_step_ties_round_down() {
        let a = AlphaSchedule {
            total_steps: 5,
            switch_frac: 0.5,
        };
        assert_eq!(a.switch_step(), 2);
        let b = AlphaSchedule {
            total_steps: 7,
            switch_frac: 0.6,
        };
        assert_eq!(b.switch_step(), 4);
        let full = AlphaSchedule {
            total_steps: 9,
            switch_frac: 1.0,
        };
        assert_eq!(full.alpha_at(9).unwrap(), 1.0);
    }

    #[test]
    fn constant_policy() {
        let p = AlphaPolicy::Constant { value: 0.25 };
        assert_eq!(p.alpha_at(3, 10).unwrap(), 0.25);
        assert!(AlphaPolicy::Constant { value: 1.5 }.validate(10).is_err());
        let c = LrSchedule::constant(0.3, 50).unwrap();
        assert!((1..=50).all(|t| c.lr_at(t).unwrap() == 0.3));
    }

    proptest! {
        #[test]
        fn lr_bounded_and_continuous(
            total in 4u64..3000,
            f1 in 0.01f64..0.5,
            f2 in 0.0f64..1.0,
            f3 in 0.0f64..1.0,
            peak in 1e-5f64..1.0,
            init_frac in 1e-6f64..1.0,
            min_frac in 1e-4f64..1.0,
        ) {
            let t1 = ((f1 * total as f64) as u64).max(1);
            let t2 = t1 + ((total - t1) as f64 * f2) as u64;
            let t3 = t2 + ((total - t2) as f64 * f3) as u64;
            let s = LrSchedule {
                kind: LrKind::Wsds,
                eta_init: peak * init_frac,
                eta_peak: peak,
                eta_min: peak * min_frac,
                t1, t2, t3, total_steps: total,
            };
            s.validate().unwrap();
            let lo = s.eta_init.min(s.eta_min);
            for t in 1..=total {
                let lr = s.lr_at(t).unwrap();
                prop_assert!(lr >= lo * (1.0 - 1e-12) && lr <= peak * (1.0 + 1e-12));
            }
            prop_assert_eq!(s.lr_at(t1).unwrap(), peak);
            if t3 > t2 {
                prop_assert_eq!(s.lr_at(t3).unwrap(), s.eta_min);
            }
        }

        #[test]
        fn alpha_monotone_and_bounded(total in 1u64..2000, frac in 0.01f64..=1.0) {
            let a = AlphaSchedule { total_steps: total, switch_frac: frac };
            let k = a.switch_step();
            let mut prev = 1.0;
            for t in 1..=total {
                let x = a.alpha_at(t).unwrap();
                prop_assert!((0.0..=1.0).contains(&x));
                prop_assert!(x <= prev);
                if t <= k { prop_assert_eq!(x, 1.0); } else { prop_assert!(x < prev || prev == 0.0); }
                prev = x;
            }
            if k < total { prop_assert_eq!(a.alpha_at(total).unwrap(), 0.0); }
        }
    }
}

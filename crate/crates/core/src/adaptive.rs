//! Moving method-of-moments estimator.
//!
//! Each step first reads `θ_t = (μ_t, σ_t, ν_t)` off the current EMA state,
//! then ingests `x_t`. The estimate used to score `x_t` therefore depends
//! only on `x_τ` for `τ < t`.
//!
//! State updates, with `d = |x_t - μ_t|`:
//!
//! ```text
//! μ     ← μ     + η₁ (x_t - μ)
//! m_σ   ← m_σ   + η₂ (d^p_σ - m_σ)
//! m_p₁  ← m_p₁  + η₃ (d^p₁  - m_p₁)
//! m_p₂  ← m_p₂  + η₃ (d^p₂  - m_p₂)
//! ```
//!
//! For heavy tails a smaller `p_sigma` lowers the variance of σ estimates;
//! roughly `p ≈ ν/6` works for small ν, while `p = 2` is best near the
//! Gaussian limit.

use serde::{Deserialize, Serialize};

use crate::distribution::{abs_central_moment, StudentTParams};
use crate::error::{Error, Result};
use crate::moments::{NuInversionTable, DEFAULT_GRID_SIZE, DEFAULT_NU_ADJUSTMENT, DEFAULT_NU_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    /// EMA rate for μ.
    pub eta1: f64,
    /// EMA rate for the σ moment.
    pub eta2: f64,
    /// EMA rate for the two ν moments.
    pub eta3: f64,
    pub p_sigma: f64,
    pub p1: f64,
    pub p2: f64,
    /// Hold ν constant instead of tracking it.
    pub nu_fixed: Option<f64>,
    /// Hold μ constant instead of tracking it.
    pub mu_fixed: Option<f64>,
    pub nu_adjustment: f64,
    pub nu_min: f64,
    pub nu_cap: f64,
    pub moment_floor: f64,
    pub warmup: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            eta1: 0.003,
            eta2: 0.05,
            eta3: 0.005,
            p_sigma: 1.0,
            p1: 1.0,
            p2: 0.5,
            nu_fixed: None,
            mu_fixed: None,
            nu_adjustment: DEFAULT_NU_ADJUSTMENT,
            nu_min: 1.1,
            nu_cap: DEFAULT_NU_CAP,
            moment_floor: 1e-20,
            warmup: 300,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("eta3", self.eta3),
        ] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::config(format!(
                    "{name} must lie in (0, 1], got {eta}"
                )));
            }
        }
        for (name, p) in [("p_sigma", self.p_sigma), ("p1", self.p1), ("p2", self.p2)] {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::config(format!(
                    "{name} must be finite and > 0, got {p}"
                )));
            }
        }
        if !(self.moment_floor > 0.0 && self.moment_floor.is_finite()) {
            return Err(Error::config(format!(
                "moment_floor must be finite and > 0, got {}",
                self.moment_floor
            )));
        }
        if !self.nu_adjustment.is_finite() {
            return Err(Error::config("nu_adjustment must be finite"));
        }
        if let Some(mu) = self.mu_fixed {
            if !mu.is_finite() {
                return Err(Error::config("mu_fixed must be finite"));
            }
        }
        match self.nu_fixed {
            Some(nu) => {
                if !(nu > 0.0 && nu.is_finite()) {
                    return Err(Error::config(format!(
                        "nu_fixed must be finite and > 0, got {nu}"
                    )));
                }
                if self.p_sigma >= nu {
                    return Err(Error::config(format!(
                        "p_sigma = {} must be below nu_fixed = {nu}",
                        self.p_sigma
                    )));
                }
            }
            None => {
                if self.p1 == self.p2 {
                    return Err(Error::config("p1 and p2 must differ"));
                }
                if !(self.nu_cap > self.nu_min && self.nu_cap.is_finite()) {
                    return Err(Error::config(format!(
                        "need nu_min < nu_cap, got [{}, {}]",
                        self.nu_min, self.nu_cap
                    )));
                }
                for (name, p) in [("p_sigma", self.p_sigma), ("p1", self.p1), ("p2", self.p2)] {
                    if p >= self.nu_min {
                        return Err(Error::config(format!(
                            "{name} = {p} must be below nu_min = {}",
                            self.nu_min
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmaState {
    pub mu: f64,
    /// EMA of `|x - μ|^p_sigma`.
    pub m_sigma: f64,
    /// EMA of `|x - μ|^p1`.
    pub m1: f64,
    /// EMA of `|x - μ|^p2`.
    pub m2: f64,
    pub t: usize,
}

/// How the EMA state is seeded before the fold starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Start at index 0 from the given state.
    Explicit(EmaState),
    /// Seed from the first `k` points and start the fold at index `k`.
    FromPrefix(usize),
}

impl Default for Init {
    fn default() -> Self {
        Init::FromPrefix(300)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub x: f64,
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
    pub log_density: f64,
}

impl TrajectoryRecord {
    pub fn params(&self) -> StudentTParams {
        StudentTParams {
            mu: self.mu,
            sigma: self.sigma,
            nu: self.nu,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamTrajectory {
    pub records: Vec<TrajectoryRecord>,
    /// First series index that counts toward aggregate scores.
    pub score_start: usize,
    pub final_state: EmaState,
}

impl ParamTrajectory {
    pub fn scored(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        let start = self.score_start;
        self.records.iter().filter(move |r| r.t >= start)
    }
}

/// `m + η (observation - m)`.
#[inline]
pub fn ema_update(m: f64, observation: f64, eta: f64) -> f64 {
    m + eta * (observation - m)
}

/// A validated configuration with its precomputed lookup data.
#[derive(Debug, Clone)]
pub struct AdaptiveEstimator {
    config: AdaptiveConfig,
    table: Option<NuInversionTable>,
    /// `M_{ν p_sigma}` when ν is fixed.
    fixed_scale: Option<f64>,
}

impl AdaptiveEstimator {
    pub fn new(config: AdaptiveConfig) -> Result<Self> {
        config.validate()?;
        let (table, fixed_scale) = match config.nu_fixed {
            Some(nu) => (None, Some(abs_central_moment(nu, config.p_sigma)?)),
            None => (
                Some(NuInversionTable::build(
                    config.p1,
                    config.p2,
                    config.nu_min,
                    config.nu_cap,
                    DEFAULT_GRID_SIZE,
                )?),
                None,
            ),
        };
        Ok(Self {
            config,
            table,
            fixed_scale,
        })
    }

    pub fn config(&self) -> &AdaptiveConfig {
        &self.config
    }

    /// Seeds a state from `prefix` (μ from its mean unless μ is fixed).
    pub fn state_from_prefix(&self, prefix: &[f64]) -> Result<EmaState> {
        if prefix.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = prefix.len() as f64;
        let mu = self
            .config
            .mu_fixed
            .unwrap_or_else(|| prefix.iter().sum::<f64>() / n);
        let mean_pow = |p: f64| prefix.iter().map(|x| (x - mu).abs().powf(p)).sum::<f64>() / n;
        Ok(EmaState {
            mu,
            m_sigma: mean_pow(self.config.p_sigma),
            m1: mean_pow(self.config.p1),
            m2: mean_pow(self.config.p2),
            t: 0,
        })
    }

    /// Parameter estimate implied by `state`, before seeing the next point.
    pub fn estimate(&self, state: &EmaState) -> StudentTParams {
        let c = &self.config;
        let floor = c.moment_floor;
        let (nu, scale) = match (self.fixed_scale, &self.table) {
            (Some(scale), _) => (c.nu_fixed.expect("fixed scale implies fixed nu"), scale),
            (None, Some(table)) => {
                let log_r = state.m1.max(floor).ln() / c.p1 - state.m2.max(floor).ln() / c.p2;
                let raw = table.invert(log_r.exp());
                let nu = (raw + c.nu_adjustment).clamp(c.nu_min, c.nu_cap);
                // p_sigma < nu_min ≤ nu was checked at construction.
                let scale = abs_central_moment(nu, c.p_sigma).expect("p_sigma < nu");
                (nu, scale)
            }
            (None, None) => unreachable!("estimator has neither fixed nu nor a table"),
        };
        let sigma = state.m_sigma.max(floor).powf(1.0 / c.p_sigma) / scale;
        StudentTParams {
            mu: state.mu,
            sigma,
            nu,
        }
    }

    /// Estimate θ_t from `state`, then ingest `x`.
    pub fn step(&self, state: &EmaState, x: f64) -> (EmaState, StudentTParams) {
        let c = &self.config;
        let estimate = self.estimate(state);
        let d = (x - state.mu).abs();
        let next = EmaState {
            mu: match c.mu_fixed {
                Some(mu) => mu,
                None => ema_update(state.mu, x, c.eta1),
            },
            m_sigma: ema_update(state.m_sigma, d.powf(c.p_sigma), c.eta2),
            m1: ema_update(state.m1, d.powf(c.p1), c.eta3),
            m2: ema_update(state.m2, d.powf(c.p2), c.eta3),
            t: state.t + 1,
        };
        (next, estimate)
    }

    pub fn run(&self, xs: &[f64], init: Init) -> Result<ParamTrajectory> {
        let warmup = self.config.warmup;
        if xs.len() <= warmup {
            return Err(Error::SeriesTooShort {
                len: xs.len(),
                required: warmup,
            });
        }
        let (mut state, start) = match init {
            Init::Explicit(state) => (state, 0),
            Init::FromPrefix(k) => {
                if k == 0 || k >= xs.len() {
                    return Err(Error::SeriesTooShort {
                        len: xs.len(),
                        required: k,
                    });
                }
                (self.state_from_prefix(&xs[..k])?, k)
            }
        };
        let mut records = Vec::with_capacity(xs.len() - start);
        for (t, &x) in xs.iter().enumerate().skip(start) {
            let (next, theta) = self.step(&state, x);
            records.push(TrajectoryRecord {
                t,
                x,
                mu: theta.mu,
                sigma: theta.sigma,
                nu: theta.nu,
                log_density: theta.log_pdf(x),
            });
            state = next;
        }
        Ok(ParamTrajectory {
            records,
            score_start: warmup.max(start),
            final_state: state,
        })
    }
}

/// Convenience wrapper: validate `config` and run it over `xs`.
pub fn run(xs: &[f64], config: &AdaptiveConfig, init: Init) -> Result<ParamTrajectory> {
    AdaptiveEstimator::new(config.clone())?.run(xs, init)
}

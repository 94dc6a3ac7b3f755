//! Whole-sample method-of-moments estimators for σ and ν.
//!
//! With `m_p = mean |x - μ̂|^p` and `M_{νp}` from
//! [`abs_central_moment`](crate::distribution::abs_central_moment):
//!
//! * σ̂ = m_p^{1/p} / M_{νp}
//! * ν̂ solves M_{νp₁} / M_{νp₂} = m_{p₁}^{1/p₁} / m_{p₂}^{1/p₂}
//!
//! The ν equation is inverted through a precomputed [`NuInversionTable`].

use serde::{Deserialize, Serialize};

use crate::distribution::{abs_central_moment, log_abs_moment};
use crate::error::{Error, Result};

pub const DEFAULT_NU_CAP: f64 = 1000.0;
pub const DEFAULT_NU_ADJUSTMENT: f64 = 0.9;
pub const DEFAULT_GRID_SIZE: usize = 256;
/// Gap between `max(p₁, p₂)` and the default lower end of the ν grid.
pub const DEFAULT_NU_MIN_MARGIN: f64 = 0.1;

/// How the location estimate μ̂ is chosen before taking central moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MuPolicy {
    Fixed(f64),
    SampleMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mu_hat: f64,
    pub powers: Vec<f64>,
    pub moments: Vec<f64>,
    pub count: usize,
}

impl MomentSummary {
    /// Moment for power `p`, matched exactly against the stored powers.
    pub fn moment(&self, p: f64) -> Option<f64> {
        self.powers
            .iter()
            .position(|&q| q == p)
            .map(|i| self.moments[i])
    }
}

pub fn compute_moments(xs: &[f64], powers: &[f64], mu_policy: MuPolicy) -> Result<MomentSummary> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (i, &p) in powers.iter().enumerate() {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::domain(format!(
                "moment powers must be finite and > 0, got {p}"
            )));
        }
        if powers[..i].contains(&p) {
            return Err(Error::domain(format!("duplicate moment power {p}")));
        }
    }
    let mu_hat = match mu_policy {
        MuPolicy::Fixed(mu) => mu,
        MuPolicy::SampleMean => xs.iter().sum::<f64>() / xs.len() as f64,
    };
    let n = xs.len() as f64;
    let moments = powers
        .iter()
        .map(|&p| xs.iter().map(|&x| (x - mu_hat).abs().powf(p)).sum::<f64>() / n)
        .collect();
    Ok(MomentSummary {
        mu_hat,
        powers: powers.to_vec(),
        moments,
        count: xs.len(),
    })
}

/// σ̂ = m_p^{1/p} / M_{νp}.
pub fn estimate_sigma(summary: &MomentSummary, nu: f64, p: f64) -> Result<f64> {
    let m = summary
        .moment(p)
        .ok_or_else(|| Error::domain(format!("power {p} not present in moment summary")))?;
    sigma_from_moment(m, nu, p)
}

pub(crate) fn sigma_from_moment(m: f64, nu: f64, p: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::DegenerateData(format!(
            "absolute moment of order {p} is {m}; data has no spread"
        )));
    }
    let scale = abs_central_moment(nu, p)?;
    Ok(m.powf(1.0 / p) / scale)
}

/// Tabulated `R(ν) = M_{νp₁} / M_{νp₂}` on a log-spaced ν grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuInversionTable {
    p1: f64,
    p2: f64,
    nu_grid: Vec<f64>,
    ratio_grid: Vec<f64>,
    log_nu: Vec<f64>,
    increasing: bool,
}

impl NuInversionTable {
    /// Default table for `(p1, p2)`: 256 points over `[max(p1,p2) + 0.1, 1000]`.
    pub fn with_defaults(p1: f64, p2: f64) -> Result<Self> {
        Self::build(
            p1,
            p2,
            p1.max(p2) + DEFAULT_NU_MIN_MARGIN,
            DEFAULT_NU_CAP,
            DEFAULT_GRID_SIZE,
        )
    }

    pub fn build(p1: f64, p2: f64, nu_min: f64, nu_cap: f64, grid_size: usize) -> Result<Self> {
        for p in [p1, p2] {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::domain(format!(
                    "powers must be finite and > 0, got {p}"
                )));
            }
        }
        if p1 == p2 {
            return Err(Error::domain("ν inversion needs two distinct powers"));
        }
        if !(nu_min > p1.max(p2)) {
            return Err(Error::domain(format!(
                "nu_min = {nu_min} must exceed both powers ({p1}, {p2})"
            )));
        }
        if !(nu_cap > nu_min && nu_cap.is_finite()) {
            return Err(Error::domain(format!(
                "nu_cap = {nu_cap} must be finite and > nu_min"
            )));
        }
        if grid_size < 16 {
            return Err(Error::domain(format!(
                "grid_size must be at least 16, got {grid_size}"
            )));
        }

        let (lo, hi) = (nu_min.ln(), nu_cap.ln());
        let step = (hi - lo) / (grid_size - 1) as f64;
        let log_nu: Vec<f64> = (0..grid_size)
            .map(|i| {
                if i + 1 == grid_size {
                    hi
                } else {
                    lo + step * i as f64
                }
            })
            .collect();
        let mut nu_grid: Vec<f64> = log_nu.iter().map(|l| l.exp()).collect();
        nu_grid[0] = nu_min;
        nu_grid[grid_size - 1] = nu_cap;

        let ratio_grid = nu_grid
            .iter()
            .map(|&nu| log_ratio(nu, p1, p2).map(f64::exp))
            .collect::<Result<Vec<_>>>()?;

        let increasing = ratio_grid[1] > ratio_grid[0];
        for (w, nu) in ratio_grid.windows(2).zip(&nu_grid[1..]) {
            let ok = if increasing { w[1] > w[0] } else { w[1] < w[0] };
            if !ok {
                return Err(Error::NonMonotone { nu: *nu });
            }
        }
        Ok(Self {
            p1,
            p2,
            nu_grid,
            ratio_grid,
            log_nu,
            increasing,
        })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn nu_min(&self) -> f64 {
        self.nu_grid[0]
    }

    pub fn nu_cap(&self) -> f64 {
        *self.nu_grid.last().expect("grid is nonempty")
    }

    pub fn nu_grid(&self) -> &[f64] {
        &self.nu_grid
    }

    pub fn ratio_grid(&self) -> &[f64] {
        &self.ratio_grid
    }

    /// ν with `R(ν) = r`, interpolated linearly in `(ln ν, R)`.
    ///
    /// Ratios beyond the heavy-tail end clamp to `nu_min`; ratios beyond the
    /// Gaussian end clamp to `nu_cap`.
    pub fn invert(&self, r: f64) -> f64 {
        let n = self.ratio_grid.len();
        // Index of the first grid point whose ratio is past r along the ν axis.
        let past = if self.increasing {
            self.ratio_grid.partition_point(|&v| v < r)
        } else {
            self.ratio_grid.partition_point(|&v| v > r)
        };
        if past == 0 {
            return self.nu_min();
        }
        if past == n {
            return self.nu_cap();
        }
        let (r0, r1) = (self.ratio_grid[past - 1], self.ratio_grid[past]);
        let (l0, l1) = (self.log_nu[past - 1], self.log_nu[past]);
        let w = (r - r0) / (r1 - r0);
        (l0 + w * (l1 - l0)).exp()
    }
}

/// `ln R(ν) = ln M_{νp₁} - ln M_{νp₂}`.
fn log_ratio(nu: f64, p1: f64, p2: f64) -> Result<f64> {
    Ok(log_abs_moment(nu, p1)? / p1 - log_abs_moment(nu, p2)? / p2)
}

/// Empirical moment ratio `m_{p₁}^{1/p₁} / m_{p₂}^{1/p₂}`.
pub fn empirical_ratio(m1: f64, p1: f64, m2: f64, p2: f64) -> Result<f64> {
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::DegenerateData(format!(
            "moments must be positive for ν estimation, got m{p1}={m1}, m{p2}={m2}"
        )));
    }
    Ok((m1.ln() / p1 - m2.ln() / p2).exp())
}

/// Unadjusted ν̂ from the table powers' moments in `summary`.
pub fn estimate_nu_raw(summary: &MomentSummary, table: &NuInversionTable) -> Result<f64> {
    let lookup = |p: f64| {
        summary
            .moment(p)
            .ok_or_else(|| Error::domain(format!("power {p} not present in moment summary")))
    };
    let r = empirical_ratio(lookup(table.p1)?, table.p1, lookup(table.p2)?, table.p2)?;
    Ok(table.invert(r))
}

/// Additive bias correction, capped at `nu_cap`.
pub fn estimate_nu_adjusted(raw_nu: f64, adjustment: f64, nu_cap: f64) -> f64 {
    (raw_nu + adjustment).min(nu_cap)
}

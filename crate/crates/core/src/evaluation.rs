//! Scoring and report generation.
//!
//! Every score is a mean of `ln ρ_{θ_t}(x_t)` over the scored indices, with
//! θ_t constant for static models. Static, adaptive and GARCH scores all go
//! through [`mean_log_likelihood_by`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{AdaptiveConfig, AdaptiveEstimator, Init, ParamTrajectory};
use crate::baselines::{fit_garch_mle, fit_sigma_mle, garch_filter, GarchParams};
use crate::distribution::{abs_central_moment, two_sided_tail, StudentTParams, GAUSSIAN_NU};
use crate::error::{Error, Result};

fn mean_log_density(pairs: impl Iterator<Item = (StudentTParams, f64)>) -> Result<f64> {
    let (sum, n) = pairs.fold((0.0, 0usize), |(s, n), (p, x)| (s + p.log_pdf(x), n + 1));
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(sum / n as f64)
}

/// Mean log-density of `xs[t]` under `params(t)` for `t ≥ start`.
pub fn mean_log_likelihood_by<F>(xs: &[f64], start: usize, params: F) -> Result<f64>
where
    F: Fn(usize) -> StudentTParams,
{
    if xs.len() <= start {
        return Err(Error::SeriesTooShort {
            len: xs.len(),
            required: start,
        });
    }
    mean_log_density((start..xs.len()).map(|t| (params(t), xs[t])))
}

/// Where the per-step parameters come from.
#[derive(Debug, Clone, Copy)]
pub enum ParamSource<'a> {
    Fixed(StudentTParams),
    Trajectory(&'a ParamTrajectory),
}

/// Mean log-likelihood over indices `t ≥ warmup`.
///
/// For a trajectory, indices before its first record are also skipped.
pub fn mean_log_likelihood(source: ParamSource<'_>, xs: &[f64], warmup: usize) -> Result<f64> {
    match source {
        ParamSource::Fixed(p) => mean_log_likelihood_by(xs, warmup, |_| p),
        ParamSource::Trajectory(traj) => {
            let scored: Vec<_> = traj.records.iter().filter(|r| r.t >= warmup).collect();
            if let Some(bad) = scored.iter().find(|r| r.t >= xs.len()) {
                return Err(Error::LengthMismatch {
                    expected: bad.t + 1,
                    got: xs.len(),
                });
            }
            mean_log_density(scored.into_iter().map(|r| (r.params(), xs[r.t])))
        }
    }
}

/// ν for a point on the `1/ν` axis; 0 maps to the Gaussian limit.
pub fn nu_from_inv(inv_nu: f64) -> f64 {
    if inv_nu * GAUSSIAN_NU <= 1.0 {
        GAUSSIAN_NU
    } else {
        1.0 / inv_nu
    }
}

/// `1/ν` with the Gaussian limit mapped to 0.
pub fn inv_from_nu(nu: f64) -> f64 {
    if nu >= GAUSSIAN_NU {
        0.0
    } else {
        1.0 / nu
    }
}

/// The default `1/ν` grid: 0, 0.05, ..., 1.
pub fn default_inv_nu_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub inv_nu: f64,
    pub nu: f64,
    pub static_sigma: f64,
    pub static_loglik: f64,
    pub adaptive_loglik: f64,
    /// Power actually used for σ adaptation on this row.
    pub adaptive_p_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub series_id: String,
    pub rows: Vec<SweepRow>,
    pub garch_params: GarchParams,
    pub garch_loglik: f64,
    pub config: AdaptiveConfig,
    pub score_start: usize,
    pub n_scored: usize,
}

/// Static-vs-adaptive log-likelihood across fixed ν values, plus a GARCH row.
///
/// μ is held at 0 for every model. The static σ is the MLE over the scored
/// window; the adaptive σ uses `config` with ν fixed per row. When
/// `p_sigma ≥ ν` for a row, that row adapts σ with `p = ν/2` instead and
/// records the power used. GARCH parameters are fitted in sample on the
/// whole series.
pub fn nu_sweep(
    series_id: &str,
    xs: &[f64],
    inv_nu_grid: &[f64],
    config: &AdaptiveConfig,
    init: Init,
) -> Result<SweepReport> {
    if inv_nu_grid.is_empty() {
        return Err(Error::config("ν grid is empty"));
    }
    if let Some(bad) = inv_nu_grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::config(format!(
            "1/ν grid values must lie in [0, 1], got {bad}"
        )));
    }
    let mut grid = inv_nu_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let rows = grid
        .par_iter()
        .map(|&inv_nu| sweep_row(xs, inv_nu, config, init))
        .collect::<Result<Vec<_>>>()?;
    let (score_start, n_scored) = rows[0].1;
    let rows = rows.into_iter().map(|(row, _)| row).collect();

    let garch = fit_garch_mle(xs)?;
    let garch_loglik = garch_filter(xs, &garch.params, score_start)?.mean_loglik;

    Ok(SweepReport {
        series_id: series_id.to_string(),
        rows,
        garch_params: garch.params,
        garch_loglik,
        config: AdaptiveConfig {
            mu_fixed: Some(0.0),
            ..config.clone()
        },
        score_start,
        n_scored,
    })
}

fn sweep_row(
    xs: &[f64],
    inv_nu: f64,
    config: &AdaptiveConfig,
    init: Init,
) -> Result<(SweepRow, (usize, usize))> {
    let nu = nu_from_inv(inv_nu);
    let p_sigma = if config.p_sigma < nu {
        config.p_sigma
    } else {
        0.5 * nu
    };
    let row_config = AdaptiveConfig {
        nu_fixed: Some(nu),
        mu_fixed: Some(0.0),
        p_sigma,
        ..config.clone()
    };
    let traj = AdaptiveEstimator::new(row_config)?.run(xs, init)?;
    let adaptive_loglik =
        mean_log_likelihood(ParamSource::Trajectory(&traj), xs, traj.score_start)?;
    let window = &xs[traj.score_start..];
    let fit = fit_sigma_mle(window, 0.0, nu)?;
    let row = SweepRow {
        inv_nu,
        nu,
        static_sigma: fit.sigma,
        static_loglik: fit.mean_loglik,
        adaptive_loglik,
        adaptive_p_sigma: p_sigma,
    };
    Ok((row, (traj.score_start, window.len())))
}

/// How points are standardized before counting `|x - μ| > kσ` events.
#[derive(Debug, Clone, Copy)]
pub enum Normalization<'a> {
    Static { mu: f64, sigma: f64 },
    Adaptive(&'a ParamTrajectory),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalizationKind {
    Static,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub k_values: Vec<u32>,
    pub observed_counts: Vec<usize>,
    /// `(ν, expected counts per k)`, one entry per requested ν.
    pub expected_counts: Vec<(f64, Vec<f64>)>,
    pub n_effective: usize,
    pub normalization: NormalizationKind,
}

pub const TAIL_K_MAX: u32 = 10;

/// Observed and expected counts of `|x_t - μ_t| > k σ_t` for k = 1..=10.
///
/// With adaptive normalization only the trajectory's scored records count.
pub fn tail_table(
    xs: &[f64],
    normalization: Normalization<'_>,
    nu_labels: &[f64],
) -> Result<TailTable> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    for &nu in nu_labels {
        StudentTParams::standard(nu)?;
    }
    let k_values: Vec<u32> = (1..=TAIL_K_MAX).collect();
    let standardized: Vec<f64> = match normalization {
        Normalization::Static { mu, sigma } => {
            StudentTParams::new(mu, sigma, 1.0)?;
            xs.iter().map(|x| (x - mu).abs() / sigma).collect()
        }
        Normalization::Adaptive(traj) => {
            let scored: Vec<_> = traj.scored().collect();
            if let Some(bad) = scored.iter().find(|r| r.t >= xs.len()) {
                return Err(Error::LengthMismatch {
                    expected: bad.t + 1,
                    got: xs.len(),
                });
            }
            scored
                .iter()
                .map(|r| (xs[r.t] - r.mu).abs() / r.sigma)
                .collect()
        }
    };
    let n_effective = standardized.len();
    let observed_counts = k_values
        .iter()
        .map(|&k| standardized.iter().filter(|&&z| z > k as f64).count())
        .collect();
    let expected_counts = nu_labels
        .iter()
        .map(|&nu| {
            let counts = k_values
                .iter()
                .map(|&k| n_effective as f64 * two_sided_tail(k as f64, nu))
                .collect();
            (nu, counts)
        })
        .collect();
    Ok(TailTable {
        k_values,
        observed_counts,
        expected_counts,
        n_effective,
        normalization: match normalization {
            Normalization::Static { .. } => NormalizationKind::Static,
            Normalization::Adaptive(_) => NormalizationKind::Adaptive,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerErrorRow {
    pub p: f64,
    pub relative_rmse: f64,
}

/// Monte Carlo relative RMSE of the moment σ estimator for each power.
///
/// Each repetition draws `n` points from the unit-scale t with `nu` degrees of
/// freedom, centres on the sample mean, and evaluates every power on the same
/// draw. Repetition `r` uses ChaCha stream `r` of `seed`.
pub fn sigma_power_error_sweep(
    nu: f64,
    powers: &[f64],
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<PowerErrorRow>> {
    if n < 2 || reps == 0 {
        return Err(Error::domain(format!(
            "need n >= 2 and reps >= 1, got n={n}, reps={reps}"
        )));
    }
    let dist = StudentTParams::standard(nu)?;
    let scales = powers
        .iter()
        .map(|&p| abs_central_moment(nu, p))
        .collect::<Result<Vec<_>>>()?;

    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            let xs = dist.sample_with(&mut rng, n);
            let mu = xs.iter().sum::<f64>() / n as f64;
            powers
                .iter()
                .zip(&scales)
                .map(|(&p, &scale)| {
                    let m = xs.iter().map(|x| (x - mu).abs().powf(p)).sum::<f64>() / n as f64;
                    let err = m.powf(1.0 / p) / scale - 1.0;
                    err * err
                })
                .collect()
        })
        .collect();

    Ok(powers
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mse = per_rep.iter().map(|r| r[i]).sum::<f64>() / reps as f64;
            PowerErrorRow {
                p,
                relative_rmse: mse.sqrt(),
            }
        })
        .collect())
}

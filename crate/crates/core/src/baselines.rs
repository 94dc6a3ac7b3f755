//! Reference models: static σ MLE at fixed (μ, ν), and a Gaussian GARCH(1,1).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distribution::{StudentTParams, GAUSSIAN_NU};
use crate::error::{Error, Result};
use crate::evaluation::mean_log_likelihood_by;
use crate::optimize::{golden_section_max, nelder_mead_min};

const LN_SIGMA_RANGE: (f64, f64) = (-18.420_680_743_952_367, 4.605_170_185_988_092); // ln 1e-8, ln 1e2
const LN_SIGMA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaFit {
    pub sigma: f64,
    pub mean_loglik: f64,
}

/// σ maximizing the mean t log-likelihood of `xs` at fixed `mu` and `nu`.
///
/// Golden-section search on ln σ over `[ln 1e-8, ln 1e2]`.
pub fn fit_sigma_mle(xs: &[f64], mu: f64, nu: f64) -> Result<SigmaFit> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    StudentTParams::new(mu, 1.0, nu)?;
    let objective = |ln_sigma: f64| {
        let p = StudentTParams {
            mu,
            sigma: ln_sigma.exp(),
            nu,
        };
        mean_log_likelihood_by(xs, 0, |_| p).unwrap_or(f64::NEG_INFINITY)
    };
    let (ln_sigma, mean_loglik) =
        golden_section_max(objective, LN_SIGMA_RANGE.0, LN_SIGMA_RANGE.1, LN_SIGMA_TOL);
    Ok(SigmaFit {
        sigma: ln_sigma.exp(),
        mean_loglik,
    })
}

/// `σ²_t = ω + α x²_{t-1} + β σ²_{t-1}`, `σ²_0 = initial_var`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub initial_var: f64,
}

impl GarchParams {
    pub fn validate(&self) -> Result<()> {
        let GarchParams {
            omega,
            alpha,
            beta,
            initial_var,
        } = *self;
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::config(format!(
                "GARCH omega must be finite and > 0, got {omega}"
            )));
        }
        if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::config(format!(
                "GARCH alpha and beta must be finite and >= 0, got {alpha}, {beta}"
            )));
        }
        if alpha + beta >= 1.0 {
            return Err(Error::config(format!(
                "GARCH alpha + beta must be < 1 for stationarity, got {}",
                alpha + beta
            )));
        }
        if !(initial_var > 0.0 && initial_var.is_finite()) {
            return Err(Error::config(format!(
                "GARCH initial_var must be finite and > 0, got {initial_var}"
            )));
        }
        Ok(())
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarchPath {
    pub sigma: Vec<f64>,
    pub mean_loglik: f64,
}

fn conditional_variances(xs: &[f64], params: &GarchParams) -> Vec<f64> {
    let mut var = params.initial_var;
    xs.iter()
        .map(|&x| {
            let current = var;
            var = params.omega + params.alpha * x * x + params.beta * var;
            current
        })
        .collect()
}

/// Runs the variance recursion over `xs` and scores each point out of sample
/// under `N(0, σ²_t)`, averaging over indices `t ≥ warmup`.
pub fn garch_filter(xs: &[f64], params: &GarchParams, warmup: usize) -> Result<GarchPath> {
    params.validate()?;
    if xs.len() <= warmup {
        return Err(Error::SeriesTooShort {
            len: xs.len(),
            required: warmup,
        });
    }
    let sigma: Vec<f64> = conditional_variances(xs, params)
        .into_iter()
        .map(f64::sqrt)
        .collect();
    let mean_loglik = mean_log_likelihood_by(xs, warmup, |t| StudentTParams {
        mu: 0.0,
        sigma: sigma[t],
        nu: GAUSSIAN_NU,
    })?;
    Ok(GarchPath { sigma, mean_loglik })
}

/// Simulates `n` returns from the GARCH recursion with Gaussian innovations.
pub fn simulate_garch(params: &GarchParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut var = params.initial_var;
    Ok((0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let x = var.sqrt() * z;
            var = params.omega + params.alpha * x * x + params.beta * var;
            x
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub mean_loglik: f64,
}

pub const GARCH_MIN_LEN: usize = 100;

/// (α, β) starting points; ω is set so the unconditional variance matches
/// the sample variance.
const GARCH_STARTS: [(f64, f64); 8] = [
    (0.05, 0.90),
    (0.10, 0.85),
    (0.08, 0.90),
    (0.03, 0.95),
    (0.15, 0.80),
    (0.20, 0.70),
    (0.02, 0.97),
    (0.10, 0.60),
];

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Maps unconstrained `(ln ω, logit(α+β), logit(α/(α+β)))` to parameters.
fn decode(u: &[f64], initial_var: f64) -> GarchParams {
    let persistence = logistic(u[1]);
    let share = logistic(u[2]);
    GarchParams {
        omega: u[0].exp(),
        alpha: persistence * share,
        beta: persistence * (1.0 - share),
        initial_var,
    }
}

fn encode(p: &GarchParams) -> [f64; 3] {
    let persistence = p.alpha + p.beta;
    [
        p.omega.ln(),
        logit(persistence),
        logit(p.alpha / persistence),
    ]
}

/// In-sample Gaussian MLE of GARCH(1,1) with zero mean.
///
/// Nelder–Mead from each of eight starting points in a reparameterization
/// that enforces ω > 0, α, β ≥ 0 and α + β < 1. The recursion is seeded with
/// the sample second moment.
pub fn fit_garch_mle(xs: &[f64]) -> Result<GarchFit> {
    if xs.len() < GARCH_MIN_LEN {
        return Err(Error::SeriesTooShort {
            len: xs.len(),
            required: GARCH_MIN_LEN - 1,
        });
    }
    let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::DegenerateData(
            "series has zero second moment".into(),
        ));
    }
    let objective = |u: &[f64]| {
        let p = decode(u, var);
        if p.validate().is_err() || p.alpha + p.beta >= 1.0 - 1e-12 {
            return f64::INFINITY;
        }
        let ll = in_sample_loglik(xs, &p);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for (alpha, beta) in GARCH_STARTS {
        let start = GarchParams {
            omega: var * (1.0 - alpha - beta),
            alpha,
            beta,
            initial_var: var,
        };
        let (u, f) = nelder_mead_min(&objective, &encode(&start), 0.5, 1e-12, 2000);
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((u, f));
        }
    }
    let (u, _) = best.expect("at least one start");
    // Restart from the best vertex to escape a collapsed simplex.
    let (u, f) = nelder_mead_min(&objective, &u, 0.1, 1e-13, 2000);
    if !f.is_finite() {
        return Err(Error::NonConvergence {
            value: f,
            abs_error: f64::INFINITY,
        });
    }
    Ok(GarchFit {
        params: decode(&u, var),
        mean_loglik: -f,
    })
}

fn in_sample_loglik(xs: &[f64], p: &GarchParams) -> f64 {
    let mut var = p.initial_var;
    let mut total = 0.0;
    for &x in xs {
        total += -0.5 * (var.ln() + x * x / var);
        var = p.omega + p.alpha * x * x + p.beta * var;
    }
    total / xs.len() as f64 - 0.918_938_533_204_672_8
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigma_mle_constant_magnitude_gaussian() {
        let c = 0.37;
        let xs: Vec<f64> = (0..200)
            .map(|i| if i % 3 == 0 { 1.5 + c } else { 1.5 - c })
            .collect();
        let fit = fit_sigma_mle(&xs, 1.5, GAUSSIAN_NU).unwrap();
        assert_relative_eq!(fit.sigma, c, max_relative = 1e-8);
    }

    #[test]
    fn sigma_mle_recovers_scale() {
        let xs = StudentTParams::new(0.0, 2.0, 5.0)
            .unwrap()
            .sample(100_000, 41);
        let fit = fit_sigma_mle(&xs, 0.0, 5.0).unwrap();
        assert!((1.97..=2.03).contains(&fit.sigma), "{}", fit.sigma);
        for factor in [1.1, 1.0 / 1.1] {
            let p = StudentTParams::new(0.0, fit.sigma * factor, 5.0).unwrap();
            let ll = mean_log_likelihood_by(&xs, 0, |_| p).unwrap();
            assert!(fit.mean_loglik >= ll);
        }
    }

    #[test]
    fn sigma_mle_is_global_on_grid() {
        let xs = StudentTParams::new(0.1, 0.02, 3.0)
            .unwrap()
            .sample(2000, 42);
        for nu in [1.0, 3.0, 30.0] {
            let fit = fit_sigma_mle(&xs, 0.0, nu).unwrap();
            let (lo, hi) = LN_SIGMA_RANGE;
            for i in 0..1000 {
                let ln_sigma = lo + (hi - lo) * i as f64 / 999.0;
                let p = StudentTParams {
                    mu: 0.0,
                    sigma: ln_sigma.exp(),
                    nu,
                };
                let ll = mean_log_likelihood_by(&xs, 0, |_| p).unwrap();
                assert!(
                    ll <= fit.mean_loglik + 1e-12,
                    "nu={nu}: grid {ll} beats {}",
                    fit.mean_loglik
                );
            }
        }
    }

    #[test]
    fn sigma_mle_errors() {
        assert!(matches!(
            fit_sigma_mle(&[], 0.0, 3.0),
            Err(Error::EmptyInput)
        ));
        assert!(fit_sigma_mle(&[1.0], 0.0, -3.0).is_err());
    }

    fn params(omega: f64, alpha: f64, beta: f64) -> GarchParams {
        GarchParams {
            omega,
            alpha,
            beta,
            initial_var: 1e-4,
        }
    }

    #[test]
    fn garch_validation() {
        assert!(params(1e-6, 0.5, 0.5).validate().is_err());
        assert!(params(0.0, 0.1, 0.5).validate().is_err());
        assert!(params(1e-6, -0.1, 0.5).validate().is_err());
        assert!(garch_filter(&[0.1; 10], &params(1e-6, 0.6, 0.4), 0).is_err());
    }

    #[test]
    fn constant_variance_when_no_dynamics() {
        let p = GarchParams {
            omega: 2.0,
            alpha: 0.0,
            beta: 0.0,
            initial_var: 2.0,
        };
        let xs = [0.5, -1.0, 3.0, 0.0];
        let path = garch_filter(&xs, &p, 0).unwrap();
        assert!(path.sigma.iter().all(|&s| s == 2f64.sqrt()));
        let want = xs
            .iter()
            .map(|x| -0.5 * (2.0 * std::f64::consts::PI * 2.0).ln() - x * x / 4.0)
            .sum::<f64>()
            / 4.0;
        assert_relative_eq!(path.mean_loglik, want, max_relative = 1e-14);
    }

    #[test]
    fn filter_is_causal_and_respects_warmup() {
        let p = params(1e-6, 0.1, 0.85);
        let mut xs = simulate_garch(&p, 500, 3).unwrap();
        let a = garch_filter(&xs, &p, 50).unwrap();
        xs[200] = 0.5;
        let b = garch_filter(&xs, &p, 50).unwrap();
        assert_eq!(a.sigma[..=200], b.sigma[..=200]);
        assert_ne!(a.sigma[201], b.sigma[201]);
        assert!(matches!(
            garch_filter(&xs, &p, 500),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn long_run_variance() {
        let p = GarchParams {
            omega: 1e-6,
            alpha: 0.08,
            beta: 0.90,
            initial_var: 5e-5,
        };
        let xs = simulate_garch(&p, 1_000_000, 4).unwrap();
        let path = garch_filter(&xs, &p, 0).unwrap();
        let mean_var = path.sigma.iter().map(|s| s * s).sum::<f64>() / xs.len() as f64;
        assert_relative_eq!(mean_var, p.unconditional_variance(), max_relative = 0.02);
    }

    #[test]
    fn fit_recovers_simulated_params() {
        let truth = GarchParams {
            omega: 1e-6,
            alpha: 0.08,
            beta: 0.90,
            initial_var: 5e-5,
        };
        let xs = simulate_garch(&truth, 100_000, 5).unwrap();
        let fit = fit_garch_mle(&xs).unwrap();
        assert!((fit.params.alpha - 0.08).abs() < 0.03, "{:?}", fit.params);
        assert!((fit.params.beta - 0.90).abs() < 0.03, "{:?}", fit.params);
        assert_eq!(fit, fit_garch_mle(&xs).unwrap());
    }

    #[test]
    fn fit_on_iid_gaussian() {
        let xs = StudentTParams::new(0.0, 0.01, GAUSSIAN_NU)
            .unwrap()
            .sample(20_000, 6);
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        let fit = fit_garch_mle(&xs).unwrap();
        assert!(fit.params.alpha < 0.03, "{:?}", fit.params);
        assert_relative_eq!(
            fit.params.omega / (1.0 - fit.params.beta),
            var,
            max_relative = 0.1
        );
    }

    #[test]
    fn fit_needs_enough_data() {
        assert!(matches!(
            fit_garch_mle(&[0.01; 99]),
            Err(Error::SeriesTooShort { .. })
        ));
    }
}

//! Location-scale Student's t-distribution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{incomplete_beta_pair, log_gamma_unchecked};

/// Degrees of freedom at or above which the Gaussian limit is used.
pub const GAUSSIAN_NU: f64 = 1e6;

const LN_PI: f64 = 1.144_729_885_849_400_2;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// One `(μ, σ, ν)` parameter triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentTParams {
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
}

impl StudentTParams {
    pub fn new(mu: f64, sigma: f64, nu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::domain(format!("mu must be finite, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!(
                "sigma must be finite and > 0, got {sigma}"
            )));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::domain(format!(
                "nu must be finite and > 0, got {nu}"
            )));
        }
        Ok(Self { mu, sigma, nu })
    }

    /// Unit-scale, zero-centred distribution with `nu` degrees of freedom.
    pub fn standard(nu: f64) -> Result<Self> {
        Self::new(0.0, 1.0, nu)
    }

    pub fn is_gaussian(&self) -> bool {
        self.nu >= GAUSSIAN_NU
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        if self.is_gaussian() {
            return -HALF_LN_2PI - self.sigma.ln() - 0.5 * z * z;
        }
        log_density_prefactor(self.nu)
            - self.sigma.ln()
            - 0.5 * (self.nu + 1.0) * (z * z / self.nu).ln_1p()
    }

    /// `P(X ≤ x)` via the incomplete beta form of the t CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        standard_cdf(z, self.nu)
    }

    /// `n` independent draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    /// Draws `Z / sqrt(V / ν)` with `V ~ χ²(ν)`, then `μ + σ t`.
    pub fn sample_with<R: rand::Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        if self.is_gaussian() {
            return (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    self.mu + self.sigma * z
                })
                .collect();
        }
        // χ²(ν) = 2 Gamma(ν/2, 1); shape and scale are validated positive.
        let chi2 = Gamma::new(0.5 * self.nu, 2.0).expect("nu > 0");
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                let v: f64 = chi2.sample(rng);
                self.mu + self.sigma * z / (v / self.nu).sqrt()
            })
            .collect()
    }
}

/// `ln Γ((ν+1)/2) - ln Γ(ν/2) - ½ ln(νπ)`.
fn log_density_prefactor(nu: f64) -> f64 {
    log_gamma_unchecked(0.5 * (nu + 1.0)) - log_gamma_unchecked(0.5 * nu) - 0.5 * (nu.ln() + LN_PI)
}

pub(crate) fn standard_cdf(z: f64, nu: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if nu >= GAUSSIAN_NU {
        return normal_cdf(z);
    }
    if z == 0.0 {
        return 0.5;
    }
    if z.is_infinite() {
        return if z > 0.0 { 1.0 } else { 0.0 };
    }
    // For t = ν / (ν + z²): I_t(ν/2, ½) is the two-sided tail mass beyond |z|.
    let z2 = z * z;
    let t = nu / (nu + z2);
    let one_minus_t = z2 / (nu + z2);
    let (tail, _) = incomplete_beta_pair(0.5 * nu, 0.5, t, one_minus_t);
    if z > 0.0 {
        1.0 - 0.5 * tail
    } else {
        0.5 * tail
    }
}

/// Two-sided tail probability `P(|T| > k)` for a standard t variate.
pub fn two_sided_tail(k: f64, nu: f64) -> f64 {
    if nu >= GAUSSIAN_NU {
        return erfc(k / std::f64::consts::SQRT_2);
    }
    let k2 = k * k;
    incomplete_beta_pair(0.5 * nu, 0.5, nu / (nu + k2), k2 / (nu + k2)).0
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Complementary error function through the incomplete gamma relation
/// `erfc(x) = Q(½, x²)` for x ≥ 0.
fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    upper_incomplete_gamma_half(x * x)
}

/// Regularized upper incomplete gamma `Q(½, y)`.
fn upper_incomplete_gamma_half(y: f64) -> f64 {
    const A: f64 = 0.5;
    if y == 0.0 {
        return 1.0;
    }
    let log_front = A * y.ln() - y - log_gamma_unchecked(A);
    if y < A + 1.0 {
        // Series for P(a, y).
        let mut term = 1.0 / A;
        let mut sum = term;
        let mut ap = A;
        for _ in 0..500 {
            ap += 1.0;
            term *= y / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        1.0 - sum * log_front.exp()
    } else {
        // Lentz continued fraction for Q(a, y).
        const TINY: f64 = 1e-300;
        let mut b = y + 1.0 - A;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - A);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        log_front.exp() * h
    }
}

/// `M_{νp}`: the p-th root of `E|T|^p` for a standard t variate with ν
/// degrees of freedom. Finite only for `p < ν`.
///
/// For `ν ≥ GAUSSIAN_NU` the Gaussian absolute moment is returned.
pub fn abs_central_moment(nu: f64, p: f64) -> Result<f64> {
    Ok((log_abs_moment(nu, p)? / p).exp())
}

/// `ln E|T|^p` for a standard t variate.
pub fn log_abs_moment(nu: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::domain(format!(
            "moment power must be finite and > 0, got {p}"
        )));
    }
    if !(nu > 0.0) || nu.is_nan() {
        return Err(Error::domain(format!("nu must be > 0, got {nu}")));
    }
    if nu >= GAUSSIAN_NU {
        return Ok(gaussian_log_abs_moment(p));
    }
    if p >= nu {
        return Err(Error::DivergentMoment { nu, p });
    }
    Ok(0.5 * p * nu.ln()
        + log_gamma_unchecked(0.5 * (p + 1.0))
        + log_gamma_unchecked(0.5 * (nu - p))
        - 0.5 * LN_PI
        - log_gamma_unchecked(0.5 * nu))
}

/// `ln E|Z|^p` for a standard normal variate.
pub fn gaussian_log_abs_moment(p: f64) -> f64 {
    0.5 * p * std::f64::consts::LN_2 + log_gamma_unchecked(0.5 * (p + 1.0)) - 0.5 * LN_PI
}

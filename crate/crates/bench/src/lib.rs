//! Benchmark fixtures shared by the criterion benches.

use adaptive_t::baselines::{simulate_garch, GarchParams};
use adaptive_t::StudentTParams;

/// Heavy-tailed returns with two volatility regimes.
pub fn regime_series(n: usize) -> Vec<f64> {
    let half = n / 2;
    let mut xs = StudentTParams::new(0.0, 0.01, 4.0).unwrap().sample(half, 1);
    xs.extend(
        StudentTParams::new(0.0, 0.03, 4.0)
            .unwrap()
            .sample(n - half, 2),
    );
    xs
}

pub fn garch_series(n: usize) -> Vec<f64> {
    let params = GarchParams {
        omega: 1e-6,
        alpha: 0.08,
        beta: 0.90,
        initial_var: 5e-5,
    };
    simulate_garch(&params, n, 3).unwrap()
}

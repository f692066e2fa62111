//! Special functions: log-gamma, normal distribution, regularized incomplete
//! gamma, exact binomials.

use statrs::function::{erf, gamma};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::sync::OnceLock;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// ln(k!) for integer k.
pub fn ln_factorial(k: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(256);
        let mut acc = 0.0f64;
        t.push(0.0);
        for i in 1..256 {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    });
    if k < table.len() {
        table[k]
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erf::erfc_inv(2.0 * p)
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x) / Γ(a), for a > 0.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma::gamma_ur(a, x)
    }
}

/// Density of Gamma(shape, rate) at x.
pub fn gamma_pdf(shape: f64, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return if x == 0.0 && shape == 1.0 { rate } else { 0.0 };
    }
    (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)).exp()
}

/// Largest order with an exact `u64` binomial table.
pub const MAX_EXACT_ORDER: usize = 64;

/// Exact binomial coefficients C(n, k) for n ≤ 64, built once by Pascal's rule.
pub fn binomial_u64(n: usize, k: usize) -> u64 {
    static TABLE: OnceLock<Vec<Vec<u64>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<u64>> = Vec::with_capacity(MAX_EXACT_ORDER + 1);
        for n in 0..=MAX_EXACT_ORDER {
            let mut row = vec![1u64; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        rows
    });
    assert!(n <= MAX_EXACT_ORDER, "binomial table covers n <= 64");
    if k > n {
        0
    } else {
        table[n][k]
    }
}

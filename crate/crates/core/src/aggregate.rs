//! Distribution of the aggregate S_n = X_1 + … + X_n.
//!
//! Conditionally on Θ and T = l, S_n is Gamma(l, mΘ); integrating Θ out gives
//! series in the derivatives of f* weighted by the count pmf A_l.

use crate::bernstein::GammaTensor;
use crate::counts::{tail_sums, total_count_pmf, CountPmf};
use crate::error::{Error, Result};
use crate::mixing::MixingFamily;
use crate::roots::brent;
use crate::special::{gamma_pdf, ln_beta, ln_factorial, ln_gamma};

/// A value together with a bound on the error from truncating the count support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub truncation_bound: f64,
}

#[derive(Debug, Clone)]
pub struct AggregateModel {
    mixing: MixingFamily,
    counts: CountPmf<f64>,
    tails: Vec<f64>,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

impl AggregateModel {
    pub fn new(mixing: MixingFamily, counts: CountPmf<f64>) -> Self {
        let tails = tail_sums(&counts);
        AggregateModel {
            mixing,
            counts,
            tails,
        }
    }

    /// Builds the count pmf from γ and wraps it.
    pub fn from_gamma(
        gamma: &GammaTensor<f64>,
        mixing: MixingFamily,
        eps_tail: f64,
    ) -> Result<Self> {
        Ok(Self::new(mixing, total_count_pmf(gamma, eps_tail)?))
    }

    pub fn mixing(&self) -> &MixingFamily {
        &self.mixing
    }

    pub fn counts(&self) -> &CountPmf<f64> {
        &self.counts
    }

    /// B_i for i = 0..=L_cap.
    pub fn tails(&self) -> &[f64] {
        &self.tails
    }

    pub fn dim(&self) -> usize {
        self.counts.dim()
    }

    pub fn order(&self) -> usize {
        self.counts.order()
    }

    fn mf(&self) -> f64 {
        self.order() as f64
    }

    /// Density of S_n: Σ_l A_l m^l x^{l-1} / Γ(l) |f*^{(l)}(mx)|.
    pub fn agg_pdf(&self, x: f64) -> Result<Bounded> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!(
                "aggregate density needs x > 0, got {x}"
            )));
        }
        let m = self.mf();
        let probs = self.counts.probs();
        let l_cap = self.counts.l_cap();
        let derivs = self.mixing.ln_abs_derivs(l_cap, m * x)?;
        let (ln_m, ln_x) = (m.ln(), x.ln());
        let mut terms = Vec::with_capacity(probs.len());
        let mut envelope = f64::NEG_INFINITY;
        for l in 1..=l_cap {
            let lf = l as f64;
            let kernel = lf * ln_m + (lf - 1.0) * ln_x - ln_gamma(lf) + derivs[l];
            if l > l_cap / 2 {
                envelope = envelope.max(kernel);
            }
            let a = probs[l];
            debug_assert!(a >= 0.0, "negative count probability");
            if a > 0.0 {
                terms.push(a.ln() + kernel);
            }
        }
        Ok(Bounded {
            value: log_sum_exp(&terms).exp(),
            truncation_bound: self.counts.tail_mass() * envelope.exp(),
        })
    }

    /// P(S_n > x) = Σ_i B_i (mx)^i / i! |f*^{(i)}(mx)|.
    ///
    /// The kernels are Poisson-mixture probabilities, so the omitted tail is at
    /// most the count pmf's tail mass.
    pub fn agg_survival(&self, x: f64) -> Result<Bounded> {
        if x < 0.0 {
            return Err(Error::Domain(format!(
                "aggregate survival needs x >= 0, got {x}"
            )));
        }
        let tail_mass = *self.counts.tail_mass();
        if x == 0.0 {
            return Ok(Bounded {
                value: 1.0,
                truncation_bound: 0.0,
            });
        }
        let mx = self.mf() * x;
        let l_cap = self.counts.l_cap();
        let derivs = self.mixing.ln_abs_derivs(l_cap, mx)?;
        let ln_mx = mx.ln();
        let terms: Vec<f64> = self
            .tails
            .iter()
            .enumerate()
            .filter(|(_, &b)| b > 0.0)
            .map(|(i, &b)| b.ln() + i as f64 * ln_mx - ln_factorial(i) + derivs[i])
            .collect();
        Ok(Bounded {
            value: log_sum_exp(&terms).exp().min(1.0),
            truncation_bound: tail_mass,
        })
    }

    /// VaR_κ(S_n): the root of P(S_n > x) = 1 - κ.
    pub fn var(&self, kappa: f64) -> Result<f64> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                value: kappa,
                reason: "level must lie in (0, 1)",
            });
        }
        let target = 1.0 - kappa;
        let excess = |x: f64| -> Result<f64> { Ok(self.agg_survival(x)?.value - target) };
        let mut lo = 0.0;
        let mut hi = 1.0;
        while excess(hi)? > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::BracketNotFound(hi));
            }
        }
        let mut failure = None;
        let root = brent(
            |x| match excess(x) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            lo,
            hi,
            1e-13,
            0.0,
            300,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        root
    }
}

/// Density of S_n under Pareto(a, b) claims written out directly:
/// Σ_l A_l m^l x^{l-1} / (b^l B(l, a) (1 + mx/b)^{a+l}).
pub fn pareto_agg_pdf(a: f64, b: f64, counts: &CountPmf<f64>, x: f64) -> f64 {
    let m = counts.order() as f64;
    let terms: Vec<f64> = counts
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(l, &p)| {
            let lf = l as f64;
            p.ln() + lf * m.ln() + (lf - 1.0) * x.ln()
                - lf * b.ln()
                - ln_beta(lf, a)
                - (a + lf) * (m * x / b).ln_1p()
        })
        .collect();
    log_sum_exp(&terms).exp()
}

/// Mixture weights ω_k (index k ≥ 1) of S_n = Σ_k ω_k Gamma(a + k - 1, mλ) under
/// Gamma(a, λ) claims with a ≤ 1. The scale λ does not enter the weights.
pub fn gamma_agg_weights(a: f64, _lambda: f64, counts: &CountPmf<f64>) -> Vec<f64> {
    let probs = counts.probs();
    let len = probs.len();
    let mut w = vec![0.0; len];
    if a >= 1.0 {
        w.copy_from_slice(probs);
        return w;
    }
    let (lg_a, lg_1a) = (ln_gamma(a), ln_gamma(1.0 - a));
    for (l, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        for (k, wk) in w.iter_mut().enumerate().take(l + 1).skip(1) {
            let (kf, r) = (k as f64, (l - k) as f64);
            let ln_coef = ln_gamma(a + kf - 1.0) - ln_gamma(kf) - lg_a + ln_gamma(r + 1.0 - a)
                - ln_gamma(r + 1.0)
                - lg_1a;
            *wk += p * ln_coef.exp();
        }
    }
    w
}

/// Density of S_n under Gamma(a, λ) claims as the finite Gamma mixture.
pub fn gamma_agg_pdf(a: f64, lambda: f64, counts: &CountPmf<f64>, x: f64) -> f64 {
    let rate = lambda * counts.order() as f64;
    gamma_agg_weights(a, lambda, counts)
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &w)| w != 0.0)
        .map(|(k, &w)| w * gamma_pdf(a + k as f64 - 1.0, rate, x))
        .sum()
}

//! Mixing variable Θ, described through its Laplace transform f*.
//!
//! f* is also the marginal survival function of every X_i = Z_i / Θ and the
//! generator of the mixed copula.

use crate::error::{Error, Result};
use crate::quadrature::integrate_to_infinity;
use crate::roots::brent;
use crate::special::{gamma_q, ln_gamma};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixingFamily {
    /// Θ ~ Gamma(shape a, rate b): f*(x) = (1 + x/b)^{-a}, Pareto(a, b) claims.
    GammaMixing { a: f64, b: f64 },
    /// f*(x) = Γ(a, λx)/Γ(a), Gamma(a, λ) claims with a ≤ 1.
    GammaClaims { a: f64, lambda: f64 },
}

impl MixingFamily {
    /// Gamma mixing; the shape is restricted to a ≥ 1.
    pub fn gamma_mixing(a: f64, b: f64) -> Result<Self> {
        if !(a >= 1.0 && a.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "a",
                value: a,
                reason: "gamma mixing requires a >= 1",
            });
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "b",
                value: b,
                reason: "gamma mixing requires b > 0",
            });
        }
        Ok(MixingFamily::GammaMixing { a, b })
    }

    pub fn gamma_claims(a: f64, lambda: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "a",
                value: a,
                reason: "gamma claims require 0 < a <= 1",
            });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
                reason: "gamma claims require lambda > 0",
            });
        }
        Ok(MixingFamily::GammaClaims { a, lambda })
    }

    /// Builds a family from its id and named parameters (`a`, `b` or `a`, `lambda`).
    /// Gamma mixing defaults to a = 5, b = 100.
    pub fn from_id(id: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &'static str, d: Option<f64>| {
            params.get(k).copied().or(d).ok_or(Error::InvalidParameter {
                name: k,
                value: f64::NAN,
                reason: "missing",
            })
        };
        match id {
            "gamma_mixing" => Self::gamma_mixing(get("a", Some(5.0))?, get("b", Some(100.0))?),
            "gamma_claims" => Self::gamma_claims(get("a", None)?, get("lambda", None)?),
            other => Err(Error::UnknownMixing(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            MixingFamily::GammaMixing { .. } => "gamma_mixing",
            MixingFamily::GammaClaims { .. } => "gamma_claims",
        }
    }

    /// f*(x) for x ≥ 0.
    pub fn laplace(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match *self {
            MixingFamily::GammaMixing { a, b } => (1.0 + x / b).powf(-a),
            MixingFamily::GammaClaims { a, lambda } => gamma_q(a, lambda * x),
        }
    }

    /// ln |f*^{(l)}(x)|; the sign of the derivative is (-1)^l.
    pub fn ln_abs_deriv(&self, l: usize, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::Domain(format!("laplace derivative at x = {x} < 0")));
        }
        match *self {
            MixingFamily::GammaMixing { a, b } => Ok(ln_gamma(a + l as f64)
                - ln_gamma(a)
                - l as f64 * b.ln()
                - (a + l as f64) * (x / b).ln_1p()),
            MixingFamily::GammaClaims { a, lambda } => {
                if l == 0 {
                    return Ok(gamma_q(a, lambda * x).ln());
                }
                if a == 1.0 {
                    return Ok(l as f64 * lambda.ln() - lambda * x);
                }
                if x == 0.0 {
                    return Err(Error::SingularDerivative { order: l });
                }
                Ok(claims_ln_abs_deriv(a, lambda, l, x))
            }
        }
    }

    /// f*^{(l)}(x).
    pub fn laplace_deriv(&self, l: usize, x: f64) -> Result<f64> {
        let v = self.ln_abs_deriv(l, x)?.exp();
        Ok(if l % 2 == 0 { v } else { -v })
    }

    /// ln |f*^{(l)}(x)| for every l in 0..=max_order.
    pub fn ln_abs_derivs(&self, max_order: usize, x: f64) -> Result<Vec<f64>> {
        match *self {
            MixingFamily::GammaMixing { a, b } => {
                if x < 0.0 {
                    return Err(Error::Domain(format!("laplace derivative at x = {x} < 0")));
                }
                // |f^{(l+1)}| / |f^{(l)}| = (a + l) / (b + x)
                let ln_step = (b + x).ln();
                let mut out = Vec::with_capacity(max_order + 1);
                let mut cur = -a * (x / b).ln_1p();
                for l in 0..=max_order {
                    out.push(cur);
                    cur += (a + l as f64).ln() - ln_step;
                }
                Ok(out)
            }
            MixingFamily::GammaClaims { .. } => {
                (0..=max_order).map(|l| self.ln_abs_deriv(l, x)).collect()
            }
        }
    }

    /// x ≥ 0 with f*(x) = u.
    pub fn laplace_inv(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!(
                "laplace inverse needs u in (0, 1], got {u}"
            )));
        }
        if u == 1.0 {
            return Ok(0.0);
        }
        match *self {
            MixingFamily::GammaMixing { a, b } => Ok(b * ((-u.ln() / a).exp_m1())),
            MixingFamily::GammaClaims { a, lambda } => {
                let target = u.ln();
                let g = |t: f64| gamma_q(a, t).ln() - target;
                let mut hi = 1.0;
                while g(hi) > 0.0 {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return Err(Error::BracketNotFound(hi));
                    }
                }
                let t = brent(g, 0.0, hi, 1e-15, 1e-300, 500)?;
                Ok(t / lambda)
            }
        }
    }

    /// ∫_lower^∞ f*(x) dx. Closed form for gamma mixing (finite only when a > 1),
    /// adaptive quadrature for gamma claims.
    pub fn tail_integral(&self, lower: f64) -> Result<f64> {
        match *self {
            MixingFamily::GammaMixing { a, b } => {
                if a <= 1.0 {
                    return Err(Error::DivergentTail(format!(
                        "gamma mixing with a = {a} <= 1 gives infinite-mean claims"
                    )));
                }
                Ok(b / (a - 1.0) * (1.0 + lower / b).powf(1.0 - a))
            }
            MixingFamily::GammaClaims { .. } => {
                let r = integrate_to_infinity(|x| self.laplace(x), lower.max(0.0), 1e-300, 1e-13);
                Ok(r.value)
            }
        }
    }

    /// E[X_i] = ∫_0^∞ f*.
    pub fn claim_mean(&self) -> Result<f64> {
        match *self {
            MixingFamily::GammaClaims { a, lambda } => Ok(a / lambda),
            _ => self.tail_integral(0.0),
        }
    }

    pub fn sampler(&self) -> ThetaSampler {
        match *self {
            MixingFamily::GammaMixing { a, b } => {
                ThetaSampler::Gamma(Gamma::new(a, 1.0 / b).expect("validated parameters"))
            }
            MixingFamily::GammaClaims { a, lambda } => {
                if a >= 1.0 {
                    ThetaSampler::Constant(lambda)
                } else {
                    ThetaSampler::InverseBeta {
                        lambda,
                        beta: Beta::new(a, 1.0 - a).expect("validated parameters"),
                    }
                }
            }
        }
    }

    /// One draw of Θ.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }
}

/// Θ sampler with the distribution objects built once.
#[derive(Debug, Clone, Copy)]
pub enum ThetaSampler {
    /// Gamma(shape a, rate b).
    Gamma(Gamma<f64>),
    /// Θ = λ / V with V ~ Beta(a, 1 - a): Exp(Θ) is then Gamma(a, λ).
    InverseBeta {
        lambda: f64,
        beta: Beta<f64>,
    },
    Constant(f64),
}

impl ThetaSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ThetaSampler::Gamma(g) => g.sample(rng),
            ThetaSampler::InverseBeta { lambda, beta } => loop {
                let v = beta.sample(rng);
                if v > 0.0 {
                    return lambda / v;
                }
            },
            ThetaSampler::Constant(c) => *c,
        }
    }
}

/// ln |f*^{(l)}(x)| for f* = Q(a, λx), 0 < a < 1, l ≥ 1, x > 0:
/// (λ^a / Γ(a)) e^{-λx} Σ_{k<l} C(l-1, k) |(a-1)_k| x^{a-1-k} λ^{l-1-k},
/// with (a-1)_k the falling factorial. Every term is positive when a < 1.
fn claims_ln_abs_deriv(a: f64, lambda: f64, l: usize, x: f64) -> f64 {
    let ln_pref = a * lambda.ln() - ln_gamma(a) - lambda * x;
    let ln_xl = (x * lambda).ln();
    let mut ln_terms = Vec::with_capacity(l);
    let mut cur = (a - 1.0) * x.ln() + (l as f64 - 1.0) * lambda.ln();
    ln_terms.push(cur);
    for k in 0..l - 1 {
        let kf = k as f64;
        cur += ((l - 1 - k) as f64 / (kf + 1.0)).ln() + (kf + 1.0 - a).ln() - ln_xl;
        ln_terms.push(cur);
    }
    let max = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = ln_terms.iter().map(|t| (t - max).exp()).sum();
    ln_pref + max + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pareto() -> MixingFamily {
        MixingFamily::gamma_mixing(5.0, 100.0).unwrap()
    }

    #[test]
    fn laplace_values() {
        assert_eq!(pareto().laplace(0.0), 1.0);
        assert!((pareto().laplace(139.12) - 2.3912f64.powi(-5)).abs() < 1e-17);
        let exp = MixingFamily::gamma_claims(1.0, 2.0).unwrap();
        assert!((exp.laplace(3.0) - (-6.0f64).exp()).abs() < 1e-17);
    }

    #[test]
    fn derivative_values() {
        let p = pareto();
        assert!((p.laplace_deriv(0, 10.0).unwrap() - 1.1f64.powi(-5)).abs() < 1e-15);
        assert!((p.laplace_deriv(0, 10.0).unwrap() - 0.620921).abs() < 1e-6);
        let d1 = p.laplace_deriv(1, 139.12).unwrap();
        let want = -(0.05) * 2.3912f64.powi(-6);
        assert!(((d1 - want) / want).abs() < 1e-13);
        let h = 1e-3;
        let fd = (p.laplace(139.12 + h) - p.laplace(139.12 - h)) / (2.0 * h);
        assert!(((fd - d1) / d1).abs() < 1e-6);
        let exp = MixingFamily::gamma_claims(1.0, 1.7).unwrap();
        for l in 0..8 {
            let want = (-1.7f64).powi(l as i32) * (-1.7f64 * 0.4).exp();
            assert!(((exp.laplace_deriv(l, 0.4).unwrap() - want) / want).abs() < 1e-13);
        }
    }

    #[test]
    fn claims_derivative_is_singular_at_zero() {
        let f = MixingFamily::gamma_claims(0.5, 1.0).unwrap();
        assert!(matches!(
            f.laplace_deriv(1, 0.0),
            Err(Error::SingularDerivative { order: 1 })
        ));
        assert!(f.laplace_deriv(0, 0.0).is_ok());
    }

    #[test]
    fn derivative_sequence_matches_single_orders() {
        for fam in [pareto(), MixingFamily::gamma_claims(0.3, 0.8).unwrap()] {
            let seq = fam.ln_abs_derivs(40, 2.5).unwrap();
            for (l, v) in seq.iter().enumerate() {
                let single = fam.ln_abs_deriv(l, 2.5).unwrap();
                assert!((v - single).abs() < 1e-10 * single.abs().max(1.0), "l={l}");
            }
        }
    }

    #[test]
    fn inverse_values() {
        assert_eq!(pareto().laplace_inv(1.0).unwrap(), 0.0);
        assert!((pareto().laplace_inv(2f64.powi(-5)).unwrap() - 100.0).abs() < 1e-11);
        for fam in [pareto(), MixingFamily::gamma_claims(0.4, 3.0).unwrap()] {
            for &x in &[0.1, 1.0, 10.0, 100.0] {
                let back = fam.laplace_inv(fam.laplace(x)).unwrap();
                assert!(((back - x) / x).abs() < 1e-10, "{fam:?} x={x} back={back}");
            }
        }
        assert!(pareto().laplace_inv(0.0).is_err());
        assert!(pareto().laplace_inv(1.5).is_err());
    }

    #[test]
    fn tail_integrals() {
        let p = pareto();
        assert!((p.tail_integral(0.0).unwrap() - 25.0).abs() < 1e-12);
        assert!(MixingFamily::gamma_mixing(1.0, 3.0)
            .unwrap()
            .tail_integral(1.0)
            .is_err());
        // E[(X - c)^+] for X ~ Gamma(a, λ)
        let (a, lambda) = (0.6, 1.5);
        let g = MixingFamily::gamma_claims(a, lambda).unwrap();
        for &c in &[0.0, 0.3, 2.0, 9.0] {
            let t = lambda * c;
            let want = a / lambda * gamma_q(a + 1.0, t) - c * gamma_q(a, t);
            let got = g.tail_integral(c).unwrap();
            assert!(
                ((got - want) / want).abs() < 1e-10,
                "c={c}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn families_by_id() {
        let mut p = BTreeMap::new();
        assert_eq!(MixingFamily::from_id("gamma_mixing", &p).unwrap(), pareto());
        assert!(MixingFamily::from_id("gamma_claims", &p).is_err());
        p.insert("a".to_string(), 0.5);
        p.insert("lambda".to_string(), 2.0);
        let f = MixingFamily::from_id("gamma_claims", &p).unwrap();
        assert_eq!(
            f,
            MixingFamily::GammaClaims {
                a: 0.5,
                lambda: 2.0
            }
        );
        assert!(matches!(
            MixingFamily::from_id("lognormal", &p),
            Err(Error::UnknownMixing(_))
        ));
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(MixingFamily::gamma_mixing(0.5, 1.0).is_err());
        assert!(MixingFamily::gamma_mixing(2.0, 0.0).is_err());
        assert!(MixingFamily::gamma_claims(1.5, 1.0).is_err());
        assert!(MixingFamily::gamma_claims(0.5, -1.0).is_err());
    }

    #[test]
    fn derivatives_alternate_in_sign() {
        for fam in [pareto(), MixingFamily::gamma_claims(0.35, 2.0).unwrap()] {
            for &x in &[0.05, 1.0, 30.0] {
                for l in 0..12 {
                    let d = fam.laplace_deriv(l, x).unwrap();
                    assert!(
                        if l % 2 == 0 { d > 0.0 } else { d < 0.0 },
                        "{fam:?} l={l} x={x}"
                    );
                }
            }
        }
    }

    #[test]
    fn claims_derivatives_match_finite_differences() {
        let f = MixingFamily::gamma_claims(0.4, 1.3).unwrap();
        let x = 0.8;
        let h = 1e-4;
        for l in 1..4 {
            let fd = (f.laplace_deriv(l - 1, x + h).unwrap()
                - f.laplace_deriv(l - 1, x - h).unwrap())
                / (2.0 * h);
            let d = f.laplace_deriv(l, x).unwrap();
            assert!(((fd - d) / d).abs() < 1e-6, "l={l}: {fd} vs {d}");
        }
    }

    #[test]
    fn gamma_sampler_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = pareto().sampler();
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| s.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((mean - 0.05).abs() < 3.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn beta_sampler_reproduces_laplace_transform() {
        let f = MixingFamily::gamma_claims(0.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = f.sampler();
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| s.sample(&mut rng)).collect();
        for &t in &[0.5, 1.0, 2.0] {
            let vals: Vec<f64> = draws.iter().map(|th| (-t * th).exp()).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            assert!(
                (mean - f.laplace(t)).abs() < 3.0 * sd / (n as f64).sqrt(),
                "s={t}"
            );
        }
    }

    #[test]
    fn degenerate_claims_sampler() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = MixingFamily::gamma_claims(1.0, 2.0).unwrap();
        assert!((0..100).all(|_| f.sample_theta(&mut rng) == 2.0));
    }
}

//! TVaR, TVaR-based allocation, the mixed copula and Spearman's ρ.

use crate::aggregate::{AggregateModel, Bounded};
use crate::bernstein::{BetaTensor, GammaTensor};
use crate::counts::{allocation_weights, joint_count_pmf_at, total_count_pmf, tvar_weights};
use crate::error::{Error, Result};
use crate::mixing::MixingFamily;
use crate::quadrature::GaussLegendre;
use crate::scalar::CompensatedSum;
use crate::special::ln_factorial;
use rayon::prelude::*;
use std::fmt::Write as _;

/// VaR, TVaR and per-risk TVaR contributions at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub kappa: f64,
    pub var: f64,
    pub tvar: f64,
    pub contributions: Vec<f64>,
    pub truncation_bound: f64,
}

impl RiskReport {
    pub fn csv_header(n: usize) -> String {
        let mut s = String::from("kappa,var,tvar");
        for i in 1..=n {
            write!(s, ",contrib_{i}").expect("string write");
        }
        s.push_str(",truncation_bound");
        s
    }

    pub fn csv_row(&self) -> String {
        let mut s = format!("{},{},{}", self.kappa, self.var, self.tvar);
        for c in &self.contributions {
            write!(s, ",{c}").expect("string write");
        }
        write!(s, ",{}", self.truncation_bound).expect("string write");
        s
    }

    /// |Σ contributions - tvar| / tvar.
    pub fn additivity_gap(&self) -> f64 {
        let sum: f64 = self.contributions.iter().sum();
        ((sum - self.tvar) / self.tvar).abs()
    }
}

fn check_level(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "kappa",
            value: kappa,
            reason: "level must lie in (0, 1)",
        })
    }
}

/// ln of m^{ν-1} v^ν / ν! |f*^{(ν-1)}(mv)| for ν = 0..=L_cap (entry 0 unused).
fn ln_kernels(model: &AggregateModel, v: f64) -> Result<Vec<f64>> {
    let m = model.order() as f64;
    let l_cap = model.counts().l_cap();
    let derivs = model.mixing().ln_abs_derivs(l_cap, m * v)?;
    let (ln_m, ln_v) = (m.ln(), v.ln());
    let mut out = vec![f64::NEG_INFINITY; l_cap + 1];
    for nu in 1..=l_cap {
        let nf = nu as f64;
        out[nu] = (nf - 1.0) * ln_m + nf * ln_v - ln_factorial(nu) + derivs[nu - 1];
    }
    Ok(out)
}

fn weighted_series(weights: &[f64], kernels: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (w, k) in weights.iter().zip(kernels).skip(1) {
        if *w > 0.0 {
            acc.add((w.ln() + k).exp());
        }
    }
    acc.value()
}

/// Shared pieces of the TVaR and contribution formulas at a fixed VaR.
struct TailTerms {
    kernels: Vec<f64>,
    integral: f64,
    v: f64,
    scale: f64,
}

impl TailTerms {
    fn new(model: &AggregateModel, kappa: f64, v: f64) -> Result<Self> {
        check_level(kappa)?;
        let m = model.order() as f64;
        let integral = model.mixing().tail_integral(m * v)?;
        Ok(TailTerms {
            kernels: ln_kernels(model, v)?,
            integral,
            v,
            scale: 1.0 / (1.0 - kappa),
        })
    }

    /// `weights` are P_ν (or P_ν^{(i)}); `copies` is n (or 1); `expected` is
    /// the untruncated first moment, mn (or m).
    fn evaluate(&self, weights: &[f64], copies: f64, expected: f64) -> Bounded {
        let series = weighted_series(weights, &self.kernels);
        let deficit = (expected - weights[0]).max(0.0);
        Bounded {
            value: (series + copies * self.integral) * self.scale,
            truncation_bound: deficit * self.v * self.scale,
        }
    }
}

/// TVaR_κ(S_n) at a known VaR.
pub fn tvar_at(model: &AggregateModel, weights: &[f64], kappa: f64, var: f64) -> Result<Bounded> {
    let (n, m) = (model.dim() as f64, model.order() as f64);
    Ok(TailTerms::new(model, kappa, var)?.evaluate(weights, n, m * n))
}

/// TVaR_κ(S_n) from the TVaR weights P_ν.
pub fn tvar(model: &AggregateModel, weights: &[f64], kappa: f64) -> Result<Bounded> {
    let v = model.var(kappa)?;
    tvar_at(model, weights, kappa, v)
}

/// TVaR_κ(X_i; S_n) at a known VaR, from the allocation weights P_ν^{(i)}.
pub fn tvar_contribution_at(
    model: &AggregateModel,
    weights: &[f64],
    kappa: f64,
    var: f64,
) -> Result<Bounded> {
    let m = model.order() as f64;
    Ok(TailTerms::new(model, kappa, var)?.evaluate(weights, 1.0, m))
}

pub fn tvar_contribution(model: &AggregateModel, weights: &[f64], kappa: f64) -> Result<Bounded> {
    let v = model.var(kappa)?;
    tvar_contribution_at(model, weights, kappa, v)
}

/// VaR, TVaR and contributions for several levels, sharing the count lattices.
pub fn risk_reports(
    gamma: &GammaTensor<f64>,
    mixing: MixingFamily,
    kappas: &[f64],
    eps_tail: f64,
) -> Result<Vec<RiskReport>> {
    for &k in kappas {
        check_level(k)?;
    }
    if let MixingFamily::GammaMixing { a, .. } = mixing {
        if a <= 1.0 {
            return Err(Error::DivergentTail(format!(
                "gamma mixing with a = {a} <= 1 has infinite-mean claims, TVaR is infinite"
            )));
        }
    }
    let counts = total_count_pmf(gamma, eps_tail)?;
    let l_cap = counts.l_cap();
    let p = tvar_weights(&counts);
    let model = AggregateModel::new(mixing, counts);
    let n = gamma.dim();
    let alloc: Vec<Vec<f64>> = (0..n)
        .map(|i| Ok(allocation_weights(&joint_count_pmf_at(gamma, i, l_cap)?)))
        .collect::<Result<_>>()?;
    let (nf, mf) = (n as f64, gamma.order() as f64);
    kappas
        .iter()
        .map(|&kappa| {
            let var = model.var(kappa)?;
            let terms = TailTerms::new(&model, kappa, var)?;
            let total = terms.evaluate(&p, nf, mf * nf);
            let mut bound = total.truncation_bound.max(*model.counts().tail_mass());
            let contributions = alloc
                .iter()
                .map(|w| {
                    let c = terms.evaluate(w, 1.0, mf);
                    bound = bound.max(c.truncation_bound);
                    c.value
                })
                .collect();
            Ok(RiskReport {
                kappa,
                var,
                tvar: total.value,
                contributions,
                truncation_bound: bound,
            })
        })
        .collect()
}

pub fn risk_report(
    gamma: &GammaTensor<f64>,
    mixing: MixingFamily,
    kappa: f64,
    eps_tail: f64,
) -> Result<RiskReport> {
    Ok(risk_reports(gamma, mixing, &[kappa], eps_tail)?.remove(0))
}

/// H̄(x) = Σ_ℓ β_ℓ f*(Σ ℓ_i x_i).
pub fn joint_survival(beta: &BetaTensor<f64>, mixing: &MixingFamily, x: &[f64]) -> Result<f64> {
    if x.len() != beta.dim() {
        return Err(Error::Domain(format!(
            "point has {} coordinates, model has {}",
            x.len(),
            beta.dim()
        )));
    }
    if let Some(bad) = x.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!(
            "joint survival needs x >= 0, got {bad}"
        )));
    }
    Ok(survival_sum(beta, mixing, x))
}

fn survival_sum(beta: &BetaTensor<f64>, mixing: &MixingFamily, x: &[f64]) -> f64 {
    let lat = beta.lattice();
    let mut idx = vec![0; beta.dim()];
    let mut acc = CompensatedSum::new();
    for (o, b) in beta.coeffs().iter().enumerate() {
        if *b == 0.0 {
            continue;
        }
        lat.unravel(o, &mut idx);
        let s: f64 = idx.iter().zip(x).map(|(&l, &xi)| l as f64 * xi).sum();
        acc.add(b * mixing.laplace(s));
    }
    acc.value()
}

/// C(u) = Σ_ℓ β_ℓ f*(Σ ℓ_i f*^{-1}(u_i)); zero when any u_i is zero.
pub fn mixed_copula(beta: &BetaTensor<f64>, mixing: &MixingFamily, u: &[f64]) -> Result<f64> {
    if u.len() != beta.dim() {
        return Err(Error::Domain(format!(
            "point has {} coordinates, model has {}",
            u.len(),
            beta.dim()
        )));
    }
    if let Some(bad) = u.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
        return Err(Error::Domain(format!(
            "copula argument {bad} outside [0, 1]"
        )));
    }
    if u.iter().any(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let y: Vec<f64> = u
        .iter()
        .map(|&v| mixing.laplace_inv(v))
        .collect::<Result<_>>()?;
    Ok(survival_sum(beta, mixing, &y))
}

const RHO_TOL: f64 = 1e-7;
const RHO_MAX_ORDER: usize = 1024;

/// Spearman's ρ = 12 ∫∫ C - 3 by tensor Gauss–Legendre, doubling the order from
/// 16 until two successive values agree to 1e-7.
pub fn spearman_rho(beta: &BetaTensor<f64>, mixing: &MixingFamily) -> Result<f64> {
    if beta.dim() != 2 {
        return Err(Error::Domain(format!(
            "spearman's rho needs n = 2, model has n = {}",
            beta.dim()
        )));
    }
    let terms: Vec<(f64, f64, f64)> = beta
        .nonzero()
        .into_iter()
        .map(|(l, b)| (l[0] as f64, l[1] as f64, b))
        .collect();
    let rho_at = |order: usize| -> Result<f64> {
        let rule = GaussLegendre::new(order);
        let nodes: Vec<(f64, f64)> = rule.mapped(0.0, 1.0).collect();
        let y: Vec<f64> = nodes
            .iter()
            .map(|&(u, _)| mixing.laplace_inv(u))
            .collect::<Result<_>>()?;
        let rows: Vec<f64> = (0..order)
            .into_par_iter()
            .map(|i| {
                let mut row = CompensatedSum::new();
                for j in 0..order {
                    let c: f64 = terms
                        .iter()
                        .map(|&(l1, l2, b)| b * mixing.laplace(l1 * y[i] + l2 * y[j]))
                        .sum();
                    row.add(nodes[j].1 * c);
                }
                nodes[i].1 * row.value()
            })
            .collect();
        let mut total = CompensatedSum::new();
        for r in rows {
            total.add(r);
        }
        Ok(12.0 * total.value() - 3.0)
    };
    let mut order = 16;
    let mut prev = rho_at(order)?;
    while order < RHO_MAX_ORDER {
        order *= 2;
        let cur = rho_at(order)?;
        if (cur - prev).abs() <= RHO_TOL {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::NoConvergence(order))
}

//! Count distributions of the mixed Bernstein model.
//!
//! Given N = ν, risk i contributes Σ_{j=ν_i+1}^m Δ_{ij} unit-rate exponentials to
//! the aggregate, with Δ_{ij} independent shifted geometrics of success
//! probability j/m. T is the total over all risks; its pmf A_l drives every
//! closed form for S_n.

use crate::bernstein::GammaTensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rayon::prelude::*;

pub const DEFAULT_EPS_TAIL: f64 = 1e-12;

/// Truncated pmf of the total count T.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPmf<T> {
    m: usize,
    n: usize,
    probs: Vec<T>,
    tail_mass: T,
}

impl<T: Scalar> CountPmf<T> {
    pub fn order(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// A_l for l = 0..=L_cap (zero below n).
    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn get(&self, l: usize) -> T {
        self.probs.get(l).cloned().unwrap_or_else(T::zero)
    }

    pub fn l_cap(&self) -> usize {
        self.probs.len() - 1
    }

    /// Probability of T > L_cap.
    pub fn tail_mass(&self) -> &T {
        &self.tail_mass
    }

    /// Σ l A_l over the stored range.
    pub fn mean(&self) -> T {
        self.probs
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (l, p)| {
                acc + T::from_usize_exact(l) * p.clone()
            })
    }

    pub fn to_f64(&self) -> CountPmf<f64> {
        CountPmf {
            m: self.m,
            n: self.n,
            probs: self.probs.iter().map(Scalar::to_f64_lossy).collect(),
            tail_mass: self.tail_mass.to_f64_lossy(),
        }
    }
}

/// Truncated joint pmf of (count of risk i, count of the other risks).
#[derive(Debug, Clone, PartialEq)]
pub struct JointCountPmf<T> {
    m: usize,
    n: usize,
    risk: usize,
    l_cap: usize,
    /// Row-major (k, l), both in 0..=L_cap; only k + l ≤ L_cap is populated.
    probs: Vec<T>,
    tail_mass: T,
}

impl<T: Scalar> JointCountPmf<T> {
    pub fn order(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Zero-based index of the singled-out risk.
    pub fn risk(&self) -> usize {
        self.risk
    }

    pub fn l_cap(&self) -> usize {
        self.l_cap
    }

    pub fn tail_mass(&self) -> &T {
        &self.tail_mass
    }

    /// q_{k,l}: P(count of risk i = k, count of the others = l).
    pub fn get(&self, k: usize, l: usize) -> T {
        if k + l > self.l_cap {
            return T::zero();
        }
        self.probs[k * (self.l_cap + 1) + l].clone()
    }

    /// Σ_k q_{k,l}: pmf of the other risks' total count.
    pub fn others_marginal(&self) -> Vec<T> {
        let w = self.l_cap + 1;
        let mut out = vec![T::zero(); w];
        for k in 0..w {
            for l in 0..w - k {
                out[l] = out[l].clone() + self.probs[k * w + l].clone();
            }
        }
        out
    }

    /// Σ_l q_{k,l}: pmf of risk i's count.
    pub fn risk_marginal(&self) -> Vec<T> {
        let w = self.l_cap + 1;
        (0..w)
            .map(|k| {
                self.probs[k * w..k * w + (w - k)]
                    .iter()
                    .fold(T::zero(), |acc, p| acc + p.clone())
            })
            .collect()
    }

    /// Σ_{k+l=r} q_{k,l} for r = 0..=L_cap.
    pub fn diagonal_sums(&self) -> Vec<T> {
        self.weighted_diagonals(false)
    }

    fn weighted_diagonals(&self, by_k: bool) -> Vec<T> {
        let w = self.l_cap + 1;
        let mut out = vec![T::zero(); w];
        for k in 0..w {
            let kf = T::from_usize_exact(k);
            for l in 0..w - k {
                let q = self.probs[k * w + l].clone();
                let term = if by_k { kf.clone() * q } else { q };
                out[k + l] = out[k + l].clone() + term;
            }
        }
        out
    }

    pub fn to_f64(&self) -> JointCountPmf<f64> {
        JointCountPmf {
            m: self.m,
            n: self.n,
            risk: self.risk,
            l_cap: self.l_cap,
            probs: self.probs.iter().map(Scalar::to_f64_lossy).collect(),
            tail_mass: self.tail_mass.to_f64_lossy(),
        }
    }
}

/// Convolves `f` in place with a geometric on {1, 2, ...} with success probability p.
fn geometric_filter<T: Scalar>(f: &mut [T], p: &T) {
    let q = T::one() - p.clone();
    let mut prev = T::zero();
    let mut last = T::zero();
    for slot in f.iter_mut() {
        let cur = std::mem::replace(slot, T::zero());
        let h = p.clone() * prev + q.clone() * last;
        *slot = h.clone();
        last = h;
        prev = cur;
    }
}

/// pmf of Σ_{j=ν+1}^m Δ_j on 0..=l_cap.
pub fn conditional_count_pmf<T: Scalar>(m: usize, nu: usize, l_cap: usize) -> Result<Vec<T>> {
    if nu >= m {
        return Err(Error::Domain(format!(
            "conditioning value {nu} outside 0..{m}"
        )));
    }
    let mut f = vec![T::zero(); l_cap + 1];
    f[0] = T::one();
    for j in nu + 1..=m {
        geometric_filter(&mut f, &T::ratio(j, m));
    }
    Ok(f)
}

/// Σ_ν w(ν) · pmf(Σ_i Σ_{j>ν_i} Δ_{ij}) for a row-major weight array on {0..m-1}^dim.
///
/// Summing over the last coordinate first turns each level into a Horner
/// scheme in the geometric filters, so the cost is O(m^dim · len).
fn contract<T: Scalar>(weights: &[T], dim: usize, m: usize, len: usize) -> Vec<T> {
    let step = weights.len() / m;
    let horner = |parts: &mut dyn Iterator<Item = Vec<T>>| {
        let mut acc = vec![T::zero(); len];
        for (nu, part) in parts.enumerate() {
            for (a, p) in acc.iter_mut().zip(part) {
                *a = a.clone() + p;
            }
            geometric_filter(&mut acc, &T::ratio(nu + 1, m));
        }
        acc
    };
    if dim == 0 {
        let mut out = vec![T::zero(); len];
        out[0] = weights[0].clone();
        return out;
    }
    if dim == 1 {
        let mut acc = vec![T::zero(); len];
        for (nu, w) in weights.iter().enumerate() {
            acc[0] = acc[0].clone() + w.clone();
            geometric_filter(&mut acc, &T::ratio(nu + 1, m));
        }
        return acc;
    }
    let sub = |nu: usize| contract(&weights[nu * step..(nu + 1) * step], dim - 1, m, len);
    horner(&mut (0..m).map(sub))
}

/// Same as [`contract`], with the first coordinate spread over the rayon pool.
/// The reduction runs in index order, so results do not depend on the thread count.
fn contract_parallel<T: Scalar>(weights: &[T], dim: usize, m: usize, len: usize) -> Vec<T> {
    if dim < 2 {
        return contract(weights, dim, m, len);
    }
    let step = weights.len() / m;
    let parts: Vec<Vec<T>> = (0..m)
        .into_par_iter()
        .map(|nu| contract(&weights[nu * step..(nu + 1) * step], dim - 1, m, len))
        .collect();
    let mut acc = vec![T::zero(); len];
    for (nu, part) in parts.into_iter().enumerate() {
        for (a, p) in acc.iter_mut().zip(part) {
            *a = a.clone() + p;
        }
        geometric_filter(&mut acc, &T::ratio(nu + 1, m));
    }
    acc
}

fn tail_of<T: Scalar>(probs: &[T]) -> T {
    let total = probs.iter().fold(T::zero(), |acc, p| acc + p.clone());
    let tail = T::one() - total;
    if tail < T::zero() {
        T::zero()
    } else {
        tail
    }
}

fn initial_cap(m: usize, n: usize) -> usize {
    (8 * m * n).max(32)
}

fn hard_cap(m: usize, n: usize) -> usize {
    (20 * m * n).max(initial_cap(m, n))
}

/// Total-count pmf truncated at a fixed L_cap.
pub fn total_count_pmf_at<T: Scalar>(gamma: &GammaTensor<T>, l_cap: usize) -> Result<CountPmf<T>> {
    let weights = gamma.clamped_weights()?;
    let (n, m) = (gamma.dim(), gamma.order());
    let probs = contract_parallel(&weights, n, m, l_cap + 1);
    let tail_mass = tail_of(&probs);
    Ok(CountPmf {
        m,
        n,
        probs,
        tail_mass,
    })
}

/// Total-count pmf A_l, with L_cap doubled from max(8mn, 32) up to 20mn until
/// the dropped mass is at most `eps_tail`.
pub fn total_count_pmf<T: Scalar>(gamma: &GammaTensor<T>, eps_tail: f64) -> Result<CountPmf<T>> {
    let (n, m) = (gamma.dim(), gamma.order());
    let cap = hard_cap(m, n);
    let mut l_cap = initial_cap(m, n);
    loop {
        let pmf = total_count_pmf_at(gamma, l_cap)?;
        let tail = pmf.tail_mass.to_f64_lossy();
        if tail <= eps_tail {
            return Ok(pmf);
        }
        if l_cap >= cap {
            return Err(Error::TailNotReached {
                tail_mass: tail,
                eps_tail,
                cap,
            });
        }
        log::debug!("count pmf tail {tail:e} at L = {l_cap}, extending");
        l_cap = (2 * l_cap).min(cap);
    }
}

/// B_i = P(T ≥ max(i+1, n)) for i = 0..=L_cap, with the truncated tail included.
pub fn tail_sums<T: Scalar>(count: &CountPmf<T>) -> Vec<T> {
    let len = count.probs.len();
    let mut upper = vec![T::zero(); len + 1];
    upper[len] = count.tail_mass.clone();
    for l in (0..len).rev() {
        upper[l] = upper[l + 1].clone() + count.probs[l].clone();
    }
    (0..len)
        .map(|i| upper[(i + 1).max(count.n)].clone())
        .collect()
}

/// P_ν = Σ_{l ≥ max(ν, n)} l A_l for ν = 0..=L_cap; index 0 repeats P_1.
pub fn tvar_weights<T: Scalar>(count: &CountPmf<T>) -> Vec<T> {
    let moments: Vec<T> = count
        .probs
        .iter()
        .enumerate()
        .map(|(l, p)| T::from_usize_exact(l) * p.clone())
        .collect();
    reverse_weights(&moments, count.n)
}

fn reverse_weights<T: Scalar>(moments: &[T], n: usize) -> Vec<T> {
    let len = moments.len();
    let mut upper = vec![T::zero(); len + 1];
    for l in (0..len).rev() {
        upper[l] = upper[l + 1].clone() + moments[l].clone();
    }
    (0..len).map(|v| upper[v.max(n).min(len)].clone()).collect()
}

/// Joint pmf of (risk i's count, the other risks' count), truncated to k + l ≤ L_cap
/// with L_cap chosen as for [`total_count_pmf`]. `risk` is zero-based.
pub fn joint_count_pmf<T: Scalar>(
    gamma: &GammaTensor<T>,
    risk: usize,
    eps_tail: f64,
) -> Result<JointCountPmf<T>> {
    let l_cap = total_count_pmf(gamma, eps_tail)?.l_cap();
    joint_count_pmf_at(gamma, risk, l_cap)
}

pub fn joint_count_pmf_at<T: Scalar>(
    gamma: &GammaTensor<T>,
    risk: usize,
    l_cap: usize,
) -> Result<JointCountPmf<T>> {
    let (n, m) = (gamma.dim(), gamma.order());
    if risk >= n {
        return Err(Error::Domain(format!("risk index {risk} outside 0..{n}")));
    }
    let clamped = GammaTensor::from_weights(n, m, gamma.clamped_weights()?)?;
    let w = l_cap + 1;
    let rows: Vec<(Vec<T>, Vec<T>)> = (0..m)
        .into_par_iter()
        .map(|v| {
            let own = conditional_count_pmf::<T>(m, v, l_cap).expect("v < m");
            let others = contract(&clamped.slice(risk, v), n - 1, m, w);
            (own, others)
        })
        .collect();
    let mut probs = vec![T::zero(); w * w];
    for (own, others) in &rows {
        for k in 0..w {
            if own[k].is_zero() {
                continue;
            }
            let row = &mut probs[k * w..k * w + (w - k)];
            for (q, o) in row.iter_mut().zip(others) {
                *q = q.clone() + own[k].clone() * o.clone();
            }
        }
    }
    let tail_mass = tail_of(&probs);
    Ok(JointCountPmf {
        m,
        n,
        risk,
        l_cap,
        probs,
        tail_mass,
    })
}

/// P_ν^{(i)} = Σ_{k+l ≥ max(ν, n)} k q_{k,l} for ν = 0..=L_cap.
pub fn allocation_weights<T: Scalar>(joint: &JointCountPmf<T>) -> Vec<T> {
    reverse_weights(&joint.weighted_diagonals(true), joint.n)
}

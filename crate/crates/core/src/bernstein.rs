//! Bernstein copula coefficient tensors and evaluation.
//!
//! γ (cell masses of the alpha grid) is the pmf of the lattice vector N and
//! weights the density; β expands the joint survival function of the mixed
//! model into Laplace-transform terms f*(Σ ℓ_i x_i).

use crate::alpha::{cell_mass, AlphaGrid, VALIDATION_TOL};
use crate::error::{Error, Result};
use crate::lattice::{write_lattice_csv, Lattice};
use crate::scalar::{CompensatedSum, Scalar};
use crate::special::binomial_u64;
use rayon::prelude::*;
use std::io::Write;

/// β sums whose Σ|terms| / |result| exceeds this trigger a precision warning.
pub const BETA_CONDITION_WARN: f64 = 1e12;

/// Cell masses γ(ν), ν ∈ {0..m-1}^n: the pmf of (N_1, …, N_n).
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTensor<T> {
    n: usize,
    m: usize,
    weights: Vec<T>,
}

impl<T: Scalar> GammaTensor<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.n, self.m)
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn get(&self, nu: &[usize]) -> &T {
        &self.weights[self.lattice().offset(nu)]
    }

    /// Weights with rounding-level negatives clamped to zero; larger negatives are an error.
    pub fn clamped_weights(&self) -> Result<Vec<T>> {
        let tol = T::from_f64_lossy(VALIDATION_TOL);
        self.weights
            .iter()
            .enumerate()
            .map(|(o, w)| {
                if *w >= T::zero() {
                    Ok(w.clone())
                } else if -w.clone() <= tol {
                    Ok(T::zero())
                } else {
                    Err(Error::InvalidGrid(format!(
                        "negative cell mass {:e} at {:?}",
                        w.to_f64_lossy(),
                        self.lattice().index_of(o)
                    )))
                }
            })
            .collect()
    }

    /// Marginal pmf of N_i.
    pub fn marginal(&self, i: usize) -> Vec<T> {
        let lat = self.lattice();
        let mut out = vec![T::zero(); self.m];
        let mut idx = vec![0; self.n];
        for (o, w) in self.weights.iter().enumerate() {
            lat.unravel(o, &mut idx);
            out[idx[i]] = out[idx[i]].clone() + w.clone();
        }
        out
    }

    /// True when the pmf is invariant under every transposition of coordinates.
    pub fn is_exchangeable(&self, tol: f64) -> bool {
        let lat = self.lattice();
        let mut idx = vec![0; self.n];
        for (o, w) in self.weights.iter().enumerate() {
            lat.unravel(o, &mut idx);
            for a in 0..self.n {
                for b in a + 1..self.n {
                    idx.swap(a, b);
                    let other = &self.weights[lat.offset(&idx)];
                    idx.swap(a, b);
                    if (w.clone() - other.clone()).abs().to_f64_lossy() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Slice γ(ν) with ν_i fixed to `value`, as an (n-1)-dimensional array.
    pub(crate) fn slice(&self, i: usize, value: usize) -> Vec<T> {
        let lat = self.lattice();
        let mut idx = vec![0; self.n];
        let mut out = Vec::with_capacity(lat.len() / self.m);
        for (o, w) in self.weights.iter().enumerate() {
            lat.unravel(o, &mut idx);
            if idx[i] == value {
                out.push(w.clone());
            }
        }
        out
    }

    /// Tensor from raw row-major weights on {0..m-1}^n; entries are checked as in [`gamma_coeffs`].
    pub fn from_weights(n: usize, m: usize, weights: Vec<T>) -> Result<Self> {
        if n == 0 || m == 0 || weights.len() != m.pow(n as u32) {
            return Err(Error::InvalidGrid(format!(
                "{} weights do not fill a {m}^{n} lattice",
                weights.len()
            )));
        }
        let tensor = GammaTensor { n, m, weights };
        tensor.clamped_weights()?;
        Ok(tensor)
    }

    pub fn to_f64(&self) -> GammaTensor<f64> {
        GammaTensor {
            n: self.n,
            m: self.m,
            weights: self.weights.iter().map(Scalar::to_f64_lossy).collect(),
        }
    }
}

impl GammaTensor<f64> {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_lattice_csv(w, self.m, self.lattice(), &self.weights)
    }
}

/// β_ℓ, ℓ ∈ {0..m}^n, signed.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTensor<T> {
    n: usize,
    m: usize,
    coeffs: Vec<T>,
    condition: f64,
}

impl<T: Scalar> BetaTensor<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.n, self.m + 1)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn get(&self, l: &[usize]) -> &T {
        &self.coeffs[self.lattice().offset(l)]
    }

    /// Worst Σ|terms| / |result| over the alternating sums that produced the tensor.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Nonzero coefficients with their multi-indices, in offset order.
    pub fn nonzero(&self) -> Vec<(Vec<usize>, T)> {
        let lat = self.lattice();
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(o, c)| (lat.index_of(o), c.clone()))
            .collect()
    }

    pub fn to_f64(&self) -> BetaTensor<f64> {
        BetaTensor {
            n: self.n,
            m: self.m,
            coeffs: self.coeffs.iter().map(Scalar::to_f64_lossy).collect(),
            condition: self.condition,
        }
    }
}

impl BetaTensor<f64> {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_lattice_csv(w, self.m, self.lattice(), &self.coeffs)
    }
}

/// γ(ν) = Σ_{l ∈ {0,1}^n} (-1)^{n + Σl} α((ν + l)/m).
pub fn gamma_coeffs<T: Scalar>(grid: &AlphaGrid<T>) -> Result<GammaTensor<T>> {
    let (n, m) = (grid.dim(), grid.order());
    let lat = Lattice::new(n, m);
    let weights: Vec<T> = (0..lat.len())
        .into_par_iter()
        .map(|o| cell_mass(grid, &lat.index_of(o)))
        .collect();
    let tensor = GammaTensor { n, m, weights };
    tensor.clamped_weights()?;
    Ok(tensor)
}

/// β_ℓ = Σ_{ν ≤ ℓ} (-1)^{Σ(ℓ_i - ν_i)} Π C(m - ν_i, m - ℓ_i) Π C(m, ν_i) α(ν/m).
///
/// The kernel factorises over coordinates, so the sum is applied one axis at a
/// time (n passes of an (m+1)×(m+1) triangular transform) with compensated
/// accumulation. A warning is logged when the worst condition number exceeds
/// [`BETA_CONDITION_WARN`].
pub fn beta_coeffs<T: Scalar>(grid: &AlphaGrid<T>) -> Result<BetaTensor<T>> {
    let (n, m) = (grid.dim(), grid.order());
    let side = m + 1;
    let kernel: Vec<Vec<T>> = (0..side)
        .map(|l| {
            (0..=l)
                .map(|nu| {
                    let mag = T::from_u64(binomial_u64(m - nu, m - l)).expect("u64 fits")
                        * T::from_u64(binomial_u64(m, nu)).expect("u64 fits");
                    if (l - nu) % 2 == 0 {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect()
        })
        .collect();

    let mut data = grid.values().to_vec();
    let mut condition = 1.0f64;
    let total = data.len();
    for axis in 0..n {
        let stride = side.pow((n - 1 - axis) as u32);
        let block = stride * side;
        let mut next = vec![T::zero(); total];
        for base in (0..total).step_by(block) {
            for inner in 0..stride {
                let fibre: Vec<T> = (0..side)
                    .map(|k| data[base + inner + k * stride].clone())
                    .collect();
                for (l, row) in kernel.iter().enumerate() {
                    let mut acc = CompensatedSum::new();
                    for (nu, c) in row.iter().enumerate() {
                        if !fibre[nu].is_zero() {
                            acc.add(c.clone() * fibre[nu].clone());
                        }
                    }
                    let v = acc.value();
                    if v.abs().to_f64_lossy() > 1e-300 {
                        condition = condition.max(acc.condition());
                    }
                    next[base + inner + l * stride] = v;
                }
            }
        }
        data = next;
    }
    if condition > BETA_CONDITION_WARN {
        log::warn!(
            "beta coefficients for m = {m}, n = {n} lost precision: condition number {condition:.3e}"
        );
    }
    Ok(BetaTensor {
        n,
        m,
        coeffs: data,
        condition,
    })
}

/// G_{ν:m}(u) = C(m, ν) u^ν (1 - u)^{m - ν}.
pub fn bernstein_basis<T: Scalar>(nu: usize, m: usize, u: &T) -> T {
    let c = T::from_u64(binomial_u64(m, nu)).expect("u64 fits");
    c * num_traits::pow(u.clone(), nu) * num_traits::pow(T::one() - u.clone(), m - nu)
}

/// C_B(u) = Σ_ν α(ν/m) Π G_{ν_i:m}(u_i).
pub fn eval_copula_bernstein<T: Scalar>(grid: &AlphaGrid<T>, u: &[T]) -> T {
    let (n, m) = (grid.dim(), grid.order());
    assert_eq!(u.len(), n, "point dimension must match the grid");
    let basis: Vec<Vec<T>> = u
        .iter()
        .map(|ui| (0..=m).map(|nu| bernstein_basis(nu, m, ui)).collect())
        .collect();
    let lat = grid.lattice();
    let mut idx = vec![0; n];
    let mut acc = T::zero();
    for (o, a) in grid.values().iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        lat.unravel(o, &mut idx);
        let w = idx
            .iter()
            .enumerate()
            .fold(a.clone(), |p, (k, &nu)| p * basis[k][nu].clone());
        acc = acc + w;
    }
    acc
}

/// c_B(u) = Σ_ν γ(ν) Π m G_{ν_i:m-1}(u_i).
pub fn eval_density_bernstein<T: Scalar>(gamma: &GammaTensor<T>, u: &[T]) -> T {
    let (n, m) = (gamma.dim(), gamma.order());
    assert_eq!(u.len(), n, "point dimension must match the tensor");
    let mf = T::from_usize_exact(m);
    let basis: Vec<Vec<T>> = u
        .iter()
        .map(|ui| {
            (0..m)
                .map(|nu| mf.clone() * bernstein_basis(nu, m - 1, ui))
                .collect()
        })
        .collect();
    let lat = gamma.lattice();
    let mut idx = vec![0; n];
    let mut acc = T::zero();
    for (o, g) in gamma.weights().iter().enumerate() {
        if g.is_zero() {
            continue;
        }
        lat.unravel(o, &mut idx);
        let w = idx
            .iter()
            .enumerate()
            .fold(g.clone(), |p, (k, &nu)| p * basis[k][nu].clone());
        acc = acc + w;
    }
    acc
}

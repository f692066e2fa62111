//! Alpha grids: a target copula sampled on the (m+1)^n lattice, plus the
//! validity check that makes the resulting Bernstein polynomial a copula.

use crate::bvn::gaussian_copula;
use crate::error::{Error, Result};
use crate::lattice::{read_lattice_csv, write_lattice_csv, Lattice};
use crate::scalar::Scalar;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

/// Tolerance below which boundary, margin and finite-difference deviations are treated as rounding.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Built-in dependence families used to fill an alpha grid.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaFamily {
    Independence,
    Comonotonic,
    /// Lower Fréchet bound; a copula only for n = 2.
    CounterComonotonic,
    Fgm {
        delta: f64,
    },
    /// (Σ u_i^{-θ} - n + 1)^{-1/θ}
    Clayton {
        theta: f64,
    },
    /// Two Gaussian copulas glued along u_1 = τ.
    PiecewiseGaussian {
        tau: f64,
        r1: f64,
        r2: f64,
    },
    /// Product of two Clayton copulas on power-transformed margins.
    LiebscherClayton {
        gamma: f64,
        delta: f64,
        theta1: f64,
        theta2: f64,
    },
}

impl AlphaFamily {
    pub const LIEBSCHER_DEFAULT: AlphaFamily = AlphaFamily::LiebscherClayton {
        gamma: 6.0,
        delta: 2.0,
        theta1: 0.525,
        theta2: 0.3,
    };

    pub fn id(&self) -> &'static str {
        match self {
            AlphaFamily::Independence => "independence",
            AlphaFamily::Comonotonic => "comonotonic",
            AlphaFamily::CounterComonotonic => "counter_comonotonic",
            AlphaFamily::Fgm { .. } => "fgm",
            AlphaFamily::Clayton { .. } => "clayton",
            AlphaFamily::PiecewiseGaussian { .. } => "piecewise_gaussian",
            AlphaFamily::LiebscherClayton { .. } => "liebscher_clayton",
        }
    }

    /// Builds a family from its id and named parameters. Missing parameters take
    /// the defaults used in the worked examples (FGM δ = 1, Clayton θ = 1,
    /// τ = 0.5, r₁ = -0.95, r₂ = 0.95, and the Liebscher defaults).
    pub fn from_id(id: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
        let fam = match id {
            "independence" => AlphaFamily::Independence,
            "comonotonic" => AlphaFamily::Comonotonic,
            "counter_comonotonic" => AlphaFamily::CounterComonotonic,
            "fgm" => AlphaFamily::Fgm {
                delta: get("delta", 1.0),
            },
            "clayton" => AlphaFamily::Clayton {
                theta: get("theta", 1.0),
            },
            "piecewise_gaussian" => AlphaFamily::PiecewiseGaussian {
                tau: get("tau", 0.5),
                r1: get("r1", -0.95),
                r2: get("r2", 0.95),
            },
            "liebscher_clayton" | "liebscher" => AlphaFamily::LiebscherClayton {
                gamma: get("gamma", 6.0),
                delta: get("delta", 2.0),
                theta1: get("theta1", 0.525),
                theta2: get("theta2", 0.3),
            },
            other => return Err(Error::UnknownFamily(other.to_string())),
        };
        Ok(fam)
    }

    /// Families invariant under permutation of their arguments.
    pub fn is_exchangeable(&self) -> bool {
        matches!(
            self,
            AlphaFamily::Independence
                | AlphaFamily::Comonotonic
                | AlphaFamily::CounterComonotonic
                | AlphaFamily::Fgm { .. }
                | AlphaFamily::Clayton { .. }
        )
    }

    fn check(&self, n: usize) -> Result<()> {
        let bivariate_only = |name: &'static str| -> Result<()> {
            if n != 2 {
                Err(Error::InvalidParameter {
                    name,
                    value: n as f64,
                    reason: "family is defined for n = 2 only",
                })
            } else {
                Ok(())
            }
        };
        match *self {
            AlphaFamily::Independence | AlphaFamily::Comonotonic => Ok(()),
            AlphaFamily::CounterComonotonic => {
                if n > 2 {
                    Err(Error::FrechetDimension(n))
                } else {
                    Ok(())
                }
            }
            AlphaFamily::Fgm { delta } => {
                bivariate_only("n")?;
                if !(-1.0..=1.0).contains(&delta) {
                    return Err(Error::InvalidParameter {
                        name: "delta",
                        value: delta,
                        reason: "FGM requires delta in [-1, 1]",
                    });
                }
                Ok(())
            }
            AlphaFamily::Clayton { theta } => {
                if !(theta > 0.0 && theta.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "theta",
                        value: theta,
                        reason: "Clayton requires theta > 0",
                    });
                }
                Ok(())
            }
            AlphaFamily::PiecewiseGaussian { tau, r1, r2 } => {
                bivariate_only("n")?;
                if !(tau > 0.0 && tau < 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "tau",
                        value: tau,
                        reason: "tau must lie in (0, 1)",
                    });
                }
                for (name, r) in [("r1", r1), ("r2", r2)] {
                    if !(r.abs() < 1.0) {
                        return Err(Error::InvalidParameter {
                            name,
                            value: r,
                            reason: "correlation must satisfy |r| < 1",
                        });
                    }
                }
                Ok(())
            }
            AlphaFamily::LiebscherClayton {
                gamma,
                delta,
                theta1,
                theta2,
            } => {
                bivariate_only("n")?;
                for (name, v) in [("gamma", gamma), ("delta", delta)] {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(Error::InvalidParameter {
                            name,
                            value: v,
                            reason: "Clayton parameters must be > 0",
                        });
                    }
                }
                for (name, v) in [("theta1", theta1), ("theta2", theta2)] {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::InvalidParameter {
                            name,
                            value: v,
                            reason: "mixing exponents must lie in [0, 1]",
                        });
                    }
                }
                Ok(())
            }
        }
    }

    /// Evaluates the family at a point of [0,1]^n in floating point.
    pub fn eval(&self, u: &[f64]) -> f64 {
        if u.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        match *self {
            AlphaFamily::Independence => u.iter().product(),
            AlphaFamily::Comonotonic => u.iter().copied().fold(1.0, f64::min),
            AlphaFamily::CounterComonotonic => {
                (u.iter().sum::<f64>() - (u.len() as f64 - 1.0)).max(0.0)
            }
            AlphaFamily::Fgm { delta } => {
                let (a, b) = (u[0], u[1]);
                a * b * (1.0 + delta * (1.0 - a) * (1.0 - b))
            }
            AlphaFamily::Clayton { theta } => clayton(u, theta),
            AlphaFamily::PiecewiseGaussian { tau, r1, r2 } => {
                let (a, b) = (u[0], u[1]);
                if a <= tau {
                    tau * gaussian_copula(a / tau, b, r1).expect("correlations validated")
                } else {
                    let g = gaussian_copula((a - tau) / (1.0 - tau), b, r2)
                        .expect("correlations validated");
                    tau * b + (1.0 - tau) * g
                }
            }
            AlphaFamily::LiebscherClayton {
                gamma,
                delta,
                theta1,
                theta2,
            } => {
                let first = clayton(&[u[0].powf(theta1), u[1].powf(theta2)], gamma);
                let second = clayton(&[u[0].powf(1.0 - theta1), u[1].powf(1.0 - theta2)], delta);
                first * second
            }
        }
    }

    /// Value at the lattice point ν/m, exact in `T` for the polynomial families.
    fn eval_lattice<T: Scalar>(&self, nu: &[usize], m: usize) -> T {
        if nu.iter().any(|&v| v == 0) {
            return T::zero();
        }
        match *self {
            AlphaFamily::Independence => nu.iter().fold(T::one(), |acc, &v| acc * T::ratio(v, m)),
            AlphaFamily::Comonotonic => T::ratio(*nu.iter().min().expect("n >= 1"), m),
            AlphaFamily::CounterComonotonic => {
                let total: usize = nu.iter().sum();
                let shift = (nu.len() - 1) * m;
                T::ratio(total.saturating_sub(shift), m)
            }
            AlphaFamily::Fgm { delta } => {
                let a = T::ratio(nu[0], m);
                let b = T::ratio(nu[1], m);
                let d = T::from_f64_lossy(delta);
                a.clone() * b.clone() * (T::one() + d * (T::one() - a) * (T::one() - b))
            }
            _ => {
                let u: Vec<f64> = nu.iter().map(|&v| v as f64 / m as f64).collect();
                T::from_f64_lossy(self.eval(&u))
            }
        }
    }
}

fn clayton(u: &[f64], theta: f64) -> f64 {
    if u.iter().any(|&x| x <= 0.0) {
        return 0.0;
    }
    let s: f64 = u.iter().map(|&x| x.powf(-theta) - 1.0).sum();
    (1.0 + s).powf(-1.0 / theta)
}

/// Target copula values on the lattice {0, 1/m, …, 1}^n.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGrid<T> {
    n: usize,
    m: usize,
    values: Vec<T>,
}

impl<T: Scalar> AlphaGrid<T> {
    /// Wraps raw lattice values (row-major, last coordinate fastest). No validation.
    pub fn from_values(n: usize, m: usize, values: Vec<T>) -> Result<Self> {
        check_shape(n, m)?;
        let lat = Lattice::new(n, m + 1);
        if values.len() != lat.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values for n = {n}, m = {m}, got {}",
                lat.len(),
                values.len()
            )));
        }
        Ok(Self { n, m, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.n, self.m + 1)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, nu: &[usize]) -> &T {
        &self.values[self.lattice().offset(nu)]
    }

    pub fn set(&mut self, nu: &[usize], v: T) {
        let o = self.lattice().offset(nu);
        self.values[o] = v;
    }

    pub fn to_f64(&self) -> AlphaGrid<f64> {
        AlphaGrid {
            n: self.n,
            m: self.m,
            values: self.values.iter().map(Scalar::to_f64_lossy).collect(),
        }
    }
}

impl AlphaGrid<f64> {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_lattice_csv(w, self.m, self.lattice(), &self.values)
    }

    /// Reads the lattice CSV format; every lattice point must appear exactly once.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let parsed = read_lattice_csv(r)?;
        check_shape(parsed.dim, parsed.order)?;
        let lat = Lattice::new(parsed.dim, parsed.order + 1);
        let mut values = vec![f64::NAN; lat.len()];
        let mut seen = vec![false; lat.len()];
        for (idx, v) in parsed.rows {
            if idx.iter().any(|&i| i > parsed.order) {
                return Err(Error::Csv(format!(
                    "index {idx:?} outside 0..={}",
                    parsed.order
                )));
            }
            let o = lat.offset(&idx);
            if seen[o] {
                return Err(Error::Csv(format!("duplicate lattice point {idx:?}")));
            }
            seen[o] = true;
            values[o] = v;
        }
        if let Some(o) = seen.iter().position(|s| !s) {
            return Err(Error::Csv(format!(
                "missing lattice point {:?}",
                lat.index_of(o)
            )));
        }
        Self::from_values(parsed.dim, parsed.order, values)
    }
}

fn check_shape(n: usize, m: usize) -> Result<()> {
    if !(2..=crate::MAX_DIM).contains(&n) {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "dimension must be in 2..=5",
        });
    }
    if !(1..=crate::special::MAX_EXACT_ORDER).contains(&m) {
        return Err(Error::InvalidParameter {
            name: "m",
            value: m as f64,
            reason: "order must be in 1..=64",
        });
    }
    Ok(())
}

/// Samples `family` on the lattice of order `m` in dimension `n`.
pub fn make_alpha<T: Scalar>(family: &AlphaFamily, m: usize, n: usize) -> Result<AlphaGrid<T>> {
    check_shape(n, m)?;
    family.check(n)?;
    let lat = Lattice::new(n, m + 1);
    let mut idx = vec![0; n];
    let mut values = Vec::with_capacity(lat.len());
    for o in 0..lat.len() {
        lat.unravel(o, &mut idx);
        let v = match margin_coordinate(&idx, m) {
            // Pin boundary and margins to their exact values.
            _ if idx.contains(&0) => T::zero(),
            Some(k) => T::ratio(idx[k], m),
            None => family.eval_lattice::<T>(&idx, m),
        };
        values.push(v);
    }
    Ok(AlphaGrid { n, m, values })
}

/// If all coordinates but (at most) one equal m, returns the free coordinate.
fn margin_coordinate(idx: &[usize], m: usize) -> Option<usize> {
    let mut free = None;
    for (k, &v) in idx.iter().enumerate() {
        if v != m {
            if free.is_some() {
                return None;
            }
            free = Some(k);
        }
    }
    Some(free.unwrap_or(0))
}

/// Which validity condition a lattice point violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    BoundaryZero,
    UniformMargin,
    NIncreasing,
}

impl Condition {
    pub fn id(&self) -> &'static str {
        match self {
            Condition::BoundaryZero => "boundary_zero",
            Condition::UniformMargin => "uniform_margin",
            Condition::NIncreasing => "n_increasing",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: Condition,
    pub index: Vec<usize>,
    /// Offending value: the grid entry, its margin deviation, or the negative cell mass.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub is_valid: bool,
    pub violations: Vec<Violation>,
}

/// Exhaustively checks boundary zeros, uniform margins and nonnegative
/// n-th order differences over every lattice cell.
pub fn validate_alpha<T: Scalar>(grid: &AlphaGrid<T>) -> ValidationReport {
    let (n, m) = (grid.n, grid.m);
    let lat = grid.lattice();
    let tol = T::from_f64_lossy(VALIDATION_TOL);
    let mut violations = Vec::new();
    let mut idx = vec![0; n];
    for o in 0..lat.len() {
        lat.unravel(o, &mut idx);
        let v = &grid.values[o];
        if idx.contains(&0) {
            if v.abs() > tol {
                violations.push(Violation {
                    condition: Condition::BoundaryZero,
                    index: idx.clone(),
                    value: v.to_f64_lossy(),
                });
            }
        } else if let Some(k) = margin_coordinate(&idx, m) {
            let want = T::ratio(idx[k], m);
            if (v.clone() - want).abs() > tol {
                violations.push(Violation {
                    condition: Condition::UniformMargin,
                    index: idx.clone(),
                    value: v.to_f64_lossy(),
                });
            }
        }
    }
    let cells = Lattice::new(n, m);
    for o in 0..cells.len() {
        cells.unravel(o, &mut idx);
        let mass = cell_mass(grid, &idx);
        if mass < -tol.clone() {
            violations.push(Violation {
                condition: Condition::NIncreasing,
                index: idx.clone(),
                value: mass.to_f64_lossy(),
            });
        }
    }
    ValidationReport {
        is_valid: violations.is_empty(),
        violations,
    }
}

/// Alternating 2^n-corner difference of the cell with lower corner `nu`.
pub(crate) fn cell_mass<T: Scalar>(grid: &AlphaGrid<T>, nu: &[usize]) -> T {
    let n = grid.n;
    let lat = grid.lattice();
    let mut corner = nu.to_vec();
    let mut acc = T::zero();
    for mask in 0u32..(1 << n) {
        let mut ones = 0;
        for (k, c) in corner.iter_mut().enumerate() {
            let bit = ((mask >> k) & 1) as usize;
            *c = nu[k] + bit;
            ones += bit;
        }
        let v = grid.values[lat.offset(&corner)].clone();
        if (n + ones) % 2 == 0 {
            acc = acc + v;
        } else {
            acc = acc - v;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn worked_values() {
        let g = make_alpha::<f64>(&AlphaFamily::Comonotonic, 2, 2).unwrap();
        assert_eq!(*g.get(&[1, 1]), 0.5);
        let g = make_alpha::<f64>(&AlphaFamily::Fgm { delta: 1.0 }, 2, 2).unwrap();
        assert!((g.get(&[1, 1]) - 0.3125).abs() < 1e-15);
        let g = make_alpha::<Rational>(&AlphaFamily::Independence, 3, 2).unwrap();
        assert_eq!(*g.get(&[1, 2]), Rational::ratio(2, 9));
    }

    #[test]
    fn rejects_bad_families() {
        assert_eq!(
            make_alpha::<f64>(&AlphaFamily::CounterComonotonic, 3, 3).unwrap_err(),
            Error::FrechetDimension(3)
        );
        assert!(make_alpha::<f64>(&AlphaFamily::Fgm { delta: 1.5 }, 2, 2).is_err());
        assert!(make_alpha::<f64>(&AlphaFamily::Clayton { theta: 0.0 }, 2, 2).is_err());
        assert!(AlphaFamily::from_id("gumbel", &BTreeMap::new()).is_err());
        assert!(make_alpha::<f64>(&AlphaFamily::Comonotonic, 0, 2).is_err());
    }

    #[test]
    fn boundary_violation_is_reported() {
        let mut g = make_alpha::<f64>(&AlphaFamily::Comonotonic, 3, 2).unwrap();
        assert!(validate_alpha(&g).is_valid);
        g.set(&[0, 1], 0.1);
        let rep = validate_alpha(&g);
        assert!(!rep.is_valid);
        assert!(rep
            .violations
            .iter()
            .any(|v| v.condition == Condition::BoundaryZero && v.index == vec![0, 1]));
    }

    #[test]
    fn counter_comonotonic_is_valid_in_two_dimensions() {
        let g = make_alpha::<Rational>(&AlphaFamily::CounterComonotonic, 5, 2).unwrap();
        assert!(validate_alpha(&g).is_valid);
    }

    #[test]
    fn piecewise_gaussian_seam_is_continuous() {
        let fam = AlphaFamily::PiecewiseGaussian {
            tau: 0.5,
            r1: -0.95,
            r2: 0.95,
        };
        for &v in &[0.1, 0.37, 0.5, 0.9] {
            let left = fam.eval(&[0.5 - 1e-13, v]);
            let right = fam.eval(&[0.5 + 1e-13, v]);
            let at = fam.eval(&[0.5, v]);
            assert!(
                (left - at).abs() < 1e-12 && (right - at).abs() < 1e-12,
                "v={v}"
            );
        }
    }

    #[test]
    fn csv_roundtrip_and_broken_margin() {
        let g = make_alpha::<f64>(&AlphaFamily::LIEBSCHER_DEFAULT, 4, 2).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = AlphaGrid::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, g);

        let text = String::from_utf8(buf)
            .unwrap()
            .replace("4,2,0.5", "4,2,0.4");
        let broken = AlphaGrid::read_csv(text.as_bytes()).unwrap();
        let rep = validate_alpha(&broken);
        assert!(rep
            .violations
            .iter()
            .any(|v| v.condition == Condition::UniformMargin && v.index == vec![4, 2]));
    }
}

//! Scalar abstraction for the lattice layer.
//!
//! Everything that only needs ring operations (alpha grids, the gamma and beta
//! tensors, Bernstein evaluation and the count lattice) is written against
//! [`Scalar`], so it runs in `f32`, `f64`, or exactly in [`Rational`].
//! The transcendental layer (mixing families, aggregate series, risk measures)
//! is `f64`.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use std::fmt::Debug;

/// Exact rational scalar.
pub type Rational = Ratio<BigInt>;

pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive + Send + Sync
{
    fn from_usize_exact(v: usize) -> Self {
        Self::from_usize(v).expect("usize fits the scalar")
    }

    /// `num / den` in the scalar's own arithmetic.
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_usize_exact(num) / Self::from_usize_exact(den)
    }

    /// Conversion of an f64 parameter; exact for `Rational` (binary expansion of the double).
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Num + Signed + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive + Send + Sync
{
}

/// Neumaier compensated accumulator. For exact scalars the correction stays zero.
#[derive(Debug, Clone)]
pub struct CompensatedSum<T> {
    sum: T,
    correction: T,
    abs_total: f64,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            correction: T::zero(),
            abs_total: 0.0,
        }
    }

    pub fn add(&mut self, x: T) {
        self.abs_total += x.abs().to_f64_lossy();
        let t = self.sum.clone() + x.clone();
        if self.sum.abs() >= x.abs() {
            self.correction = self.correction.clone() + ((self.sum.clone() - t.clone()) + x);
        } else {
            self.correction = self.correction.clone() + ((x - t.clone()) + self.sum.clone());
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum.clone() + self.correction.clone()
    }

    /// Sum of absolute terms over the absolute result.
    pub fn condition(&self) -> f64 {
        let v = self.value().abs().to_f64_lossy();
        if v == 0.0 {
            if self.abs_total == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.abs_total / v
        }
    }
}

impl<T: Scalar> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self::new()
    }
}

//! Risk aggregation under mixed Bernstein copulas.
//!
//! Losses are modelled as `X_i = Z_i / Θ`, where `(Z_1, …, Z_n)` has standard
//! exponential margins joined by a Bernstein copula and `Θ` is a positive
//! mixing variable with Laplace transform `f*`. The crate computes the
//! closed-form distribution of `S_n = X_1 + … + X_n`, its VaR and TVaR, the
//! TVaR-based allocation of capital to each risk, and checks all of it with a
//! Monte Carlo simulation of the stochastic representation.
//!
//! The lattice layer ([`alpha`], [`bernstein`], [`counts`]) is generic over
//! [`Scalar`], so the same code runs in `f64` or exactly over [`Rational`].
//! The concrete `f64` aliases below are what most callers want.

pub mod aggregate;
pub mod alpha;
pub mod bernstein;
pub mod bvn;
pub mod counts;
pub mod error;
pub mod lattice;
pub mod mc;
pub mod mixing;
pub mod quadrature;
pub mod risk;
pub mod roots;
pub mod scalar;
pub mod special;

/// Largest supported number of risks.
pub const MAX_DIM: usize = 5;

pub use aggregate::{AggregateModel, Bounded};
pub use alpha::{make_alpha, validate_alpha, AlphaFamily, Condition, ValidationReport, Violation};
pub use bernstein::{beta_coeffs, eval_copula_bernstein, eval_density_bernstein, gamma_coeffs};
pub use bvn::bivariate_normal_cdf;
pub use counts::{
    allocation_weights, conditional_count_pmf, joint_count_pmf, tail_sums, total_count_pmf,
    tvar_weights, DEFAULT_EPS_TAIL,
};
pub use error::{Error, Result};
pub use mc::{empirical_measures, sample_batch, EmpiricalReport, SimulationBatch};
pub use mixing::MixingFamily;
pub use risk::{
    joint_survival, mixed_copula, risk_report, spearman_rho, tvar, tvar_contribution, RiskReport,
};
pub use scalar::{Rational, Scalar};

pub type AlphaGrid = alpha::AlphaGrid<f64>;
pub type GammaTensor = bernstein::GammaTensor<f64>;
pub type BetaTensor = bernstein::BetaTensor<f64>;
pub type CountPmf = counts::CountPmf<f64>;
pub type JointCountPmf = counts::JointCountPmf<f64>;

pub type ExactAlphaGrid = alpha::AlphaGrid<Rational>;
pub type ExactGammaTensor = bernstein::GammaTensor<Rational>;
pub type ExactBetaTensor = bernstein::BetaTensor<Rational>;
pub type ExactCountPmf = counts::CountPmf<Rational>;

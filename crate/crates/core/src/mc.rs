//! Monte Carlo simulation of the stochastic representation X_i = Z_i / Θ.
//!
//! Per path: N ~ γ, Z_i given N_i = ν is the (m-ν)-th order statistic of m unit
//! exponentials, written as Σ_{j=1}^{m-ν} Q_j / (m-j+1), and Θ comes from the
//! mixing family.
//!
//! Paths are split over a fixed number of substreams; substream w draws from
//! ChaCha8 seeded with `seed` on stream w. Output depends on (seed, paths,
//! substreams) only, not on the size of the thread pool.

use crate::bernstein::{BetaTensor, GammaTensor};
use crate::error::{Error, Result};
use crate::mixing::MixingFamily;
use crate::risk::mixed_copula;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use std::io::Write;

pub const DEFAULT_SUBSTREAMS: usize = 64;
pub const MIN_PATHS: usize = 1000;
pub const MIN_EXCEEDANCES: usize = 50;
const SECTIONS: usize = 20;

#[derive(Debug, Clone)]
pub struct SimulationBatch {
    pub paths: usize,
    pub seed: u64,
    pub substreams: usize,
    pub n: usize,
    /// Row-major paths × n.
    pub losses: Vec<f64>,
    pub sums: Vec<f64>,
}

impl SimulationBatch {
    pub fn loss(&self, path: usize, i: usize) -> f64 {
        self.losses[path * self.n + i]
    }

    pub fn marginal(&self, i: usize) -> Vec<f64> {
        (0..self.paths).map(|p| self.loss(p, i)).collect()
    }

    /// CSV with header `x_1,...,x_n,sum`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.n).map(|i| format!("x_{i}")).collect();
        writeln!(w, "{},sum", header.join(","))?;
        for p in 0..self.paths {
            for i in 0..self.n {
                write!(w, "{:?},", self.loss(p, i))?;
            }
            writeln!(w, "{:?}", self.sums[p])?;
        }
        Ok(())
    }
}

/// Unit exponential by inversion.
#[inline]
fn exp1<R: Rng>(rng: &mut R) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

/// Simulates `paths` loss vectors.
pub fn sample_batch(
    gamma: &GammaTensor<f64>,
    mixing: &MixingFamily,
    paths: usize,
    seed: u64,
    substreams: usize,
) -> Result<SimulationBatch> {
    if paths == 0 || substreams == 0 {
        return Err(Error::Domain(
            "paths and substreams must be positive".into(),
        ));
    }
    let weights = gamma.clamped_weights()?;
    let alias = WeightedAliasIndex::new(weights)
        .map_err(|e| Error::InvalidGrid(format!("gamma is not a pmf: {e}")))?;
    let (n, m) = (gamma.dim(), gamma.order());
    let lattice = gamma.lattice();
    let sampler = mixing.sampler();
    // 1/(m-j+1) for j = 1..=m
    let rates: Vec<f64> = (1..=m).map(|j| 1.0 / (m - j + 1) as f64).collect();

    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..substreams)
        .into_par_iter()
        .map(|w| {
            let start = w * paths / substreams;
            let end = (w + 1) * paths / substreams;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(w as u64);
            let mut losses = Vec::with_capacity((end - start) * n);
            let mut sums = Vec::with_capacity(end - start);
            let mut nu = vec![0; n];
            for _ in start..end {
                lattice.unravel(alias.sample(&mut rng), &mut nu);
                let theta = sampler.sample(&mut rng);
                let mut s = 0.0;
                for &v in &nu {
                    let z: f64 = rates[..m - v].iter().map(|r| exp1(&mut rng) * r).sum();
                    let x = z / theta;
                    losses.push(x);
                    s += x;
                }
                sums.push(s);
            }
            (losses, sums)
        })
        .collect();

    let mut losses = Vec::with_capacity(paths * n);
    let mut sums = Vec::with_capacity(paths);
    for (l, s) in chunks {
        losses.extend(l);
        sums.extend(s);
    }
    Ok(SimulationBatch {
        paths,
        seed,
        substreams,
        n,
        losses,
        sums,
    })
}

/// Empirical VaR, TVaR and contributions with sectioning standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalReport {
    pub kappa: f64,
    pub var: f64,
    pub tvar: f64,
    pub contributions: Vec<f64>,
    pub var_stderr: f64,
    pub tvar_stderr: f64,
    pub contribution_stderr: Vec<f64>,
    pub exceedances: usize,
}

struct Estimate {
    var: f64,
    tvar: f64,
    contributions: Vec<f64>,
    exceedances: usize,
}

fn estimate(losses: &[f64], sums: &[f64], n: usize, kappa: f64) -> Estimate {
    let paths = sums.len();
    let mut sorted = sums.to_vec();
    let rank = ((kappa * paths as f64).ceil() as usize).clamp(1, paths);
    let (_, var, _) = sorted.select_nth_unstable_by(rank - 1, f64::total_cmp);
    let var = *var;
    let mut total = 0.0;
    let mut contrib = vec![0.0; n];
    let mut count = 0;
    for (p, &s) in sums.iter().enumerate() {
        if s > var {
            count += 1;
            total += s;
            for (c, x) in contrib.iter_mut().zip(&losses[p * n..(p + 1) * n]) {
                *c += x;
            }
        }
    }
    let k = count.max(1) as f64;
    Estimate {
        var,
        tvar: total / k,
        contributions: contrib.into_iter().map(|c| c / k).collect(),
        exceedances: count,
    }
}

fn stderr_of(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (var / k).sqrt()
}

/// Empirical risk measures: VaR is the ⌈κ·paths⌉-th order statistic of the sums,
/// TVaR and contributions are means over paths with sum above it. Standard
/// errors come from 20 equal sections of the batch.
pub fn empirical_measures(batch: &SimulationBatch, kappa: f64) -> Result<EmpiricalReport> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidParameter {
            name: "kappa",
            value: kappa,
            reason: "level must lie in (0, 1)",
        });
    }
    if batch.paths < MIN_PATHS {
        return Err(Error::InvalidParameter {
            name: "paths",
            value: batch.paths as f64,
            reason: "empirical measures need at least 1000 paths",
        });
    }
    let n = batch.n;
    let full = estimate(&batch.losses, &batch.sums, n, kappa);
    if full.exceedances < MIN_EXCEEDANCES {
        return Err(Error::TooFewExceedances {
            found: full.exceedances,
            needed: MIN_EXCEEDANCES,
        });
    }
    let sections: Vec<Estimate> = (0..SECTIONS)
        .into_par_iter()
        .map(|s| {
            let (a, b) = (s * batch.paths / SECTIONS, (s + 1) * batch.paths / SECTIONS);
            estimate(&batch.losses[a * n..b * n], &batch.sums[a..b], n, kappa)
        })
        .collect();
    Ok(EmpiricalReport {
        kappa,
        var: full.var,
        tvar: full.tvar,
        contribution_stderr: (0..n)
            .map(|i| stderr_of(sections.iter().map(|e| e.contributions[i])))
            .collect(),
        contributions: full.contributions,
        var_stderr: stderr_of(sections.iter().map(|e| e.var)),
        tvar_stderr: stderr_of(sections.iter().map(|e| e.tvar)),
        exceedances: full.exceedances,
    })
}

/// Fraction of sums above `x`, with its binomial standard error.
pub fn empirical_survival(batch: &SimulationBatch, x: f64) -> (f64, f64) {
    let n = batch.paths as f64;
    let p = batch.sums.iter().filter(|&&s| s > x).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
    pub passed: bool,
}

/// Asymptotic Kolmogorov critical value sqrt(-ln(α/2)/2) / sqrt(N).
pub fn ks_critical(samples: usize, level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (samples as f64).sqrt()
}

/// sup |F_N - F| of a sample against a continuous cdf.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).max((k + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// KS test of risk i's sample against the marginal cdf 1 - f*.
pub fn ks_test_marginal(
    batch: &SimulationBatch,
    i: usize,
    mixing: &MixingFamily,
    level: f64,
) -> KsResult {
    let statistic = ks_statistic(&batch.marginal(i), |x| 1.0 - mixing.laplace(x));
    let critical = ks_critical(batch.paths, level);
    KsResult {
        statistic,
        critical,
        passed: statistic <= critical,
    }
}

/// One point of the Θ-sampler check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacePoint {
    pub s: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub exact: f64,
}

/// Compares the sample mean of e^{-sΘ} with f*(s) at three points spread
/// around the scale of Θ, each required within 3 standard errors. Draws come
/// from a stream of `seed` that `sample_batch` never uses.
pub fn check_theta_sampler(
    mixing: &MixingFamily,
    draws: usize,
    seed: u64,
) -> Result<Vec<LaplacePoint>> {
    if draws < 2 {
        return Err(Error::Domain(
            "sampler check needs at least two draws".into(),
        ));
    }
    let scale = match *mixing {
        MixingFamily::GammaMixing { b, .. } => b,
        MixingFamily::GammaClaims { lambda, .. } => 1.0 / lambda,
    };
    let points = [0.5 * scale, scale, 2.0 * scale];
    let sampler = mixing.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut sum = [0.0; 3];
    let mut sum_sq = [0.0; 3];
    for _ in 0..draws {
        let theta = sampler.sample(&mut rng);
        for (k, s) in points.iter().enumerate() {
            let v = (-s * theta).exp();
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let nf = draws as f64;
    let mut out = Vec::with_capacity(3);
    for (k, &s) in points.iter().enumerate() {
        let estimate = sum[k] / nf;
        let var = ((sum_sq[k] - nf * estimate * estimate) / (nf - 1.0)).max(0.0);
        let stderr = (var / nf).sqrt();
        let exact = mixing.laplace(s);
        // a rounding floor for the degenerate a = 1 claims sampler, where stderr is 0
        if (estimate - exact).abs() > 3.0 * stderr + 1e-9 * exact {
            return Err(Error::SamplerCheck {
                s,
                estimate,
                exact,
                stderr,
            });
        }
        out.push(LaplacePoint {
            s,
            estimate,
            stderr,
            exact,
        });
    }
    Ok(out)
}

/// Ranks 1..=N (ties broken by position).
fn ranks(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_unstable_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0; v.len()];
    for (k, &p) in order.iter().enumerate() {
        r[p] = k + 1;
    }
    r
}

/// Sample Spearman rank correlation of risks i and j.
pub fn empirical_spearman(batch: &SimulationBatch, i: usize, j: usize) -> f64 {
    let (ri, rj) = (ranks(&batch.marginal(i)), ranks(&batch.marginal(j)));
    let n = batch.paths as f64;
    let d2: f64 = ri
        .iter()
        .zip(&rj)
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// max over u, v ∈ {1/k, …, 1} of |empirical survival copula - C| for risks 0 and 1.
pub fn empirical_copula_distance(
    batch: &SimulationBatch,
    beta: &BetaTensor<f64>,
    mixing: &MixingFamily,
    grid: usize,
) -> Result<f64> {
    if batch.n != 2 || beta.dim() != 2 {
        return Err(Error::Domain("copula distance is bivariate".into()));
    }
    let (r0, r1) = (ranks(&batch.marginal(0)), ranks(&batch.marginal(1)));
    let n = batch.paths;
    // survival ranks: the largest loss maps to the smallest pseudo-observation
    let cell = |r: usize| (((n + 1 - r) * grid).div_ceil(n)).clamp(1, grid) - 1;
    let mut hist = vec![0usize; grid * grid];
    for (&a, &b) in r0.iter().zip(&r1) {
        hist[cell(a) * grid + cell(b)] += 1;
    }
    let mut cum = vec![0usize; (grid + 1) * (grid + 1)];
    for a in 1..=grid {
        for b in 1..=grid {
            cum[a * (grid + 1) + b] = hist[(a - 1) * grid + b - 1]
                + cum[(a - 1) * (grid + 1) + b]
                + cum[a * (grid + 1) + b - 1]
                - cum[(a - 1) * (grid + 1) + b - 1];
        }
    }
    let mut worst: f64 = 0.0;
    for a in 1..=grid {
        for b in 1..=grid {
            let (u, v) = (a as f64 / grid as f64, b as f64 / grid as f64);
            let emp = cum[a * (grid + 1) + b] as f64 / n as f64;
            worst = worst.max((emp - mixed_copula(beta, mixing, &[u, v])?).abs());
        }
    }
    Ok(worst)
}

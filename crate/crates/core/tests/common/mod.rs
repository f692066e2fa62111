//! Brute-force count distributions shared by the integration tests.
#![allow(dead_code)]

use bernrisk::*;

pub const LMAX: usize = 36;

pub fn families() -> Vec<AlphaFamily> {
    vec![
        AlphaFamily::Independence,
        AlphaFamily::Comonotonic,
        AlphaFamily::CounterComonotonic,
        AlphaFamily::Fgm { delta: -0.6 },
        AlphaFamily::Clayton { theta: 2.5 },
        AlphaFamily::PiecewiseGaussian {
            tau: 0.5,
            r1: -0.95,
            r2: 0.95,
        },
        AlphaFamily::LIEBSCHER_DEFAULT,
    ]
}

/// pmf over totals ≤ LMAX of Σ_j Δ_j for the given success probabilities,
/// by walking every outcome vector with partial sum ≤ LMAX.
pub fn enumerate(probs: &[f64]) -> Vec<f64> {
    fn walk(probs: &[f64], sum: usize, weight: f64, out: &mut [f64]) {
        match probs.split_first() {
            None => out[sum] += weight,
            Some((&p, rest)) => {
                let mut w = weight * p;
                let mut k = 1;
                while sum + k <= LMAX {
                    walk(rest, sum + k, w, out);
                    w *= 1.0 - p;
                    k += 1;
                    if p == 1.0 {
                        break;
                    }
                }
            }
        }
    }
    let mut out = vec![0.0; LMAX + 1];
    walk(probs, 0, 1.0, &mut out);
    out
}

pub fn success_probs(m: usize, nu: usize) -> Vec<f64> {
    (nu + 1..=m).map(|j| j as f64 / m as f64).collect()
}

pub struct Oracle {
    pub total: Vec<f64>,
    pub joint: [Vec<Vec<f64>>; 2],
}

pub fn oracle(gamma: &GammaTensor, m: usize) -> Oracle {
    let mut total = vec![0.0; LMAX + 1];
    let mut joint = [
        vec![vec![0.0; LMAX + 1]; LMAX + 1],
        vec![vec![0.0; LMAX + 1]; LMAX + 1],
    ];
    for n1 in 0..m {
        for n2 in 0..m {
            let w = *gamma.get(&[n1, n2]);
            if w == 0.0 {
                continue;
            }
            let c1 = enumerate(&success_probs(m, n1));
            let c2 = enumerate(&success_probs(m, n2));
            for k in 0..=LMAX {
                for l in 0..=LMAX - k {
                    let q = w * c1[k] * c2[l];
                    total[k + l] += q;
                    joint[0][k][l] += q;
                    joint[1][l][k] += q;
                }
            }
        }
    }
    Oracle { total, joint }
}

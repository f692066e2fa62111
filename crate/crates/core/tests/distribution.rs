//! Distribution-level checks against quadrature and simulation oracles.

use bernrisk::aggregate::AggregateModel;
use bernrisk::quadrature::GaussLegendre;
use bernrisk::*;

const SEED: u64 = 97_531;

fn families() -> Vec<AlphaFamily> {
    vec![
        AlphaFamily::Independence,
        AlphaFamily::Comonotonic,
        AlphaFamily::CounterComonotonic,
        AlphaFamily::Fgm { delta: 0.8 },
        AlphaFamily::Clayton { theta: 1.5 },
        AlphaFamily::PiecewiseGaussian {
            tau: 0.5,
            r1: -0.95,
            r2: 0.95,
        },
        AlphaFamily::LIEBSCHER_DEFAULT,
    ]
}

fn pareto() -> MixingFamily {
    MixingFamily::gamma_mixing(5.0, 100.0).unwrap()
}

fn gamma(f: &AlphaFamily, m: usize) -> GammaTensor {
    gamma_coeffs(&make_alpha::<f64>(f, m, 2).unwrap()).unwrap()
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, k: usize) -> f64 {
    let h = (b - a) / k as f64;
    let mut s = f(a) + f(b);
    for i in 1..k {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn density_integrates_to_the_copula() {
    // the density is a polynomial of degree m - 1 per coordinate, so 8 nodes are exact for m ≤ 8
    let gl = GaussLegendre::new(8);
    let pts = [0.1, 0.3, 0.5, 0.7, 0.9];
    for f in families() {
        for m in 1..=8 {
            let grid = make_alpha::<f64>(&f, m, 2).unwrap();
            let g = gamma_coeffs(&grid).unwrap();
            for &u in &pts {
                for &v in &pts {
                    let area = gl.integrate(0.0, u, |x| {
                        gl.integrate(0.0, v, |y| eval_density_bernstein(&g, &[x, y]))
                    });
                    let c = eval_copula_bernstein(&grid, &[u, v]);
                    assert!(
                        (area - c).abs() < 1e-6,
                        "{f:?} m={m} ({u}, {v}): {area} vs {c}"
                    );
                }
            }
            let total = gl.integrate(0.0, 1.0, |x| {
                gl.integrate(0.0, 1.0, |y| eval_density_bernstein(&g, &[x, y]))
            });
            assert!((total - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn joint_survival_against_frailty_quadrature() {
    // H̄(x) = ∫ C_B(e^{-θx1}, e^{-θx2}) f_Θ(θ) dθ with Θ ~ Gamma(5, rate 100)
    let (a, b) = (5.0f64, 100.0f64);
    let density = |t: f64| b.powf(a) * t.powf(a - 1.0) * (-b * t).exp() / 24.0;
    for f in [
        AlphaFamily::LIEBSCHER_DEFAULT,
        AlphaFamily::CounterComonotonic,
        AlphaFamily::Fgm { delta: -0.5 },
    ] {
        let m = 6;
        let grid = make_alpha::<f64>(&f, m, 2).unwrap();
        let beta = beta_coeffs(&grid).unwrap();
        for x in [
            [5.0, 5.0],
            [10.0, 40.0],
            [60.0, 2.0],
            [100.0, 100.0],
            [0.5, 250.0],
        ] {
            let oracle = simpson(
                |t| {
                    eval_copula_bernstein(&grid, &[(-t * x[0]).exp(), (-t * x[1]).exp()])
                        * density(t)
                },
                0.0,
                1.5,
                6000,
            );
            let got = joint_survival(&beta, &pareto(), &x).unwrap();
            assert!(
                (got - oracle).abs() < 1e-8,
                "{f:?} {x:?}: {got} vs {oracle}"
            );
        }
    }
}

#[test]
fn rho_is_scale_free() {
    for f in [AlphaFamily::LIEBSCHER_DEFAULT, AlphaFamily::Comonotonic] {
        let beta = beta_coeffs(&make_alpha::<f64>(&f, 4, 2).unwrap()).unwrap();
        let r1 = spearman_rho(&beta, &MixingFamily::gamma_mixing(3.0, 1.0).unwrap()).unwrap();
        let r2 = spearman_rho(&beta, &MixingFamily::gamma_mixing(3.0, 250.0).unwrap()).unwrap();
        assert!((r1 - r2).abs() < 1e-10, "{r1} vs {r2}");
        let c1 = spearman_rho(&beta, &MixingFamily::gamma_claims(0.5, 1.0).unwrap()).unwrap();
        let c2 = spearman_rho(&beta, &MixingFamily::gamma_claims(0.5, 7.0).unwrap()).unwrap();
        assert!((c1 - c2).abs() < 1e-10, "{c1} vs {c2}");
    }
}

#[test]
fn additivity_and_exchangeability_for_every_family() {
    let claims = MixingFamily::gamma_claims(0.5, 1.0).unwrap();
    for f in families() {
        for m in [1, 5, 10] {
            for mx in [pareto(), claims] {
                let r = risk_report(&gamma(&f, m), mx, 0.95, DEFAULT_EPS_TAIL).unwrap();
                assert!(r.tvar >= r.var);
                assert!(r.additivity_gap() < 1e-8, "{f:?} m={m}");
                if f.is_exchangeable() {
                    let d = (r.contributions[0] - r.contributions[1]).abs();
                    assert!(d < 1e-10 * r.tvar, "{f:?} m={m}: {d}");
                }
            }
        }
    }
}

#[test]
fn density_against_simulated_histogram() {
    let g = gamma(&AlphaFamily::LIEBSCHER_DEFAULT, 5);
    let model = AggregateModel::from_gamma(&g, pareto(), DEFAULT_EPS_TAIL).unwrap();
    let paths = 1_000_000;
    let batch = mc::sample_batch(&g, &pareto(), paths, SEED, mc::DEFAULT_SUBSTREAMS).unwrap();
    let h = 2.0;
    for x in [25.0, 50.0, 100.0, 200.0] {
        let hits = batch
            .sums
            .iter()
            .filter(|&&s| (s - x).abs() < h / 2.0)
            .count() as f64;
        let p = hits / paths as f64;
        let est = p / h;
        let se = (p * (1.0 - p) / paths as f64).sqrt() / h;
        let pdf = model.agg_pdf(x).unwrap().value;
        assert!(
            (est - pdf).abs() < 4.0 * se,
            "x={x}: {est} vs {pdf} (se {se})"
        );
    }
}

#[test]
fn simulation_matches_closed_forms_at_order_one() {
    let g = gamma(&AlphaFamily::Comonotonic, 1);
    let batch =
        mc::sample_batch(&g, &pareto(), 10_000_000, SEED + 1, mc::DEFAULT_SUBSTREAMS).unwrap();
    let e = empirical_measures(&batch, 0.95).unwrap();
    assert!(
        (e.var - 139.12).abs() <= 0.35,
        "VaR {} ± {}",
        e.var,
        e.var_stderr
    );
    assert!(
        (e.tvar - 205.30).abs() <= 1.0,
        "TVaR {} ± {}",
        e.tvar,
        e.tvar_stderr
    );
    let model = AggregateModel::from_gamma(&g, pareto(), DEFAULT_EPS_TAIL).unwrap();
    let v = model.var(0.95).unwrap();
    let (p, se) = mc::empirical_survival(&batch, v);
    assert!((p - 0.05).abs() < 4.0 * se, "{p} ± {se}");
    for i in 0..2 {
        assert!(mc::ks_test_marginal(&batch, i, &pareto(), 0.01).passed);
    }
    let xs = batch.marginal(0);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    // Pareto(5, 100) has a finite variance b²a/((a-1)²(a-2)) = 2083.3
    let se = (2083.0f64 / xs.len() as f64).sqrt();
    assert!((mean - 25.0).abs() < 3.0 * se, "{mean} ± {se}");
}

#[test]
fn tvar_and_contributions_against_simulation() {
    let g = gamma(&AlphaFamily::Comonotonic, 5);
    let r = risk_report(&g, pareto(), 0.95, DEFAULT_EPS_TAIL).unwrap();
    let batch =
        mc::sample_batch(&g, &pareto(), 10_000_000, SEED + 2, mc::DEFAULT_SUBSTREAMS).unwrap();
    let e = empirical_measures(&batch, 0.95).unwrap();
    assert!(
        (r.tvar - e.tvar).abs() < 4.0 * e.tvar_stderr,
        "{} vs {} ± {}",
        r.tvar,
        e.tvar,
        e.tvar_stderr
    );
    for i in 0..2 {
        let d = (r.contributions[i] - e.contributions[i]).abs();
        assert!(
            d < 4.0 * e.contribution_stderr[i],
            "X{}: {} vs {}",
            i + 1,
            r.contributions[i],
            e.contributions[i]
        );
    }
    let beta = beta_coeffs(&make_alpha::<f64>(&AlphaFamily::Comonotonic, 5, 2).unwrap()).unwrap();
    let rho = spearman_rho(&beta, &pareto()).unwrap();
    let first =
        mc::sample_batch(&g, &pareto(), 1_000_000, SEED + 3, mc::DEFAULT_SUBSTREAMS).unwrap();
    let emp = mc::empirical_spearman(&first, 0, 1);
    assert!((emp - rho).abs() < 0.005, "{emp} vs {rho}");
}

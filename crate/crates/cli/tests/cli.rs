use bernrisk::{make_alpha, AlphaFamily};
use std::path::Path;
use std::process::{Command, Output};

fn bernrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bernrisk"))
        .args(args)
        .env_remove("BERNRISK_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn within(got: f64, want: f64, rel: f64) -> bool {
    ((got - want) / want).abs() <= rel
}

#[test]
fn validate_comonotonic() {
    let o = bernrisk(&["validate-alpha", "--family", "comonotonic", "--m", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("valid"));
}

#[test]
fn validate_counter_comonotonic_in_three_dimensions() {
    let o = bernrisk(&[
        "validate-alpha",
        "--family",
        "counter_comonotonic",
        "--n",
        "3",
        "--m",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Fréchet"));
}

#[test]
fn validate_broken_margin_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("alpha.csv");
    let grid = make_alpha::<f64>(&AlphaFamily::Independence, 4, 2).unwrap();
    let mut buf = Vec::new();
    grid.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf)
        .unwrap()
        .replace("\n4,2,0.5\n", "\n4,2,0.4\n");
    std::fs::write(&path, text).unwrap();
    let o = bernrisk(&["validate-alpha", "--alpha-file", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("uniform_margin at (4,2)"), "{out}");
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.ini");
    std::fs::write(&path, "[run]\ncolour = red\n").unwrap();
    let o = bernrisk(&["var-tvar", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = bernrisk(&["var-tvar", "--m", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bernrisk(&["var-tvar", "--unknown-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn counter_comonotonic_m10() {
    let o = bernrisk(&["var-tvar", "--family", "counter_comonotonic", "--m", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let r = &rows(&o)[0];
    assert_eq!(r[0], "10");
    assert!(within(num(&r[2]), 119.98, 0.005));
    assert!(within(num(&r[3]), 173.63, 0.005));
    assert_eq!(r[5], "ok");
}

#[test]
fn m1_rows_do_not_depend_on_alpha() {
    let a = bernrisk(&["var-tvar", "--family", "comonotonic", "--m", "1"]);
    let b = bernrisk(&["var-tvar", "--family", "counter_comonotonic", "--m", "1"]);
    assert_eq!(stdout(&a), stdout(&b));
    let r = &rows(&a)[0];
    assert!((num(&r[2]) - 139.12).abs() < 0.01);
    assert!((num(&r[3]) - 205.30).abs() < 0.01);
}

#[test]
fn divergent_tvar_is_reported() {
    let o = bernrisk(&["var-tvar", "--a", "1", "--m", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infinite-mean"));
}

#[test]
fn allocation_rows() {
    let o = bernrisk(&["allocate", "--family", "liebscher_clayton", "--m", "50"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("m,kappa,var,tvar,contrib_1,contrib_2,truncation_bound,flag\n"));
    let r = &rows(&o)[0];
    assert!(within(num(&r[4]), 118.91, 0.005));
    assert!(within(num(&r[5]), 119.10, 0.005));

    let o = bernrisk(&[
        "allocate", "--family", "clayton", "--theta", "2", "--m", "6",
    ]);
    let r = &rows(&o)[0];
    assert!((num(&r[4]) - num(&r[5])).abs() < 1e-9);
    assert!(((num(&r[4]) + num(&r[5]) - num(&r[3])) / num(&r[3])).abs() < 1e-8);
}

#[test]
fn rho_curve_rows() {
    let o = bernrisk(&["rho-curve", "--m", "1,3,6", "--rho-a", "1,5"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = rows(&o);
    assert_eq!(rows.len(), 6);
    assert!((num(&rows[0][2]) - 0.4784).abs() < 1e-3);
    for a_rows in rows.chunks(3) {
        let at_m1 = num(&a_rows[0][2]);
        for w in a_rows.windows(2) {
            assert!(num(&w[1][2]) <= num(&w[0][2]));
            assert!(num(&w[1][3]) >= num(&w[0][3]));
        }
        for r in a_rows {
            assert!(num(&r[2]) <= at_m1 + 1e-9 && at_m1 <= num(&r[3]) + 1e-9);
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    std::fs::write(
        &cfg,
        "[alpha]\nfamily = clayton\ntheta = 1.5\n\n[mixing]\nfamily = gamma_mixing\na = 4\nb = 50\n\n[run]\nm = 3\nkappa = 0.9, 0.99\npaths = 20000\nseed = 9\n",
    )
    .unwrap();
    let run = |out: &Path, threads: &str| {
        let o = bernrisk(&[
            "var-tvar",
            "--config",
            cfg.to_str().unwrap(),
            "--mc-check",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        std::fs::read(out).unwrap()
    };
    let a = run(&dir.path().join("a.csv"), "1");
    let b = run(&dir.path().join("b.csv"), "2");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(
        "m,kappa,var,tvar,truncation_bound,flag,mc_var,mc_var_stderr,mc_tvar,mc_tvar_stderr\n"
    ));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn mc_export_writes_paths() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("paths.csv");
    let o = bernrisk(&[
        "var-tvar",
        "--m",
        "2,3",
        "--paths",
        "2000",
        "--mc-check",
        "--mc-export",
        export.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for m in [2, 3] {
        let text = std::fs::read_to_string(dir.path().join(format!("paths_m{m}.csv"))).unwrap();
        assert!(text.starts_with("x_1,x_2,sum\n"));
        assert_eq!(text.lines().count(), 2001);
    }
}

#[test]
fn thread_environment_variable() {
    let o = Command::new(env!("CARGO_BIN_EXE_bernrisk"))
        .args(["var-tvar", "--m", "1"])
        .env("BERNRISK_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_bernrisk"))
        .args(["var-tvar", "--m", "1", "--threads", "1"])
        .env("BERNRISK_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn gamma_claims_simulation_check() {
    let o = bernrisk(&[
        "var-tvar",
        "--mixing",
        "gamma_claims",
        "--a",
        "0.5",
        "--lambda",
        "1",
        "--family",
        "fgm",
        "--m",
        "1,4",
        "--mc-check",
        "--paths",
        "200000",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for r in rows(&o) {
        let (var, tvar) = (num(&r[2]), num(&r[3]));
        let (mc_var, mc_var_se, mc_tvar, mc_tvar_se) =
            (num(&r[6]), num(&r[7]), num(&r[8]), num(&r[9]));
        assert!((var - mc_var).abs() < 4.0 * mc_var_se, "{r:?}");
        assert!((tvar - mc_tvar).abs() < 4.0 * mc_tvar_se, "{r:?}");
    }
}

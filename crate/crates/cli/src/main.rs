mod config;

use bernrisk::aggregate::AggregateModel;
use bernrisk::mc::{check_theta_sampler, empirical_measures, sample_batch};
use bernrisk::risk::{risk_reports, tvar_at};
use bernrisk::{
    beta_coeffs, gamma_coeffs, make_alpha, spearman_rho, tvar_weights, validate_alpha, AlphaFamily,
    AlphaGrid, MixingFamily,
};
use clap::{Args, Parser, Subcommand};
use config::{AlphaSource, ConfigError, RunConfig, Settings};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Columns of the paper's tables.
const TABLE_M: [usize; 7] = [1, 5, 10, 20, 30, 40, 50];
const RHO_M_MAX: usize = 15;
const FLAG_BOUND: f64 = 1e-6;
const ADDITIVITY_TOL: f64 = 1e-8;
const SAMPLER_CHECK_DRAWS: usize = 1_000_000;

#[derive(Parser)]
#[command(
    name = "bernrisk",
    version,
    about = "Risk aggregation under mixed Bernstein copulas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an alpha grid against the Bernstein copula conditions.
    ValidateAlpha(Common),
    /// VaR and TVaR of the aggregate for each m and kappa.
    VarTvar {
        #[command(flatten)]
        common: Common,
        /// Add Monte Carlo estimates with standard errors.
        #[arg(long)]
        mc_check: bool,
        /// Write the simulated paths to this CSV (suffixed with _m<m> for several m).
        #[arg(long, value_name = "FILE", requires = "mc_check")]
        mc_export: Option<PathBuf>,
    },
    /// VaR, TVaR and TVaR-based contributions of each risk.
    Allocate(Common),
    /// Spearman's rho under the comonotonic and counter-comonotonic alpha.
    RhoCurve(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file with [alpha], [mixing] and [run] sections.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Worker threads (default: BERNRISK_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// alpha family id.
    #[arg(long, value_name = "ID")]
    family: Option<String>,
    /// alpha grid CSV; replaces the family.
    #[arg(long, value_name = "FILE")]
    alpha_file: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    r1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    r2: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    theta1: Option<String>,
    #[arg(long)]
    theta2: Option<String>,

    /// Mixing family id.
    #[arg(long, value_name = "ID")]
    mixing: Option<String>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    lambda: Option<String>,

    /// Comma-separated Bernstein orders.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// Comma-separated levels.
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    eps_tail: Option<String>,
    #[arg(long)]
    paths: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    substreams: Option<String>,
    /// Comma-separated gamma-mixing shapes for rho-curve.
    #[arg(long)]
    rho_a: Option<String>,
}

impl Common {
    fn settings(&self) -> Result<Settings, ConfigError> {
        let mut s = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        let overrides = [
            ("alpha.family", &self.family),
            ("alpha.file", &self.alpha_file),
            ("alpha.delta", &self.delta),
            ("alpha.theta", &self.theta),
            ("alpha.tau", &self.tau),
            ("alpha.r1", &self.r1),
            ("alpha.r2", &self.r2),
            ("alpha.gamma", &self.gamma),
            ("alpha.theta1", &self.theta1),
            ("alpha.theta2", &self.theta2),
            ("mixing.family", &self.mixing),
            ("mixing.a", &self.a),
            ("mixing.b", &self.b),
            ("mixing.lambda", &self.lambda),
            ("run.m", &self.m),
            ("run.n", &self.n),
            ("run.kappa", &self.kappa),
            ("run.eps_tail", &self.eps_tail),
            ("run.paths", &self.paths),
            ("run.seed", &self.seed),
            ("run.substreams", &self.substreams),
            ("run.rho_a", &self.rho_a),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                s.set(key, v)?;
            }
        }
        if let Some(out) = &self.out {
            s.set("run.out", &out.to_string_lossy())?;
        }
        Ok(s)
    }
}

enum Failure {
    /// Bad flags, config or input files.
    Usage(String),
    /// The model rejected the input or could not be evaluated.
    Model(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<bernrisk::Error> for Failure {
    fn from(e: bernrisk::Error) -> Self {
        Failure::Model(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::ValidateAlpha(c) | Command::Allocate(c) | Command::RhoCurve(c) => c,
        Command::VarTvar { common, .. } => common,
    };
    if let Err(f) = configure_threads(common.threads) {
        return report(f);
    }
    let result = common
        .settings()
        .and_then(|s| RunConfig::from_settings(&s))
        .map_err(Failure::from)
        .and_then(|cfg| match &cli.command {
            Command::ValidateAlpha(_) => cmd_validate_alpha(&cfg),
            Command::VarTvar {
                mc_check,
                mc_export,
                ..
            } => cmd_var_tvar(&cfg, *mc_check, mc_export.as_deref()),
            Command::Allocate(_) => cmd_allocate(&cfg),
            Command::RhoCurve(_) => cmd_rho_curve(&cfg),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    match f {
        Failure::Usage(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Failure::Model(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads(flag: Option<usize>) -> CmdResult {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var("BERNRISK_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| {
                Failure::Usage(format!(
                    "BERNRISK_THREADS must be a positive integer, got `{v}`"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(Failure::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn output(cfg: &RunConfig) -> Result<Box<dyn Write>, Failure> {
    Ok(match &cfg.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// One grid per configured m, or the grid read from the configured file.
fn grids(cfg: &RunConfig, default_m: &[usize]) -> Result<Vec<AlphaGrid>, Failure> {
    match &cfg.alpha {
        AlphaSource::File(path) => {
            let file =
                File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let grid = AlphaGrid::read_csv(BufReader::new(file))
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            Ok(vec![grid])
        }
        AlphaSource::Family(f) => cfg
            .m
            .as_deref()
            .unwrap_or(default_m)
            .iter()
            .map(|&m| Ok(make_alpha::<f64>(f, m, cfg.n)?))
            .collect(),
    }
}

fn flag(bound: f64) -> &'static str {
    if bound > FLAG_BOUND {
        "loose_bound"
    } else {
        "ok"
    }
}

fn cmd_validate_alpha(cfg: &RunConfig) -> CmdResult {
    let mut out = output(cfg)?;
    let mut all_valid = true;
    for grid in grids(cfg, &[5])? {
        let report = validate_alpha(&grid);
        let (n, m) = (grid.dim(), grid.order());
        if report.is_valid {
            writeln!(out, "m={m} n={n}: valid")?;
        }
        for v in &report.violations {
            let idx: Vec<String> = v.index.iter().map(usize::to_string).collect();
            writeln!(
                out,
                "m={m} n={n}: violation {} at ({}) value {:e}",
                v.condition.id(),
                idx.join(","),
                v.value
            )?;
        }
        all_valid &= report.is_valid;
    }
    out.flush()?;
    if all_valid {
        Ok(())
    } else {
        Err(Failure::Model(
            "alpha grid violates the copula conditions".into(),
        ))
    }
}

fn export_path(base: &Path, m: usize, several: bool) -> PathBuf {
    if !several {
        return base.to_path_buf();
    }
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}_m{m}.{}", ext.to_string_lossy()),
        None => format!("{stem}_m{m}"),
    };
    base.with_file_name(name)
}

fn cmd_var_tvar(cfg: &RunConfig, mc_check: bool, mc_export: Option<&Path>) -> CmdResult {
    let grids = grids(cfg, &TABLE_M)?;
    let mut out = output(cfg)?;
    write!(out, "m,kappa,var,tvar,truncation_bound,flag")?;
    if mc_check {
        write!(out, ",mc_var,mc_var_stderr,mc_tvar,mc_tvar_stderr")?;
    }
    writeln!(out)?;
    if mc_check && matches!(cfg.mixing, MixingFamily::GammaClaims { .. }) {
        for p in check_theta_sampler(&cfg.mixing, SAMPLER_CHECK_DRAWS, cfg.seed)? {
            log::info!(
                "theta sampler at s = {}: {} vs {} (stderr {:e})",
                p.s,
                p.estimate,
                p.exact,
                p.stderr
            );
        }
    }
    for grid in &grids {
        let m = grid.order();
        let gamma = gamma_coeffs(grid)?;
        let model = AggregateModel::from_gamma(&gamma, cfg.mixing, cfg.eps_tail)?;
        let weights = tvar_weights(model.counts());
        let batch = if mc_check {
            let b = sample_batch(&gamma, &cfg.mixing, cfg.paths, cfg.seed, cfg.substreams)?;
            if let Some(base) = mc_export {
                let path = export_path(base, m, grids.len() > 1);
                b.write_csv(BufWriter::new(File::create(path)?))?;
            }
            Some(b)
        } else {
            None
        };
        for &kappa in &cfg.kappa {
            let var = model.var(kappa)?;
            let t = tvar_at(&model, &weights, kappa, var)?;
            let bound = t.truncation_bound.max(*model.counts().tail_mass());
            write!(out, "{m},{kappa},{var},{},{bound},{}", t.value, flag(bound))?;
            if let Some(b) = &batch {
                let e = empirical_measures(b, kappa)?;
                write!(
                    out,
                    ",{},{},{},{}",
                    e.var, e.var_stderr, e.tvar, e.tvar_stderr
                )?;
            }
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_allocate(cfg: &RunConfig) -> CmdResult {
    let mut out = output(cfg)?;
    write!(out, "m,kappa,var,tvar")?;
    for i in 1..=cfg.n {
        write!(out, ",contrib_{i}")?;
    }
    writeln!(out, ",truncation_bound,flag")?;
    for grid in grids(cfg, &TABLE_M)? {
        let m = grid.order();
        let gamma = gamma_coeffs(&grid)?;
        for r in risk_reports(&gamma, cfg.mixing, &cfg.kappa, cfg.eps_tail)? {
            let gap = r.additivity_gap();
            if gap > ADDITIVITY_TOL {
                return Err(Failure::Model(format!(
                    "contributions miss TVaR by {gap:e} (relative) at m = {m}, kappa = {}",
                    r.kappa
                )));
            }
            write!(out, "{m},{},{},{}", r.kappa, r.var, r.tvar)?;
            for c in &r.contributions {
                write!(out, ",{c}")?;
            }
            writeln!(out, ",{},{}", r.truncation_bound, flag(r.truncation_bound))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_rho_curve(cfg: &RunConfig) -> CmdResult {
    let default_m: Vec<usize> = (1..=RHO_M_MAX).collect();
    let ms = cfg.m.clone().unwrap_or(default_m);
    let b = match cfg.mixing {
        MixingFamily::GammaMixing { b, .. } => b,
        MixingFamily::GammaClaims { .. } => 1.0,
    };
    let mut out = output(cfg)?;
    writeln!(out, "m,a,rho_lower,rho_upper")?;
    for &a in &cfg.rho_a {
        let mixing = MixingFamily::gamma_mixing(a, b)?;
        for &m in &ms {
            let rho = |f: AlphaFamily| -> Result<f64, Failure> {
                Ok(spearman_rho(
                    &beta_coeffs(&make_alpha::<f64>(&f, m, 2)?)?,
                    &mixing,
                )?)
            };
            let lower = rho(AlphaFamily::CounterComonotonic)?;
            let upper = rho(AlphaFamily::Comonotonic)?;
            writeln!(out, "{m},{a},{lower},{upper}")?;
        }
    }
    out.flush()?;
    Ok(())
}

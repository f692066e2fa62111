//! Run configuration: an INI file with `[alpha]`, `[mixing]` and `[run]`
//! sections, overridden key by key from the command line.

use bernrisk::{AlphaFamily, MixingFamily};
use ini::Ini;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: cannot parse `{value}`")]
    Parse { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

const KEYS: &[&str] = &[
    "alpha.family",
    "alpha.file",
    "alpha.delta",
    "alpha.theta",
    "alpha.tau",
    "alpha.r1",
    "alpha.r2",
    "alpha.gamma",
    "alpha.theta1",
    "alpha.theta2",
    "mixing.family",
    "mixing.a",
    "mixing.b",
    "mixing.lambda",
    "run.m",
    "run.n",
    "run.kappa",
    "run.eps_tail",
    "run.paths",
    "run.seed",
    "run.substreams",
    "run.rho_a",
    "run.out",
];

const ALPHA_PARAMS: &[&str] = &[
    "delta", "theta", "tau", "r1", "r2", "gamma", "theta1", "theta2",
];

/// Raw `section.key -> value` settings.
#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let ini = Ini::load_from_file(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut s = Settings::default();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("run");
            for (k, v) in props.iter() {
                s.set(&format!("{section}.{k}"), v)?;
            }
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values
            .insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse().map_err(|_| ConfigError::Parse {
                    key: key.to_string(),
                    value: v.to_string(),
                })
            })
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim().parse().map_err(|_| ConfigError::Parse {
                            key: key.to_string(),
                            value: v.to_string(),
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

#[derive(Debug, Clone)]
pub enum AlphaSource {
    Family(AlphaFamily),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub alpha: AlphaSource,
    pub mixing: MixingFamily,
    /// `None` when the command should use its own default list.
    pub m: Option<Vec<usize>>,
    pub n: usize,
    pub kappa: Vec<f64>,
    pub eps_tail: f64,
    pub paths: usize,
    pub seed: u64,
    pub substreams: usize,
    pub rho_a: Vec<f64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let invalid = |e: bernrisk::Error| ConfigError::Invalid(e.to_string());
        let alpha = match s.get("alpha.file") {
            Some(path) => AlphaSource::File(PathBuf::from(path)),
            None => {
                let mut params = BTreeMap::new();
                for p in ALPHA_PARAMS {
                    if let Some(v) = s.parse::<f64>(&format!("alpha.{p}"))? {
                        params.insert(p.to_string(), v);
                    }
                }
                let id = s.get("alpha.family").unwrap_or("comonotonic");
                AlphaSource::Family(AlphaFamily::from_id(id, &params).map_err(invalid)?)
            }
        };
        let mut mparams = BTreeMap::new();
        for p in ["a", "b", "lambda"] {
            if let Some(v) = s.parse::<f64>(&format!("mixing.{p}"))? {
                mparams.insert(p.to_string(), v);
            }
        }
        let mixing_id = s.get("mixing.family").unwrap_or("gamma_mixing");
        let mixing = MixingFamily::from_id(mixing_id, &mparams).map_err(invalid)?;
        let kappa = s.list("run.kappa")?.unwrap_or_else(|| vec![0.95]);
        if let Some(k) = kappa.iter().find(|k| !(**k > 0.0 && **k < 1.0)) {
            return Err(ConfigError::Invalid(format!("kappa {k} outside (0, 1)")));
        }
        let m = s.list::<usize>("run.m")?;
        if m.as_ref().is_some_and(|ms| ms.contains(&0)) {
            return Err(ConfigError::Invalid("m must be at least 1".into()));
        }
        Ok(RunConfig {
            alpha,
            mixing,
            m,
            n: s.parse("run.n")?.unwrap_or(2),
            kappa,
            eps_tail: s
                .parse("run.eps_tail")?
                .unwrap_or(bernrisk::DEFAULT_EPS_TAIL),
            paths: s.parse("run.paths")?.unwrap_or(1_000_000),
            seed: s.parse("run.seed")?.unwrap_or(20_240_501),
            substreams: s
                .parse("run.substreams")?
                .unwrap_or(bernrisk::mc::DEFAULT_SUBSTREAMS),
            rho_a: s.list("run.rho_a")?.unwrap_or_else(|| vec![1.0, 5.0, 10.0]),
            out: s.get("run.out").map(PathBuf::from),
        })
    }
}

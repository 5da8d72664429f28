//! Run configuration: a TOML file of flat dotted keys, layered as
//! built-in defaults < config file < `ALRISK_SEED` (seed only) < CLI flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use alrisk_core::classifier::ClassifierKind;
use alrisk_core::{ExperimentConfig, LabelColumn, LossMode, Strategy};

use crate::CliError;

pub const BUILTIN_WBC: &str = "builtin:wbc";
pub const SEED_ENV: &str = "ALRISK_SEED";

/// Keys under this prefix describe a finished run and are ignored on load,
/// so a manifest can be fed back in as a config file.
const MANIFEST_PREFIX: &str = "manifest.";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `builtin:wbc` or a CSV path.
    pub data: String,
    pub label_column: LabelColumn,
    pub positive_label: String,
    pub drop_columns: Vec<String>,
    pub standardize: bool,
    pub experiment: ExperimentConfig,
    /// 0 lets the thread pool pick.
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: BUILTIN_WBC.into(),
            label_column: LabelColumn::Name("diagnosis".into()),
            positive_label: "M".into(),
            drop_columns: vec!["id".into()],
            standardize: true,
            experiment: ExperimentConfig::default(),
            workers: 0,
            out_dir: PathBuf::from("results"),
        }
    }
}

/// Values given on the command line; `None` leaves the lower layers alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub strategy: Option<String>,
    pub reps: Option<usize>,
    pub batch_size: Option<usize>,
    pub warmup: Option<usize>,
    pub rounds: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {msg}"))
}

pub fn parse_strategies(list: &str) -> Result<Vec<Strategy>, String> {
    let items: Vec<&str> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(format!(
            "empty strategy list (valid strategies: {})",
            Strategy::valid_names()
        ));
    }
    items.into_iter().map(str::parse).collect()
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn as_str<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str, CliError> {
    v.as_str()
        .ok_or_else(|| config_err(key, "expected a string"))
}

fn as_usize(key: &str, v: &toml::Value) -> Result<usize, CliError> {
    v.as_integer()
        .and_then(|i| usize::try_from(i).ok())
        .ok_or_else(|| config_err(key, "expected a non-negative integer"))
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64, CliError> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(config_err(key, "expected a number")),
    }
}

fn as_seed(key: &str, v: &toml::Value) -> Result<u64, CliError> {
    match v {
        toml::Value::Integer(i) => u64::try_from(*i).map_err(|_| config_err(key, "must be >= 0")),
        // seeds above i64::MAX are stored as strings in manifests
        toml::Value::String(s) => s
            .parse()
            .map_err(|_| config_err(key, "expected an integer")),
        _ => Err(config_err(key, "expected an integer")),
    }
}

impl RunConfig {
    /// Reads a config file; relative data paths resolve against the file's
    /// directory.
    pub fn from_file(path: &Path) -> Result<(Self, bool), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }

    /// Returns the config and whether the file set `seed`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<(Self, bool), CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("invalid config file: {e}")))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);

        let mut cfg = Self::default();
        let mut seed_set = false;
        for (key, v) in &flat {
            let key = key.as_str();
            if key.starts_with(MANIFEST_PREFIX) {
                continue;
            }
            let exp = &mut cfg.experiment;
            match key {
                "data" => {
                    let s = as_str(key, v)?;
                    cfg.data = if s == BUILTIN_WBC || Path::new(s).is_absolute() {
                        s.to_string()
                    } else {
                        base.join(s).display().to_string()
                    };
                }
                "label_column" => {
                    cfg.label_column = match v {
                        toml::Value::Integer(_) => LabelColumn::Index(as_usize(key, v)?),
                        _ => LabelColumn::Name(as_str(key, v)?.to_string()),
                    }
                }
                "positive_label" => cfg.positive_label = as_str(key, v)?.to_string(),
                "drop_columns" => {
                    let arr = v
                        .as_array()
                        .ok_or_else(|| config_err(key, "expected an array of strings"))?;
                    cfg.drop_columns = arr
                        .iter()
                        .map(|x| as_str(key, x).map(str::to_string))
                        .collect::<Result<_, _>>()?;
                }
                "standardize" => {
                    cfg.standardize = v
                        .as_bool()
                        .ok_or_else(|| config_err(key, "expected a boolean"))?
                }
                "test_fraction" => exp.test_fraction = as_f64(key, v)?,
                "warmup_size" => exp.warmup_size = as_usize(key, v)?,
                "seed" => {
                    exp.base_seed = as_seed(key, v)?;
                    seed_set = true;
                }
                "classifier.kind" => {
                    exp.classifier.kind = as_str(key, v)?
                        .parse::<ClassifierKind>()
                        .map_err(|e| config_err(key, e))?
                }
                "classifier.k" => exp.classifier.k = as_usize(key, v)?,
                "classifier.l2" => exp.classifier.l2 = as_f64(key, v)?,
                "classifier.max_iter" => exp.classifier.max_iter = as_usize(key, v)?,
                "classifier.tol" => exp.classifier.tol = as_f64(key, v)?,
                "risk.grid_min_factor" => exp.risk.grid.min_factor = as_f64(key, v)?,
                "risk.grid_max_factor" => exp.risk.grid.max_factor = as_f64(key, v)?,
                "risk.grid_size" => exp.risk.grid.size = as_usize(key, v)?,
                "risk.loss_mode" => {
                    exp.risk.loss_mode = as_str(key, v)?
                        .parse::<LossMode>()
                        .map_err(|e| config_err(key, e))?
                }
                "strategy" => {
                    let list = match v {
                        toml::Value::Array(items) => items
                            .iter()
                            .map(|x| as_str(key, x))
                            .collect::<Result<Vec<_>, _>>()?
                            .join(","),
                        _ => as_str(key, v)?.to_string(),
                    };
                    exp.strategies = parse_strategies(&list).map_err(|e| config_err(key, e))?;
                }
                "batch_size" => exp.batch_size = as_usize(key, v)?,
                "lambda" => exp.lambda = as_f64(key, v)?,
                "rounds" => exp.rounds = as_usize(key, v)?,
                "reps" => exp.repetitions = as_usize(key, v)?,
                "workers" => cfg.workers = as_usize(key, v)?,
                "out_dir" => {
                    let s = as_str(key, v)?;
                    cfg.out_dir = if Path::new(s).is_absolute() {
                        PathBuf::from(s)
                    } else {
                        base.join(s)
                    };
                }
                other => return Err(config_err(other, "unknown configuration key")),
            }
        }
        Ok((cfg, seed_set))
    }

    /// Layers environment and command-line values on top of `self`.
    pub fn resolve(
        mut self,
        seed_from_file: bool,
        env_seed: Option<&str>,
        overrides: &Overrides,
    ) -> Result<Self, CliError> {
        if !seed_from_file {
            if let Some(s) = env_seed {
                self.experiment.base_seed = s
                    .trim()
                    .parse()
                    .map_err(|_| config_err(SEED_ENV, format!("`{s}` is not an integer seed")))?;
            }
        }
        let exp = &mut self.experiment;
        if let Some(list) = &overrides.strategy {
            exp.strategies = parse_strategies(list).map_err(|e| config_err("--strategy", e))?;
        }
        if let Some(v) = overrides.reps {
            exp.repetitions = v;
        }
        if let Some(v) = overrides.batch_size {
            exp.batch_size = v;
        }
        if let Some(v) = overrides.warmup {
            exp.warmup_size = v;
        }
        if let Some(v) = overrides.rounds {
            exp.rounds = v;
        }
        if let Some(v) = overrides.seed {
            exp.base_seed = v;
        }
        if let Some(v) = overrides.workers {
            self.workers = v;
        }
        if let Some(v) = &overrides.out_dir {
            self.out_dir = v.clone();
        }
        if self.experiment.lambda > 0.0 {
            return Err(config_err(
                "lambda",
                "must be 0: no variance estimator is available from the command line",
            ));
        }
        Ok(self)
    }

    /// Every setting, defaults included, as flat dotted TOML keys.
    pub fn to_toml(&self) -> String {
        let s = |v: &str| toml::Value::String(v.to_string()).to_string();
        let f = |v: f64| toml::Value::Float(v).to_string();
        let exp = &self.experiment;
        let strategies = exp
            .strategies
            .iter()
            .map(|st| s(st.as_str()))
            .collect::<Vec<_>>()
            .join(", ");
        let drops = self
            .drop_columns
            .iter()
            .map(|d| s(d))
            .collect::<Vec<_>>()
            .join(", ");
        let label_column = match &self.label_column {
            LabelColumn::Name(n) => s(n),
            LabelColumn::Index(i) => i.to_string(),
        };
        let seed = if exp.base_seed <= i64::MAX as u64 {
            exp.base_seed.to_string()
        } else {
            s(&exp.base_seed.to_string())
        };
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("data", s(&self.data));
        line("label_column", label_column);
        line("positive_label", s(&self.positive_label));
        line("drop_columns", format!("[{drops}]"));
        line("standardize", self.standardize.to_string());
        line("test_fraction", f(exp.test_fraction));
        line("warmup_size", exp.warmup_size.to_string());
        line("seed", seed);
        line("classifier.kind", s(exp.classifier.kind.as_str()));
        line("classifier.k", exp.classifier.k.to_string());
        line("classifier.l2", f(exp.classifier.l2));
        line("classifier.max_iter", exp.classifier.max_iter.to_string());
        line("classifier.tol", f(exp.classifier.tol));
        line("risk.grid_min_factor", f(exp.risk.grid.min_factor));
        line("risk.grid_max_factor", f(exp.risk.grid.max_factor));
        line("risk.grid_size", exp.risk.grid.size.to_string());
        line("risk.loss_mode", s(exp.risk.loss_mode.as_str()));
        line("strategy", format!("[{strategies}]"));
        line("batch_size", exp.batch_size.to_string());
        line("lambda", f(exp.lambda));
        line("rounds", exp.rounds.to_string());
        line("reps", exp.repetitions.to_string());
        line("workers", self.workers.to_string());
        line("out_dir", s(&self.out_dir.display().to_string()));
        out
    }
}

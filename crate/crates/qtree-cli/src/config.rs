//! Run configuration: defaults, then a `key = value` file, then flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}:{line}: {msg}")]
    Syntax { path: String, line: usize, msg: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("key '{key}' does not apply to {command}")]
    NotApplicable { key: String, command: &'static str },
    #[error("key '{key}': {msg}")]
    Invalid { key: String, msg: String },
    #[error("cannot read config file {path}: {msg}")]
    Read { path: String, msg: String },
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), msg: msg.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    U1Pool,
    U1Classical,
    KppVelocity,
    KppCritical,
    Su2Enum,
    Su2Replica,
    Su2Forced,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::U1Pool => "u1-pool",
            Command::U1Classical => "u1-classical",
            Command::KppVelocity => "kpp-velocity",
            Command::KppCritical => "kpp-critical",
            Command::Su2Enum => "su2-enum",
            Command::Su2Replica => "su2-replica",
            Command::Su2Forced => "su2-forced",
            Command::Selftest => "selftest",
        }
    }

    /// Keys the command reads with their defaults; an empty default means
    /// the key is optional and unset.
    fn keys(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Command::U1Pool => &[
                ("d", "1"),
                ("protocol", "both"),
                ("p", ""),
                ("p_min", "0.2"),
                ("p_max", "0.3"),
                ("p_step", "0.01"),
                ("pool_size", "100000"),
                ("k_max", "300"),
                ("seed", "1"),
            ],
            Command::U1Classical => &[
                ("p", ""),
                ("p_min", "0.24"),
                ("p_max", "0.35"),
                ("p_step", "0.01"),
                ("pool_size", "100000"),
                ("k_max", "500"),
                ("seed", "1"),
            ],
            Command::KppVelocity => &[
                ("curve", "velocity"),
                ("family", "u1-d1"),
                ("p", "0.25"),
                ("theta1", "1.2"),
                ("theta2", ""),
                ("lambda_min", "0.05"),
                ("lambda_max", "1.5"),
                ("lambda_step", "0.05"),
                ("grid", "256"),
            ],
            Command::KppCritical => &[],
            Command::Su2Enum => &[
                ("theta1", ""),
                ("theta2", ""),
                ("grid", ""),
                ("p", "1"),
                ("k_max", "5"),
                ("budget", "20000000"),
            ],
            Command::Su2Replica => &[
                ("theta1", ""),
                ("theta2", ""),
                ("grid", "48"),
                ("p", "1"),
                ("n", "2"),
                ("k_max", "400"),
                ("asymmetry_output", ""),
            ],
            Command::Su2Forced => &[
                ("theta1", "0.7"),
                ("theta2", "1.9"),
                ("p", "0.5"),
                ("pool_size", "10000"),
                ("k_max", "50"),
                ("seed", "1"),
            ],
            Command::Selftest => &[("seed", "1")],
        }
    }
}

/// Keys accepted by every command.
const COMMON: &[&str] = &["output", "threads"];

pub const ALL_KEYS: &[&str] = &[
    "asymmetry_output",
    "budget",
    "curve",
    "d",
    "family",
    "grid",
    "k_max",
    "lambda_max",
    "lambda_min",
    "lambda_step",
    "n",
    "output",
    "p",
    "p_max",
    "p_min",
    "p_step",
    "pool_size",
    "protocol",
    "seed",
    "theta1",
    "theta2",
    "threads",
];

fn normalize_key(k: &str) -> String {
    k.trim().trim_start_matches("--").replace('-', "_")
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str, path: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            path: path.to_string(),
            line: i + 1,
            msg: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = normalize_key(k);
        if !ALL_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::Syntax { path: path.to_string(), line: i + 1, msg: format!("unknown key '{key}'") });
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.display().to_string(), msg: e.to_string() })?;
    parse_config_text(&text, &path.display().to_string())
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Layers `file` and then `flags` over the command's defaults. Keys a
    /// command does not read are rejected by name.
    pub fn resolve(
        command: Command,
        file: &[(String, String)],
        flags: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (k, v) in command.keys() {
            if !v.is_empty() {
                values.insert(k.to_string(), v.to_string());
            }
        }
        for (k, v) in file.iter().chain(flags) {
            let key = normalize_key(k);
            if !ALL_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key));
            }
            if !COMMON.contains(&key.as_str()) && !command.keys().iter().any(|(c, _)| *c == key) {
                return Err(ConfigError::NotApplicable { key, command: command.name() });
            }
            if v.is_empty() {
                values.remove(&key);
            } else {
                values.insert(key, v.clone());
            }
        }
        let cfg = Self { command, values };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn string(&self, key: &str) -> Result<String, ConfigError> {
        self.raw(key).map(str::to_string).ok_or_else(|| invalid(key, "required but not set"))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                let x: f64 = v.parse().map_err(|_| invalid(key, format!("'{v}' is not a number")))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(invalid(key, format!("'{v}' is not finite")))
                }
            })
            .transpose()
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.opt_f64(key)?.ok_or_else(|| invalid(key, "required but not set"))
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.raw(key)
            .map(|v| {
                // Accept `1e5`-style integers as well.
                v.parse::<usize>().or_else(|_| match v.parse::<f64>() {
                    Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e18 => Ok(x as usize),
                    _ => Err(invalid(key, format!("'{v}' is not a non-negative integer"))),
                })
            })
            .transpose()
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.opt_usize(key)?.ok_or_else(|| invalid(key, "required but not set"))
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        let v = self.string(key)?;
        v.parse().map_err(|_| invalid(key, format!("'{v}' is not a non-negative integer")))
    }

    /// `p` alone, or the inclusive scan `p_min, p_min + p_step, …, p_max`.
    pub fn p_values(&self) -> Result<Vec<f64>, ConfigError> {
        if let Some(p) = self.opt_f64("p")? {
            return Ok(vec![p]);
        }
        scan_values("p", self.f64("p_min")?, self.f64("p_max")?, self.f64("p_step")?)
    }

    pub fn lambda_values(&self) -> Result<Vec<f64>, ConfigError> {
        scan_values("lambda", self.f64("lambda_min")?, self.f64("lambda_max")?, self.f64("lambda_step")?)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let probability = |key: &str| -> Result<(), ConfigError> {
            if let Some(p) = self.opt_f64(key)? {
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(key, format!("{p} outside [0, 1]")));
                }
            }
            Ok(())
        };
        for key in ["p", "p_min", "p_max"] {
            probability(key)?;
        }
        if self.command.keys().iter().any(|(k, _)| *k == "p_min") && !self.is_set("p") {
            self.p_values()?;
        }
        if self.command == Command::KppVelocity {
            self.lambda_values()?;
        }
        if let Some(m) = self.opt_usize("pool_size")? {
            if m < 10 {
                return Err(invalid("pool_size", format!("{m} is below 10")));
            }
        }
        for key in ["d", "grid", "budget", "threads", "k_max"] {
            if let Some(v) = self.opt_usize(key)? {
                if v == 0 && key != "k_max" {
                    return Err(invalid(key, "must be positive"));
                }
            }
        }
        if let Some(n) = self.opt_usize("n")? {
            if !(2..=qtree::replica::MAX_REPLICAS).contains(&n) {
                return Err(invalid("n", format!("{n} outside 2..={}", qtree::replica::MAX_REPLICAS)));
            }
        }
        if self.is_set("seed") {
            self.u64("seed")?;
        }
        for key in ["theta1", "theta2"] {
            self.opt_f64(key)?;
        }
        if let Some(v) = self.raw("protocol") {
            if !["both", "purification", "sharpening"].contains(&v) {
                return Err(invalid("protocol", format!("'{v}' is not one of both, purification, sharpening")));
            }
        }
        if let Some(v) = self.raw("family") {
            if !["u1-d1", "u1-dinf", "su2"].contains(&v) {
                return Err(invalid("family", format!("'{v}' is not one of u1-d1, u1-dinf, su2")));
            }
        }
        if let Some(v) = self.raw("curve") {
            if !["velocity", "contour", "scaling"].contains(&v) {
                return Err(invalid("curve", format!("'{v}' is not one of velocity, contour, scaling")));
            }
        }
        if matches!(self.command, Command::Su2Enum | Command::Su2Replica) {
            let pair = (self.is_set("theta1"), self.is_set("theta2"));
            if pair.0 != pair.1 {
                let missing = if pair.0 { "theta2" } else { "theta1" };
                return Err(invalid(missing, "theta1 and theta2 must be given together"));
            }
            if self.command == Command::Su2Enum && !pair.0 && !self.is_set("grid") {
                return Err(invalid("grid", "set grid for a phase diagram or theta1/theta2 for a depth series"));
            }
        }
        Ok(())
    }

    /// Every resolved key except the thread count, which never changes
    /// the output.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![("subcommand".to_string(), self.command.name().to_string())];
        out.extend(self.values.iter().filter(|(k, _)| k.as_str() != "threads").map(|(k, v)| (k.clone(), v.clone())));
        out
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.echo() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Inclusive arithmetic grid; values are rounded to 12 decimals so that
/// printed scan points stay short.
pub fn scan_values(name: &str, lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, ConfigError> {
    let step_key = format!("{name}_step");
    if !(step > 0.0) {
        return Err(invalid(&step_key, format!("{step} must be positive")));
    }
    if hi < lo {
        return Err(invalid(&format!("{name}_max"), format!("range {lo}..{hi} is empty")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(invalid(&step_key, format!("{count} scan points is too many")));
    }
    Ok((0..count).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect())
}

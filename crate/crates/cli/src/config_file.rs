//! Line-oriented `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key may appear once;
//! `task` and `algorithm` are required, everything else falls back to the
//! library defaults.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sabc_core::{Algorithm, Driver, KernelKind, RunConfig};

/// A diagnostic pointing at a line and/or a field of the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, field: Option<&str>, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            field: field.map(str::to_string),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(field) = &self.field {
            write!(f, "field `{field}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

/// A parsed config file: the run settings plus the optional output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub run: RunConfig,
    pub out: Option<PathBuf>,
    /// Line on which each key was set, for pointing validation errors back at
    /// the file.
    lines: HashMap<String, usize>,
}

const KEYS: [&str; 16] = [
    "task",
    "algorithm",
    "particles",
    "updates",
    "v",
    "delta",
    "kernel",
    "gamma",
    "jitter",
    "seed",
    "workers",
    "driver",
    "eps_decay",
    "ess_threshold",
    "min_acceptance",
    "out",
];

fn number<T: FromStr>(line: usize, key: &str, raw: &str, what: &str) -> Result<T, ConfigError> {
    raw.parse()
        .map_err(|_| ConfigError::at(line, Some(key), format!("expected {what}, got `{raw}`")))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values: HashMap<String, (usize, String)> = HashMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::at(line, None, format!("expected `key = value`, got `{content}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::at(line, Some(key), "unknown key"));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line, Some(key), "missing value"));
            }
            if let Some((first, _)) = values.get(key) {
                return Err(ConfigError::at(
                    line,
                    Some(key),
                    format!("duplicate key, first set on line {first}"),
                ));
            }
            values.insert(key.to_string(), (line, value.to_string()));
        }

        let required = |key: &str| {
            values.get(key).cloned().ok_or_else(|| ConfigError {
                line: None,
                field: Some(key.to_string()),
                message: "required field is missing".into(),
            })
        };
        let (_, task) = required("task")?;
        let (alg_line, alg_raw) = required("algorithm")?;
        let algorithm = Algorithm::parse(&alg_raw).ok_or_else(|| {
            ConfigError::at(
                alg_line,
                Some("algorithm"),
                format!("expected one of sabc-single, sabc-multi, smc-abc, got `{alg_raw}`"),
            )
        })?;

        let mut run = RunConfig::new(&task, algorithm);
        let mut out = None;
        for (key, (line, raw)) in &values {
            let (line, raw) = (*line, raw.as_str());
            match key.as_str() {
                "task" | "algorithm" => {}
                "particles" => run.particles = number(line, key, raw, "a positive integer")?,
                "updates" => run.updates = number(line, key, raw, "a positive integer")?,
                "v" => run.v = number(line, key, raw, "a number")?,
                "delta" => run.delta = number(line, key, raw, "a number")?,
                "gamma" => run.gamma = Some(number(line, key, raw, "a number")?),
                "jitter" => run.jitter = number(line, key, raw, "a number")?,
                "seed" => run.seed = number(line, key, raw, "a non-negative integer")?,
                "workers" => run.workers = number(line, key, raw, "a positive integer")?,
                "eps_decay" => run.eps_decay = number(line, key, raw, "a number")?,
                "ess_threshold" => run.ess_threshold = number(line, key, raw, "a number")?,
                "min_acceptance" => run.min_acceptance = number(line, key, raw, "a number")?,
                "kernel" => {
                    run.kernel = match raw {
                        "differential-evolution" => KernelKind::DifferentialEvolution,
                        "gaussian-random-walk" => KernelKind::GaussianRandomWalk,
                        _ => {
                            return Err(ConfigError::at(
                                line,
                                Some(key),
                                format!(
                                    "expected differential-evolution or gaussian-random-walk, got `{raw}`"
                                ),
                            ))
                        }
                    }
                }
                "driver" => {
                    run.driver = match raw {
                        "serial" => Driver::Serial,
                        "parallel" => Driver::Parallel,
                        _ => {
                            return Err(ConfigError::at(
                                line,
                                Some(key),
                                format!("expected serial or parallel, got `{raw}`"),
                            ))
                        }
                    }
                }
                "out" => out = Some(PathBuf::from(raw)),
                _ => unreachable!("keys are checked against KEYS"),
            }
        }
        let lines = values.into_iter().map(|(k, (line, _))| (k, line)).collect();
        Ok(ConfigFile { run, out, lines })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            field: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// Checks the run settings, attributing failures to the offending line.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.run.validate().map_err(|e| {
            let message = match e {
                sabc_core::SabcError::Config(m) => m,
                other => other.to_string(),
            };
            match message.split_once(": ") {
                Some((field, rest)) if KEYS.contains(&field) => ConfigError {
                    line: self.lines.get(field).copied(),
                    field: Some(field.to_string()),
                    message: rest.to_string(),
                },
                _ => ConfigError {
                    line: None,
                    field: None,
                    message,
                },
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys_with_comments() {
        let text = "\
# GMM smoke run
task = gmm
algorithm = sabc-multi   # trailing comment
particles = 200
updates = 4000
v = 0.5
delta = 0.2
kernel = gaussian-random-walk
gamma = 0.8
jitter = 0
seed = 9
workers = 2
driver = serial
eps_decay = 0.8
ess_threshold = 0.3
min_acceptance = 0.01
out = results/gmm
";
        let cfg = ConfigFile::parse(text).unwrap();
        let r = &cfg.run;
        assert_eq!(r.task, "gmm");
        assert_eq!(r.algorithm, Algorithm::SabcMulti);
        assert_eq!((r.particles, r.updates, r.seed, r.workers), (200, 4000, 9, 2));
        assert_eq!((r.v, r.delta, r.gamma, r.jitter), (0.5, 0.2, Some(0.8), 0.0));
        assert_eq!(r.kernel, KernelKind::GaussianRandomWalk);
        assert_eq!(r.driver, Driver::Serial);
        assert_eq!((r.eps_decay, r.ess_threshold, r.min_acceptance), (0.8, 0.3, 0.01));
        assert_eq!(cfg.out, Some(PathBuf::from("results/gmm")));
        cfg.validate().unwrap();
    }

    #[test]
    fn missing_task_names_the_field() {
        let err = ConfigFile::parse("algorithm = smc-abc\n").unwrap_err();
        assert_eq!(err.field.as_deref(), Some("task"));
        assert!(err.to_string().contains("task"));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = ConfigFile::parse("task = gmm\n\nalgorithm sabc-multi\n").unwrap_err();
        assert_eq!(err.line, Some(3));

        let err = ConfigFile::parse("task = gmm\nalgorithm = sabc-multi\nparticles = lots\n").unwrap_err();
        assert_eq!((err.line, err.field.as_deref()), (Some(3), Some("particles")));

        let err = ConfigFile::parse("task = gmm\ncolour = red\n").unwrap_err();
        assert_eq!((err.line, err.field.as_deref()), (Some(2), Some("colour")));

        let err = ConfigFile::parse("task = gmm\ntask = sir\n").unwrap_err();
        assert!(err.message.contains("line 1"), "{err}");

        let err = ConfigFile::parse("task = gmm\nalgorithm = abc\n").unwrap_err();
        assert_eq!(err.field.as_deref(), Some("algorithm"));
    }

    #[test]
    fn validation_errors_point_at_the_line() {
        let cfg = ConfigFile::parse("task = gmm\nalgorithm = sabc-single\n\nparticles = 5\n").unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!((err.line, err.field.as_deref()), (Some(4), Some("particles")));

        let cfg = ConfigFile::parse("task = nowhere\nalgorithm = sabc-single\n").unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!((err.line, err.field.as_deref()), (Some(1), Some("task")));
    }
}

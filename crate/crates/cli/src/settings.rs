use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use yieldfusion::{Error, NutsConfig};

use crate::NutsArgs;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Diagnostic(String),
    Core(Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Diagnostic(_) => 3,
            CliError::Core(e) => match e {
                Error::DiagnosticFailure { .. }
                | Error::Initialization(_)
                | Error::StepSize(_)
                | Error::ZeroVariance(_)
                | Error::TooFewSamples { .. } => 3,
                _ => 2,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        if self.code() == 3 {
            "diagnostic"
        } else {
            "usage"
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Diagnostic(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Resolves every setting from explicit flag, then config file, then default,
/// and keeps a snapshot of the resolved values for the manifest.
pub struct Settings {
    command: String,
    file: Map<String, Value>,
    resolved: Map<String, Value>,
    started: Instant,
}

impl Settings {
    pub fn new(command: &str, config: Option<&Path>) -> CliResult<Self> {
        let file = match config {
            None => Map::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return Err(CliError::Usage(format!("config {} must hold a JSON object", p.display()))),
                    Err(e) => return Err(CliError::Usage(format!("config {}: {e}", p.display()))),
                }
            }
        };
        Ok(Settings { command: command.to_string(), file, resolved: Map::new(), started: Instant::now() })
    }

    pub fn pick<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T> {
        let v = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => serde_json::from_value(raw.clone()).map_err(|e| CliError::Usage(format!("config key {key}: {e}")))?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), serde_json::to_value(&v).expect("setting serializes"));
        Ok(v)
    }

    /// Record a value that has no flag or config entry.
    pub fn record<T: Serialize>(&mut self, key: &str, v: &T) {
        self.resolved.insert(key.to_string(), serde_json::to_value(v).expect("setting serializes"));
    }

    /// Fails on config keys no setting consumed.
    pub fn reject_unused(&self) -> CliResult<()> {
        let unused: Vec<&String> = self.file.keys().filter(|k| !self.resolved.contains_key(*k)).collect();
        if unused.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!("unknown config key(s) for {}: {unused:?}", self.command)))
        }
    }

    pub fn nuts(&mut self, a: &NutsArgs, seed: u64, reduced: bool) -> CliResult<NutsConfig> {
        let base = if reduced { NutsConfig::reduced(seed) } else { NutsConfig { seed, ..NutsConfig::default() } };
        let cfg = NutsConfig {
            n_chains: self.pick("chains", a.chains, base.n_chains)?,
            n_iter: self.pick("iter", a.iter, base.n_iter)?,
            n_warmup: self.pick("warmup", a.warmup, base.n_warmup)?,
            target_accept: self.pick("target_accept", a.target_accept, base.target_accept)?,
            max_tree_depth: self.pick("max_tree_depth", a.max_tree_depth, base.max_tree_depth)?,
            seed,
        };
        cfg.check().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn finish(self, seed: u64, outputs: &[PathBuf], manifest: &Path) -> CliResult<()> {
        let m = RunManifest {
            command: self.command,
            config: Value::Object(self.resolved),
            seed,
            version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        };
        std::fs::write(manifest, serde_json::to_string_pretty(&m).expect("manifest serializes"))?;
        Ok(())
    }
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

pub fn parse_list<T>(s: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| f(t).ok_or_else(|| CliError::Usage(format!("invalid {what}: {t:?}"))))
        .collect()
}

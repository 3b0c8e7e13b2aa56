//! Command-line front end: configuration, subcommand dispatch, report
//! emission and run manifests.

pub mod commands;
pub mod config;
pub mod emit;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use commands::{execute, Command, Flags, Outcome};
pub use config::{parse_config, Config, ConfigError};
pub use emit::{emit_reports, Report, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] snswitch::error::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("thread pool: {0}")]
    Threads(String),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix_ms: u128,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub subcommand: String,
    pub version: String,
    pub pass: bool,
    /// Relative to the output directory; the manifest itself is not listed.
    pub outputs: Vec<PathBuf>,
    /// The only nondeterministic field.
    pub wall_clock: WallClock,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub paths: Option<u64>,
    pub threads: Option<usize>,
    pub flags: Flags,
}

/// Reads and validates a config file; `None` means all defaults.
pub fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Ok(parse_config(&text)?)
        }
    }
}

/// Applies overrides, runs `cmd`, writes every report, the canonical
/// config and the manifest into `out`.
pub fn run(cmd: Command, mut cfg: Config, opts: RunOptions, out: &Path) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let started_unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(paths) = opts.paths {
        commands::set_paths(&mut cfg, cmd, paths);
    }
    cfg.validate()?;
    let outcome = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Threads(e.to_string()))?
            .install(|| execute(cmd, &cfg, opts.flags))?,
        None => execute(cmd, &cfg, opts.flags)?,
    };
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut outputs = emit_reports(&outcome.reports, out).map_err(|e| CliError::io(out, e))?;
    fs::write(out.join(CONFIG_FILE), cfg.canonical()).map_err(|e| CliError::io(out, e))?;
    outputs.push(PathBuf::from(CONFIG_FILE));
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        subcommand: cmd.name().to_string(),
        version: VERSION.to_string(),
        pass: outcome.pass,
        outputs,
        wall_clock: WallClock {
            started_unix_ms,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        },
    };
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, emit::to_json(&manifest) + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}

//! Config-driven runs of the `glueflow-core` analyses, with TOML configs,
//! a plain-text mesh format and JSON/CSV/sparse-triplet reports.
pub mod config;
pub mod error;
pub mod mesh_io;
pub mod report;
pub mod tasks;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::json;

pub use error::RunError;
use report::{sha256_hex, InputFile, Reporter};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    /// Overrides the config's `output`.
    pub out: Option<PathBuf>,
    /// Worker cap; defaults to the available parallelism.
    pub threads: Option<usize>,
    /// Overrides the config's `seed`.
    pub seed: Option<u64>,
}

/// Output directory used when neither the config nor the flags name one.
pub const DEFAULT_OUT: &str = "glueflow-out";

/// What a finished or failed run left behind.
#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: Option<PathBuf>,
    pub result: Result<(), RunError>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        self.result.as_ref().map_or_else(RunError::exit_code, |_| error::EXIT_OK)
    }
}

/// Loads, validates and runs one config. Reports go to the output
/// directory; `metadata.json` records timing and status even when the
/// task fails after the directory was created.
pub fn run(opts: &RunOptions) -> RunOutcome {
    let started = Instant::now();
    let (mut cfg, _) = match config::load(&opts.config) {
        Ok(c) => c,
        Err(e) => return RunOutcome { out_dir: None, result: Err(e) },
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let out_dir = opts.out.clone().unwrap_or_else(|| PathBuf::from(cfg.output.as_deref().unwrap_or(DEFAULT_OUT)));
    let base = opts.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let threads = opts.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);

    let prepared = (|| {
        let (space, files) = cfg.space_spec(&base)?;
        let inputs = cfg
            .space
            .pieces
            .iter()
            .filter_map(|p| p.path.clone())
            .zip(&files)
            .map(|(path, file)| {
                let bytes = std::fs::read(file).map_err(|e| RunError::Config(format!("{}: {e}", file.display())))?;
                Ok(InputFile { path, sha256: sha256_hex(&bytes) })
            })
            .collect::<Result<Vec<_>, RunError>>()?;
        let out = Reporter::create(&out_dir)?;
        Ok::<_, RunError>((space, inputs, out))
    })();
    let (space, inputs, out) = match prepared {
        Ok(p) => p,
        Err(e) => return RunOutcome { out_dir: None, result: Err(e) },
    };

    let resolved = cfg.resolved();
    let config_json = serde_json::to_value(&resolved).expect("config serialises");
    let config_sha256 = sha256_hex(serde_json::to_string(&config_json).expect("JSON value serialises").as_bytes());
    let mut ctx = tasks::Context {
        config: &resolved,
        space,
        seed: resolved.seed,
        threads,
        out,
        config_json,
        config_sha256,
        inputs,
    };
    let result = tasks::dispatch(&mut ctx);

    let unix_time = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let meta = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "task": resolved.task.name(),
        "config_path": opts.config.display().to_string(),
        "config_sha256": ctx.config_sha256,
        "unix_time": unix_time,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
        "threads": threads,
        "status": match &result { Ok(()) => "ok".to_string(), Err(e) => e.to_string() },
        "exit_code": result.as_ref().map_or_else(RunError::exit_code, |_| error::EXIT_OK),
        "files": ctx.out.written(),
    });
    let result = result.and(ctx.out.json("metadata.json", &meta));
    RunOutcome { out_dir: Some(out_dir), result }
}

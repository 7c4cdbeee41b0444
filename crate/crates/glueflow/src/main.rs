use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Run one glueflow experiment config.
///
/// Exit codes: 0 success, 1 output not writable, 2 config error,
/// 3 hypothesis violation, 4 numeric failure.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum worker threads.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { glueflow::error::EXIT_CONFIG } else { 0 });
        }
    };
    let opts = glueflow::RunOptions {
        config: cli.config,
        out: cli.out,
        threads: cli.threads.map(|t| t as usize),
        seed: cli.seed,
    };
    let outcome = glueflow::run(&opts);
    match (&outcome.result, &outcome.out_dir) {
        (Ok(()), Some(dir)) => eprintln!("glueflow: reports in {}", dir.display()),
        (Ok(()), None) => {}
        (Err(e), _) => eprintln!("glueflow: {e}"),
    }
    ExitCode::from(outcome.exit_code())
}

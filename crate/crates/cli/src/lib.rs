//! Command-line driver: argument and config handling, per-command
//! orchestration, CSV/SVG report emission and run manifests.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;
pub mod report;
pub mod svg;
pub mod tables;

use error::exit;

/// Parse `argv`, run the command and return the process exit code.
pub fn run_main(argv: Vec<String>) -> i32 {
    let cli = match args::parse(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match commands::dispatch(&cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

//! `domnet`: generate labeled graph datasets, train and evaluate surrogate
//! models, and reproduce the accuracy, ablation, runtime, and cross-domain
//! experiments.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or parameter error,
//! 3 data or integrity error, 4 resource or budget error. Failures print a
//! single JSON line `{"error": kind, "message": text}` on stderr. Log
//! verbosity comes from `DOMNET_LOG` (e.g. `DOMNET_LOG=info`).

mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::Command;

#[derive(Parser)]
#[command(name = "domnet", version, about = "Exact and learned domination numbers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DOMNET_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => return fail("usage", 2, &e.to_string()),
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = classify(&e);
            fail(kind, code, &format!("{e:#}"))
        }
    }
}

fn fail(kind: &str, code: u8, message: &str) -> ExitCode {
    let message = message
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn classify(e: &anyhow::Error) -> (&'static str, u8) {
    use domnet::Error as E;
    let Some(err) = e.chain().find_map(|c| c.downcast_ref::<E>()) else {
        return ("internal", 1);
    };
    match err {
        E::Parameter(_) => ("usage", 2),
        E::Index { .. } | E::Parse { .. } | E::Integrity(_) | E::Json(_) | E::Shape { .. } => ("data", 3),
        E::Io { .. } => ("io", 3),
        E::Budget { .. } | E::SizeGuard { .. } | E::Diverged { .. } => ("resource", 4),
        E::Contract(_) => ("internal", 1),
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use mdng::cli::{parse_config, run};

/// Run a mirror-descent / natural-gradient experiment described by a config file.
#[derive(Parser, Debug)]
#[command(name = "mdng", version)]
struct Args {
    /// Path to a `key=value` config file.
    config: PathBuf,
    /// Output prefix; a directory or a filename prefix.
    #[arg(long)]
    out: Option<String>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(errs) => {
            for e in errs {
                eprintln!("error: {e}");
            }
            return ExitCode::from(2);
        }
    };
    match run(&config, args.out.as_deref()) {
        Ok(outcome) => {
            if !args.quiet {
                print!("{}", outcome.summary);
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

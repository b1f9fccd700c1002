mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::{run, Failure};
use config::{expand_config, Cli};

fn write_file(path: &std::path::Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let config = cli.command;
    let result = run(&config).and_then(|out| {
        match config.out() {
            Some(path) => write_file(path, &out.main)?,
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(out.main.as_bytes())
                    .and_then(|_| stdout.flush())
                    .map_err(|e| Failure::Config(format!("cannot write output: {e}")))?;
            }
        }
        for (path, text) in &out.side {
            write_file(path, text)?;
        }
        out.failure.map_or(Ok(()), Err)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

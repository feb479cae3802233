mod args;
mod commands;
mod output;

use std::fs;
use std::process::ExitCode;

use clap::Parser;
use selfsim_core::Error;

use args::{Cli, Command};
use output::{error_json, Envelope};

const EXIT_USAGE: u8 = 1;
const EXIT_COMPUTATION: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let envelope: Envelope = match &cli.command {
        Command::Validate(a) => commands::validate(a)?,
        Command::Dims(a) => commands::dims(a)?,
        Command::Project(a) => commands::project(a)?,
        Command::Sweep(a) => commands::sweep(a)?,
        Command::Spectrum(a) => commands::spectrum(a)?,
        Command::Sobolev(a) => commands::sobolev(a)?,
        Command::Slice(a) => commands::slice(a)?,
        Command::Conserve(a) => commands::conserve(a)?,
        Command::Sets(a) => commands::sets(a)?,
        Command::VerifyAll(a) => {
            let report = commands::verify_all(a)?;
            for line in report.summary_lines() {
                eprintln!("{line}");
            }
            let text = serde_json::to_string_pretty(&report)? + "\n";
            match &a.report {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
            return Ok(if report.all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ACCEPTANCE)
            });
        }
    };
    print_json(&envelope)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            println!("{}", error_json(&e));
            ExitCode::from(EXIT_COMPUTATION)
        }
    }
}

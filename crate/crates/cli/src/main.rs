mod args;
mod commands;
mod config;

use std::process::ExitCode;

use commands::UsageError;
use config::Parsed;

fn main() -> ExitCode {
    let cli = match config::parse(std::env::args_os().collect()) {
        Parsed::Ok(cli) => cli,
        Parsed::Usage(e) => e.exit(),
        Parsed::Data(e) => {
            report(&e);
            return ExitCode::from(1);
        }
    };
    match commands::run(*cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// Prints the error chain, skipping causes whose text the previous message
/// already ends with.
fn report(e: &anyhow::Error) {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.ends_with(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    eprintln!("error: {msg}");
}

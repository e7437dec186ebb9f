//! `--config` support. Each `key = value` line becomes `--key value`, spliced
//! in directly after the subcommand name unless the command line already
//! names that flag.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{CommandFactory, FromArgMatches};

use crate::args::Cli;

/// Parses `key = value` lines. `#` starts a comment; underscores in keys are
/// read as dashes; a value may hold several whitespace-separated items.
pub fn read_config(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", path.display(), n + 1);
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            bail!("{}:{}: empty key", path.display(), n + 1);
        }
        entries.push((key, value.trim().to_string()));
    }
    Ok(entries)
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(tok) = it.next() {
        let tok = tok.to_string_lossy();
        if tok == "--" {
            break;
        }
        if tok == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = tok.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn subcommand_position(argv: &[OsString]) -> Option<usize> {
    let cmd = Cli::command();
    argv.iter().enumerate().skip(1).find_map(|(i, tok)| {
        let tok = tok.to_str()?;
        cmd.find_subcommand(tok).map(|_| i)
    })
}

pub enum Parsed {
    Ok(Box<Cli>),
    Usage(clap::Error),
    Data(anyhow::Error),
}

fn try_parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let matches = Cli::command().args_override_self(true).try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches)
}

/// Parses `argv`, folding in the `--config` file when one is named.
pub fn parse(argv: Vec<OsString>) -> Parsed {
    let (Some(path), Some(at)) = (config_path(&argv), subcommand_position(&argv)) else {
        return match try_parse(argv) {
            Ok(c) => Parsed::Ok(Box::new(c)),
            Err(e) => Parsed::Usage(e),
        };
    };
    let entries = match read_config(&path) {
        Ok(e) => e,
        Err(e) => return Parsed::Data(e),
    };
    let given = |key: &str| {
        let flag = format!("--{key}");
        let prefix = format!("--{key}=");
        argv.iter()
            .filter_map(|t| t.to_str())
            .any(|t| t == flag || t.starts_with(&prefix))
    };
    let mut spliced: Vec<OsString> = argv[..=at].to_vec();
    for (key, value) in entries.iter().filter(|(k, _)| k != "config" && !given(k)) {
        spliced.push(format!("--{key}").into());
        spliced.extend(value.split_whitespace().map(OsString::from));
    }
    spliced.extend_from_slice(&argv[at + 1..]);
    match try_parse(spliced) {
        Ok(c) => Parsed::Ok(Box::new(c)),
        Err(e) => Parsed::Usage(e),
    }
}

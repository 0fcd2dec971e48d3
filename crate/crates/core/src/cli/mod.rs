//! Command-line front end. Every subcommand is a thin adapter over the
//! library; see [`run_command`].
//!
//! Exit codes: 0 on success, 2 for usage and precondition errors, 1 for
//! I/O failures. Diagnostics are a single line on stderr.

mod args;
mod commands;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::Cli;

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "DCTK_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses `argv` (program name first) and runs the command, writing
/// results to stdout and diagnostics to stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_output(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with_output<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return EXIT_OK;
                }
                _ => EXIT_USAGE,
            };
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "{first}");
            return code;
        }
    };
    match run_cli(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.to_string().replace('\n', " "));
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_IO
            }
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::param("threads", format!("{THREADS_ENV}=`{v}` is not a count"))),
        Err(_) => Ok(0),
    }
}

fn run_cli(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let threads = thread_count(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::param("threads", e.to_string()))?;
    // Output is buffered so the command can run inside the pool.
    let (res, o, e) = pool.install(|| {
        let mut o = Vec::new();
        let mut e = Vec::new();
        let res = commands::dispatch(cli.command, &mut o, &mut e);
        (res, o, e)
    });
    out.write_all(&o)?;
    err.write_all(&e)?;
    res
}

/// Formats with at least 9 significant digits, in scientific notation
/// outside `[1e-4, 1e9)`.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00000000".to_string();
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..9).contains(&e) {
        format!("{:.*}", (8 - e) as usize, x)
    } else {
        format!("{x:.8e}")
    }
}

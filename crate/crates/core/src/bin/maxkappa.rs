use std::io::Write;
use std::process::ExitCode;

use maxkappa::cli::{error_json, run};

fn main() -> ExitCode {
    let (text, code) = match run(std::env::args_os()) {
        Ok(out) => (out.to_string(), ExitCode::SUCCESS),
        Err(e) => (error_json(&e).to_string(), ExitCode::FAILURE),
    };
    // A closed pipe downstream is not an error worth reporting.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    code
}

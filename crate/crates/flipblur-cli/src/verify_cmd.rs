//! The `verify` subcommand: run the library's consistency checks and
//! print one line per check.

use crate::config::CliError;

pub fn run() -> Result<(), CliError> {
    let results = flipblur_core::verify::run_all();
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut failed = 0usize;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status}  {:width$}  {}", r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    println!("{} checks, {} failed", results.len(), failed);
    if failed > 0 {
        return Err(CliError::Verification(format!(
            "{failed} consistency check(s) failed"
        )));
    }
    Ok(())
}

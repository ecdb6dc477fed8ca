//! Runs the full verification suite and prints one line per criterion.
//! Uses its own harness so the lines are shown even when everything passes.

use std::process::ExitCode;

use canfield::acceptance::verify_all;
use canfield::report::DEFAULT_SEED;

fn main() -> ExitCode {
    let report = match verify_all(DEFAULT_SEED) {
        Ok((report, _)) => report,
        Err(e) => {
            eprintln!("acceptance instances failed to load: {e}");
            return ExitCode::FAILURE;
        }
    };
    for c in &report.criteria {
        println!("{}", c.line());
        for m in c.failures() {
            println!("      {}", m.describe());
        }
    }
    let passed = report.criteria.iter().filter(|c| c.pass).count();
    println!("acceptance: {passed} of {} criteria passed", report.criteria.len());
    if report.criteria.len() == 10 && report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

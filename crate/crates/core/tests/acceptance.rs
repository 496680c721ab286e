//! Runs the full verification suite at its default size and prints one line
//! per criterion. Exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use covgame::verify::{run_verify, Status, VerifyConfig};

fn main() -> ExitCode {
    let start = Instant::now();
    let result = match run_verify(&VerifyConfig::default()) {
        Ok(r) => r,
        Err(e) => {
            println!("acceptance suite could not start: {e}");
            return ExitCode::FAILURE;
        }
    };
    for check in &result.checks {
        println!("{} [{:.2}s]", check.line(), check.seconds);
    }
    let failed = result.checks.iter().filter(|c| c.status == Status::Fail).count();
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        result.checks.len() - failed,
        result.checks.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

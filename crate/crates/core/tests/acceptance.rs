//! Runs every acceptance criterion and prints one line per criterion.

use std::process::ExitCode;

use weingarten_core::verify::{run_criterion, CRITERIA};

const SEED: u64 = 20_241_014;

fn main() -> ExitCode {
    let mut failed = 0;
    for &(id, _) in &CRITERIA {
        let result = run_criterion(id, SEED);
        println!("{result}");
        if !result.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", CRITERIA.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::process::ExitCode;

use squatcalc_core::acceptance::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    println!("\nrunning {} acceptance criteria", CRITERIA.len());
    let mut failed = Vec::new();
    for (id, _) in CRITERIA {
        let outcome = run_criterion(id).expect("known criterion");
        println!("{outcome}");
        if !outcome.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed\n", CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}\n");
        ExitCode::FAILURE
    }
}

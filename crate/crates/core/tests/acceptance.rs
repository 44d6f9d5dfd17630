//! Runs every acceptance criterion at its stated tolerance and prints one
//! line per criterion. Built without the libtest harness so the lines are
//! always shown and the wall-clock budgets are not shared with other tests.

use std::process::ExitCode;

use schwarz_core::suite::{run_suite, SuiteConfig, CRITERIA};

fn main() -> ExitCode {
    let reports = run_suite("full", &SuiteConfig::default()).expect("full suite");
    assert_eq!(reports.len(), CRITERIA.len());
    for report in &reports {
        println!("{report}");
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        println!("acceptance: {} of {} criteria passed", reports.len(), reports.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}

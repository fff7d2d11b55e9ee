//! Runs every acceptance criterion at full resolution and prints one line each.
//! Exits nonzero if any criterion fails.

use multibump_cli::validate::{run_suite_with, ValidateOptions};

fn main() {
    let opts = ValidateOptions {
        quick: false,
        cache_dir: None,
    };
    let outcomes = run_suite_with(&opts, |o| println!("{}", o.summary_line()));
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.id).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if !failed.is_empty() {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}

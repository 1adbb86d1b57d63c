//! Run the acceptance suite and print the consolidated table.
//!
//! `cargo run --release --example acceptance_suite -- 0.1` runs at a tenth
//! of the reference sample sizes.

use std::time::Instant;

use bpre::acceptance::{report, run_all, SuiteOptions};

fn main() -> bpre::Result<()> {
    let scale = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.02);
    let opts = SuiteOptions { scale, ..SuiteOptions::default() };
    let start = Instant::now();
    let outcomes = run_all(&opts)?;
    for o in &outcomes {
        println!("{}", o.row.line());
    }
    let rows: Vec<_> = outcomes.into_iter().map(|o| o.row).collect();
    let (table, code) = report(&rows);
    print!("{table}");
    println!("exit code {code}, {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

//! Runs the twelve acceptance criteria on the four reference parameter sets
//! and prints one line per criterion.

use crownwave::fixtures::{fixture_dir, FixtureSet};
use crownwave::verify::{acceptance_params, fixture_integrity, run_all, VerifyConfig};

#[test]
fn acceptance_criteria() {
    let fixtures = FixtureSet::load(&fixture_dir()).expect("shipped fixtures load");
    let integrity = fixture_integrity(&fixtures);
    for c in &integrity {
        println!(
            "fixtures: {} = {:e} (tolerance {:e}) {}",
            c.name,
            c.value,
            c.tolerance,
            if c.pass { "ok" } else { "FAILED" }
        );
    }
    assert!(integrity.iter().all(|c| c.pass), "fixture integrity");

    let reports = run_all(&VerifyConfig::new(acceptance_params(), fixtures));
    assert_eq!(reports.len(), 12);
    let mut failed = Vec::new();
    for r in &reports {
        println!("{}", r.summary_line());
        for c in r.failures() {
            println!("    failed: {} = {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
        }
        if !r.pass() {
            failed.push(r.id);
        }
    }
    assert!(failed.is_empty(), "criteria failing: {failed:?}");
}

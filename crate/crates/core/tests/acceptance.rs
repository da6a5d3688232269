//! One line per acceptance criterion; fails if any criterion fails.

use kapdeg::acceptance::{run_criterion, CRITERIA, DEFAULT_SEED};

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for criterion in CRITERIA {
        let outcome = run_criterion(criterion.id, DEFAULT_SEED);
        println!("{outcome}");
        if !outcome.passed {
            failed.push(criterion.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

//! The acceptance suite: every verified claim runs at its pinned tolerance
//! and prints one PASS/FAIL line (visible with `--nocapture`). The final
//! criterion re-runs the suite with the same seed and compares the
//! serialized reports byte for byte.
//!
//! Run with: cargo test -p finred-core --release --test acceptance -- --nocapture

use finred_core::verification;

#[test]
fn acceptance_suite() {
    let results = verification::run_all(0);
    assert_eq!(results.len(), 11);
    let mut failed = Vec::new();
    for r in &results {
        println!("{}", r.line());
        if !r.passed {
            failed.push(format!(
                "{}\n    details: {}",
                r.line(),
                serde_json::to_string_pretty(&r.details).unwrap()
            ));
        }
    }
    assert!(
        failed.is_empty(),
        "{} criteria failed:\n{}",
        failed.len(),
        failed.join("\n")
    );
}

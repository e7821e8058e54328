//! The acceptance battery at the stated tolerances and budgets. Prints one
//! PASS/FAIL line per criterion.

use leastbias_cli::suite::{criterion_ids, run_suite, Fault, SuiteOptions};

#[test]
fn every_criterion_passes() {
    let report = run_suite(0, &SuiteOptions::default());
    for line in report.lines() {
        println!("{line}");
    }
    let ids: Vec<&str> = report.results.criteria.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids, criterion_ids());
    assert!(report.passed(), "failed: {:?}", report.failures());
}

#[test]
fn flipped_stencil_fails_box_energy() {
    let report = run_suite(0, &SuiteOptions { fault: Some(Fault::FlippedLaplacian) });
    let failures = report.failures();
    println!("negative control failures: {failures:?}");
    assert_eq!(failures, vec!["ground_states".to_string()]);
    let row = report.results.criteria.iter().find(|c| c.id == "ground_states").unwrap();
    let boxed = row.checks.iter().find(|k| k.name == "box_relative_error").unwrap();
    assert!(!boxed.passed);
    assert!(row.checks.iter().filter(|k| !k.name.starts_with("box")).all(|k| k.passed));
}

//! Exit criteria. Each test prints one `[PASS]`/`[FAIL]` line to stdout
//! (written past the test harness capture) and fails on `[FAIL]`.

use std::io::Write;
use std::sync::OnceLock;

use chainsense::acceptance::{self, Check};
use chainsense::commands::{compute_scaling, ScalingReport};
use chainsense::RunConfig;

fn gate(check: Check) {
    let _ = writeln!(std::io::stdout().lock(), "{check}");
    assert!(check.passed, "{check}");
}

fn table_sweep() -> &'static ScalingReport {
    static REPORT: OnceLock<ScalingReport> = OnceLock::new();
    REPORT.get_or_init(|| compute_scaling(&RunConfig::table1_preset(), false).expect("sweep runs"))
}

#[test]
fn criterion_01_time_exponents() {
    gate(acceptance::time_exponents(table_sweep()));
}

#[test]
fn criterion_02_field_exponent_stability() {
    gate(acceptance::field_exponent_stability(table_sweep()));
}

#[test]
fn criterion_03_posterior_narrowing() {
    gate(acceptance::posterior_narrowing());
}

#[test]
fn criterion_04_oracle_equivalence() {
    gate(acceptance::oracle_equivalence());
}

#[test]
fn criterion_05_branch_completeness() {
    gate(acceptance::branch_completeness());
}

#[test]
fn criterion_06_eigenstate_invariance() {
    gate(acceptance::eigenstate_invariance());
}

#[test]
fn criterion_07_two_level_rabi() {
    gate(acceptance::two_level_rabi());
}

#[test]
fn criterion_08_posterior_calculus() {
    gate(acceptance::posterior_calculus());
}

#[test]
fn criterion_09_time_budget_identity() {
    gate(acceptance::time_budget_identity());
}

#[test]
fn criterion_10_synthetic_round_trip() {
    gate(acceptance::synthetic_round_trip());
}

//! Condensed steps against the full, uncondensed stage solve.

#[path = "common/oracle.rs"]
mod oracle;

#[test]
fn condensed_step_matches_full_stage_solve() {
    let worst = oracle::run(240, 1e-12).unwrap_or_else(|e| panic!("{e}"));
    println!("worst relative difference {worst:e}");
}

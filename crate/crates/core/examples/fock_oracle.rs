//! Cross-check of the sphere calculus against an explicit two-mode Fock-space
//! density matrix.

use phaselab::fock::{oracle_suite, required_truncation, OracleSettings};

fn main() -> phaselab::Result<()> {
    let settings = OracleSettings::default();
    for r in &settings.r_values {
        println!("R = {r}: Fock truncation N_max = {}", required_truncation(*r));
    }
    let report = oracle_suite(&settings)?;
    for c in &report.checks {
        println!(
            "{:<28} {:4} cases  max deviation {:.2e}  {}",
            c.name,
            c.cases,
            c.max_deviation,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    Ok(())
}

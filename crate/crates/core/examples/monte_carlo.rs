//! Sampled detection histories compared with the exact count and partition laws.

use std::f64::consts::PI;

use phaselab::detstat::{partition_table, SourceParams};
use phaselab::trajectory::{chi_square_poisson, run_ensemble, total_variation, TrajectoryConfig};
use phaselab::{DetectorSetup, PhaseDistribution};

fn main() -> phaselab::Result<()> {
    let setup = DetectorSetup::TwoBeamSplitters { xi: PI / 2.0 };
    let source = SourceParams::new(2.0, 1.0, 3.0)?;
    let ensemble = run_ensemble(&TrajectoryConfig::new(source, setup, 7), 5000)?;

    let chi = chi_square_poisson(&ensemble.count_histogram(), source.mean_count())?;
    println!(
        "detection counts: mean {:.3}, chi-square {:.2} on {} dof, p = {:.3}",
        source.mean_count(),
        chi.statistic,
        chi.dof,
        chi.p_value
    );

    let channels = setup.channels()?;
    let dist0 = PhaseDistribution::uniform_ring();
    for l in 1..=6 {
        let empirical = ensemble.partition_counts(l);
        let n: u64 = empirical.values().sum();
        if n == 0 {
            continue;
        }
        let tv = total_variation(&empirical, &partition_table(&dist0, &channels, l, None)?);
        println!("L = {l}: {n:4} histories, total variation {tv:.4} (5/sqrt(n) = {:.4})", 5.0 / (n as f64).sqrt());
    }
    Ok(())
}

//! Balanced four-channel distribution at L = 40, ξ = π/2, printed as a
//! coarse heat map over (n1, n3).

use std::f64::consts::PI;

use phaselab::detstat::{most_probable_partitions, partition_table, PartitionConstraint, TIE_TOLERANCE};
use phaselab::{DetectorSetup, PhaseDistribution};

fn main() -> phaselab::Result<()> {
    let l = 40;
    let channels = DetectorSetup::TwoBeamSplitters { xi: PI / 2.0 }.channels()?;
    let dist0 = PhaseDistribution::uniform_ring();
    let constraint = PartitionConstraint::balanced_beam_splitters(l)?;
    let table = partition_table(&dist0, &channels, l, Some(&constraint))?;
    let top = table.iter().map(|(lp, _)| *lp).fold(f64::NEG_INFINITY, f64::max);

    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    let mut grid = vec![vec![' '; 21]; 21];
    for (lp, part) in &table {
        let rel = (lp - top).exp();
        let shade = shades[((rel * 9.0).round() as usize).min(9)];
        grid[part.counts[0] as usize][part.counts[2] as usize] = shade;
    }
    println!("rows n1 = 0..20, columns n3 = 0..20");
    for row in grid {
        println!("|{}|", row.into_iter().collect::<String>());
    }

    let best = most_probable_partitions(&dist0, &channels, l, Some(&constraint), TIE_TOLERANCE)?;
    println!("maximum p = {:.6e} at", best.prob());
    for p in &best.partitions {
        println!("  {p}");
    }
    Ok(())
}

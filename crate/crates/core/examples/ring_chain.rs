//! Most probable detection partitions on a ring of three condensates.
//!
//! Run with `cargo run --release --example ring_chain`.

use std::f64::consts::PI;
use std::time::Instant;

use phaselab::detstat::{chain_most_probable_partitions, ChainConfig, SourceParams, Topology, TIE_TOLERANCE};
use phaselab::trajectory::{chain_trajectory, Policy, TimeSchedule, TrajectoryConfig};

fn main() -> phaselab::Result<()> {
    let cfg = ChainConfig::new(3, Topology::Circular, vec![0.0, 0.0, PI / 2.0])?;
    let start = Instant::now();
    let best = chain_most_probable_partitions(&cfg, 30, TIE_TOLERANCE)?;
    println!(
        "L = 30, max probability {:.6e}, {} co-maximal partitions ({:.2?})",
        best.log_prob.exp(),
        best.partitions.len(),
        start.elapsed()
    );
    for p in &best.partitions {
        println!("  {p}");
    }
    if best.outside_orbit.is_empty() {
        println!("all maxima are swap/permutation images of each other");
    } else {
        println!("maxima outside the symmetry orbit:");
        for p in &best.outside_orbit {
            println!("  {p}");
        }
    }

    let greedy = TrajectoryConfig::chain(SourceParams::new(6.0, 1.0, 1.0)?, cfg, 1)
        .with_policy(Policy::MostProbable)
        .with_schedule(TimeSchedule::FixedUniform { count: 30, window: 1.0 });
    let run = chain_trajectory(&greedy)?;
    let end = run.final_state.as_chain().expect("chain setup").partition();
    println!(
        "greedy 30-detection history ends in {end} ({})",
        if best.contains(&end) { "co-maximal" } else { "not co-maximal" }
    );
    Ok(())
}

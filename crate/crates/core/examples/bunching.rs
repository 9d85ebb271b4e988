//! Two-channel marginal for a uniform ring phase versus the closed form,
//! and the point-phase binomial law for comparison.

use std::f64::consts::PI;

use phaselab::detstat::{partition_prob, two_channel_marginal, two_channel_uniform_closed_form, Partition};
use phaselab::{BaseMeasure, DetectorSetup, PhaseDistribution};

fn main() -> phaselab::Result<()> {
    let m = 12;
    let channels = DetectorSetup::TwoBeamSplitters { xi: 0.6 }.channels()?;
    let ring = PhaseDistribution::uniform_ring();
    let point = PhaseDistribution::new(BaseMeasure::Point { theta0: PI / 2.0, phi0: PI / 4.0 })?;
    let single = DetectorSetup::SingleBeamSplitter { xi: 0.0 }.channels()?;

    println!("n1  ring (computed)  ring (closed form)  fixed phase π/4");
    for n1 in 0..=m {
        let got = two_channel_marginal(&ring, &channels, n1, m - n1)?;
        let fixed = partition_prob(&point, &single, &Partition::new(vec![n1, m - n1]))?;
        println!(
            "{n1:2}  {got:15.10}  {:18.10}  {fixed:15.10}",
            two_channel_uniform_closed_form(m, n1)
        );
    }
    Ok(())
}

//! A tunneling pulse of area δτ in front of direct detection. At δτ = π/2 the
//! counts follow the beam-splitter law; at δτ = 0 they are binomial.

use std::f64::consts::PI;

use phaselab::detstat::{partition_prob, two_channel_uniform_closed_form, Partition};
use phaselab::{CouplingSpec, DetectorSetup, PhaseDistribution};

fn main() -> phaselab::Result<()> {
    let m = 10;
    let dist0 = PhaseDistribution::uniform_ring();
    for area in [0.0, PI / 8.0, PI / 4.0, PI / 2.0] {
        let coupling = CouplingSpec::pulsed(1.0, area)?;
        let channels = DetectorSetup::Pulsed { coupling }.channels()?;
        let mut worst: f64 = 0.0;
        let mut row = Vec::new();
        for n1 in 0..=m {
            let p = partition_prob(&dist0, &channels, &Partition::new(vec![n1, m - n1]))?;
            worst = worst.max((p - two_channel_uniform_closed_form(m, n1)).abs());
            row.push(format!("{p:.4}"));
        }
        println!("δτ = {area:.4}: [{}]  max |Δ| vs beam splitter {worst:.2e}", row.join(" "));
    }
    Ok(())
}

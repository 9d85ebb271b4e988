//! Phase peaks after ten detections with the modes coupled by tunneling,
//! with and without an energy offset between them.
//!
//! Run with `cargo run --release --example coupled_peaks`.

use std::f64::consts::PI;

use phaselab::detstat::SourceParams;
use phaselab::trajectory::{run_ensemble, Policy, TimeSchedule, TrajectoryConfig};
use phaselab::{CouplingSpec, DetectorSetup};

fn main() -> phaselab::Result<()> {
    let delta = 1.0;
    let source = SourceParams::new(3.0, 1.0, 2.0 * PI / delta)?;
    for epsilon in [0.0, 0.25 * delta] {
        let coupling = CouplingSpec::continuous(delta, epsilon)?;
        let cfg = TrajectoryConfig::new(source, DetectorSetup::Continuous { coupling }, 2024)
            .with_policy(Policy::MostProbable)
            .with_schedule(TimeSchedule::FixedUniform {
                count: 10,
                window: 2.0 * PI / delta,
            });
        let ensemble = run_ensemble(&cfg, 50)?;
        let peaks = ensemble.peaks()?;
        let phis: Vec<f64> = peaks.iter().filter_map(|p| p.peak_phi).collect();
        let mean = phis.iter().sum::<f64>() / phis.len() as f64;
        let sd = (phis.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (phis.len() - 1) as f64).sqrt();
        let multi = peaks.iter().filter(|p| p.peaks != 1).count();
        println!("epsilon/delta = {:.2}: {} runs, peak sd {sd:.4} rad, {multi} with several peaks", epsilon / delta, phis.len());
        for p in peaks.iter().take(8) {
            println!("  run {:2}: peak at {:.4} rad (height {:.3})", p.traj_id, p.peak_phi.unwrap_or(f64::NAN), p.peak_height.unwrap_or(f64::NAN));
        }
    }
    Ok(())
}

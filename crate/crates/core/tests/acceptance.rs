//! Acceptance checks. Each prints one PASS/FAIL line; the process fails if
//! any check fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use phaselab::detstat::{
    chain_most_probable_partitions, most_probable_partitions, partition_prob, partition_table,
    sum_rule, two_channel_marginal, two_channel_uniform_closed_form, ChainConfig, ChainPartition,
    Partition, PartitionConstraint, SourceParams, Topology, TIE_TOLERANCE,
};
use phaselab::fock::{oracle_suite, OracleSettings};
use phaselab::numeric::{angle_distance, binomial_u128};
use phaselab::trajectory::{
    chi_square_poisson, run_ensemble, total_variation, Policy, TimeSchedule, TrajectoryConfig,
};
use phaselab::{BaseMeasure, CouplingSpec, DetectorSetup, PhaseDistribution};

struct Outcome {
    passed: bool,
    detail: String,
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    out.detail = format!("{} [{elapsed:.2?}]", out.detail);
    if let Some(limit) = limit {
        if elapsed > limit {
            out.passed = false;
            out.detail = format!("{} exceeds {limit:?}", out.detail);
        }
    }
    out
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Uniform-ring two-channel marginal against the exact bunching law.
fn bunching_marginal() -> Outcome {
    let channels = DetectorSetup::TwoBeamSplitters { xi: 0.6 }.channels().unwrap();
    let dist0 = PhaseDistribution::uniform_ring();
    let mut worst: f64 = 0.0;
    for m in 0..=30u32 {
        for n1 in 0..=m {
            let got = two_channel_marginal(&dist0, &channels, n1, m - n1).unwrap();
            worst = worst.max(rel(got, two_channel_uniform_closed_form(m, n1)));
        }
    }
    Outcome {
        passed: worst <= 1e-10,
        detail: format!("M ≤ 30, max relative deviation {worst:.2e}"),
    }
}

/// Point-phase bases give binomial partitions.
fn point_base_binomial() -> Outcome {
    let mut worst: f64 = 0.0;
    for phi0 in [0.0, PI / 4.0, PI / 2.0] {
        let dist0 = PhaseDistribution::new(BaseMeasure::Point { theta0: PI / 2.0, phi0 }).unwrap();
        for xi in [0.0, 0.9, 2.5] {
            let channels = DetectorSetup::SingleBeamSplitter { xi }.channels().unwrap();
            let q = ((phi0 - xi) / 2.0).cos().powi(2);
            for m in 0..=20u32 {
                for n1 in 0..=m {
                    let got = partition_prob(&dist0, &channels, &Partition::new(vec![n1, m - n1])).unwrap();
                    let want = binomial_u128(m as u64, n1 as u64).unwrap() as f64
                        * q.powi(n1 as i32)
                        * (1.0 - q).powi((m - n1) as i32);
                    worst = worst.max((got - want).abs());
                }
            }
        }
    }
    Outcome {
        passed: worst <= 1e-10,
        detail: format!("φ₀ ∈ {{0, π/4, π/2}}, M ≤ 20, max deviation {worst:.2e}"),
    }
}

/// Summing two channels out of the four-channel law.
fn sum_rule_check() -> Outcome {
    let channels = DetectorSetup::TwoBeamSplitters { xi: 1.3 }.channels().unwrap();
    let dist0 = PhaseDistribution::uniform_ring();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for l in 0..=14u32 {
        for m in 0..=l {
            for n1 in 0..=m {
                worst = worst.max(sum_rule(&dist0, &channels, l, n1, m - n1).unwrap().relative_error());
                cases += 1;
            }
        }
    }
    Outcome {
        passed: worst <= 1e-10,
        detail: format!("{cases} cases with L ≤ 14, max relative deviation {worst:.2e}"),
    }
}

/// The four most probable balanced partitions at L = 40, ξ = π/2.
fn fig2_maxima() -> Outcome {
    let channels = DetectorSetup::TwoBeamSplitters { xi: PI / 2.0 }.channels().unwrap();
    let constraint = PartitionConstraint::balanced_beam_splitters(40).unwrap();
    let best = most_probable_partitions(
        &PhaseDistribution::uniform_ring(),
        &channels,
        40,
        Some(&constraint),
        TIE_TOLERANCE,
    )
    .unwrap();
    let mut want: Vec<Partition> = [[20, 0, 10, 10], [0, 20, 10, 10], [10, 10, 20, 0], [10, 10, 0, 20]]
        .into_iter()
        .map(Partition::from)
        .collect();
    want.sort();
    let mut got = best.partitions.clone();
    got.sort();
    Outcome {
        passed: got == want,
        detail: format!(
            "co-maximal set {} at p = {:.6e}",
            got.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" "),
            best.prob()
        ),
    }
}

/// A π/2 coupling pulse before direct detection reproduces the bunching law.
fn pulsed_recovery() -> Outcome {
    let delta = 2.0;
    let coupling = CouplingSpec::pulsed(delta, PI / 2.0 / delta).unwrap();
    let channels = DetectorSetup::Pulsed { coupling }.channels().unwrap();
    let dist0 = PhaseDistribution::uniform_ring();
    let mut worst: f64 = 0.0;
    for m in 0..=30u32 {
        for n1 in 0..=m {
            let got = partition_prob(&dist0, &channels, &Partition::new(vec![n1, m - n1])).unwrap();
            worst = worst.max(rel(got, two_channel_uniform_closed_form(m, n1)));
        }
    }
    Outcome {
        passed: worst <= 1e-10,
        detail: format!("δτ = π/2, M ≤ 30, max relative deviation {worst:.2e}"),
    }
}

fn coupled_config(epsilon: f64, seed: u64) -> TrajectoryConfig {
    let delta = 1.0;
    let coupling = CouplingSpec::continuous(delta, epsilon).unwrap();
    let source = SourceParams::new(3.0, 1.0, 2.0 * PI / delta).unwrap();
    TrajectoryConfig::new(source, DetectorSetup::Continuous { coupling }, seed)
        .with_policy(Policy::MostProbable)
        .with_schedule(TimeSchedule::FixedUniform {
            count: 10,
            window: 2.0 * PI / delta,
        })
}

/// Peak positions after ten detections with continuous coupling.
fn coupled_peaks() -> Outcome {
    let plain = run_ensemble(&coupled_config(0.0, 4), 50).unwrap().peaks().unwrap();
    let mut worst: f64 = 0.0;
    let mut unique = true;
    for p in &plain {
        unique &= p.peaks == 1;
        let phi = p.peak_phi.unwrap_or(f64::NAN);
        let d = angle_distance(phi, PI / 2.0).abs().min(angle_distance(phi, 3.0 * PI / 2.0).abs());
        worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
    }
    let shifted = run_ensemble(&coupled_config(0.25, 5), 50).unwrap().peaks().unwrap();
    let phis: Vec<f64> = shifted.iter().filter_map(|p| p.peak_phi).collect();
    let mean = phis.iter().sum::<f64>() / phis.len() as f64;
    let sd = (phis.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (phis.len() as f64 - 1.0)).sqrt();
    Outcome {
        passed: unique && worst < 0.15 && phis.len() == 50 && sd > 0.02,
        detail: format!(
            "ε = 0: 50 runs, unique peaks {unique}, max distance to π/2 or 3π/2 {worst:.2e} rad; ε/δ = 1/4: peak sd {sd:.3} rad"
        ),
    }
}

/// Most probable partitions on a three-mode ring.
fn ring_maxima() -> Outcome {
    let cfg = ChainConfig::new(3, Topology::Circular, vec![0.0, 0.0, PI / 2.0]).unwrap();
    let best = chain_most_probable_partitions(&cfg, 30, TIE_TOLERANCE).unwrap();
    let target = ChainPartition::new(vec![(5, 5), (10, 0), (10, 0)]);
    let contains = best.contains(&target);
    let closed = best.is_symmetry_closed();
    Outcome {
        passed: contains && closed,
        detail: format!(
            "{} co-maximal at p = {:.6e}, contains {target}: {contains}, symmetry-closed: {closed}, outside orbit: {}",
            best.partitions.len(),
            best.log_prob.exp(),
            best.outside_orbit.len()
        ),
    }
}

/// Sphere calculus against the truncated Fock computation.
fn fock_equivalence() -> Outcome {
    let report = oracle_suite(&OracleSettings::default()).unwrap();
    Outcome {
        passed: report.passed,
        detail: report
            .checks
            .iter()
            .map(|c| format!("{} {} cases max {:.2e} (tol {:.0e})", c.name, c.cases, c.max_deviation, c.tolerance))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

/// Monte Carlo counts and partitions against the exact laws.
fn monte_carlo() -> Outcome {
    let xi = PI / 2.0;
    let source = SourceParams::new(2.0, 1.0, 3.0).unwrap();
    let cfg = TrajectoryConfig::new(source, DetectorSetup::TwoBeamSplitters { xi }, 2003);
    let n_traj = 10_000;
    let ensemble = run_ensemble(&cfg, n_traj).unwrap();
    let chi = chi_square_poisson(&ensemble.count_histogram(), source.mean_count()).unwrap();

    let channels = DetectorSetup::TwoBeamSplitters { xi }.channels().unwrap();
    let dist0 = PhaseDistribution::uniform_ring();
    let mut tv_ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut parts = Vec::new();
    for l in 1..=8u32 {
        let empirical: BTreeMap<Partition, u64> = ensemble.partition_counts(l);
        let n: u64 = empirical.values().sum();
        if n == 0 {
            continue;
        }
        let exact = partition_table(&dist0, &channels, l, None).unwrap();
        let tv = total_variation(&empirical, &exact);
        let bound = 5.0 / (n as f64).sqrt();
        tv_ok &= tv <= bound;
        worst_ratio = worst_ratio.max(tv / bound);
        parts.push(format!("L={l}: n={n} tv={tv:.3}"));
    }
    Outcome {
        passed: chi.passes(0.01) && tv_ok,
        detail: format!(
            "10⁴ trajectories; count χ² = {:.2} on {} dof, p = {:.3}; max tv/(5/√n) = {worst_ratio:.2} ({})",
            chi.statistic,
            chi.dof,
            chi.p_value,
            parts.join(", ")
        ),
    }
}

fn main() {
    let checks: Vec<(&str, Option<Duration>, fn() -> Outcome)> = vec![
        ("1 bunching marginal", Some(Duration::from_secs(2)), bunching_marginal),
        ("2 point-phase binomial", None, point_base_binomial),
        ("3 sum rule", Some(Duration::from_secs(10)), sum_rule_check),
        ("4 four most probable partitions", Some(Duration::from_secs(30)), fig2_maxima),
        ("5 pulsed coupling recovers bunching", None, pulsed_recovery),
        ("6 coupled-mode peaks", None, coupled_peaks),
        ("7 three-mode ring maxima", Some(Duration::from_secs(60)), ring_maxima),
        ("8 Fock-space oracle", None, fock_equivalence),
        ("9 Monte Carlo consistency", None, monte_carlo),
    ];
    let mut failed = 0;
    for (name, limit, check) in checks {
        let out = timed(limit, check);
        println!(
            "criterion {name}: {} - {}",
            if out.passed { "PASS" } else { "FAIL" },
            out.detail
        );
        if !out.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

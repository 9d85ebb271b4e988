use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{CouplingInput, ExperimentConfig, ExperimentKind, SourceInput};
use super::{Cli, CliError, Command, Figure};
use crate::detstat::table::{prob_columns, write_bond_marginals, write_chain_table, write_partition_table};
use crate::detstat::{
    bond_marginals, chain_most_probable_partitions, chain_partition_table, most_probable_partitions,
    partition_table, Partition, TIE_TOLERANCE,
};
use crate::distribution::PhaseDistribution;
use crate::fock::oracle_suite;
use crate::trajectory::{run_ensemble, write_events_csv, Ensemble, FinalState, Policy};

const DEFAULT_GRID: usize = 360;
const DEFAULT_TRAJECTORIES: usize = 100;

struct Settings {
    out: PathBuf,
    seed: u64,
    grid: usize,
    tol: f64,
}

pub(super) fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let config = cli.config.as_deref().map(ExperimentConfig::load).transpose()?;
    if matches!(cli.command, Command::Figure { .. }) && config.is_some() {
        return Err(CliError::Config("figures use built-in settings; drop --config".into()));
    }
    let settings = Settings {
        out: cli.out.clone(),
        seed: cli.seed.or(config.as_ref().and_then(|c| c.seed)).unwrap_or(0),
        grid: cli.grid.or(config.as_ref().and_then(|c| c.grid)).unwrap_or(DEFAULT_GRID),
        tol: cli.tol.or(config.as_ref().and_then(|c| c.tol)).unwrap_or(TIE_TOLERANCE),
    };
    let need = || config.clone().ok_or_else(|| CliError::Config("this command needs --config".into()));
    match &cli.command {
        Command::Stats => stats(&need()?, &settings),
        Command::Trajectory => trajectory(&need()?, &settings, ""),
        Command::Oracle => oracle(config.as_ref(), &settings),
        Command::Figure { which } => figure(*which, &settings),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ComaximalOut {
    detections: u32,
    log_prob: f64,
    prob: f64,
    partitions: Vec<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outside_orbit: Option<Vec<Vec<u32>>>,
}

fn detections(cfg: &ExperimentConfig) -> Result<u32, CliError> {
    cfg.detections
        .ok_or_else(|| CliError::Config("stats needs `detections`".into()))
}

fn stats(cfg: &ExperimentConfig, s: &Settings) -> Result<(), CliError> {
    let l = detections(cfg)?;
    if cfg.kind == ExperimentKind::Chain {
        let chain = cfg.chain_config()?;
        let table = chain_partition_table(&chain, l)?;
        let best = chain_most_probable_partitions(&chain, l, s.tol)?;
        let mut w = create(&s.out, "chain_partitions.csv")?;
        write_chain_table(&mut w, &table)?;
        w.flush()?;
        let mut w = create(&s.out, "bond_marginals.csv")?;
        write_bond_marginals(&mut w, &bond_marginals(&chain, &table))?;
        w.flush()?;
        let out = ComaximalOut {
            detections: l,
            log_prob: best.log_prob,
            prob: best.log_prob.exp(),
            partitions: best.partitions.iter().map(|p| p.counts()).collect(),
            outside_orbit: Some(best.outside_orbit.iter().map(|p| p.counts()).collect()),
        };
        write_json(&s.out, "comaximal.json", &out)?;
        println!(
            "{} chain partitions, {} co-maximal at p = {:.6e}, {} outside the symmetry orbit",
            table.len(),
            best.partitions.len(),
            out.prob,
            best.outside_orbit.len()
        );
        return Ok(());
    }
    let setup = cfg.detector_setup()?;
    if !setup.is_static() {
        return Err(CliError::Config(
            "partition tables need time-independent detectors; use `trajectory` for coupled modes".into(),
        ));
    }
    let channels = setup.channels()?;
    let dist0 = PhaseDistribution::new(cfg.base())?;
    let constraint = cfg.constraint()?;
    let table = partition_table(&dist0, &channels, l, constraint.as_ref())?;
    let best = most_probable_partitions(&dist0, &channels, l, constraint.as_ref(), s.tol)?;
    let mut w = create(&s.out, "partitions.csv")?;
    write_partition_table(&mut w, &table)?;
    w.flush()?;
    let out = ComaximalOut {
        detections: l,
        log_prob: best.log_prob,
        prob: best.prob(),
        partitions: best.partitions.iter().map(|p| p.counts.clone()).collect(),
        outside_orbit: None,
    };
    write_json(&s.out, "comaximal.json", &out)?;
    println!(
        "{} partitions, {} co-maximal at p = {:.6e}",
        table.len(),
        best.partitions.len(),
        out.prob
    );
    Ok(())
}

fn trajectory(cfg: &ExperimentConfig, s: &Settings, prefix: &str) -> Result<(), CliError> {
    let tcfg = cfg.trajectory_config(s.seed)?;
    let n = cfg.trajectories.unwrap_or(DEFAULT_TRAJECTORIES);
    let ensemble = run_ensemble(&tcfg, n)?;
    write_trajectory_outputs(&ensemble, &tcfg.channel_labels()?, s, prefix)
}

/// Rows of one trajectory's marginal (or per-bond marginals for chains).
enum MarginalRows {
    Sphere(Vec<(f64, f64)>),
    Bonds(Vec<Vec<(f64, f64)>>),
}

fn write_trajectory_outputs(
    ensemble: &Ensemble,
    labels: &[String],
    s: &Settings,
    prefix: &str,
) -> Result<(), CliError> {
    let rows = ensemble
        .results
        .par_iter()
        .map(|r| match &r.final_state {
            FinalState::Sphere(d) => {
                let m = d.phase_marginal(s.grid)?;
                Ok(MarginalRows::Sphere(m.phi.into_iter().zip(m.density).collect()))
            }
            FinalState::Chain(c) => (0..c.config().bonds())
                .map(|b| {
                    c.bond_marginal(b, s.grid)
                        .map(|m| m.phi.into_iter().zip(m.density).collect())
                })
                .collect::<crate::Result<Vec<_>>>()
                .map(MarginalRows::Bonds),
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let summary = ensemble.summary(true, 36)?;

    let mut w = create(&s.out, &format!("{prefix}events.csv"))?;
    write_events_csv(&mut w, labels, &ensemble.results)?;
    w.flush()?;

    let is_chain = matches!(rows.first(), Some(MarginalRows::Bonds(_)));
    let mut w = csv::Writer::from_writer(create(
        &s.out,
        &format!("{prefix}{}", if is_chain { "bond_marginals.csv" } else { "marginals.csv" }),
    )?);
    if is_chain {
        w.write_record(["traj_id", "bond", "phi", "density"])?;
    } else {
        w.write_record(["traj_id", "phi", "density"])?;
    }
    for (id, r) in rows.iter().enumerate() {
        match r {
            MarginalRows::Sphere(pts) => {
                for (phi, d) in pts {
                    w.write_record([id.to_string(), format!("{phi:.12}"), format!("{d:.12e}")])?;
                }
            }
            MarginalRows::Bonds(bonds) => {
                for (b, pts) in bonds.iter().enumerate() {
                    for (phi, d) in pts {
                        w.write_record([
                            id.to_string(),
                            (b + 1).to_string(),
                            format!("{phi:.12}"),
                            format!("{d:.12e}"),
                        ])?;
                    }
                }
            }
        }
    }
    w.flush()?;

    if !is_chain {
        let mut w = csv::Writer::from_writer(create(&s.out, &format!("{prefix}peaks.csv"))?);
        w.write_record(["traj_id", "peak_phi", "peak_height"])?;
        for p in &summary.peaks {
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.12}")).unwrap_or_default();
            w.write_record([p.traj_id.to_string(), fmt(p.peak_phi), fmt(p.peak_height)])?;
        }
        w.flush()?;
    }
    write_json(&s.out, &format!("{prefix}summary.json"), &summary)?;
    println!(
        "{} trajectories, mean {:.4} detections (expected {:.4})",
        summary.trajectories, summary.mean_count, summary.expected_mean_count
    );
    Ok(())
}

fn oracle(cfg: Option<&ExperimentConfig>, s: &Settings) -> Result<(), CliError> {
    let mut settings = cfg.map(|c| c.oracle_settings()).unwrap_or_default();
    settings.seed = s.seed;
    let report = oracle_suite(&settings)?;
    write_json(&s.out, "oracle.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::OracleFailed(failed.join(", ")))
    }
}

/// Settings behind the coupled-mode figures: δ = 1, ten detections drawn
/// uniformly over one coupling period, most probable channel each time.
pub fn coupled_figure_config(epsilon_over_delta: f64) -> ExperimentConfig {
    let kind = if epsilon_over_delta == 0.0 {
        ExperimentKind::Continuous
    } else {
        ExperimentKind::EnergyShift
    };
    let mut cfg = ExperimentConfig::of_kind(kind);
    cfg.source = Some(SourceInput {
        r: 3.0,
        gamma: 1.0,
        t_window: 2.0 * PI,
    });
    cfg.coupling = Some(CouplingInput {
        delta: 1.0,
        epsilon: epsilon_over_delta,
        tau: None,
    });
    cfg.detections = Some(10);
    cfg.trajectories = Some(10);
    cfg.policy = Some(Policy::MostProbable);
    cfg
}

/// The four-channel configuration behind the n₁–n₃ surface.
pub fn fig2_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::of_kind(ExperimentKind::TwoBs);
    cfg.xi = Some(PI / 2.0);
    cfg.detections = Some(40);
    cfg.balanced = true;
    cfg
}

fn figure(which: Figure, s: &Settings) -> Result<(), CliError> {
    match which {
        Figure::Fig2 => {
            let cfg = fig2_config();
            let l = detections(&cfg)?;
            let channels = cfg.detector_setup()?.channels()?;
            let dist0 = PhaseDistribution::new(cfg.base())?;
            let constraint = cfg.constraint()?;
            let table = partition_table(&dist0, &channels, l, constraint.as_ref())?;
            let best = most_probable_partitions(&dist0, &channels, l, constraint.as_ref(), s.tol)?;
            let mut w = csv::Writer::from_writer(create(&s.out, "fig2.csv")?);
            w.write_record(["n1", "n3", "prob", "log10_prob"])?;
            let mut rows: Vec<&(f64, Partition)> = table.iter().collect();
            rows.sort_by_key(|(_, p)| (p.counts[0], p.counts[2]));
            for (lp, p) in rows {
                let (prob, l10) = prob_columns(*lp);
                w.write_record([
                    p.counts[0].to_string(),
                    p.counts[2].to_string(),
                    format!("{prob:.17e}"),
                    format!("{l10:.12}"),
                ])?;
            }
            w.flush()?;
            let out = ComaximalOut {
                detections: l,
                log_prob: best.log_prob,
                prob: best.prob(),
                partitions: best.partitions.iter().map(|p| p.counts.clone()).collect(),
                outside_orbit: None,
            };
            write_json(&s.out, "fig2_comaximal.json", &out)?;
            println!("fig2: {} co-maximal partitions at p = {:.6e}", out.partitions.len(), out.prob);
            for p in &out.partitions {
                println!("  {p:?}");
            }
            Ok(())
        }
        Figure::Fig4 => trajectory(&coupled_figure_config(0.0), s, "fig4_"),
        Figure::Fig5 => trajectory(&coupled_figure_config(0.25), s, "fig5_"),
    }
}

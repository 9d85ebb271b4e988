//! Ensembles of independent trajectories and their statistics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{run_trajectory_indexed, FinalState, TimeSchedule, TrajectoryConfig, TrajectoryResult};
use crate::detstat::{log_poisson_count_prob, Partition};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub config: TrajectoryConfig,
    /// Trajectory `i` is at index `i` regardless of scheduling.
    pub results: Vec<TrajectoryResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountBin {
    pub count: u32,
    pub trajectories: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionFrequency {
    pub counts: Vec<u32>,
    pub trajectories: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakSummary {
    pub traj_id: usize,
    /// `None` when the final marginal is flat.
    pub peak_phi: Option<f64>,
    pub peak_height: Option<f64>,
    pub peaks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub seed: u64,
    pub trajectories: usize,
    pub mean_count: f64,
    pub expected_mean_count: f64,
    pub count_histogram: Vec<CountBin>,
    pub partitions: Vec<PartitionFrequency>,
    /// Highest peak per trajectory; empty for chain setups.
    pub peaks: Vec<PeakSummary>,
    /// Highest-peak positions binned over `[0, 2π)`.
    pub peak_histogram: Vec<u64>,
}

/// Runs `n_traj` trajectories in parallel; the output order and content do
/// not depend on thread scheduling.
pub fn run_ensemble(cfg: &TrajectoryConfig, n_traj: usize) -> Result<Ensemble> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("ensemble needs at least one trajectory".into()));
    }
    cfg.validate()?;
    let results = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| run_trajectory_indexed(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        config: cfg.clone(),
        results,
    })
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    /// Trajectories per detection count, indexed by count.
    pub fn count_histogram(&self) -> Vec<u64> {
        let max = self.results.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut hist = vec![0u64; max + 1];
        for r in &self.results {
            hist[r.len()] += 1;
        }
        hist
    }

    /// Partition frequencies among the trajectories with exactly `l` detections.
    pub fn partition_counts(&self, l: u32) -> BTreeMap<Partition, u64> {
        let mut out = BTreeMap::new();
        for r in self.results.iter().filter(|r| r.partition.total() == l) {
            *out.entry(r.partition.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Highest peak of every final phase marginal (sphere setups only).
    pub fn peaks(&self) -> Result<Vec<PeakSummary>> {
        self.results
            .par_iter()
            .enumerate()
            .filter_map(|(i, r)| match &r.final_state {
                FinalState::Sphere(d) => Some((i, d)),
                FinalState::Chain(_) => None,
            })
            .map(|(traj_id, d)| {
                let report = d.peak_locations()?;
                let top = report.highest();
                Ok(PeakSummary {
                    traj_id,
                    peak_phi: top.map(|p| p.phi),
                    peak_height: top.map(|p| p.height),
                    peaks: report.peaks.len(),
                })
            })
            .collect()
    }

    pub fn summary(&self, with_peaks: bool, peak_bins: usize) -> Result<EnsembleSummary> {
        let count_histogram = self
            .count_histogram()
            .into_iter()
            .enumerate()
            .filter(|&(_, n)| n > 0)
            .map(|(count, trajectories)| CountBin {
                count: count as u32,
                trajectories,
            })
            .collect();
        let mut all: BTreeMap<&Partition, u64> = BTreeMap::new();
        for r in &self.results {
            *all.entry(&r.partition).or_insert(0) += 1;
        }
        let partitions = all
            .into_iter()
            .map(|(p, n)| PartitionFrequency {
                counts: p.counts.clone(),
                trajectories: n,
            })
            .collect();
        let peaks = if with_peaks { self.peaks()? } else { Vec::new() };
        let bins = peak_bins.max(1);
        let mut peak_histogram = vec![0u64; bins];
        for phi in peaks.iter().filter_map(|p| p.peak_phi) {
            let b = ((phi / (2.0 * std::f64::consts::PI)) * bins as f64) as usize;
            peak_histogram[b.min(bins - 1)] += 1;
        }
        let total: usize = self.results.iter().map(|r| r.len()).sum();
        Ok(EnsembleSummary {
            seed: self.config.seed,
            trajectories: self.len(),
            mean_count: total as f64 / self.len() as f64,
            expected_mean_count: match self.config.schedule {
                TimeSchedule::Decay => self.config.source.mean_count(),
                TimeSchedule::FixedUniform { count, .. } => count as f64,
            },
            count_histogram,
            partitions,
            peaks,
            peak_histogram,
        })
    }
}

/// Total-variation distance between empirical frequencies and an exact law.
pub fn total_variation(empirical: &BTreeMap<Partition, u64>, exact: &[(f64, Partition)]) -> f64 {
    let n: u64 = empirical.values().sum();
    if n == 0 {
        return 0.0;
    }
    let mut seen = 0u64;
    let mut acc = 0.0;
    for (lp, p) in exact {
        let e = empirical.get(p).copied().unwrap_or(0);
        seen += e;
        acc += (e as f64 / n as f64 - lp.exp()).abs();
    }
    // mass observed on partitions missing from the exact table
    acc += (n - seen) as f64 / n as f64;
    0.5 * acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Pearson test of a count histogram against Poisson(`mean`). Bins run over
/// counts whose expected occupancy is at least 5; both tails are pooled into
/// the nearest bin.
pub fn chi_square_poisson(histogram: &[u64], mean: f64) -> Result<ChiSquareTest> {
    let n: u64 = histogram.iter().sum();
    if n == 0 {
        return Err(Error::InvalidParameter("empty histogram".into()));
    }
    let expected = |l: u32| n as f64 * log_poisson_count_prob(mean, l).exp();
    let mut lo = 0u32;
    let mut cdf_lo = expected(0);
    while cdf_lo < 5.0 && (lo as f64) < mean {
        lo += 1;
        cdf_lo += expected(lo);
    }
    let mut hi = lo + 1;
    while expected(hi) >= 5.0 {
        hi += 1;
    }
    // bins: [0, lo], lo+1, ..., hi−1, [hi, ∞)
    let observed = |l: u32| histogram.get(l as usize).copied().unwrap_or(0) as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    bins.push(((0..=lo).map(observed).sum(), cdf_lo));
    for l in lo + 1..hi {
        bins.push((observed(l), expected(l)));
    }
    let head: f64 = bins.iter().map(|b| b.1).sum();
    let tail_obs = n as f64 - bins.iter().map(|b| b.0).sum::<f64>();
    bins.push((tail_obs, n as f64 - head));
    if bins.len() < 2 {
        return Err(Error::InvalidParameter("too few bins for a chi-square test".into()));
    }
    let statistic = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::DetectorSetup;
    use crate::detstat::SourceParams;

    #[test]
    fn chi_square_accepts_exact_expectations_and_rejects_shift() {
        let mean = 3.0;
        let n = 10_000.0;
        let exact: Vec<u64> = (0..20)
            .map(|l| (n * log_poisson_count_prob(mean, l).exp()).round() as u64)
            .collect();
        let t = chi_square_poisson(&exact, mean).unwrap();
        assert!(t.p_value > 0.99, "{t:?}");
        let shifted: Vec<u64> = (0..20)
            .map(|l| (n * log_poisson_count_prob(mean + 0.3, l).exp()).round() as u64)
            .collect();
        assert!(!chi_square_poisson(&shifted, mean).unwrap().passes(0.01));
    }

    #[test]
    fn total_variation_basics() {
        let p = |c: &[u32]| Partition::new(c.to_vec());
        let exact = vec![(0.5f64.ln(), p(&[1, 0])), (0.5f64.ln(), p(&[0, 1]))];
        let mut emp = BTreeMap::new();
        emp.insert(p(&[1, 0]), 3);
        emp.insert(p(&[0, 1]), 1);
        assert!((total_variation(&emp, &exact) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ensemble_is_reproducible_and_ordered() {
        let source = SourceParams::new(1.5, 1.0, 2.0).unwrap();
        let cfg = TrajectoryConfig::new(source, DetectorSetup::TwoBeamSplitters { xi: 0.5 }, 42);
        let a = run_ensemble(&cfg, 64).unwrap();
        let b = run_ensemble(&cfg, 64).unwrap();
        assert_eq!(a.results, b.results);
        assert_eq!(a.results[9], run_trajectory_indexed(&cfg, 9).unwrap());
        let s = a.summary(true, 12).unwrap();
        assert_eq!(s.trajectories, 64);
        assert_eq!(s.count_histogram.iter().map(|c| c.trajectories).sum::<u64>(), 64);
        assert!(serde_json::to_string(&s).unwrap().contains("\"peak_histogram\""));
    }
}

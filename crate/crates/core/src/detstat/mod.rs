//! Exact detection statistics.
//!
//! For a Poisson-mixed initial state the probability of a detection history
//! factorizes into a Poisson law for the total count `L` and a partition law
//! `p_L({n_s}) = L!/Π n_s! · F({n_s})` with `F = ∫ f Π g_s^{n_s}` over the
//! normalized initial distribution `f`. Everything here is computed in log space.

pub mod chain;
pub mod table;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::DetectorChannel;
use crate::distribution::PhaseDistribution;
use crate::error::{Error, Result};
use crate::numeric::{binomial_u128, ln_choose, ln_multinomial, log_sum_exp};

pub use chain::{
    bond_marginals, chain_history_weight, chain_most_probable_partitions, chain_partition_prob,
    chain_partition_table,
    log_chain_history_weight, log_chain_partition_prob, ChainComaximal, ChainConfig,
    ChainPartition, Topology,
};

/// Upper bound on the number of compositions an enumeration may visit.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

/// Relative tolerance under which partitions count as co-maximal.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Detection counts per channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    pub counts: Vec<u32>,
}

impl Partition {
    pub fn new(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    /// Total number of detections `L`.
    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }
}

impl From<&[u32]> for Partition {
    fn from(c: &[u32]) -> Self {
        Self::new(c.to_vec())
    }
}

impl<const N: usize> From<[u32; N]> for Partition {
    fn from(c: [u32; N]) -> Self {
        Self::new(c.to_vec())
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Strength `r` (mean particle number `r²`), loss rate `gamma` and window `t_window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub r: f64,
    pub gamma: f64,
    pub t_window: f64,
}

impl SourceParams {
    pub fn new(r: f64, gamma: f64, t_window: f64) -> Result<Self> {
        for (name, v) in [("R", r), ("Gamma", gamma), ("T", t_window)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self {
            r,
            gamma,
            t_window,
        })
    }

    /// `R²(1 − e^{−ΓT})`.
    pub fn mean_count(&self) -> f64 {
        self.r * self.r * -(-self.gamma * self.t_window).exp_m1()
    }
}

/// Poisson probability of exactly `l` detections in the window.
pub fn poisson_count_prob(p: &SourceParams, l: u32) -> f64 {
    log_poisson_count_prob(p.mean_count(), l).exp()
}

pub fn log_poisson_count_prob(mean: f64, l: u32) -> f64 {
    if mean == 0.0 {
        return if l == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    l as f64 * mean.ln() - mean - statrs::function::factorial::ln_factorial(l as u64)
}

fn check_static(channels: &[DetectorChannel]) -> Result<()> {
    if let Some(c) = channels.iter().find(|c| !c.direction.is_static()) {
        return Err(Error::InvalidParameter(format!(
            "channel {} has a time-dependent direction; partition statistics need a static setup",
            c.label
        )));
    }
    Ok(())
}

/// `ln F({n_s})`. Impossible histories give `-inf`.
pub fn log_history_weight(
    dist0: &PhaseDistribution,
    channels: &[DetectorChannel],
    partition: &Partition,
) -> Result<f64> {
    check_static(channels)?;
    if channels.len() != partition.counts.len() {
        return Err(Error::InvalidParameter(format!(
            "{} channels but partition {partition}",
            channels.len()
        )));
    }
    let base = dist0.log_normalization()?;
    let mut dist = dist0.clone();
    let mut log_prefactor = 0.0;
    for (c, &n) in channels.iter().zip(&partition.counts) {
        if n > 0 {
            dist = dist.with_factor(c.direction_at(0.0), n);
            log_prefactor += n as f64 * (2.0 * c.weight).ln();
        }
    }
    match dist.log_normalization() {
        Ok(v) => Ok(log_prefactor + v - base),
        Err(Error::Annihilated(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// `F({n_s}) = ∫ dΩ f Π g_s^{n_s}` for the normalized initial distribution.
pub fn history_weight(
    dist0: &PhaseDistribution,
    channels: &[DetectorChannel],
    partition: &Partition,
) -> Result<f64> {
    log_history_weight(dist0, channels, partition).map(f64::exp)
}

pub fn log_partition_prob(
    dist0: &PhaseDistribution,
    channels: &[DetectorChannel],
    partition: &Partition,
) -> Result<f64> {
    Ok(ln_multinomial(&partition.counts) + log_history_weight(dist0, channels, partition)?)
}

/// `p_L({n_s}) = L!/Π n_s! · F({n_s})`.
pub fn partition_prob(
    dist0: &PhaseDistribution,
    channels: &[DetectorChannel],
    partition: &Partition,
) -> Result<f64> {
    log_partition_prob(dist0, channels, partition).map(f64::exp)
}

/// Bunching law for a uniform phase behind one 50/50 beam splitter:
/// `2^{−2M} C(2n₁, n₁) C(2n₂, n₂)` with `n₂ = M − n₁`.
/// Uses exact integer binomials while they fit in 128 bits.
pub fn two_channel_uniform_closed_form(m: u32, n1: u32) -> f64 {
    assert!(n1 <= m, "n1 = {n1} exceeds M = {m}");
    let n2 = m - n1;
    let exact = binomial_u128(2 * n1 as u64, n1 as u64)
        .zip(binomial_u128(2 * n2 as u64, n2 as u64))
        .and_then(|(a, b)| a.checked_mul(b));
    match exact {
        Some(num) if 2 * m <= 1000 => num as f64 * 2f64.powi(-2 * m as i32),
        _ => (ln_choose(2 * n1 as u64, n1 as u64) + ln_choose(2 * n2 as u64, n2 as u64)
            - 2.0 * m as f64 * std::f64::consts::LN_2)
            .exp(),
    }
}

/// Distribution of `M = n₁ + n₂` detections over channels 1 and 2 when
/// channels 3 and 4 are ignored: `p_M = 2^M C(M, n₁) ∫ f g₁^{n₁} g₂^{n₂}`.
pub fn log_two_channel_marginal(
    dist0: &PhaseDistribution,
    setup4: &[DetectorChannel],
    n1: u32,
    n2: u32,
) -> Result<f64> {
    if setup4.len() != 4 {
        return Err(Error::InvalidParameter(format!(
            "two-channel marginal needs the four-channel setup, got {} channels",
            setup4.len()
        )));
    }
    let m = n1 + n2;
    let lf = log_history_weight(dist0, setup4, &Partition::new(vec![n1, n2, 0, 0]))?;
    Ok(m as f64 * std::f64::consts::LN_2 + ln_choose(m as u64, n1 as u64) + lf)
}

pub fn two_channel_marginal(
    dist0: &PhaseDistribution,
    setup4: &[DetectorChannel],
    n1: u32,
    n2: u32,
) -> Result<f64> {
    log_two_channel_marginal(dist0, setup4, n1, n2).map(f64::exp)
}

/// Both sides of the marginalization identity
/// `Σ_{n₃+n₄=L−M} p_L({n_s}) = C(L, M) 2^{−L} p_M(n₁, n₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SumRule {
    pub lhs: f64,
    pub rhs: f64,
}

impl SumRule {
    pub fn relative_error(&self) -> f64 {
        if self.lhs == self.rhs {
            0.0
        } else {
            (self.lhs - self.rhs).abs() / self.lhs.abs().max(self.rhs.abs())
        }
    }
}

pub fn sum_rule(
    dist0: &PhaseDistribution,
    setup4: &[DetectorChannel],
    l: u32,
    n1: u32,
    n2: u32,
) -> Result<SumRule> {
    let m = n1 + n2;
    if m > l {
        return Err(Error::InvalidParameter(format!("M = {m} > L = {l}")));
    }
    let rest = l - m;
    let terms = (0..=rest)
        .map(|n3| log_partition_prob(dist0, setup4, &Partition::new(vec![n1, n2, n3, rest - n3])))
        .collect::<Result<Vec<f64>>>()?;
    let lhs = log_sum_exp(&terms).exp();
    let rhs = (ln_choose(l as u64, m as u64) - l as f64 * std::f64::consts::LN_2
        + log_two_channel_marginal(dist0, setup4, n1, n2)?)
    .exp();
    Ok(SumRule { lhs, rhs })
}

/// Restricts an enumeration to partitions whose group totals are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionConstraint {
    pub groups: Vec<(Vec<usize>, u32)>,
}

impl PartitionConstraint {
    /// `n₁ + n₂ = n₃ + n₄ = L/2` on the two-beam-splitter setup.
    pub fn balanced_beam_splitters(l: u32) -> Result<Self> {
        if l % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "balanced constraint needs even L, got {l}"
            )));
        }
        Ok(Self {
            groups: vec![(vec![0, 1], l / 2), (vec![2, 3], l / 2)],
        })
    }

    pub fn admits(&self, counts: &[u32]) -> bool {
        self.groups.iter().all(|(idx, total)| {
            idx.iter().map(|&i| counts.get(i).copied().unwrap_or(0)).sum::<u32>() == *total
        })
    }
}

/// Number of compositions of `total` into `parts` nonnegative parts.
pub fn composition_count(total: u32, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(total == 0);
    }
    binomial_u128(total as u64 + parts as u64 - 1, parts as u64 - 1).unwrap_or(u128::MAX)
}

/// All compositions of `total` into `parts` parts, in lexicographic order.
pub fn compositions(total: u32, parts: usize) -> Compositions {
    Compositions {
        current: None,
        total,
        parts,
        done: parts == 0 && total != 0,
    }
}

pub struct Compositions {
    current: Option<Vec<u32>>,
    total: u32,
    parts: usize,
    done: bool,
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        if self.done {
            return None;
        }
        let next = match self.current.take() {
            None => {
                let mut v = vec![0; self.parts];
                if let Some(last) = v.last_mut() {
                    *last = self.total;
                }
                v
            }
            Some(mut v) => {
                // find the rightmost position (excluding last) that can grow
                let k = self.parts;
                if k <= 1 {
                    self.done = true;
                    return None;
                }
                let mut i = k - 1;
                loop {
                    if i == 0 {
                        self.done = true;
                        return None;
                    }
                    i -= 1;
                    let rest: u32 = v[i + 1..].iter().sum();
                    if rest > 0 {
                        v[i] += 1;
                        for x in &mut v[i + 1..] {
                            *x = 0;
                        }
                        v[k - 1] = rest - 1;
                        break;
                    }
                }
                v
            }
        };
        self.current = Some(next.clone());
        Some(next)
    }
}

/// Partitions attaining the maximal probability within the tie tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comaximal {
    pub partitions: Vec<Partition>,
    pub log_prob: f64,
}

impl Comaximal {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }

    pub fn contains(&self, p: &Partition) -> bool {
        self.partitions.contains(p)
    }
}

/// Reduces `(log p, item)` pairs to the co-maximal set, sorted. The result
/// does not depend on input order.
pub(crate) fn comaximal_of<T: Ord + Clone>(scored: &[(f64, T)], tol: f64) -> Option<(f64, Vec<T>)> {
    let max = scored
        .iter()
        .map(|(l, _)| *l)
        .filter(|l| !l.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let cut = max + (-tol).ln_1p();
    let mut best: Vec<T> = scored
        .iter()
        .filter(|(l, _)| *l >= cut)
        .map(|(_, p)| p.clone())
        .collect();
    best.sort();
    Some((max, best))
}

/// Log probability of every admissible partition of `L` detections.
pub fn partition_table(
    dist0: &PhaseDistribution,
    channels: &[DetectorChannel],
    l: u32,
    constraint: Option<&PartitionConstraint>,
) -> Result<Vec<(f64, Partition)>> {
    check_static(channels)?;
    let count = composition_count(l, channels.len());
    if count > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            count,
            budget: ENUMERATION_BUDGET,
        });
    }
    let candidates: Vec<Vec<u32>> = compositions(l, channels.len())
        .filter(|c| constraint.is_none_or(|k| k.admits(c)))
        .collect();
    candidates
        .into_par_iter()
        .map(|c| {
            let p = Partition::new(c);
            log_partition_prob(dist0, channels, &p).map(|lp| (lp, p))
        })
        .collect()
}

/// Integer partitions of `L` with maximal `p_L`, optionally under a constraint.
pub fn most_probable_partitions(
    dist0: &PhaseDistribution,
    channels: &[DetectorChannel],
    l: u32,
    constraint: Option<&PartitionConstraint>,
    tol: f64,
) -> Result<Comaximal> {
    let table = partition_table(dist0, channels, l, constraint)?;
    let (log_prob, partitions) = comaximal_of(&table, tol)
        .ok_or_else(|| Error::Annihilated("every partition has zero probability".into()))?;
    Ok(Comaximal {
        partitions,
        log_prob,
    })
}

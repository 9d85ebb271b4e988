//! Chains of modes coupled pairwise by beam splitters.
//!
//! Starting from a factorized state with uniform phases, a history with
//! `(n_s, m_s)` detections in the `±` outputs of splitter `s` leaves the
//! relative phases `Φ_s` distributed as `Π_s h_s(Φ_s − ξ_s)` with
//! `h_{n,m}(x) = cos^{2n}(x/2) sin^{2m}(x/2)`.
//!
//! On a linear chain the relative phases are independent and the weight
//! factorizes per bond. On a ring they obey `Σ Φ_s ≡ 0 (mod 2π)`, and the
//! constrained integral reduces to the Fourier sum `Σ_k Π_s ĥ_s(k) e^{−ikξ_s}`.
//! The Fourier coefficients of `h_{n,m}` are exact integers over `4^{n+m}`.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{comaximal_of, composition_count, compositions, ENUMERATION_BUDGET};
use crate::error::{Error, Result};
use crate::numeric::{ln_multinomial, wrap_angle, NeumaierSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Linear,
    Circular,
}

/// `k` modes with beam splitter settings `xi` (`k − 1` for a linear chain, `k` for a ring).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    k: usize,
    topology: Topology,
    xi: Vec<f64>,
}

impl ChainConfig {
    pub fn new(k: usize, topology: Topology, xi: Vec<f64>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("a chain needs K ≥ 2 modes, got {k}")));
        }
        let want = match topology {
            Topology::Linear => k - 1,
            Topology::Circular => k,
        };
        if xi.len() != want {
            return Err(Error::InvalidParameter(format!(
                "{topology:?} chain of {k} modes needs {want} settings, got {}",
                xi.len()
            )));
        }
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite splitter setting".into()));
        }
        Ok(Self {
            k,
            topology,
            xi: xi.into_iter().map(wrap_angle).collect(),
        })
    }

    pub fn modes(&self) -> usize {
        self.k
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Number of beam splitters.
    pub fn bonds(&self) -> usize {
        self.xi.len()
    }

    /// Sum of the settings, the only combination a ring depends on.
    pub fn total_setting(&self) -> f64 {
        self.xi.iter().sum()
    }

    /// Channel labels `1+`, `1-`, `2+`, ...
    pub fn channel_labels(&self) -> Vec<String> {
        (1..=self.bonds())
            .flat_map(|s| [format!("{s}+"), format!("{s}-")])
            .collect()
    }
}

/// Detections `(n_s, m_s)` in the `+` and `−` outputs of every splitter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainPartition {
    pub bonds: Vec<(u32, u32)>,
}

impl ChainPartition {
    pub fn new(bonds: Vec<(u32, u32)>) -> Self {
        Self { bonds }
    }

    pub fn total(&self) -> u32 {
        self.bonds.iter().map(|(n, m)| n + m).sum()
    }

    /// Flat counts `n₁, m₁, n₂, m₂, ...`.
    pub fn counts(&self) -> Vec<u32> {
        self.bonds.iter().flat_map(|&(n, m)| [n, m]).collect()
    }

    pub fn from_counts(counts: &[u32]) -> Self {
        Self {
            bonds: counts.chunks(2).map(|c| (c[0], c[1])).collect(),
        }
    }

    /// Orbit under per-bond `n ↔ m` swaps and bond permutations.
    pub fn symmetry_orbit(&self) -> Vec<ChainPartition> {
        let b = self.bonds.len();
        let mut out = Vec::new();
        for perm in permutations(b) {
            for mask in 0u32..(1 << b) {
                let bonds = perm
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| {
                        let (n, m) = self.bonds[j];
                        if mask >> i & 1 == 1 {
                            (m, n)
                        } else {
                            (n, m)
                        }
                    })
                    .collect();
                out.push(ChainPartition { bonds });
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

impl fmt::Display for ChainPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, m)) in self.bonds.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "({n},{m})")?;
        }
        Ok(())
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Fourier coefficients `ĥ(k)`, `k = 0..=n+m`, of `cos^{2n}(x/2) sin^{2m}(x/2)`.
/// The function is even, so `ĥ(−k) = ĥ(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BondSpectrum {
    pub n: u32,
    pub m: u32,
    coeffs: Vec<f64>,
}

impl BondSpectrum {
    /// Uses `cos²(x/2) = (1+z)²/4z` and `sin²(x/2) = −(1−z)²/4z` with
    /// `z = e^{ix}`, so `ĥ(k) = (−1)^m [z^{n+m+k}] (1+z)^{2n}(1−z)^{2m} / 4^{n+m}`.
    pub fn new(n: u32, m: u32) -> Self {
        let d = (n + m) as usize;
        let row = |len: u32| -> Vec<BigInt> {
            let mut r = vec![BigInt::one()];
            for i in 0..len {
                let next = r[i as usize].clone() * BigInt::from(len - i) / BigInt::from(i + 1);
                r.push(next);
            }
            r
        };
        let plus = row(2 * n);
        let minus = row(2 * m);
        let scale = 2f64.powi(-2 * d as i32);
        let coeffs = (0..=d)
            .map(|k| {
                let j = d + k;
                let mut acc = BigInt::zero();
                let lo = j.saturating_sub(minus.len() - 1);
                let hi = j.min(plus.len() - 1);
                for i in lo..=hi {
                    let term = &plus[i] * &minus[j - i];
                    if (j - i) % 2 == 1 {
                        acc -= term;
                    } else {
                        acc += term;
                    }
                }
                if m % 2 == 1 {
                    acc = -acc;
                }
                acc.to_f64().unwrap_or(f64::NAN) * scale
            })
            .collect();
        Self { n, m, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: i64) -> f64 {
        self.coeffs.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    /// Mean of `h` over the circle.
    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }
}

/// Spectra for all `(n, m)` with `n + m ≤ max_total`.
#[derive(Debug, Default)]
pub struct SpectrumCache {
    table: HashMap<(u32, u32), BondSpectrum>,
}

impl SpectrumCache {
    pub fn up_to(max_total: u32) -> Self {
        let keys: Vec<(u32, u32)> = (0..=max_total)
            .flat_map(|n| (0..=max_total - n).map(move |m| (n, m)))
            .collect();
        let table = keys
            .into_par_iter()
            .map(|(n, m)| ((n, m), BondSpectrum::new(n, m)))
            .collect();
        Self { table }
    }

    fn get(&self, n: u32, m: u32) -> Option<&BondSpectrum> {
        self.table.get(&(n, m))
    }
}

fn weight_from_spectra(cfg: &ChainConfig, spectra: &[&BondSpectrum]) -> f64 {
    match cfg.topology {
        Topology::Linear => spectra.iter().map(|s| s.mean()).product(),
        Topology::Circular => {
            let kmax = spectra.iter().map(|s| s.degree()).min().unwrap_or(0) as i64;
            let total = cfg.total_setting();
            let mut acc = NeumaierSum::new();
            acc.add(spectra.iter().map(|s| s.coeff(0)).product());
            for k in 1..=kmax {
                let prod: f64 = spectra.iter().map(|s| s.coeff(k)).product();
                // ĥ(±k) are equal, the phases e^{∓ikΞ} pair into a cosine
                acc.add(2.0 * prod * (k as f64 * total).cos());
            }
            acc.total()
        }
    }
}

fn check_shape(cfg: &ChainConfig, part: &ChainPartition) -> Result<()> {
    if part.bonds.len() != cfg.bonds() {
        return Err(Error::InvalidParameter(format!(
            "chain has {} splitters but partition lists {}",
            cfg.bonds(),
            part.bonds.len()
        )));
    }
    Ok(())
}

/// `F({n_s, m_s})`: the mean of `Π_s h_s(Φ_s − ξ_s)` over the independent
/// phases (per-channel rate weights not included).
pub fn chain_history_weight(cfg: &ChainConfig, part: &ChainPartition) -> Result<f64> {
    check_shape(cfg, part)?;
    let spectra: Vec<BondSpectrum> = part.bonds.iter().map(|&(n, m)| BondSpectrum::new(n, m)).collect();
    let refs: Vec<&BondSpectrum> = spectra.iter().collect();
    Ok(weight_from_spectra(cfg, &refs))
}

pub fn log_chain_history_weight(cfg: &ChainConfig, part: &ChainPartition) -> Result<f64> {
    chain_history_weight(cfg, part).map(positive_ln)
}

fn positive_ln(v: f64) -> f64 {
    // cancellation can leave tiny negative residue for impossible histories
    if v > 0.0 {
        v.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `ln p_L`: each channel carries `1/B` of the emission (B splitters), so
/// `p_L = L!/Π(n_s! m_s!) · B^{−L} · F`.
fn log_prob_with(cfg: &ChainConfig, part: &ChainPartition, f: f64) -> f64 {
    ln_multinomial(&part.counts()) - part.total() as f64 * (cfg.bonds() as f64).ln() + positive_ln(f)
}

pub fn log_chain_partition_prob(cfg: &ChainConfig, part: &ChainPartition) -> Result<f64> {
    let f = chain_history_weight(cfg, part)?;
    Ok(log_prob_with(cfg, part, f))
}

pub fn chain_partition_prob(cfg: &ChainConfig, part: &ChainPartition) -> Result<f64> {
    log_chain_partition_prob(cfg, part).map(f64::exp)
}

/// `ln p_L` for every partition of `L` detections over the `2B` channels.
pub fn chain_partition_table(cfg: &ChainConfig, l: u32) -> Result<Vec<(f64, ChainPartition)>> {
    let channels = 2 * cfg.bonds();
    let count = composition_count(l, channels);
    if count > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            count,
            budget: ENUMERATION_BUDGET,
        });
    }
    let cache = SpectrumCache::up_to(l);
    let all: Vec<Vec<u32>> = compositions(l, channels).collect();
    Ok(all
        .into_par_iter()
        .map(|c| {
            let part = ChainPartition::from_counts(&c);
            let spectra: Vec<&BondSpectrum> = part
                .bonds
                .iter()
                .map(|&(n, m)| cache.get(n, m).expect("cache covers n + m ≤ L"))
                .collect();
            let f = weight_from_spectra(cfg, &spectra);
            (log_prob_with(cfg, &part, f), part)
        })
        .collect())
}

/// Co-maximal chain partitions. Members outside the symmetry orbit of the
/// first one are listed in `outside_orbit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainComaximal {
    pub partitions: Vec<ChainPartition>,
    pub log_prob: f64,
    pub outside_orbit: Vec<ChainPartition>,
}

impl ChainComaximal {
    pub fn contains(&self, p: &ChainPartition) -> bool {
        self.partitions.contains(p)
    }

    /// True when every swap or bond permutation of a member is also a member.
    pub fn is_symmetry_closed(&self) -> bool {
        self.partitions
            .iter()
            .all(|p| p.symmetry_orbit().iter().all(|q| self.contains(q)))
    }
}

pub fn chain_most_probable_partitions(cfg: &ChainConfig, l: u32, tol: f64) -> Result<ChainComaximal> {
    let table = chain_partition_table(cfg, l)?;
    let (log_prob, partitions) = comaximal_of(&table, tol)
        .ok_or_else(|| Error::Annihilated("every chain partition has zero probability".into()))?;
    let orbit = partitions[0].symmetry_orbit();
    let outside_orbit = partitions
        .iter()
        .filter(|p| !orbit.contains(p))
        .cloned()
        .collect();
    Ok(ChainComaximal {
        partitions,
        log_prob,
        outside_orbit,
    })
}

/// Marginal law of `(n, m)` on each splitter, from a full table.
pub fn bond_marginals(cfg: &ChainConfig, table: &[(f64, ChainPartition)]) -> Vec<Vec<((u32, u32), f64)>> {
    (0..cfg.bonds())
        .map(|s| {
            let mut acc: HashMap<(u32, u32), NeumaierSum> = HashMap::new();
            for (lp, part) in table {
                acc.entry(part.bonds[s]).or_default().add(lp.exp());
            }
            let mut rows: Vec<((u32, u32), f64)> =
                acc.into_iter().map(|(k, v)| (k, v.total())).collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            rows
        })
        .collect()
}

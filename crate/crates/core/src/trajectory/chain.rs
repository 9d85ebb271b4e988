//! Conditional state of a chain of modes: detection counts per splitter.
//!
//! The joint relative-phase density is `Π_s h_{n_s,m_s}(Φ_s − ξ_s)`, with the
//! ring constraint where it applies, so the counts are a complete description.

use std::f64::consts::PI;

use crate::detstat::chain::BondSpectrum;
use crate::detstat::{chain_history_weight, ChainConfig, ChainPartition, Topology};
use crate::distribution::PhaseMarginal;
use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    cfg: ChainConfig,
    bonds: Vec<(u32, u32)>,
}

impl ChainState {
    pub fn new(cfg: ChainConfig) -> Self {
        let bonds = vec![(0, 0); cfg.bonds()];
        Self { cfg, bonds }
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    pub fn partition(&self) -> ChainPartition {
        ChainPartition::new(self.bonds.clone())
    }

    /// Records a detection in channel `2s` (`s+`) or `2s + 1` (`s−`).
    pub fn apply(&mut self, channel: usize) {
        let (n, m) = &mut self.bonds[channel / 2];
        if channel % 2 == 0 {
            *n += 1;
        } else {
            *m += 1;
        }
    }

    fn weight_with(&self, channel: Option<usize>) -> Result<f64> {
        let mut next = self.clone();
        if let Some(c) = channel {
            next.apply(c);
        }
        chain_history_weight(&self.cfg, &next.partition())
    }

    /// Probability that the next detection lands in each channel: the
    /// emission splits evenly over the splitters, then by the joint
    /// expectation of `cos²` or `sin²` of the bond phase.
    pub fn branching_probabilities(&self) -> Result<Vec<f64>> {
        let weights = (0..2 * self.cfg.bonds())
            .map(|c| self.weight_with(Some(c)).map(|w| w.max(0.0)))
            .collect::<Result<Vec<f64>>>()?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Annihilated("chain state admits no detection".into()));
        }
        Ok(weights.iter().map(|w| w / total).collect())
    }

    /// Normalized marginal of the relative phase on splitter `s`.
    pub fn bond_marginal(&self, s: usize, grid_size: usize) -> Result<PhaseMarginal> {
        if s >= self.bonds.len() {
            return Err(Error::InvalidParameter(format!("no splitter {}", s + 1)));
        }
        if grid_size < 8 {
            return Err(Error::InvalidParameter(format!("grid size {grid_size} < 8")));
        }
        let (n, m) = self.bonds[s];
        let xi = self.cfg.xi();
        let phi: Vec<f64> = (0..grid_size).map(|j| 2.0 * PI * j as f64 / grid_size as f64).collect();
        let own = |p: f64| {
            let x = (p - xi[s]) / 2.0;
            x.cos().powi(2 * n as i32) * x.sin().powi(2 * m as i32)
        };
        let raw: Vec<f64> = match self.cfg.topology() {
            Topology::Linear => phi.iter().map(|&p| own(p)).collect(),
            Topology::Circular => {
                // the other phases sum to −Φ_s; their convolution has
                // coefficients Π ĥ_r(k) e^{−ikξ_r}
                let others: Vec<BondSpectrum> = self
                    .bonds
                    .iter()
                    .enumerate()
                    .filter(|&(r, _)| r != s)
                    .map(|(_, &(n, m))| BondSpectrum::new(n, m))
                    .collect();
                let shift: f64 = xi.iter().enumerate().filter(|&(r, _)| r != s).map(|(_, x)| x).sum();
                let kmax = others.iter().map(|o| o.degree()).min().unwrap_or(0) as i64;
                phi.iter()
                    .map(|&p| {
                        let mut acc = NeumaierSum::new();
                        acc.add(others.iter().map(|o| o.coeff(0)).product());
                        for k in 1..=kmax {
                            let c: f64 = others.iter().map(|o| o.coeff(k)).product();
                            acc.add(2.0 * c * (k as f64 * (p + shift)).cos());
                        }
                        own(p) * acc.total().max(0.0)
                    })
                    .collect()
            }
        };
        let h = 2.0 * PI / grid_size as f64;
        let total = h * raw.iter().copied().collect::<NeumaierSum>().total();
        if !(total > 0.0) {
            return Err(Error::Annihilated("bond marginal vanished".into()));
        }
        Ok(PhaseMarginal {
            phi,
            density: raw.iter().map(|r| r / total).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_marginal_integrates_to_the_joint_weight() {
        let cfg = ChainConfig::new(3, Topology::Circular, vec![0.0, 0.4, 2.0]).unwrap();
        let mut st = ChainState::new(cfg.clone());
        for c in [0, 0, 3, 4, 4, 5, 1] {
            st.apply(c);
        }
        let grid = 64;
        let m = st.bond_marginal(1, grid).unwrap();
        assert!((m.integral() - 1.0).abs() < 1e-12);

        let h = |(n, m): (u32, u32), x: f64| (x / 2.0).cos().powi(2 * n as i32) * (x / 2.0).sin().powi(2 * m as i32);
        let xi = cfg.xi();
        let brute: Vec<f64> = m
            .phi
            .iter()
            .map(|&p2| {
                (0..grid)
                    .map(|j| {
                        let p1 = 2.0 * PI * j as f64 / grid as f64;
                        h(st.bonds[0], p1 - xi[0]) * h(st.bonds[1], p2 - xi[1]) * h(st.bonds[2], -p1 - p2 - xi[2])
                    })
                    .sum::<f64>()
            })
            .collect();
        let scale = brute.iter().sum::<f64>() * 2.0 * PI / grid as f64;
        for (d, b) in m.density.iter().zip(&brute) {
            assert!((d - b / scale).abs() < 1e-10, "{d} vs {}", b / scale);
        }
        let probs = st.branching_probabilities().unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_marginal_is_the_bond_factor() {
        let cfg = ChainConfig::new(3, Topology::Linear, vec![1.0, 2.0]).unwrap();
        let mut st = ChainState::new(cfg);
        for _ in 0..6 {
            st.apply(0);
        }
        let m = st.bond_marginal(0, 720).unwrap();
        let (j, _) = m.density.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((m.phi[j] - 1.0).abs() < 2.0 * PI / 720.0);
        let flat = st.bond_marginal(1, 16).unwrap();
        assert!(flat.density.iter().all(|d| (d - 1.0 / (2.0 * PI)).abs() < 1e-12));
    }
}

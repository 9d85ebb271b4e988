//! Quantum-jump Monte Carlo over detection histories.
//!
//! The total detection rate `ΓR²e^{−Γt}` is autonomous, so a trajectory first
//! draws its detection instants and then, instant by instant, picks a channel
//! with probability `∫f g_s / ∫f` and multiplies `f` by `g_s`.
//!
//! Random numbers come from ChaCha20. Trajectory `i` of an ensemble with seed
//! `seed` uses the key expanded from `seed` and stream number `i`; draws are
//! consumed in order (the count first, then the instants, then one uniform per
//! sampled branching).

mod chain;
mod ensemble;

pub use chain::ChainState;
pub use ensemble::{
    chi_square_poisson, run_ensemble, total_variation, ChiSquareTest, CountBin, Ensemble,
    EnsembleSummary, PartitionFrequency, PeakSummary,
};

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::bloch::{DetectorChannel, DetectorSetup};
use crate::detstat::{ChainConfig, Partition, SourceParams};
use crate::distribution::{BaseMeasure, PhaseDistribution};
use crate::error::{Error, Result};

/// Relative gap below which two branching probabilities count as tied.
pub const BRANCH_TIE_TOLERANCE: f64 = 1e-12;

/// How the channel is chosen at each detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Sample,
    /// Always the most likely channel; ties go to the lowest channel index.
    MostProbable,
}

/// Where the detection instants come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeSchedule {
    /// Poisson count with mean `R²(1 − e^{−ΓT})`, instants from the decay law on `[0, T]`.
    Decay,
    /// Exactly `count` instants, uniform on `[0, window]`.
    FixedUniform { count: u32, window: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectorySetup {
    Modes { setup: DetectorSetup },
    Chain { chain: ChainConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub source: SourceParams,
    pub setup: TrajectorySetup,
    pub policy: Policy,
    pub seed: u64,
    pub initial_base: BaseMeasure,
    pub schedule: TimeSchedule,
}

impl TrajectoryConfig {
    /// Decay-law instants, sampled channels, uniform equatorial start.
    pub fn new(source: SourceParams, setup: DetectorSetup, seed: u64) -> Self {
        Self {
            source,
            setup: TrajectorySetup::Modes { setup },
            policy: Policy::Sample,
            seed,
            initial_base: BaseMeasure::equator(),
            schedule: TimeSchedule::Decay,
        }
    }

    pub fn chain(source: SourceParams, chain: ChainConfig, seed: u64) -> Self {
        Self {
            source,
            setup: TrajectorySetup::Chain { chain },
            policy: Policy::Sample,
            seed,
            initial_base: BaseMeasure::equator(),
            schedule: TimeSchedule::Decay,
        }
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_schedule(mut self, schedule: TimeSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_base(mut self, base: BaseMeasure) -> Self {
        self.initial_base = base;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.initial_base.validate()?;
        if let TimeSchedule::FixedUniform { window, .. } = self.schedule {
            if !(window.is_finite() && window > 0.0) {
                return Err(Error::InvalidParameter(format!("window must be > 0, got {window}")));
            }
        }
        if let TrajectorySetup::Chain { .. } = self.setup {
            if self.initial_base != BaseMeasure::equator() {
                return Err(Error::InvalidParameter(
                    "chains start from uniform independent phases".into(),
                ));
            }
        }
        Ok(())
    }

    /// Channel labels in index order.
    pub fn channel_labels(&self) -> Result<Vec<String>> {
        Ok(match &self.setup {
            TrajectorySetup::Modes { setup } => setup.channels()?.into_iter().map(|c| c.label).collect(),
            TrajectorySetup::Chain { chain } => chain.channel_labels(),
        })
    }

    /// Generator for trajectory `index`.
    pub fn rng(&self, index: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub t: f64,
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FinalState {
    Sphere(PhaseDistribution),
    Chain(ChainState),
}

impl FinalState {
    pub fn as_sphere(&self) -> Option<&PhaseDistribution> {
        match self {
            FinalState::Sphere(d) => Some(d),
            FinalState::Chain(_) => None,
        }
    }

    pub fn as_chain(&self) -> Option<&ChainState> {
        match self {
            FinalState::Chain(c) => Some(c),
            FinalState::Sphere(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub events: Vec<DetectionEvent>,
    pub final_state: FinalState,
    /// Detections per channel (`n₁, m₁, n₂, m₂, ...` for chains).
    pub partition: Partition,
    /// Log density of this time-ordered history: the Poisson-process factor
    /// `e^{−R²(1−e^{−ΓT})} Π ΓR²e^{−Γt_i}` times the product of the chosen
    /// branching probabilities.
    pub log_weight: f64,
}

impl TrajectoryResult {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Log of the time part of the history density.
pub fn log_time_density(p: &SourceParams, times: &[f64]) -> f64 {
    let rate = (p.gamma * p.r * p.r).ln();
    -p.mean_count() + times.iter().map(|t| rate - p.gamma * t).sum::<f64>()
}

/// Detection instants of one window, sorted ascending.
pub fn sample_detection_times<R: Rng + ?Sized>(p: &SourceParams, rng: &mut R) -> Vec<f64> {
    let mean = p.mean_count();
    let count = if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
    } else {
        0
    };
    // inverse CDF of Γe^{−Γt}/(1 − e^{−ΓT}) on [0, T]
    let mass = -(-p.gamma * p.t_window).exp_m1();
    let mut times: Vec<f64> = (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            (-(-u * mass).ln_1p() / p.gamma).min(p.t_window)
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times
}

fn schedule_times<R: Rng + ?Sized>(cfg: &TrajectoryConfig, rng: &mut R) -> Vec<f64> {
    match cfg.schedule {
        TimeSchedule::Decay => sample_detection_times(&cfg.source, rng),
        TimeSchedule::FixedUniform { count, window } => {
            let mut times: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * window).collect();
            times.sort_by(f64::total_cmp);
            times
        }
    }
}

/// Index of the largest probability; near-ties resolve to the lowest index.
pub fn most_probable_channel(probs: &[f64]) -> usize {
    let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    probs
        .iter()
        .position(|&p| p >= max * (1.0 - BRANCH_TIE_TOLERANCE))
        .unwrap_or(0)
}

fn choose<R: Rng + ?Sized>(policy: Policy, probs: &[f64], rng: &mut R) -> usize {
    match policy {
        Policy::MostProbable => most_probable_channel(probs),
        Policy::Sample => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            // rounding left u above the cumulative sum
            probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
        }
    }
}

/// Channel choice and state update for one of the two state kinds.
trait JumpState {
    fn branching(&self, t: f64) -> Result<Vec<f64>>;
    fn jump(&mut self, channel: usize, t: f64);
    fn channel_count(&self) -> usize;
}

struct SphereState<'a> {
    dist: PhaseDistribution,
    channels: &'a [DetectorChannel],
}

impl JumpState for SphereState<'_> {
    fn branching(&self, t: f64) -> Result<Vec<f64>> {
        self.dist.branching_probabilities(self.channels, t)
    }

    fn jump(&mut self, channel: usize, t: f64) {
        self.dist = self.dist.apply_detection(&self.channels[channel], t);
    }

    fn channel_count(&self) -> usize {
        self.channels.len()
    }
}

impl JumpState for ChainState {
    fn branching(&self, _t: f64) -> Result<Vec<f64>> {
        self.branching_probabilities()
    }

    fn jump(&mut self, channel: usize, _t: f64) {
        self.apply(channel);
    }

    fn channel_count(&self) -> usize {
        2 * self.config().bonds()
    }
}

/// Either follows `forced` channels or chooses them by `policy`.
fn evolve<S: JumpState, R: Rng + ?Sized>(
    state: &mut S,
    times: &[f64],
    forced: Option<&[usize]>,
    policy: Policy,
    rng: &mut R,
) -> Result<(Vec<DetectionEvent>, Vec<u32>, f64)> {
    let mut counts = vec![0u32; state.channel_count()];
    let mut events = Vec::with_capacity(times.len());
    let mut log_branch = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let probs = state.branching(t)?;
        let c = match forced {
            Some(f) => f[i],
            None => choose(policy, &probs, rng),
        };
        if c >= probs.len() {
            return Err(Error::InvalidParameter(format!("no channel {c}")));
        }
        log_branch += probs[c].ln();
        state.jump(c, t);
        counts[c] += 1;
        events.push(DetectionEvent { t, channel: c });
    }
    Ok((events, counts, log_branch))
}

fn run_with<R: Rng + ?Sized>(
    cfg: &TrajectoryConfig,
    times: &[f64],
    forced: Option<&[usize]>,
    rng: &mut R,
) -> Result<TrajectoryResult> {
    cfg.validate()?;
    let time_part = log_time_density(&cfg.source, times);
    let (events, counts, log_branch, final_state) = match &cfg.setup {
        TrajectorySetup::Modes { setup } => {
            let channels = setup.channels()?;
            let mut state = SphereState {
                dist: PhaseDistribution::new(cfg.initial_base)?,
                channels: &channels,
            };
            let (e, c, b) = evolve(&mut state, times, forced, cfg.policy, rng)?;
            (e, c, b, FinalState::Sphere(state.dist))
        }
        TrajectorySetup::Chain { chain } => {
            let mut state = ChainState::new(chain.clone());
            let (e, c, b) = evolve(&mut state, times, forced, cfg.policy, rng)?;
            (e, c, b, FinalState::Chain(state))
        }
    };
    Ok(TrajectoryResult {
        events,
        final_state,
        partition: Partition::new(counts),
        log_weight: time_part + log_branch,
    })
}

/// Trajectory `index` of the ensemble defined by `cfg`.
pub fn run_trajectory_indexed(cfg: &TrajectoryConfig, index: u64) -> Result<TrajectoryResult> {
    let mut rng = cfg.rng(index);
    let times = schedule_times(cfg, &mut rng);
    run_with(cfg, &times, None, &mut rng)
}

/// The first trajectory of the ensemble defined by `cfg`.
pub fn run_trajectory(cfg: &TrajectoryConfig) -> Result<TrajectoryResult> {
    run_trajectory_indexed(cfg, 0)
}

/// Re-evaluates a given history: same updates, no randomness.
pub fn replay_history(cfg: &TrajectoryConfig, events: &[DetectionEvent]) -> Result<TrajectoryResult> {
    if events.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::InvalidParameter("events must be time-ordered".into()));
    }
    let times: Vec<f64> = events.iter().map(|e| e.t).collect();
    let forced: Vec<usize> = events.iter().map(|e| e.channel).collect();
    let mut rng = cfg.rng(0);
    run_with(cfg, &times, Some(&forced), &mut rng)
}

/// Alias used for chain setups; the dispatch is on the configured setup.
pub fn chain_trajectory(cfg: &TrajectoryConfig) -> Result<TrajectoryResult> {
    if !matches!(cfg.setup, TrajectorySetup::Chain { .. }) {
        return Err(Error::InvalidParameter("configuration has no chain setup".into()));
    }
    run_trajectory(cfg)
}

/// Writes `traj_id,t,channel` rows with channel labels.
pub fn write_events_csv<W: Write>(
    out: W,
    labels: &[String],
    results: &[TrajectoryResult],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["traj_id", "t", "channel"])?;
    for (id, r) in results.iter().enumerate() {
        for e in &r.events {
            w.write_record([id.to_string(), format!("{:.17e}", e.t), labels[e.channel].clone()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{CouplingSpec, ModeLabel, coupled_detector_direction};
    use crate::detstat::{history_weight, two_channel_uniform_closed_form, Topology};
    use crate::numeric::angle_distance;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn source() -> SourceParams {
        SourceParams::new(2.0, 1.0, 3.0).unwrap()
    }

    #[test]
    fn short_window_gives_no_detections() {
        let p = SourceParams::new(1.0, 1.0, 1e-12).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let empty = (0..1000).filter(|_| sample_detection_times(&p, &mut rng).is_empty()).count();
        assert_eq!(empty, 1000);
    }

    #[test]
    fn count_mean_and_single_time_mean() {
        let p = source();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let n = 10_000;
        let counts: Vec<f64> = (0..n).map(|_| sample_detection_times(&p, &mut rng).len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let se = (p.mean_count() / n as f64).sqrt();
        assert!((mean - p.mean_count()).abs() < 3.0 * se, "{mean} vs {}", p.mean_count());

        // ΓT ≫ 1: a lone instant is exponential with mean 1/Γ
        let p = SourceParams::new(1.0, 2.0, 40.0).unwrap();
        let mut times = Vec::new();
        while times.len() < n {
            let t = sample_detection_times(&p, &mut rng);
            if t.len() == 1 {
                times.push(t[0]);
            }
        }
        let mean = times.iter().sum::<f64>() / n as f64;
        let se = 0.5 / (n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn same_seed_same_trajectory() {
        let cfg = TrajectoryConfig::new(source(), DetectorSetup::TwoBeamSplitters { xi: 1.0 }, 99);
        let a = run_trajectory_indexed(&cfg, 7).unwrap();
        let b = run_trajectory_indexed(&cfg, 7).unwrap();
        assert_eq!(a, b);
        let c = run_trajectory_indexed(&cfg, 8).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn most_probable_history_locks_onto_a_setting() {
        let xi = 1.2;
        let cfg = TrajectoryConfig::new(source(), DetectorSetup::TwoBeamSplitters { xi }, 3)
            .with_schedule(TimeSchedule::FixedUniform { count: 200, window: 1.0 })
            .with_policy(Policy::MostProbable);
        let r = run_trajectory(&cfg).unwrap();
        let report = r.final_state.as_sphere().unwrap().peak_locations().unwrap();
        let dominant = report.dominant(1e-3);
        assert_eq!(dominant.len(), 1, "{report:?}");
        let near = [0.0, PI, xi, xi + PI]
            .iter()
            .map(|&c| angle_distance(dominant[0].phi, c).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(near < 0.1, "peak at {}", dominant[0].phi);
    }

    #[test]
    fn branching_product_telescopes_to_history_weight() {
        let cfg = TrajectoryConfig::new(source(), DetectorSetup::TwoBeamSplitters { xi: 0.9 }, 17)
            .with_schedule(TimeSchedule::FixedUniform { count: 10, window: 3.0 });
        let channels = DetectorSetup::TwoBeamSplitters { xi: 0.9 }.channels().unwrap();
        let dist0 = PhaseDistribution::uniform_ring();
        for i in 0..20 {
            let r = run_trajectory_indexed(&cfg, i).unwrap();
            let times: Vec<f64> = r.events.iter().map(|e| e.t).collect();
            let f = history_weight(&dist0, &channels, &r.partition).unwrap();
            let want = log_time_density(&cfg.source, &times) + f.ln();
            assert!((r.log_weight - want).abs() < 1e-9 * want.abs().max(1.0), "{} vs {want}", r.log_weight);
        }
    }

    #[test]
    fn coupled_events_use_the_direction_at_their_instant() {
        let c = CouplingSpec::continuous(1.0, 0.25).unwrap();
        let cfg = TrajectoryConfig::new(source(), DetectorSetup::Continuous { coupling: c }, 4)
            .with_schedule(TimeSchedule::FixedUniform { count: 6, window: 2.0 * PI });
        let r = run_trajectory(&cfg).unwrap();
        let dist = r.final_state.as_sphere().unwrap();
        for e in &r.events {
            let mode = if e.channel == 0 { ModeLabel::A } else { ModeLabel::B };
            let want = coupled_detector_direction(&c, e.t, mode);
            assert!(dist.factors().iter().any(|f| f.direction == want));
        }
    }

    #[test]
    fn chain_trajectories_respect_counts_and_weights() {
        let chain = ChainConfig::new(3, Topology::Circular, vec![0.0, 0.0, PI / 2.0]).unwrap();
        let cfg = TrajectoryConfig::chain(source(), chain.clone(), 8)
            .with_schedule(TimeSchedule::FixedUniform { count: 8, window: 1.0 });
        let r = chain_trajectory(&cfg).unwrap();
        let state = r.final_state.as_chain().unwrap();
        assert_eq!(state.partition().counts(), r.partition.counts);
        let times: Vec<f64> = r.events.iter().map(|e| e.t).collect();
        let f = crate::detstat::chain_history_weight(&chain, &state.partition()).unwrap();
        let want = log_time_density(&cfg.source, &times) + f.ln() - 8.0 * 3f64.ln();
        assert!((r.log_weight - want).abs() < 1e-9 * want.abs());
    }

    #[test]
    fn greedy_ring_history_is_not_a_global_maximum() {
        // per-detection argmax keeps feeding the first bond that fired, so it
        // never reaches the partitions found by exhaustive search
        let chain = ChainConfig::new(3, Topology::Circular, vec![0.0, 0.0, PI / 2.0]).unwrap();
        let cfg = TrajectoryConfig::chain(source(), chain.clone(), 1)
            .with_policy(Policy::MostProbable)
            .with_schedule(TimeSchedule::FixedUniform { count: 30, window: 1.0 });
        let r = chain_trajectory(&cfg).unwrap();
        let end = r.final_state.as_chain().unwrap().partition();
        assert_eq!(end, crate::detstat::ChainPartition::new(vec![(30, 0), (0, 0), (0, 0)]));
        let best = crate::detstat::ChainPartition::new(vec![(5, 5), (10, 0), (10, 0)]);
        let (a, b) = (
            crate::detstat::log_chain_partition_prob(&chain, &end).unwrap(),
            crate::detstat::log_chain_partition_prob(&chain, &best).unwrap(),
        );
        assert!(a < b - 20.0);
    }

    #[test]
    fn linear_chain_bonds_bunch_independently() {
        let chain = ChainConfig::new(3, Topology::Linear, vec![0.3, 2.0]).unwrap();
        let cfg = TrajectoryConfig::chain(source(), chain, 21)
            .with_schedule(TimeSchedule::FixedUniform { count: 2, window: 1.0 });
        let n = 20_000u64;
        let results: Vec<TrajectoryResult> = (0..n).map(|i| run_trajectory_indexed(&cfg, i).unwrap()).collect();
        // both detections on bond 1: same output with probability 3/4 by the bunching law
        let on_first: Vec<&TrajectoryResult> = results.iter().filter(|r| r.partition.counts[0] + r.partition.counts[1] == 2).collect();
        let same = on_first.iter().filter(|r| r.partition.counts[0] != 1).count() as f64 / on_first.len() as f64;
        let want = two_channel_uniform_closed_form(2, 0) + two_channel_uniform_closed_form(2, 2);
        let se = (want * (1.0 - want) / on_first.len() as f64).sqrt();
        assert!((same - want).abs() < 4.0 * se, "{same} vs {want}");
    }

    #[test]
    fn most_probable_ties_go_low() {
        assert_eq!(most_probable_channel(&[0.25, 0.25, 0.5 - 1e-17, 0.5]), 2);
        assert_eq!(most_probable_channel(&[0.5, 0.5]), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn order_of_static_events_does_not_matter(seed in 0u64..1000, xi in 0.0..6.2f64) {
            let cfg = TrajectoryConfig::new(source(), DetectorSetup::TwoBeamSplitters { xi }, seed)
                .with_schedule(TimeSchedule::FixedUniform { count: 6, window: 1.0 });
            let r = run_trajectory(&cfg).unwrap();
            let mut events = r.events.clone();
            let times: Vec<f64> = events.iter().map(|e| e.t).collect();
            events.reverse();
            for (e, &t) in events.iter_mut().zip(&times) {
                e.t = t;
            }
            let back = replay_history(&cfg, &events).unwrap();
            let a = r.final_state.as_sphere().unwrap();
            let b = back.final_state.as_sphere().unwrap();
            for phi in [0.1, 1.0, 2.5, 4.0] {
                let (x, y) = (a.marginal_log_density_at(phi).unwrap(), b.marginal_log_density_at(phi).unwrap());
                prop_assert!((x - y).abs() < 1e-10 || (x == y));
            }
            prop_assert!((r.log_weight - back.log_weight).abs() < 1e-9 * r.log_weight.abs().max(1.0));
        }
    }
}

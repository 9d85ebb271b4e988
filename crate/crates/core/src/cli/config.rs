//! JSON experiment configuration.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::bloch::{CouplingSpec, DetectorSetup};
use crate::detstat::{ChainConfig, PartitionConstraint, SourceParams, Topology};
use crate::distribution::BaseMeasure;
use crate::fock::OracleSettings;
use crate::trajectory::{Policy, TimeSchedule, TrajectoryConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Beam splitters fed by both modes.
    TwoBs,
    /// Direct detection after a coupling pulse.
    Pulsed,
    /// Direct detection with tunneling left on.
    Continuous,
    /// Tunneling plus an energy offset between the modes.
    EnergyShift,
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceInput {
    pub r: f64,
    pub gamma: f64,
    pub t_window: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingInput {
    pub delta: f64,
    #[serde(default)]
    pub epsilon: f64,
    /// Pulse duration, for `pulsed` only.
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainInput {
    pub modes: usize,
    pub topology: Topology,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OracleInput {
    #[serde(default)]
    pub quick: bool,
    pub r_values: Option<Vec<f64>>,
    pub pairs: Option<usize>,
    pub histories: Option<usize>,
    pub max_events: Option<usize>,
    pub n_max: Option<usize>,
}

/// One run, as read from `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub source: Option<SourceInput>,
    /// Number of beam splitters for `two_bs` (1 or 2, default 2).
    #[serde(default)]
    pub splitters: Option<u8>,
    #[serde(default)]
    pub xi: Option<f64>,
    #[serde(default)]
    pub coupling: Option<CouplingInput>,
    #[serde(default)]
    pub chain: Option<ChainInput>,
    #[serde(default)]
    pub base: Option<BaseMeasure>,
    /// Detections `L`: the table size for `stats`, a fixed count for `trajectory`.
    #[serde(default)]
    pub detections: Option<u32>,
    /// Instants are drawn uniformly on `[0, window]` when `detections` is set.
    #[serde(default)]
    pub window: Option<f64>,
    /// Restrict to `n₁ + n₂ = n₃ + n₄ = L/2` (two splitters only).
    #[serde(default)]
    pub balanced: bool,
    #[serde(default)]
    pub trajectories: Option<usize>,
    #[serde(default)]
    pub policy: Option<Policy>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub oracle: Option<OracleInput>,
}

/// Source used when a config gives none.
pub const DEFAULT_SOURCE: SourceInput = SourceInput {
    r: 3.0,
    gamma: 1.0,
    t_window: 1.0,
};

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| bad(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A config with only the kind set.
    pub fn of_kind(kind: ExperimentKind) -> Self {
        Self {
            kind,
            source: None,
            splitters: None,
            xi: None,
            coupling: None,
            chain: None,
            base: None,
            detections: None,
            window: None,
            balanced: false,
            trajectories: None,
            policy: None,
            seed: None,
            grid: None,
            tol: None,
            oracle: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.source_params()?;
        if let Some(base) = self.base {
            base.validate().map_err(|e| bad(e.to_string()))?;
        }
        if let Some(t) = self.tol {
            if !(t.is_finite() && t >= 0.0) {
                return Err(bad(format!("tol must be ≥ 0, got {t}")));
            }
        }
        if let Some(g) = self.grid {
            if g < 8 {
                return Err(bad(format!("grid must be ≥ 8, got {g}")));
            }
        }
        if let Some(w) = self.window {
            if !(w.is_finite() && w > 0.0) {
                return Err(bad(format!("window must be > 0, got {w}")));
            }
        }
        if self.trajectories == Some(0) {
            return Err(bad("trajectories must be ≥ 1"));
        }
        let unused = |field: &str, present: bool| {
            if present {
                Err(bad(format!("`{field}` does not apply to {:?}", self.kind)))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::TwoBs => {
                unused("coupling", self.coupling.is_some())?;
                unused("chain", self.chain.is_some())?;
            }
            ExperimentKind::Chain => {
                unused("coupling", self.coupling.is_some())?;
                unused("xi", self.xi.is_some())?;
                unused("base", self.base.is_some())?;
            }
            _ => {
                unused("chain", self.chain.is_some())?;
                unused("xi", self.xi.is_some())?;
            }
        }
        if self.balanced && !(self.kind == ExperimentKind::TwoBs && self.splitters.unwrap_or(2) == 2) {
            return Err(bad("`balanced` needs two beam splitters"));
        }
        if self.kind == ExperimentKind::Chain {
            self.chain_config()?;
        } else {
            self.detector_setup()?;
        }
        Ok(())
    }

    pub fn source_params(&self) -> Result<SourceParams, CliError> {
        let s = self.source.unwrap_or(DEFAULT_SOURCE);
        SourceParams::new(s.r, s.gamma, s.t_window).map_err(|e| bad(e.to_string()))
    }

    pub fn base(&self) -> BaseMeasure {
        self.base.unwrap_or_else(BaseMeasure::equator)
    }

    pub fn detector_setup(&self) -> Result<DetectorSetup, CliError> {
        let coupling = || self.coupling.ok_or_else(|| bad(format!("{:?} needs `coupling`", self.kind)));
        match self.kind {
            ExperimentKind::TwoBs => {
                let xi = self.xi.unwrap_or(PI / 2.0);
                match self.splitters.unwrap_or(2) {
                    1 => Ok(DetectorSetup::SingleBeamSplitter { xi }),
                    2 => Ok(DetectorSetup::TwoBeamSplitters { xi }),
                    n => Err(bad(format!("splitters must be 1 or 2, got {n}"))),
                }
            }
            ExperimentKind::Pulsed => {
                let c = coupling()?;
                if c.epsilon != 0.0 {
                    return Err(bad("a pulse has no energy offset; drop `epsilon`"));
                }
                let tau = c.tau.ok_or_else(|| bad("pulsed needs `coupling.tau`"))?;
                let spec = CouplingSpec::pulsed(c.delta, tau).map_err(|e| bad(e.to_string()))?;
                Ok(DetectorSetup::Pulsed { coupling: spec })
            }
            ExperimentKind::Continuous | ExperimentKind::EnergyShift => {
                let c = coupling()?;
                if c.tau.is_some() {
                    return Err(bad("`tau` applies to pulsed coupling only"));
                }
                if self.kind == ExperimentKind::Continuous && c.epsilon != 0.0 {
                    return Err(bad("continuous has no energy offset; use energy_shift"));
                }
                if self.kind == ExperimentKind::EnergyShift && c.epsilon == 0.0 {
                    return Err(bad("energy_shift needs a nonzero `coupling.epsilon`"));
                }
                let spec = CouplingSpec::continuous(c.delta, c.epsilon).map_err(|e| bad(e.to_string()))?;
                Ok(DetectorSetup::Continuous { coupling: spec })
            }
            ExperimentKind::Chain => Err(bad("chain has no two-mode detector setup")),
        }
    }

    pub fn chain_config(&self) -> Result<ChainConfig, CliError> {
        let c = self.chain.as_ref().ok_or_else(|| bad("chain needs `chain`"))?;
        ChainConfig::new(c.modes, c.topology, c.xi.clone()).map_err(|e| bad(e.to_string()))
    }

    pub fn constraint(&self) -> Result<Option<PartitionConstraint>, CliError> {
        if !self.balanced {
            return Ok(None);
        }
        let l = self.detections.ok_or_else(|| bad("`balanced` needs `detections`"))?;
        PartitionConstraint::balanced_beam_splitters(l)
            .map(Some)
            .map_err(|e| bad(e.to_string()))
    }

    /// Trajectory settings: fixed count on a window when `detections` is
    /// set (window defaults to one coupling period, else `T`), otherwise the
    /// decay law.
    pub fn trajectory_config(&self, seed: u64) -> Result<TrajectoryConfig, CliError> {
        let source = self.source_params()?;
        let base = if self.kind == ExperimentKind::Chain {
            TrajectoryConfig::chain(source, self.chain_config()?, seed)
        } else {
            TrajectoryConfig::new(source, self.detector_setup()?, seed).with_base(self.base())
        };
        let schedule = match self.detections {
            None => TimeSchedule::Decay,
            Some(count) => {
                let period = match self.detector_setup() {
                    Ok(DetectorSetup::Continuous { coupling }) => coupling.period(),
                    _ => None,
                };
                let window = self.window.or(period).unwrap_or(source.t_window);
                TimeSchedule::FixedUniform { count, window }
            }
        };
        Ok(base
            .with_policy(self.policy.unwrap_or(Policy::Sample))
            .with_schedule(schedule))
    }

    pub fn oracle_settings(&self) -> OracleSettings {
        let o = self.oracle.clone().unwrap_or_default();
        let mut s = if o.quick {
            OracleSettings::quick()
        } else {
            OracleSettings::default()
        };
        if let Some(v) = o.r_values {
            s.r_values = v;
        }
        if let Some(v) = o.pairs {
            s.pairs = v;
        }
        if let Some(v) = o.histories {
            s.histories = v;
        }
        if let Some(v) = o.max_events {
            s.max_events = v;
        }
        s.n_max = o.n_max;
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s
    }
}

//! Scenario files: TOML with `params`, `init`, `schedule`, `theta`,
//! `detector` and `run` sections. Every key has a default.

use std::path::Path;

use serde::Deserialize;

use super::SimError;
use crate::protocol::{Command, Mode};
use crate::tags::{DeploymentParams, ProcessorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    Clean,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Overflow {
    DropOldest,
    DropNewest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaMode {
    Static,
    Detector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fairness {
    /// Pending deliveries are scheduled before local ticks.
    Quorum,
    /// Heartbeats are interleaved so that no live processor is starved.
    Heartbeat,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Repeated,
    Generalized,
}

impl From<RunMode> for Mode {
    fn from(m: RunMode) -> Mode {
        match m {
            RunMode::Repeated => Mode::Repeated,
            RunMode::Generalized => Mode::Generalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub n: usize,
    pub f: usize,
    #[serde(rename = "C")]
    pub capacity: usize,
    pub b: u32,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection {
            n: 3,
            f: 1,
            capacity: 1,
            b: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    pub mode: InitMode,
    pub seed: u64,
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection {
            mode: InitMode::Clean,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub deliver: u32,
    pub proposer: u32,
    pub heartbeat: u32,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            deliver: 4,
            proposer: 1,
            heartbeat: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrashAt {
    /// Event index at which the crash is forced.
    pub at: u64,
    pub id: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub fairness: Vec<Fairness>,
    pub overflow: Overflow,
    pub weights: Weights,
    pub crashes: Vec<CrashAt>,
    /// Heartbeat ticks are generated; defaults to on in detector mode.
    pub heartbeats: Option<bool>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            fairness: vec![Fairness::Quorum],
            overflow: Overflow::DropOldest,
            weights: Weights::default(),
            crashes: Vec::new(),
            heartbeats: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaSection {
    pub mode: ThetaMode,
    pub static_proposers: Vec<u16>,
}

impl Default for ThetaSection {
    fn default() -> Self {
        ThetaSection {
            mode: ThetaMode::Static,
            static_proposers: vec![1],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(rename = "W")]
    pub threshold: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mode: RunMode,
    pub max_events: u64,
    /// Proposer inputs, cycled. Empty means a seeded generator.
    pub commands: Vec<u32>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            mode: RunMode::Repeated,
            max_events: 50_000,
            commands: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub params: ParamsSection,
    pub init: InitSection,
    pub schedule: ScheduleSection,
    pub theta: ThetaSection,
    pub detector: DetectorSection,
    pub run: RunSection,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| SimError::Config(e.message().to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Scenario::parse(&text)
    }

    pub fn deployment(&self) -> Result<DeploymentParams, SimError> {
        let p = &self.params;
        Ok(DeploymentParams::derive(p.n, p.f, p.capacity, p.b)?)
    }

    pub fn mode(&self) -> Mode {
        self.run.mode.clone().into()
    }

    pub fn threshold(&self) -> u32 {
        self.detector.threshold.unwrap_or_else(|| {
            crate::detector::DetectorState::default_threshold(self.params.n, self.params.capacity)
        })
    }

    pub fn heartbeats(&self) -> bool {
        self.schedule
            .heartbeats
            .unwrap_or(self.theta.mode == ThetaMode::Detector)
    }

    pub fn static_proposers(&self) -> Vec<ProcessorId> {
        self.theta.static_proposers.iter().copied().map(ProcessorId).collect()
    }

    pub fn commands(&self) -> Vec<Command> {
        self.run.commands.iter().copied().map(Command).collect()
    }

    pub fn has_fairness(&self, f: Fairness) -> bool {
        self.schedule.fairness.contains(&f)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let params = self.deployment()?;
        let in_range = |id: u16, key: &str| {
            if id == 0 || usize::from(id) > params.n {
                Err(SimError::Config(format!("{key}: processor {id} is not in 1..={}", params.n)))
            } else {
                Ok(())
            }
        };
        for &id in &self.theta.static_proposers {
            in_range(id, "theta.static_proposers")?;
        }
        for c in &self.schedule.crashes {
            in_range(c.id, "schedule.crashes")?;
        }
        let mut ids: Vec<u16> = self.schedule.crashes.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() > params.f {
            return Err(SimError::Config(format!(
                "schedule.crashes: {} distinct crashes exceed f = {}",
                ids.len(),
                params.f
            )));
        }
        if self.detector.threshold == Some(0) {
            return Err(SimError::Config("detector.W: must be positive".into()));
        }
        let w = self.schedule.weights;
        if w.deliver == 0 {
            return Err(SimError::Config("schedule.weights.deliver: must be positive".into()));
        }
        Ok(())
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Epoch, InterruptKind, Monitor, Violation};
use crate::protocol::Mode;
use crate::simnet::ThetaMode;
use crate::tags::{DeploymentParams, ProcessorId};

/// Safety audit of one closed safe epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochAudit {
    pub epoch: usize,
    pub at: ProcessorId,
    pub h: u32,
    /// `None` when the epoch has fewer than two completed trials.
    pub zone: Option<(u64, u64)>,
    /// The epoch's first valid entry produced no label from the epoch on,
    /// or is not below the observing processor.
    pub precondition: bool,
    /// Untainted decisions audited inside the zone.
    pub checked: usize,
    pub unsafe_steps: BTreeSet<u32>,
    pub violations: Vec<Violation>,
}

/// Per-run summary of everything the monitor measured.
#[derive(Debug, Clone)]
pub struct Report {
    pub params: DeploymentParams,
    pub mode: Mode,
    pub events: u64,
    /// Interrupt counts per processor and kind.
    pub interrupts: Vec<BTreeMap<String, usize>>,
    pub epochs: Vec<Epoch>,
    pub audits: Vec<EpochAudit>,
    pub max_primary: usize,
    pub max_embedded: usize,
    pub max_cl: usize,
    pub over_k: u64,
    pub over_k_cl: u64,
    /// `(λ, μ, count, bound)` for every leftward interrupt count.
    pub left_counts: Vec<(ProcessorId, ProcessorId, usize, u128)>,
    pub epoch_bounds: Vec<u128>,
    pub productions: Vec<usize>,
    pub decisions: usize,
    pub tainted_decisions: usize,
    pub max_wait_replies: usize,
    pub wait_bound: Option<usize>,
    pub max_heartbeat_gap: u32,
    pub detector_stable_at: Option<u64>,
    pub detector_violations: Option<u64>,
}

impl Report {
    pub(super) fn build(m: &Monitor) -> Self {
        let n = m.params.n;
        let ids: Vec<ProcessorId> = m.params.ids().collect();
        let mut interrupts = vec![BTreeMap::new(); n];
        for i in &m.interrupts {
            let key = match i.kind {
                InterruptKind::Left(mu) => format!("[{mu},<-]"),
                InterruptKind::Right { to, .. } => format!("[{to},->]"),
                other => other.to_string(),
            };
            *interrupts[i.at.index()].entry(key).or_insert(0) += 1;
        }
        let left_counts = ids
            .iter()
            .flat_map(|&lambda| ids.iter().filter(move |&&mu| mu < lambda).map(move |&mu| (lambda, mu)))
            .map(|(lambda, mu)| (lambda, mu, m.left_count(lambda, mu), m.left_bound(mu)))
            .collect();
        let detector_checked = m.heartbeat_fair && m.theta == ThetaMode::Detector && !m.crashes_planned;
        Report {
            params: m.params,
            mode: m.mode,
            events: m.events,
            interrupts,
            epochs: m.epochs.clone(),
            audits: m.audits(),
            max_primary: m.census.max_primary,
            max_embedded: m.census.max_embedded,
            max_cl: m.census.max_cl,
            over_k: m.census.over_k,
            over_k_cl: m.census.over_k_cl,
            left_counts,
            epoch_bounds: ids.iter().map(|&l| m.epoch_bound(l)).collect(),
            productions: m.productions.iter().map(Vec::len).collect(),
            decisions: m.decisions.len(),
            tainted_decisions: m.decisions.iter().filter(|d| d.tainted).count(),
            max_wait_replies: m.max_wait_replies,
            wait_bound: m.quorum_fair.then(|| n * (m.params.capacity + 2)),
            max_heartbeat_gap: m.heartbeats.max_gap,
            detector_stable_at: m.heartbeats.stable_at,
            detector_violations: detector_checked.then_some(m.heartbeats.violations),
        }
    }

    /// Every asserted invariant that failed, one line each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.over_k > 0 {
            out.push(format!("primary census above K={} in {} configurations", self.params.k, self.over_k));
        }
        if self.over_k_cl > 0 {
            out.push(format!(
                "canceling candidates above Kcl={} in {} configurations",
                self.params.k_cl, self.over_k_cl
            ));
        }
        for &(lambda, mu, count, bound) in &self.left_counts {
            if count as u128 > bound {
                out.push(format!("{count} [{mu},<-] interrupts at {lambda} exceed {bound}"));
            }
        }
        for a in self.audits.iter().filter(|a| a.precondition) {
            for v in &a.violations {
                out.push(format!("epoch {} at {} ({}-safe): {v}", a.epoch, a.at, a.h));
            }
        }
        if let Some(bound) = self.wait_bound {
            if self.max_wait_replies > bound {
                out.push(format!("a proposer waited through {} replies, bound {bound}", self.max_wait_replies));
            }
        }
        if let Some(v) = self.detector_violations.filter(|&v| v > 0) {
            out.push(format!("detector misbehaved in {v} configurations after stabilization"));
        }
        out
    }

    pub fn safe_epochs(&self) -> impl Iterator<Item = &Epoch> {
        self.epochs.iter().filter(|e| e.safe_h().is_some())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        writeln!(f, "params n={} f={} C={} b={} K={} Kcl={} M={}", p.n, p.f, p.capacity, p.bits, p.k, p.k_cl, p.m)?;
        writeln!(f, "mode {:?}", self.mode)?;
        writeln!(f, "events {}", self.events)?;
        writeln!(f, "decisions {} (tainted {})", self.decisions, self.tainted_decisions)?;
        writeln!(f, "interrupts")?;
        for (i, counts) in self.interrupts.iter().enumerate() {
            let parts: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(f, "  {} {}", i + 1, parts.join(" "))?;
        }
        writeln!(f, "productions {:?}", self.productions)?;
        writeln!(f, "epoch bounds T {:?}", self.epoch_bounds)?;
        writeln!(f, "safe epochs")?;
        for e in self.safe_epochs() {
            writeln!(
                f,
                "  at {} [{}, {}] mu={} label={} h={} terminal={} trials={}",
                e.at,
                e.start,
                e.end.map_or("open".into(), |x| x.to_string()),
                e.mu,
                e.label.as_ref().map_or("-".into(), ToString::to_string),
                e.height,
                e.terminal.map_or("open".into(), |k| k.to_string()),
                e.trials.len()
            )?;
        }
        writeln!(f, "audits")?;
        for a in &self.audits {
            let zone = a.zone.map_or("zone undefined".to_string(), |(s, e)| format!("zone [{s}, {e}]"));
            writeln!(
                f,
                "  epoch {} at {} h={} {zone} precondition={} checked={} unsafe={:?} violations={}",
                a.epoch,
                a.at,
                a.h,
                a.precondition,
                a.checked,
                a.unsafe_steps,
                a.violations.len()
            )?;
        }
        writeln!(
            f,
            "census primary<={} embedded<={} cl<={} (K={}, Kcl={})",
            self.max_primary, self.max_embedded, self.max_cl, p.k, p.k_cl
        )?;
        let bound = self.wait_bound.map_or("-".into(), |b| b.to_string());
        writeln!(f, "proposer wait replies max={} bound={bound}", self.max_wait_replies)?;
        writeln!(
            f,
            "heartbeat gap max={} stable_at={:?} detector_violations={:?}",
            self.max_heartbeat_gap, self.detector_stable_at, self.detector_violations
        )?;
        let violations = self.violations();
        if violations.is_empty() {
            writeln!(f, "verdict ok")
        } else {
            writeln!(f, "verdict violated")?;
            for v in violations {
                writeln!(f, "  {v}")?;
            }
            Ok(())
        }
    }
}

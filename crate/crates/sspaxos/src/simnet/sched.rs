//! Event selection: weighted random choice among enabled events, narrowed
//! by the configured fairness constraints.

use rand::Rng;

use super::{Event, Network, Tick};
use crate::protocol::{Message, Phase};
use crate::tags::ProcessorId;

impl Network {
    /// The next event, or `None` when nothing is enabled.
    pub fn next_event(&mut self) -> Option<Event> {
        if let Some(ev) = self.forced_crash() {
            return Some(ev);
        }
        if self.settings.heartbeat_fair && self.settings.heartbeats {
            if let Some(ev) = self.urgent_heartbeat() {
                return Some(ev);
            }
        }
        let w = self.settings.weights;
        let mut choices: Vec<(Event, u32)> = self
            .inflight()
            .map(|e| (Event::Deliver(e.uid), w.deliver))
            .collect();
        if choices.is_empty() || !self.settings.quorum_fair {
            for id in self.live().collect::<Vec<_>>() {
                if w.proposer > 0 && self.proposer_enabled(id) {
                    choices.push((Event::Local(id, Tick::Proposer), w.proposer));
                }
                if w.heartbeat > 0 && self.settings.heartbeats {
                    choices.push((Event::Local(id, Tick::Heartbeat), w.heartbeat));
                }
            }
        }
        let total: u64 = choices.iter().map(|(_, w)| u64::from(*w)).sum();
        if total == 0 {
            return None;
        }
        let mut pick = self.rng.gen_range(0..total);
        for (ev, w) in choices {
            if pick < u64::from(w) {
                return Some(ev);
            }
            pick -= u64::from(w);
        }
        unreachable!("pick is below the total weight")
    }

    fn forced_crash(&self) -> Option<Event> {
        if self.crash_count() >= self.params().f {
            return None;
        }
        self.settings
            .crashes
            .iter()
            .find(|&&(at, id)| at <= self.index && !self.is_crashed(id))
            .map(|&(_, id)| Event::Crash(id))
    }

    /// A proposer tick does something: it starts a round when idle and
    /// enabled, or re-sends a request whose exchange has died out.
    pub fn proposer_enabled(&self, id: ProcessorId) -> bool {
        match self.node(id).phase() {
            Phase::Idle => self.theta(id),
            Phase::One | Phase::Two => self.is_stuck(id),
        }
    }

    /// No protocol message to or from `id` is in flight.
    pub fn is_stuck(&self, id: ProcessorId) -> bool {
        !self
            .inflight()
            .any(|e| (e.from == id || e.to == id) && !matches!(e.msg, Message::Heartbeat { .. }))
    }

    /// Reception gap beyond which a heartbeat is forced.
    fn urgency(&self) -> u32 {
        (self.settings.threshold / 2).max(1)
    }

    /// Serves the live pair with the largest reception gap at or above the
    /// urgency level, preferring pairs whose heartbeat is already in flight.
    fn urgent_heartbeat(&self) -> Option<Event> {
        let u = self.urgency();
        let live: Vec<ProcessorId> = self.live().collect();
        let gap = |(a, b): (ProcessorId, ProcessorId)| self.hb_since[a.index()][b.index()];
        let pending = |(a, b): (ProcessorId, ProcessorId)| {
            self.inflight()
                .find(|e| e.from == b && e.to == a && matches!(e.msg, Message::Heartbeat { .. }))
                .map(|e| e.uid)
        };
        let urgent: Vec<_> = live
            .iter()
            .flat_map(|&a| live.iter().map(move |&b| (a, b)))
            .filter(|&pair| gap(pair) >= u)
            .collect();
        let most = |pairs: &mut dyn Iterator<Item = (ProcessorId, ProcessorId)>| {
            pairs.max_by_key(|&pair| (gap(pair), std::cmp::Reverse(pair)))
        };
        if let Some(pair) = most(&mut urgent.iter().copied().filter(|&p| pending(p).is_some())) {
            return pending(pair).map(Event::Deliver);
        }
        most(&mut urgent.into_iter()).map(|(_, from)| Event::Local(from, Tick::Heartbeat))
    }

    /// Heartbeat receptions at `at` since the last one from `from`.
    pub fn heartbeat_gap(&self, at: ProcessorId, from: ProcessorId) -> u32 {
        self.hb_since[at.index()][from.index()]
    }
}

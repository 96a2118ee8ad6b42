//! Initial configurations: clean, or arbitrary states drawn from a seed.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::detector::DetectorState;
use crate::labeling::Label;
use crate::protocol::{
    AcceptorState, Command, Message, MessageKind, Mode, NodeState, Phase, Proposal, ProposerState, Value,
};
use crate::tags::{DeploymentParams, FifoHistory, ProcessorId, Tag, TagEntry};

pub(super) fn clean_states(params: &DeploymentParams, mode: Mode, threshold: u32) -> Vec<NodeState> {
    params
        .ids()
        .map(|id| NodeState::initial(params, id, mode, threshold))
        .collect()
}

/// Draws arbitrary values. A small label pool makes collisions between
/// corrupted copies likely, as in real memory corruption.
struct Garbage<'a> {
    params: &'a DeploymentParams,
    mode: Mode,
    rng: &'a mut ChaCha8Rng,
    pool: Vec<Label>,
}

impl<'a> Garbage<'a> {
    fn new(params: &'a DeploymentParams, mode: Mode, rng: &'a mut ChaCha8Rng) -> Self {
        let mut g = Garbage {
            params,
            mode,
            rng,
            pool: Vec::new(),
        };
        let size = params.k + 1;
        g.pool = (0..size).map(|_| g.fresh_label()).collect();
        g
    }

    fn fresh_label(&mut self) -> Label {
        let labeling = self.params.labeling();
        let q = labeling.domain();
        let width = self.rng.gen_range(0..=labeling.dimension().min(2 * self.params.k));
        let sting = self.rng.gen_range(1..=q);
        let mut anti: Vec<u32> = (0..width).map(|_| self.rng.gen_range(1..=q)).collect();
        if self.rng.gen_ratio(1, 8) {
            anti.push(sting);
        }
        Label::new(sting, anti)
    }

    fn label(&mut self) -> Label {
        if self.rng.gen_ratio(3, 4) {
            self.pool.choose(self.rng).expect("non-empty pool").clone()
        } else {
            self.fresh_label()
        }
    }

    fn counter(&mut self) -> u32 {
        self.rng.gen_range(0..=self.params.top())
    }

    fn id(&mut self) -> ProcessorId {
        ProcessorId::from_index(self.rng.gen_range(0..self.params.n))
    }

    fn tag(&mut self) -> Tag {
        let entries = (0..self.params.n)
            .map(|_| TagEntry {
                label: self.label(),
                step: self.counter(),
                trial: self.counter(),
                owner: self.id(),
                cancel: if self.rng.gen_ratio(1, 3) { Some(self.label()) } else { None },
            })
            .collect();
        Tag::new(entries)
    }

    fn command(&mut self) -> Command {
        Command(self.rng.gen_range(0..1000))
    }

    fn value(&mut self) -> Value {
        match self.mode {
            Mode::Repeated => Value::Single(self.command()),
            Mode::Generalized => {
                let len = self.rng.gen_range(0..=8usize.min(self.params.top() as usize));
                Value::History((0..len).map(|_| self.command()).collect())
            }
        }
    }

    fn proposal(&mut self) -> Proposal {
        Proposal {
            tag: self.tag(),
            value: self.value(),
        }
    }

    fn record(&mut self) -> Vec<Option<Proposal>> {
        (0..self.params.n)
            .map(|_| self.rng.gen_bool(0.5).then(|| self.proposal()))
            .collect()
    }

    fn history(&mut self, capacity: usize) -> FifoHistory<Label> {
        let len = self.rng.gen_range(0..=capacity);
        let items: Vec<Label> = (0..len).map(|_| self.label()).collect();
        FifoHistory::from_items(capacity, items)
    }

    fn state(&mut self, threshold: u32) -> NodeState {
        let n = self.params.n;
        let acceptor = AcceptorState {
            tag: self.tag(),
            record: self.record(),
            history: (0..n).map(|_| self.history(self.params.k)).collect(),
            cancel_history: self.history(self.params.m),
            learned: self.value().history().to_vec(),
        };
        let responders: Vec<bool> = (0..n).map(|_| self.rng.gen_bool(0.5)).collect();
        let answered = responders.iter().filter(|&&r| r).count();
        let gathered = (0..self.rng.gen_range(0..=n)).map(|_| self.proposal()).collect();
        let proposer = ProposerState {
            phase: *[Phase::Idle, Phase::One, Phase::Two].choose(self.rng).expect("non-empty"),
            proposal: self.value(),
            fallback: self.value(),
            pending: self.command(),
            sent: self.tag(),
            positives: self.rng.gen_range(0..=answered),
            responders,
            gathered,
        };
        let levels = (0..n).map(|_| self.rng.gen_range(0..=threshold)).collect();
        NodeState {
            acceptor,
            proposer,
            detector: DetectorState::from_levels(levels, threshold),
        }
    }

    fn message(&mut self, kind: MessageKind, from: ProcessorId) -> Message {
        match kind {
            MessageKind::P1a => Message::P1a { from, tag: self.tag() },
            MessageKind::P1b => Message::P1b {
                from,
                tag: self.tag(),
                last: self.rng.gen_bool(0.5).then(|| self.proposal()),
            },
            MessageKind::P2a => Message::P2a {
                from,
                tag: self.tag(),
                value: self.value(),
            },
            MessageKind::P2b => Message::P2b {
                from,
                tag: self.tag(),
                record: self.record(),
            },
            MessageKind::Decision => Message::Decision {
                from,
                tag: self.tag(),
                value: self.value(),
            },
            MessageKind::Heartbeat => Message::Heartbeat { from },
        }
    }
}

/// Arbitrary processor states. At least one tag entry sits at `2^b` and
/// at least one label carries its own sting among its antistings.
pub(super) fn random_states(
    params: &DeploymentParams,
    mode: Mode,
    threshold: u32,
    rng: &mut ChaCha8Rng,
) -> Vec<NodeState> {
    let mut g = Garbage::new(params, mode, rng);
    let mut states: Vec<NodeState> = params.ids().map(|_| g.state(threshold)).collect();
    let top = params.top();
    let has_top = states
        .iter()
        .flat_map(|s| s.acceptor.tag.entries())
        .any(|e| e.step == top);
    if !has_top {
        let (i, mu) = (g.id(), g.id());
        states[i.index()].acceptor.tag[mu].step = top;
    }
    let has_self_sting = states
        .iter()
        .flat_map(|s| s.acceptor.tag.entries())
        .any(|e| e.label.has_antisting(e.label.sting()));
    if !has_self_sting {
        let (i, mu) = (g.id(), g.id());
        let e = &mut states[i.index()].acceptor.tag[mu];
        let sting = e.label.sting();
        e.label = Label::new(sting, e.label.antistings().iter().copied().chain([sting]));
    }
    states
}

/// Messages filling every channel to capacity. Variants cycle from a random
/// offset so that each variant appears even when `C` is small.
pub(super) fn random_messages(
    params: &DeploymentParams,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Vec<(ProcessorId, ProcessorId, Message)> {
    let mut g = Garbage::new(params, mode, rng);
    let kinds = MessageKind::ALL;
    let mut out = Vec::new();
    let mut offset = g.rng.gen_range(0..kinds.len());
    for a in params.ids() {
        for b in params.ids().filter(|&b| b > a) {
            for _ in 0..params.capacity {
                let (from, to) = if g.rng.gen_bool(0.5) { (a, b) } else { (b, a) };
                let kind = kinds[offset % kinds.len()];
                offset += 1;
                out.push((from, to, g.message(kind, from)));
            }
        }
    }
    out
}

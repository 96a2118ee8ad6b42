//! Deterministic simulation of processors linked by bounded, lossy,
//! non-FIFO channels.

mod init;
mod sched;
pub mod scenario;
pub mod trace;

use std::collections::VecDeque;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::protocol::{InputSource, Message, MessageKind, Node, Note, Output};
use crate::tags::{DeploymentParams, ParamError, ProcessorId};

pub use scenario::{Fairness, InitMode, Overflow, Scenario, ThetaMode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("crash budget of {0} exhausted")]
    CrashBudget(usize),
    #[error("processor {0} is already crashed")]
    AlreadyCrashed(ProcessorId),
    #[error("processor {0} is crashed")]
    Crashed(ProcessorId),
    #[error("no in-flight message with uid {0}")]
    UnknownMessage(u64),
    #[error("channels connect distinct processors")]
    SelfChannel,
}

/// Unique message identifier within one simulation.
pub type Uid = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub uid: Uid,
    pub from: ProcessorId,
    pub to: ProcessorId,
    pub msg: Message,
}

/// Bidirectional channel between two distinct processors; both directions
/// share the capacity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    pub ends: (ProcessorId, ProcessorId),
    pub inflight: VecDeque<Envelope>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tick {
    Proposer,
    Heartbeat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Deliver(Uid),
    Local(ProcessorId, Tick),
    Crash(ProcessorId),
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Deliver(uid) => write!(f, "deliver #{uid}"),
            Event::Local(id, Tick::Proposer) => write!(f, "tick proposer {id}"),
            Event::Local(id, Tick::Heartbeat) => write!(f, "tick heartbeat {id}"),
            Event::Crash(id) => write!(f, "crash {id}"),
        }
    }
}

/// Effects of one event, in the order they happened.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Sent(Envelope),
    Dropped(Uid),
    /// A message reached its destination; `sink` marks a crashed receiver.
    Delivered { uid: Uid, from: ProcessorId, to: ProcessorId, kind: MessageKind, sink: bool },
    Note { at: ProcessorId, note: Note },
    Crashed(ProcessorId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub index: u64,
    pub event: Event,
    pub effects: Vec<Effect>,
}

/// Static run settings drawn from a scenario.
#[derive(Debug, Clone)]
pub struct Settings {
    pub params: DeploymentParams,
    pub init: InitMode,
    pub theta: ThetaMode,
    pub static_proposers: Vec<ProcessorId>,
    pub overflow: Overflow,
    pub quorum_fair: bool,
    pub heartbeat_fair: bool,
    pub heartbeats: bool,
    pub weights: scenario::Weights,
    pub crashes: Vec<(u64, ProcessorId)>,
    pub threshold: u32,
}

/// A full configuration: processor states, channel contents and the
/// scheduler's random state.
#[derive(Debug, Clone)]
pub struct Network {
    settings: Settings,
    nodes: Vec<Node>,
    crashed: Vec<bool>,
    channels: Vec<Channel>,
    next_uid: Uid,
    index: u64,
    rng: ChaCha8Rng,
    /// Heartbeat receptions at `α` since the last one from `β`.
    hb_since: Vec<Vec<u32>>,
    out: Output,
}

/// Stream numbers separating the random draws of one seed.
const INIT_STREAM: u64 = 1;
const SCHEDULE_STREAM: u64 = 2;
const INPUT_STREAM: u64 = 16;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Network {
    /// Builds the initial configuration of `scenario` for `seed`.
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self, SimError> {
        scenario.validate()?;
        let params = scenario.deployment()?;
        let settings = Settings {
            params,
            init: scenario.init.mode,
            theta: scenario.theta.mode,
            static_proposers: scenario.static_proposers(),
            overflow: scenario.schedule.overflow,
            quorum_fair: scenario.has_fairness(Fairness::Quorum),
            heartbeat_fair: scenario.has_fairness(Fairness::Heartbeat),
            heartbeats: scenario.heartbeats(),
            weights: scenario.schedule.weights,
            crashes: scenario
                .schedule
                .crashes
                .iter()
                .map(|c| (c.at, ProcessorId(c.id)))
                .collect(),
            threshold: scenario.threshold(),
        };
        let mode = scenario.mode();
        let commands = scenario.commands();
        let mut init_rng = stream_rng(seed, INIT_STREAM);
        let states = match scenario.init.mode {
            InitMode::Clean => init::clean_states(&params, mode, settings.threshold),
            InitMode::Adversarial => init::random_states(&params, mode, settings.threshold, &mut init_rng),
        };
        let nodes = params
            .ids()
            .zip(states)
            .map(|(id, st)| {
                let input = if commands.is_empty() {
                    let mut r = stream_rng(seed, INPUT_STREAM + u64::from(id.0));
                    InputSource::seeded(rand::Rng::gen(&mut r))
                } else {
                    InputSource::cycle(commands.clone())
                };
                Node::new(params, id, mode, st, input)
            })
            .collect();
        let mut channels = Vec::new();
        for a in params.ids() {
            for b in params.ids().filter(|&b| b > a) {
                channels.push(Channel {
                    ends: (a, b),
                    inflight: VecDeque::new(),
                });
            }
        }
        let mut net = Network {
            settings,
            nodes,
            crashed: vec![false; params.n],
            channels,
            next_uid: 0,
            index: 0,
            rng: stream_rng(seed, SCHEDULE_STREAM),
            hb_since: vec![vec![0; params.n]; params.n],
            out: Output::default(),
        };
        if scenario.init.mode == InitMode::Adversarial {
            let fakes = init::random_messages(&params, mode, &mut init_rng);
            for (from, to, msg) in fakes {
                let uid = net.fresh_uid();
                let ch = net.channel_index(from, to)?;
                net.channels[ch].inflight.push_back(Envelope { uid, from, to, msg });
            }
        }
        Ok(net)
    }

    pub fn params(&self) -> &DeploymentParams {
        &self.settings.params
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: ProcessorId) -> &Node {
        &self.nodes[id.index()]
    }

    /// Mutable access for fixtures that craft processor states.
    pub fn node_mut(&mut self, id: ProcessorId) -> &mut Node {
        &mut self.nodes[id.index()]
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn is_crashed(&self, id: ProcessorId) -> bool {
        self.crashed[id.index()]
    }

    pub fn live(&self) -> impl Iterator<Item = ProcessorId> + '_ {
        self.params().ids().filter(|id| !self.is_crashed(*id))
    }

    pub fn crash_count(&self) -> usize {
        self.crashed.iter().filter(|&&c| c).count()
    }

    /// Index of the next event.
    pub fn event_index(&self) -> u64 {
        self.index
    }

    pub fn inflight(&self) -> impl Iterator<Item = &Envelope> {
        self.channels.iter().flat_map(|c| c.inflight.iter())
    }

    pub fn inflight_count(&self) -> usize {
        self.channels.iter().map(|c| c.inflight.len()).sum()
    }

    /// Θ at `id` under the configured mode.
    pub fn theta(&self, id: ProcessorId) -> bool {
        match self.settings.theta {
            ThetaMode::Static => self.settings.static_proposers.contains(&id),
            ThetaMode::Detector => self.nodes[id.index()].detector_theta(),
        }
    }

    fn fresh_uid(&mut self) -> Uid {
        self.next_uid += 1;
        self.next_uid
    }

    fn channel_index(&self, a: ProcessorId, b: ProcessorId) -> Result<usize, SimError> {
        if a == b {
            return Err(SimError::SelfChannel);
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (n, i, j) = (self.params().n, lo.index(), hi.index());
        Ok(i * (2 * n - i - 1) / 2 + (j - i - 1))
    }

    /// Puts a message on the channel between distinct processors, applying
    /// the overflow policy. Returns the effects.
    pub fn enqueue(&mut self, from: ProcessorId, to: ProcessorId, msg: Message) -> Result<Vec<Effect>, SimError> {
        let ch = self.channel_index(from, to)?;
        let uid = self.fresh_uid();
        let env = Envelope { uid, from, to, msg };
        let mut effects = vec![Effect::Sent(env.clone())];
        let cap = self.params().capacity;
        let channel = &mut self.channels[ch];
        if channel.inflight.len() >= cap {
            match self.settings.overflow {
                Overflow::DropOldest => {
                    let old = channel.inflight.pop_front().expect("full channel");
                    effects.push(Effect::Dropped(old.uid));
                    channel.inflight.push_back(env);
                }
                Overflow::DropNewest => effects.push(Effect::Dropped(uid)),
            }
        } else {
            channel.inflight.push_back(env);
        }
        Ok(effects)
    }

    /// Marks a processor as permanently crashed.
    pub fn crash(&mut self, id: ProcessorId) -> Result<(), SimError> {
        if self.is_crashed(id) {
            return Err(SimError::AlreadyCrashed(id));
        }
        if self.crash_count() >= self.params().f {
            return Err(SimError::CrashBudget(self.params().f));
        }
        self.crashed[id.index()] = true;
        Ok(())
    }

    /// Chooses and applies the next event. `None` when nothing is enabled.
    pub fn step(&mut self) -> Option<StepRecord> {
        let ev = self.next_event()?;
        Some(self.apply(ev).expect("scheduled events are enabled"))
    }

    /// Applies one event.
    pub fn apply(&mut self, ev: Event) -> Result<StepRecord, SimError> {
        let mut effects = Vec::new();
        match ev {
            Event::Crash(id) => {
                self.crash(id)?;
                effects.push(Effect::Crashed(id));
            }
            Event::Deliver(uid) => {
                let env = self.take(uid)?;
                self.deliver(env, &mut effects);
            }
            Event::Local(id, tick) => {
                if self.is_crashed(id) {
                    return Err(SimError::Crashed(id));
                }
                let mut out = std::mem::take(&mut self.out);
                out.clear();
                match tick {
                    Tick::Proposer => {
                        let theta = self.theta(id);
                        self.nodes[id.index()].proposer_tick(theta, &mut out);
                    }
                    Tick::Heartbeat => self.nodes[id.index()].heartbeat_tick(&mut out),
                }
                self.emit(id, out, &mut effects);
            }
        }
        let rec = StepRecord {
            index: self.index,
            event: ev,
            effects,
        };
        self.index += 1;
        Ok(rec)
    }

    fn take(&mut self, uid: Uid) -> Result<Envelope, SimError> {
        for ch in &mut self.channels {
            if let Some(pos) = ch.inflight.iter().position(|e| e.uid == uid) {
                return Ok(ch.inflight.remove(pos).expect("position is in range"));
            }
        }
        Err(SimError::UnknownMessage(uid))
    }

    /// Hands a message to its receiver, then drains local self-deliveries.
    fn deliver(&mut self, first: Envelope, effects: &mut Vec<Effect>) {
        let mut local = VecDeque::from([first]);
        while let Some(env) = local.pop_front() {
            let to = env.to;
            let sink = self.is_crashed(to);
            effects.push(Effect::Delivered {
                uid: env.uid,
                from: env.from,
                to,
                kind: env.msg.kind(),
                sink,
            });
            if sink {
                continue;
            }
            if let Message::Heartbeat { from } = env.msg {
                self.note_heartbeat(to, from);
            }
            let mut out = std::mem::take(&mut self.out);
            out.clear();
            self.nodes[to.index()].handle(&env.msg, &mut out);
            local.extend(self.route(to, &mut out, effects));
            self.out = out;
        }
    }

    /// Emits a local step's outputs and runs the resulting self-deliveries.
    fn emit(&mut self, at: ProcessorId, mut out: Output, effects: &mut Vec<Effect>) {
        let local = self.route(at, &mut out, effects);
        self.out = out;
        for env in local {
            self.deliver(env, effects);
        }
    }

    /// Records notes, enqueues remote sends and returns self-addressed envelopes.
    fn route(&mut self, at: ProcessorId, out: &mut Output, effects: &mut Vec<Effect>) -> Vec<Envelope> {
        effects.extend(out.notes.drain(..).map(|note| Effect::Note { at, note }));
        let mut local = Vec::new();
        for (to, msg) in out.sends.drain(..) {
            if to == at {
                let uid = self.fresh_uid();
                let env = Envelope { uid, from: at, to, msg };
                effects.push(Effect::Sent(env.clone()));
                local.push(env);
            } else {
                effects.extend(self.enqueue(at, to, msg).expect("distinct processors"));
            }
        }
        local
    }

    fn note_heartbeat(&mut self, at: ProcessorId, from: ProcessorId) {
        for (b, count) in self.hb_since[at.index()].iter_mut().enumerate() {
            if b == from.index() {
                *count = 0;
            } else {
                *count = count.saturating_add(1);
            }
        }
    }

    /// Canonical text of the whole configuration.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for node in &self.nodes {
            let st = &node.state;
            let a = &st.acceptor;
            s += &format!(
                "node {} crashed={} tag={} phase={} proposal={} sent={} detector={:?}\n",
                node.id(),
                self.is_crashed(node.id()),
                a.tag,
                st.proposer.phase,
                st.proposer.proposal,
                st.proposer.sent,
                st.detector.levels()
            );
            for (i, r) in a.record.iter().enumerate() {
                if let Some(p) = r {
                    s += &format!("  r{} {p}\n", i + 1);
                }
            }
            for (i, h) in a.history.iter().enumerate() {
                let items: Vec<String> = h.iter().map(|l| l.to_string()).collect();
                s += &format!("  h{} {}\n", i + 1, items.join(" "));
            }
            let cl: Vec<String> = a.cancel_history.iter().map(|l| l.to_string()).collect();
            s += &format!("  hcl {}\n", cl.join(" "));
        }
        for env in self.inflight() {
            s += &format!("msg #{} {}->{} {}\n", env.uid, env.from, env.to, env.msg);
        }
        s
    }
}

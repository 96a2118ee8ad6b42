//! Omniscient observer of simulated executions: interrupts, epochs, storage
//! census, fake-message taint and safety audits.

mod audit;
mod census;
mod interrupt;
mod report;

use std::collections::{HashMap, HashSet};

use crate::labeling::Label;
use crate::protocol::{Message, Mode, Note, Outcome, Phase, Proposal};
use crate::simnet::{Effect, Event, InitMode, Network, StepRecord, ThetaMode, Tick, Uid};
use crate::tags::{DeploymentParams, Exhaustion, ProcessorId, Slot, Tag, TagSpace};

pub use audit::{
    check_safety, check_stability, unsafe_steps, Characteristic, DecisionEvent, TaintedAcceptance, Violation,
};
pub use census::{census, label_height, Census};
pub use interrupt::{characteristic, classify_interrupt, Interrupt, InterruptKind};
pub use report::{EpochAudit, Report};

/// A completed proposer phase and the processors counted in its quorum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    pub began: u64,
    pub finished: u64,
    pub quorum: Vec<ProcessorId>,
}

/// Maximal interrupt-free stretch of one processor's execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub at: ProcessorId,
    /// Index of the first event inside the epoch.
    pub start: u64,
    /// Index of the event holding the terminal interrupt.
    pub end: Option<u64>,
    pub mu: Slot,
    pub label: Option<Label>,
    /// Largest counter at entry `mu` under `label` in the configuration
    /// preceding the epoch: the least `h` for which it can be `h`-safe.
    pub height: u32,
    pub terminal: Option<InterruptKind>,
    pub trials: Vec<Trial>,
}

impl Epoch {
    /// The least `h` making this epoch `h`-safe, if it is safe at all.
    pub fn safe_h(&self) -> Option<u32> {
        let closed_by_exhaustion = self.terminal.is_some_and(InterruptKind::is_exhaustion);
        (closed_by_exhaustion && self.label.is_some()).then_some(self.height)
    }

    pub fn is_h_safe(&self, h: u32) -> bool {
        self.safe_h().is_some_and(|min| min <= h)
    }

    /// Event window from the start of the first completed trial to the end
    /// of the epoch. Needs two completed trials.
    pub fn zone(&self) -> Option<(u64, u64)> {
        let end = self.end?;
        (self.trials.len() >= 2).then(|| (self.trials[0].began, end))
    }
}

/// Fake-message lineage of one proposer.
#[derive(Debug, Clone, Default)]
struct ProposerTaint {
    /// Current proposal.
    proposal: bool,
    /// Value read at the start of the round.
    fallback: bool,
    /// Replies counted in phase one and phase two.
    phase_one: bool,
    phase_two: bool,
    /// Payloads of positive phase-one replies with their taint.
    gathered: Vec<(Proposal, bool)>,
}

/// Taint of one message in flight.
#[derive(Debug, Clone, Default)]
struct MessageTaint {
    /// Sent by a fake message or in reply to one.
    fake: bool,
    /// The reported acceptance is not known to be clean.
    payload: bool,
    last: Option<Proposal>,
}

impl MessageTaint {
    const FAKE: MessageTaint = MessageTaint {
        fake: true,
        payload: true,
        last: None,
    };

    fn any(&self) -> bool {
        self.fake || self.payload
    }
}

#[derive(Debug, Clone, Default)]
struct CensusStats {
    max_primary: usize,
    max_embedded: usize,
    max_cl: usize,
    over_k: u64,
    over_k_cl: u64,
}

#[derive(Debug, Clone, Default)]
struct HeartbeatStats {
    /// Deliveries of `β`'s heartbeat at `α`.
    count: Vec<Vec<u64>>,
    /// Heartbeat deliveries at `α` since the last one from `β`.
    since: Vec<Vec<u32>>,
    max_gap: u32,
    stable_at: Option<u64>,
    violations: u64,
}

/// Per-processor bookkeeping of the current proposer phase.
#[derive(Debug, Clone)]
struct PhaseTrack {
    phase: Phase,
    began: u64,
    quorum: Vec<ProcessorId>,
    replies: usize,
    after_nok: bool,
}

pub struct Monitor {
    params: DeploymentParams,
    space: TagSpace,
    mode: Mode,
    theta: ThetaMode,
    quorum_fair: bool,
    heartbeat_fair: bool,
    crashes_planned: bool,
    events: u64,
    tags: Vec<Tag>,
    cause: Vec<Option<Exhaustion>>,
    interrupts: Vec<Interrupt>,
    epochs: Vec<Epoch>,
    open: Vec<usize>,
    productions: Vec<Vec<u64>>,
    taint: HashMap<Uid, MessageTaint>,
    clean: HashSet<Proposal>,
    fake: HashSet<Proposal>,
    lineage: Vec<ProposerTaint>,
    phases: Vec<PhaseTrack>,
    max_wait_replies: usize,
    decisions: Vec<DecisionEvent>,
    tainted_acceptances: Vec<TaintedAcceptance>,
    census: CensusStats,
    heartbeats: HeartbeatStats,
    annotations: Vec<String>,
}

impl Monitor {
    /// Starts observing from the current configuration of `net`.
    pub fn new(net: &Network) -> Self {
        let params = *net.params();
        let n = params.n;
        let settings = net.settings();
        let fake_start = settings.init == InitMode::Adversarial;
        let space = params.tag_space();
        let tags: Vec<Tag> = net.nodes().iter().map(|node| node.state.acceptor.tag.clone()).collect();
        let mut m = Monitor {
            params,
            space,
            mode: net.nodes()[0].mode(),
            theta: settings.theta,
            quorum_fair: settings.quorum_fair,
            heartbeat_fair: settings.heartbeat_fair && settings.heartbeats,
            crashes_planned: !settings.crashes.is_empty(),
            events: 0,
            tags: tags.clone(),
            cause: vec![None; n],
            interrupts: Vec::new(),
            epochs: Vec::new(),
            open: Vec::new(),
            productions: vec![Vec::new(); n],
            taint: net.inflight().map(|e| (e.uid, MessageTaint::FAKE)).collect(),
            clean: HashSet::new(),
            fake: HashSet::new(),
            lineage: vec![
                ProposerTaint {
                    proposal: fake_start,
                    fallback: fake_start,
                    phase_one: fake_start,
                    phase_two: fake_start,
                    gathered: Vec::new(),
                };
                n
            ],
            phases: net
                .nodes()
                .iter()
                .map(|node| PhaseTrack {
                    phase: node.phase(),
                    began: 0,
                    quorum: Vec::new(),
                    replies: 0,
                    after_nok: false,
                })
                .collect(),
            max_wait_replies: 0,
            decisions: Vec::new(),
            tainted_acceptances: Vec::new(),
            census: CensusStats::default(),
            heartbeats: HeartbeatStats {
                count: vec![vec![0; n]; n],
                since: vec![vec![0; n]; n],
                ..HeartbeatStats::default()
            },
            annotations: Vec::new(),
        };
        for (i, tag) in tags.iter().enumerate() {
            let at = ProcessorId::from_index(i);
            m.open.push(m.epochs.len());
            m.epochs.push(m.fresh_epoch(net, at, tag, 0));
        }
        m.take_census(net);
        m
    }

    fn fresh_epoch(&self, net: &Network, at: ProcessorId, tag: &Tag, start: u64) -> Epoch {
        let (mu, label) = characteristic(&self.space, tag);
        let height = match (mu, &label) {
            (Slot::At(mu), Some(l)) => label_height(net, mu, l).unwrap_or(0),
            _ => 0,
        };
        Epoch {
            at,
            start,
            end: None,
            mu,
            label,
            height,
            terminal: None,
            trials: Vec::new(),
        }
    }

    /// Processes one applied event; `net` is the configuration after it.
    pub fn observe(&mut self, rec: &StepRecord, net: &Network) {
        self.events = rec.index + 1;
        let index = rec.index;
        let mut ctx = MessageTaint::default();
        let mut unmeasured: Vec<usize> = Vec::new();
        let mut fresh_rounds: Vec<ProcessorId> = Vec::new();
        if let Event::Local(at, tick) = rec.event {
            self.phases[at.index()].after_nok = false;
            if tick == Tick::Heartbeat {
                self.annotate(index, format!("heartbeat tick {at}"));
            }
        }
        for effect in &rec.effects {
            match effect {
                Effect::Delivered { uid, from, to, kind, sink } => {
                    ctx = self.taint.remove(uid).unwrap_or(MessageTaint::FAKE);
                    if *sink {
                        continue;
                    }
                    let track = &mut self.phases[to.index()];
                    track.after_nok = false;
                    if kind.is_reply() && track.phase != Phase::Idle {
                        track.replies += 1;
                        self.max_wait_replies = self.max_wait_replies.max(track.replies);
                    }
                    if *kind == crate::protocol::MessageKind::Heartbeat {
                        self.on_heartbeat(*to, *from);
                    }
                }
                Effect::Note { at, note } => {
                    self.on_note(*at, note, &ctx, index, &mut unmeasured, &mut fresh_rounds);
                }
                Effect::Sent(env) => {
                    let tainted = self.sent_taint(env.from, &env.msg, ctx.any());
                    self.taint.insert(env.uid, tainted);
                }
                Effect::Dropped(uid) => {
                    self.taint.remove(uid);
                }
                Effect::Crashed(id) => self.annotate(index, format!("crash {id}")),
            }
        }
        if self.mode == Mode::Generalized {
            for at in fresh_rounds {
                let sent = &net.node(at).state.proposer.sent;
                let short = self.space.chi(sent).id().is_some_and(|mu| sent[mu].step <= 1);
                if short {
                    self.lineage[at.index()].proposal = false;
                }
            }
        }
        for idx in unmeasured {
            let epoch = &self.epochs[idx];
            if let (Slot::At(mu), Some(l)) = (epoch.mu, &epoch.label) {
                let h = label_height(net, mu, l).unwrap_or(0);
                self.epochs[idx].height = h;
            }
        }
        self.take_census(net);
        self.audit_detector(net, index);
    }

    fn on_note(
        &mut self,
        at: ProcessorId,
        note: &Note,
        reply: &MessageTaint,
        index: u64,
        unmeasured: &mut Vec<usize>,
        fresh_rounds: &mut Vec<ProcessorId>,
    ) {
        let i = at.index();
        let ctx = reply.any();
        match note {
            Note::Tag(next) => {
                let cause = self.cause[i].take();
                let kind = classify_interrupt(&self.space, at, &self.tags[i], next, cause);
                self.tags[i] = next.clone();
                if let Some(kind) = kind {
                    self.interrupts.push(Interrupt { at, index, kind });
                    let epoch = &mut self.epochs[self.open[i]];
                    epoch.end = Some(index);
                    epoch.terminal = Some(kind);
                    if let Some(h) = epoch.safe_h() {
                        let line = format!("epoch at {at} closed {kind}, {h}-safe");
                        self.annotate(index, line);
                    } else {
                        self.annotate(index, format!("interrupt at {at} {kind}"));
                    }
                    let (mu, label) = characteristic(&self.space, next);
                    self.open[i] = self.epochs.len();
                    unmeasured.push(self.epochs.len());
                    self.epochs.push(Epoch {
                        at,
                        start: index + 1,
                        end: None,
                        mu,
                        label,
                        height: 0,
                        terminal: None,
                        trials: Vec::new(),
                    });
                }
            }
            Note::Produced(p) => {
                self.cause[i] = Some(p.cause);
                self.productions[i].push(index);
                self.annotate(index, format!("produced at {at} {} -> {} ({:?})", p.old, p.new, p.cause));
            }
            Note::Accepted { proposal, .. } => {
                if ctx {
                    self.fake.insert(proposal.clone());
                    self.tainted_acceptances.push(TaintedAcceptance {
                        at,
                        index,
                        char: Characteristic::of(&self.space, &proposal.tag),
                    });
                } else {
                    self.clean.insert(proposal.clone());
                }
            }
            Note::Decided { tag, value } => {
                let char = Characteristic::of(&self.space, tag);
                let label = char.label.as_ref().map_or("-".to_string(), ToString::to_string);
                let mark = if ctx { " tainted" } else { "" };
                let line = format!("decided at {at} ({},{label},{}) {value}{mark}", char.mu, char.step);
                self.annotate(index, line);
                self.decisions.push(DecisionEvent {
                    at,
                    index,
                    char,
                    value: value.clone(),
                    tainted: ctx,
                });
            }
            Note::Counted { from, positive } => {
                let track = &mut self.phases[i];
                track.quorum.push(*from);
                let lineage = &mut self.lineage[i];
                match track.phase {
                    Phase::One => {
                        lineage.phase_one |= reply.fake;
                        if let (true, Some(last)) = (*positive, &reply.last) {
                            lineage.gathered.push((last.clone(), reply.payload));
                        }
                    }
                    Phase::Two => lineage.phase_two |= ctx,
                    Phase::Idle => {}
                }
            }
            Note::Began { phase, retry: false } => {
                let track = &mut self.phases[i];
                let lineage = &mut self.lineage[i];
                match phase {
                    Phase::One => {
                        if !track.after_nok {
                            lineage.fallback = match self.mode {
                                Mode::Repeated => false,
                                Mode::Generalized => lineage.proposal,
                            };
                        }
                        lineage.proposal = lineage.fallback;
                        lineage.phase_one = false;
                        lineage.gathered.clear();
                        fresh_rounds.push(at);
                    }
                    Phase::Two => {
                        let selected = selectable_taint(&self.space, self.mode, &self.tags[i], &lineage.gathered);
                        lineage.proposal |= lineage.phase_one || selected;
                        lineage.gathered.clear();
                        lineage.phase_two = false;
                    }
                    Phase::Idle => {}
                }
                *track = PhaseTrack {
                    phase: *phase,
                    began: index,
                    quorum: Vec::new(),
                    replies: 0,
                    after_nok: false,
                };
            }
            Note::Began { retry: true, .. } => {}
            Note::Finished { outcome, .. } => {
                let track = &mut self.phases[i];
                let trial = Trial {
                    began: track.began,
                    finished: index,
                    quorum: std::mem::take(&mut track.quorum),
                };
                track.phase = Phase::Idle;
                track.replies = 0;
                track.after_nok = *outcome == Outcome::Nok;
                let epoch = &mut self.epochs[self.open[i]];
                if trial.began >= epoch.start {
                    epoch.trials.push(trial);
                }
            }
        }
    }

    fn suspicious(&self, p: &Proposal) -> bool {
        self.fake.contains(p) || !self.clean.contains(p)
    }

    fn sent_taint(&self, from: ProcessorId, msg: &Message, ctx: bool) -> MessageTaint {
        let lineage = &self.lineage[from.index()];
        let fake = |fake| MessageTaint { fake, ..MessageTaint::default() };
        match msg {
            Message::P1a { .. } | Message::Heartbeat { .. } => fake(false),
            Message::P2a { .. } => fake(lineage.proposal),
            Message::Decision { .. } => fake(lineage.proposal || lineage.phase_two),
            Message::P1b { last, .. } => MessageTaint {
                fake: ctx,
                payload: last.as_ref().is_some_and(|p| self.suspicious(p)),
                last: last.clone(),
            },
            Message::P2b { tag, record, .. } => MessageTaint {
                fake: ctx,
                payload: self
                    .space
                    .chi(tag)
                    .id()
                    .and_then(|mu| record.get(mu.index()))
                    .is_some_and(|p| p.as_ref().is_some_and(|p| self.suspicious(p))),
                last: None,
            },
        }
    }

    fn on_heartbeat(&mut self, at: ProcessorId, from: ProcessorId) {
        let hb = &mut self.heartbeats;
        let (a, b) = (at.index(), from.index());
        if hb.count[a][b] > 0 {
            hb.max_gap = hb.max_gap.max(hb.since[a][b]);
        }
        hb.count[a][b] += 1;
        for (j, gap) in hb.since[a].iter_mut().enumerate() {
            *gap = if j == b { 0 } else { gap.saturating_add(1) };
        }
    }

    fn audit_detector(&mut self, net: &Network, index: u64) {
        let live: Vec<ProcessorId> = net.live().collect();
        let hb = &mut self.heartbeats;
        if hb.stable_at.is_none() {
            let settled = live
                .iter()
                .all(|a| live.iter().all(|b| hb.count[a.index()][b.index()] >= 2));
            if settled {
                hb.stable_at = Some(index);
            }
            return;
        }
        let leader = live.first().copied();
        for &a in &live {
            let det = &net.node(a).state.detector;
            let suspects_live = live.iter().any(|&b| det.is_suspected(b));
            if suspects_live || det.theta(a) != (Some(a) == leader) {
                hb.violations += 1;
            }
        }
    }

    fn take_census(&mut self, net: &Network) {
        let c = census(net);
        let stats = &mut self.census;
        let max_cl = c.cl_candidates.iter().copied().max().unwrap_or(0);
        stats.max_primary = stats.max_primary.max(c.primary);
        stats.max_embedded = stats.max_embedded.max(c.embedded);
        stats.max_cl = stats.max_cl.max(max_cl);
        if c.primary > self.params.k {
            stats.over_k += 1;
        }
        if max_cl > self.params.k_cl {
            stats.over_k_cl += 1;
        }
    }

    fn annotate(&mut self, index: u64, line: String) {
        self.annotations.push(format!("{index} {line}"));
    }

    /// Events observed so far.
    pub fn events(&self) -> u64 {
        self.events
    }

    /// Annotation lines produced since the last call.
    pub fn take_annotations(&mut self) -> Vec<String> {
        std::mem::take(&mut self.annotations)
    }

    pub fn interrupts(&self) -> &[Interrupt] {
        &self.interrupts
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn decisions(&self) -> &[DecisionEvent] {
        &self.decisions
    }

    pub fn tainted_acceptances(&self) -> &[TaintedAcceptance] {
        &self.tainted_acceptances
    }

    /// Label productions per processor, as event indexes.
    pub fn productions(&self) -> &[Vec<u64>] {
        &self.productions
    }

    /// Most replies delivered to one proposer during a single wait.
    pub fn max_wait_replies(&self) -> usize {
        self.max_wait_replies
    }

    /// Largest number of other heartbeat receptions at a processor between
    /// two receptions from the same sender.
    pub fn max_heartbeat_gap(&self) -> u32 {
        self.heartbeats.max_gap
    }

    /// Event after which every live pair exchanged two heartbeats.
    pub fn detector_stable_at(&self) -> Option<u64> {
        self.heartbeats.stable_at
    }

    /// Configurations after stabilization where a live processor was
    /// suspected or `Θ` differed from the smallest live identifier.
    pub fn detector_violations(&self) -> u64 {
        self.heartbeats.violations
    }

    /// First closed epoch that is `h`-safe for some `h` below `bound`.
    pub fn first_safe_epoch(&self, bound: u32) -> Option<&Epoch> {
        self.epochs
            .iter()
            .filter(|e| e.safe_h().is_some_and(|h| h < bound))
            .min_by_key(|e| e.end)
    }

    /// Left interrupts toward `mu` observed at `at`.
    pub fn left_count(&self, at: ProcessorId, mu: ProcessorId) -> usize {
        self.interrupts
            .iter()
            .filter(|i| i.at == at && i.kind == InterruptKind::Left(mu))
            .count()
    }

    /// `R_μ = (J_μ + 1)(K + 1) − 1` with the observed production count.
    pub fn left_bound(&self, mu: ProcessorId) -> u128 {
        let j = self.productions[mu.index()].len() as u128;
        (j + 1) * (self.params.k as u128 + 1) - 1
    }

    /// `T_λ = (Σ_{μ<λ} R_μ + 1)(|λ| + 1)(K^cl + 1)(K + 1)`.
    pub fn epoch_bound(&self, lambda: ProcessorId) -> u128 {
        let below: u128 = (0..lambda.index()).map(|i| self.left_bound(ProcessorId::from_index(i))).sum();
        let rank = lambda.index() as u128 + 1;
        (below + 1) * (rank + 1) * (self.params.k_cl as u128 + 1) * (self.params.k as u128 + 1)
    }

    /// Safety and stability audit of every closed safe epoch.
    pub fn audits(&self) -> Vec<EpochAudit> {
        self.epochs
            .iter()
            .enumerate()
            .filter_map(|(idx, e)| {
                let h = e.safe_h()?;
                let (Slot::At(mu), Some(label)) = (e.mu, e.label.as_ref()) else {
                    return None;
                };
                let end = e.end?;
                let precondition = mu >= e.at
                    || self.productions[mu.index()].iter().all(|&p| p < e.start);
                let window = |(from, to): (u64, u64)| {
                    let lo = self.decisions.partition_point(|d| d.index < from);
                    let hi = self.decisions.partition_point(|d| d.index <= to);
                    &self.decisions[lo..hi]
                };
                let accepted: Vec<TaintedAcceptance> = self
                    .tainted_acceptances
                    .iter()
                    .filter(|a| a.index >= e.start && a.index <= end)
                    .cloned()
                    .collect();
                let mut audit = EpochAudit {
                    epoch: idx,
                    at: e.at,
                    h,
                    zone: e.zone(),
                    precondition,
                    checked: 0,
                    unsafe_steps: unsafe_steps(&accepted, mu, label),
                    violations: Vec::new(),
                };
                if let Some(zone) = audit.zone {
                    let ds = window(zone);
                    audit.checked = ds
                        .iter()
                        .filter(|d| !d.tainted && d.char.matches(mu, label) && d.char.step >= h)
                        .count();
                    audit.violations = check_safety(ds, mu, label, h, self.mode);
                    if self.mode == Mode::Generalized {
                        audit.violations.extend(check_stability(ds, mu, label, h));
                    }
                }
                Some(audit)
            })
            .collect()
    }

    pub fn report(&self) -> Report {
        Report::build(self)
    }
}

/// Whether a tainted payload could become the phase-two value chosen
/// from `gathered` by a proposer holding `own`.
fn selectable_taint(space: &TagSpace, mode: Mode, own: &Tag, gathered: &[(Proposal, bool)]) -> bool {
    let Slot::At(mu) = space.chi(own) else {
        return false;
    };
    let coherent = gathered
        .iter()
        .all(|(x, _)| space.chi(&x.tag) == Slot::At(mu) && x.tag[mu].label == own[mu].label);
    if !coherent {
        return false;
    }
    let step = own[mu].step;
    gathered
        .iter()
        .filter(|(x, _)| x.tag[mu].step == step)
        .filter(|(x, _)| mode == Mode::Repeated || x.value.history().len() == step as usize)
        .any(|&(_, tainted)| tainted)
}

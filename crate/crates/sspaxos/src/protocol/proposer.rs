use std::fmt;

use crate::tags::{DeploymentParams, ProcessorId, Slot, Tag, TagOrder, TagSpace};

use super::{AcceptorState, Command, Message, Mode, Note, Outcome, Output, Proposal, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Idle,
    One,
    Two,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Idle => "idle",
            Phase::One => "phase1",
            Phase::Two => "phase2",
        })
    }
}

/// Fixed context of one processor.
#[derive(Debug, Clone, Copy)]
pub(super) struct Ctx {
    pub me: ProcessorId,
    pub params: DeploymentParams,
    pub space: TagSpace,
    pub mode: Mode,
}

impl Ctx {
    fn broadcast(&self, msg: Message, out: &mut Output) {
        for to in self.params.ids() {
            out.sends.push((to, msg.clone()));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposerState {
    pub phase: Phase,
    /// Value proposed in the current round.
    pub proposal: Value,
    /// Value read at the start of the round.
    pub fallback: Value,
    /// Command read at the start of the round (generalized mode).
    pub pending: Command,
    /// Tag sent with the current phase request.
    pub sent: Tag,
    pub responders: Vec<bool>,
    pub positives: usize,
    /// Accepted proposals reported by positive phase-one replies.
    pub gathered: Vec<Proposal>,
}

impl ProposerState {
    pub fn initial(params: &DeploymentParams, id: ProcessorId, mode: Mode) -> Self {
        ProposerState {
            phase: Phase::Idle,
            proposal: Value::empty(mode),
            fallback: Value::empty(mode),
            pending: Command::NOP,
            sent: Tag::initial(params.n, id),
            responders: vec![false; params.n],
            positives: 0,
            gathered: Vec::new(),
        }
    }

    pub fn responder_count(&self) -> usize {
        self.responders.iter().filter(|&&r| r).count()
    }

    /// Starts a new loop iteration with the given input.
    pub(super) fn begin_round(&mut self, vars: &mut AcceptorState, ctx: &Ctx, input: Command, out: &mut Output) {
        let (tag, made) = ctx.space.inc_step(ctx.me, &vars.tag, &mut vars.cancel_history);
        vars.tag = tag;
        out.notes.extend(made.map(Note::Produced));
        match ctx.mode {
            Mode::Repeated => {
                self.fallback = Value::Single(input);
                self.proposal = self.fallback.clone();
            }
            Mode::Generalized => {
                self.fallback = self.proposal.clone();
                self.pending = input;
                self.proposal = self.generalized_value(&vars.tag, ctx);
            }
        }
        self.start(Phase::One, vars, ctx, out);
    }

    fn generalized_value(&self, tag: &Tag, ctx: &Ctx) -> Value {
        let step = match ctx.space.chi(tag) {
            Slot::At(mu) => Some(tag[mu].step),
            Slot::Omega => None,
        };
        let base = self.fallback.history();
        Value::History(match step {
            Some(s) => compose(s, base, self.pending),
            None => base.to_vec(),
        })
    }

    fn start(&mut self, phase: Phase, vars: &AcceptorState, ctx: &Ctx, out: &mut Output) {
        self.phase = phase;
        self.sent = vars.tag.clone();
        self.responders.iter_mut().for_each(|r| *r = false);
        self.positives = 0;
        self.gathered.clear();
        out.notes.push(Note::Began { phase, retry: false });
        let msg = self.request(ctx.me).expect("a phase is active");
        ctx.broadcast(msg, out);
    }

    fn request(&self, me: ProcessorId) -> Option<Message> {
        match self.phase {
            Phase::Idle => None,
            Phase::One => Some(Message::P1a {
                from: me,
                tag: self.sent.clone(),
            }),
            Phase::Two => Some(Message::P2a {
                from: me,
                tag: self.sent.clone(),
                value: self.proposal.clone(),
            }),
        }
    }

    /// Closes a phase whose responder set already holds a quorum, or
    /// re-sends the request otherwise.
    pub(super) fn resume(&mut self, vars: &mut AcceptorState, ctx: &Ctx, out: &mut Output) {
        if self.responder_count() >= ctx.params.quorum() {
            self.conclude(vars, ctx, out);
        } else {
            self.retransmit(ctx, out);
        }
    }

    fn conclude(&mut self, vars: &mut AcceptorState, ctx: &Ctx, out: &mut Output) {
        let outcome = if self.positives >= ctx.params.quorum() {
            Outcome::Ok
        } else {
            Outcome::Nok
        };
        self.finish(outcome, vars, ctx, out);
    }

    /// Re-sends the current request to processors that have not answered.
    fn retransmit(&self, ctx: &Ctx, out: &mut Output) {
        if let Some(msg) = self.request(ctx.me) {
            out.notes.push(Note::Began { phase: self.phase, retry: true });
            for to in ctx.params.ids().filter(|id| !self.responders[id.index()]) {
                out.sends.push((to, msg.clone()));
            }
        }
    }

    /// Preempting-routine step for one reply.
    #[allow(clippy::too_many_arguments)]
    pub(super) fn on_reply(
        &mut self,
        vars: &mut AcceptorState,
        ctx: &Ctx,
        from: ProcessorId,
        reply_tag: &Tag,
        last: Option<&Proposal>,
        record: Option<&[Option<Proposal>]>,
        out: &mut Output,
    ) {
        let space = &ctx.space;
        let mut theirs = reply_tag.clone();
        let mut b = self.sent.clone();
        space.fill_cl(&mut theirs, &mut b);
        let order = space.compare(&theirs, &b);
        let accepted_matches = match (self.phase, space.chi(&b)) {
            (Phase::Two, Slot::At(mu)) => record
                .and_then(|r| r.get(mu.index()))
                .and_then(Option::as_ref)
                .is_some_and(|p| p.value == self.proposal),
            (Phase::Two, Slot::Omega) => false,
            _ => true,
        };
        let positive = order == TagOrder::Equiv && accepted_matches;
        let negative = !order.is_le();
        if self.responders[from.index()] || !(positive || negative) {
            return;
        }
        self.responders[from.index()] = true;
        out.notes.push(Note::Counted { from, positive });
        if positive {
            self.positives += 1;
            if self.phase == Phase::One {
                self.gathered.extend(last.cloned());
            }
        } else {
            preempt(vars, ctx, &mut theirs, out);
        }
        if self.responder_count() >= ctx.params.quorum() {
            self.conclude(vars, ctx, out);
        }
    }

    fn finish(&mut self, outcome: Outcome, vars: &mut AcceptorState, ctx: &Ctx, out: &mut Output) {
        out.notes.push(Note::Finished {
            phase: self.phase,
            outcome,
        });
        match (self.phase, outcome) {
            (Phase::One, Outcome::Ok) => {
                self.proposal = phase2_select(
                    &ctx.space,
                    ctx.mode,
                    &vars.tag,
                    &self.gathered,
                    &self.fallback,
                    self.pending,
                );
                self.start(Phase::Two, vars, ctx, out);
            }
            (Phase::Two, Outcome::Ok) => {
                self.phase = Phase::Idle;
                ctx.broadcast(
                    Message::Decision {
                        from: ctx.me,
                        tag: vars.tag.clone(),
                        value: self.proposal.clone(),
                    },
                    out,
                );
            }
            (_, Outcome::Nok) => {
                self.proposal = match ctx.mode {
                    Mode::Repeated => self.fallback.clone(),
                    Mode::Generalized => self.generalized_value(&vars.tag, ctx),
                };
                self.start(Phase::One, vars, ctx, out);
            }
            (Phase::Idle, Outcome::Ok) => {}
        }
    }
}

/// Negative-reply update of the proposer tag.
fn preempt(vars: &mut AcceptorState, ctx: &Ctx, theirs: &mut Tag, out: &mut Output) {
    let (space, me) = (&ctx.space, ctx.me);
    vars.absorb_cancelers(&theirs[me], me);
    space.fill_cl(theirs, &mut vars.tag);
    if let Some(p) = space.check_entry(me, &mut vars.tag, &mut vars.cancel_history) {
        out.notes.push(Note::Produced(p));
    }
    if space.le(theirs, &vars.tag) {
        return;
    }
    let Slot::At(mu) = space.chi(theirs) else {
        return;
    };
    let mine = space.chi(&vars.tag);
    let next = if Slot::At(mu) < mine {
        let before = vars.tag.clone();
        vars.tag[mu] = theirs[mu].clone();
        vars.relabel(mu, &before);
        space.inc_trial(me, &vars.tag, &mut vars.cancel_history)
    } else if Slot::At(mu) == mine && theirs[mu].label == vars.tag[mu].label {
        if theirs[mu].step == vars.tag[mu].step {
            vars.tag[mu].trial = theirs[mu].trial;
            space.inc_trial(me, &vars.tag, &mut vars.cancel_history)
        } else {
            vars.tag[mu].step = theirs[mu].step;
            space.inc_step(me, &vars.tag, &mut vars.cancel_history)
        }
    } else {
        return;
    };
    vars.tag = next.0;
    out.notes.extend(next.1.map(Note::Produced));
}

/// Cuts or pads a history to `len`: keeps the last `len` commands, or
/// appends `nop` until the length is reached.
fn fit(history: &[Command], len: usize) -> Vec<Command> {
    let mut p = history[history.len().saturating_sub(len)..].to_vec();
    p.resize(len, Command::NOP);
    p
}

/// Fits `p` to one less than the step of the first valid entry of `a`.
/// A tag without a valid entry leaves `p` unchanged.
pub fn truncate(space: &TagSpace, a: &Tag, p: &[Command]) -> Vec<Command> {
    match space.chi(a) {
        Slot::At(mu) => fit(p, (a[mu].step as usize).saturating_sub(1)),
        Slot::Omega => p.to_vec(),
    }
}

/// The generalized proposal for `step`: the truncated base followed by
/// `cmd`, so that its length equals the step. Step zero proposes the
/// empty history.
pub fn compose(step: u32, base: &[Command], cmd: Command) -> Vec<Command> {
    if step == 0 {
        return Vec::new();
    }
    let mut p = fit(base, step as usize - 1);
    p.push(cmd);
    p
}

/// Chooses the phase-two value from the accepted proposals gathered in phase one.
pub fn phase2_select(
    space: &TagSpace,
    mode: Mode,
    own: &Tag,
    gathered: &[Proposal],
    fallback: &Value,
    cmd: Command,
) -> Value {
    let default = || match mode {
        Mode::Repeated => fallback.clone(),
        Mode::Generalized => {
            let step = space.chi(own).id().map_or(0, |mu| own[mu].step);
            Value::History(compose(step, fallback.history(), cmd))
        }
    };
    let Slot::At(mu) = space.chi(own) else {
        return default();
    };
    let coherent = gathered
        .iter()
        .all(|x| space.chi(&x.tag) == Slot::At(mu) && x.tag[mu].label == own[mu].label);
    if gathered.is_empty() || !coherent {
        return default();
    }
    let step = own[mu].step;
    let candidates: Vec<&Proposal> = gathered
        .iter()
        .filter(|x| x.tag[mu].step == step)
        .filter(|x| mode == Mode::Repeated || x.value.history().len() == step as usize)
        .collect();
    let Some(max) = candidates.iter().find(|x| {
        candidates
            .iter()
            .all(|y| matches!(space.compare(&x.tag, &y.tag), TagOrder::Greater | TagOrder::Equiv))
    }) else {
        return default();
    };
    let top: Vec<&Value> = candidates
        .iter()
        .filter(|x| space.compare(&x.tag, &max.tag) == TagOrder::Equiv)
        .map(|x| &x.value)
        .collect();
    match mode {
        Mode::Repeated if top.iter().all(|v| *v == top[0]) => top[0].clone(),
        Mode::Repeated => default(),
        Mode::Generalized => top
            .into_iter()
            .max_by(|a, b| a.history().cmp(b.history()))
            .cloned()
            .unwrap_or_else(default),
    }
}

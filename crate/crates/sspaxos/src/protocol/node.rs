use crate::detector::DetectorState;
use crate::tags::{DeploymentParams, ProcessorId, TagSpace};

use super::proposer::Ctx;
use super::{AcceptorState, InputSource, Message, Mode, Note, Output, Phase, ProposerState};

/// Complete local state of one processor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeState {
    pub acceptor: AcceptorState,
    pub proposer: ProposerState,
    pub detector: DetectorState,
}

impl NodeState {
    pub fn initial(params: &DeploymentParams, id: ProcessorId, mode: Mode, threshold: u32) -> Self {
        NodeState {
            acceptor: AcceptorState::initial(params, id),
            proposer: ProposerState::initial(params, id, mode),
            detector: DetectorState::new(params.n, threshold),
        }
    }
}

/// A processor running the acceptor, learner and proposer roles.
#[derive(Debug, Clone)]
pub struct Node {
    ctx: Ctx,
    pub state: NodeState,
    pub input: InputSource,
}

impl Node {
    pub fn new(params: DeploymentParams, id: ProcessorId, mode: Mode, state: NodeState, input: InputSource) -> Self {
        Node {
            ctx: Ctx {
                me: id,
                params,
                space: params.tag_space(),
                mode,
            },
            state,
            input,
        }
    }

    pub fn id(&self) -> ProcessorId {
        self.ctx.me
    }

    pub fn mode(&self) -> Mode {
        self.ctx.mode
    }

    pub fn space(&self) -> &TagSpace {
        &self.ctx.space
    }

    pub fn phase(&self) -> Phase {
        self.state.proposer.phase
    }

    /// Delivers one message.
    pub fn handle(&mut self, msg: &Message, out: &mut Output) {
        let before = self.state.acceptor.tag.clone();
        let (ctx, st) = (&self.ctx, &mut self.state);
        match msg {
            Message::P1a { from, tag } => {
                let reply = st.acceptor.on_p1a(&ctx.space, ctx.me, tag, &mut out.notes);
                out.sends.push((*from, reply));
            }
            Message::P2a { from, tag, value } | Message::Decision { from, tag, value } => {
                let decision = matches!(msg, Message::Decision { .. });
                let reply = st.acceptor.on_p2a_or_decision(
                    &ctx.space,
                    ctx.me,
                    ctx.mode,
                    tag,
                    value,
                    decision,
                    &mut out.notes,
                );
                out.sends.extend(reply.map(|r| (*from, r)));
            }
            Message::P1b { from, tag, last } => {
                if st.proposer.phase == Phase::One {
                    st.proposer
                        .on_reply(&mut st.acceptor, ctx, *from, tag, last.as_ref(), None, out);
                }
            }
            Message::P2b { from, tag, record } => {
                if st.proposer.phase == Phase::Two {
                    st.proposer
                        .on_reply(&mut st.acceptor, ctx, *from, tag, None, Some(record), out);
                }
            }
            Message::Heartbeat { from } => st.detector.on_heartbeat(*from),
        }
        self.note_tag(before, out);
    }

    /// Proposer tick: starts a round when idle and enabled, or resumes the
    /// phase under way.
    pub fn proposer_tick(&mut self, enabled: bool, out: &mut Output) {
        let before = self.state.acceptor.tag.clone();
        let (ctx, st) = (&self.ctx, &mut self.state);
        match st.proposer.phase {
            Phase::Idle if enabled => {
                let cmd = self.input.next_command();
                st.proposer.begin_round(&mut st.acceptor, ctx, cmd, out);
            }
            Phase::Idle => {}
            Phase::One | Phase::Two => st.proposer.resume(&mut st.acceptor, ctx, out),
        }
        self.note_tag(before, out);
    }

    pub fn heartbeat_tick(&self, out: &mut Output) {
        for to in self.ctx.params.ids() {
            out.sends.push((to, Message::Heartbeat { from: self.ctx.me }));
        }
    }

    pub fn detector_theta(&self) -> bool {
        self.state.detector.theta(self.ctx.me)
    }

    fn note_tag(&self, before: crate::tags::Tag, out: &mut Output) {
        if before != self.state.acceptor.tag {
            out.notes.push(Note::Tag(self.state.acceptor.tag.clone()));
        }
    }
}

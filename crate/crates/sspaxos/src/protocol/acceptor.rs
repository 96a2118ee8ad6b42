use crate::labeling::Label;
use crate::tags::{DeploymentParams, FifoHistory, ProcessorId, Slot, Tag, TagOrder, TagSpace};

use super::{Command, Message, Mode, Note, Proposal, Value};

/// Processor variables shared by the acceptor and proposer roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptorState {
    pub tag: Tag,
    pub record: Vec<Option<Proposal>>,
    /// Label history per entry, capacity `K` each.
    pub history: Vec<FifoHistory<Label>>,
    /// Canceling-label history, capacity `M`.
    pub cancel_history: FifoHistory<Label>,
    pub learned: Vec<Command>,
}

impl AcceptorState {
    pub fn initial(params: &DeploymentParams, id: ProcessorId) -> Self {
        AcceptorState {
            tag: Tag::initial(params.n, id),
            record: vec![None; params.n],
            history: vec![FifoHistory::new(params.k); params.n],
            cancel_history: FifoHistory::new(params.m),
            learned: Vec::new(),
        }
    }

    /// Handles a p1a and returns the p1b reply.
    pub fn on_p1a(&mut self, space: &TagSpace, me: ProcessorId, b: &Tag, notes: &mut Vec<Note>) -> Message {
        let before = self.tag.clone();
        let b = self.preamble(space, me, b, notes);
        if space.compare(&self.tag, &b) == TagOrder::Less {
            let mu = space.chi(&b).id().expect("a dominating tag has a valid entry");
            self.tag[mu] = b[mu].clone();
            if before[mu].label != self.tag[mu].label {
                self.record[mu.index()] = None;
                self.relabel(mu, &before);
            }
        }
        self.purge();
        let last = match space.chi(&self.tag) {
            Slot::At(mu) => self.record[mu.index()].clone(),
            Slot::Omega => None,
        };
        Message::P1b {
            from: me,
            tag: self.tag.clone(),
            last,
        }
    }

    /// Handles a p2a or a decision. Returns the p2b reply for a p2a.
    #[allow(clippy::too_many_arguments)]
    pub fn on_p2a_or_decision(
        &mut self,
        space: &TagSpace,
        me: ProcessorId,
        mode: Mode,
        b: &Tag,
        value: &Value,
        decision: bool,
        notes: &mut Vec<Note>,
    ) -> Option<Message> {
        let before = self.tag.clone();
        let b = self.preamble(space, me, b, notes);
        if space.le(&self.tag, &b) {
            let mu = space.chi(&b).id().expect("an accepted tag has a valid entry");
            self.tag[mu] = b[mu].clone();
            let proposal = Proposal {
                tag: b.clone(),
                value: value.clone(),
            };
            self.record[mu.index()] = Some(proposal.clone());
            notes.push(Note::Accepted { slot: mu, proposal });
            if decision {
                if let (Mode::Generalized, Value::History(h)) = (mode, value) {
                    self.learned = h.clone();
                }
                notes.push(Note::Decided {
                    tag: b.clone(),
                    value: value.clone(),
                });
            }
            if before[mu].label != self.tag[mu].label {
                self.relabel(mu, &before);
            }
        }
        self.purge();
        (!decision).then(|| Message::P2b {
            from: me,
            tag: self.tag.clone(),
            record: self.record.clone(),
        })
    }

    /// Shared first lines of every acceptor handler. Returns the incoming
    /// tag after the canceling-field exchange.
    fn preamble(&mut self, space: &TagSpace, me: ProcessorId, b: &Tag, notes: &mut Vec<Note>) -> Tag {
        self.absorb_cancelers(&b[me], me);
        let mut b = b.clone();
        space.fill_cl(&mut self.tag, &mut b);
        if let Some(p) = space.check_entry(me, &mut self.tag, &mut self.cancel_history) {
            notes.push(Note::Produced(p));
        }
        b
    }

    /// Records into the canceling history the label and canceling label of
    /// `source` that cancel the local label of entry `me`.
    pub(super) fn absorb_cancelers(&mut self, source: &crate::tags::TagEntry, me: ProcessorId) {
        let own = self.tag[me].label.clone();
        for l in std::iter::once(&source.label).chain(source.cancel.as_ref()) {
            if l.cancels(&own) {
                self.cancel_history.push(l.clone());
            }
        }
    }

    /// Label-change bookkeeping for entry `mu` after adopting a new label.
    pub(super) fn relabel(&mut self, mu: ProcessorId, before: &Tag) {
        let h = &mut self.history[mu.index()];
        h.push(before[mu].label.clone());
        let current = &self.tag[mu];
        if let Some(cl) = h.iter().find(|l| l.cancels(&current.label)).cloned() {
            self.tag[mu].cancel = Some(cl);
        }
    }

    /// Drops accepted proposals that no longer match the local tag.
    fn purge(&mut self) {
        for (i, slot) in self.record.iter_mut().enumerate() {
            let mu = ProcessorId::from_index(i);
            let stale = slot.as_ref().is_some_and(|rec| {
                let (mine, theirs) = (&self.tag[mu], &rec.tag[mu]);
                theirs.label != mine.label
                    || mine.lex_cmp(theirs) == Some(std::cmp::Ordering::Less)
            });
            if stale {
                *slot = None;
            }
        }
    }
}

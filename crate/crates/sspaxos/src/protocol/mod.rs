//! Acceptor and proposer state machines, in repeated and generalized mode.

mod acceptor;
mod input;
mod node;
mod proposer;

use std::fmt;

use crate::tags::{ProcessorId, Production, Tag};

pub use acceptor::AcceptorState;
pub use input::InputSource;
pub use node::{Node, NodeState};
pub use proposer::{compose, phase2_select, truncate, Phase, ProposerState};

/// An opaque client command. `Command::NOP` pads histories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Command(pub u32);

impl Command {
    pub const NOP: Command = Command(0);
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Command::NOP {
            f.write_str("nop")
        } else {
            write!(f, "c{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// One consensus value per step.
    Repeated,
    /// Command histories that grow with the step.
    Generalized,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Single(Command),
    History(Vec<Command>),
}

impl Value {
    pub fn empty(mode: Mode) -> Self {
        match mode {
            Mode::Repeated => Value::Single(Command::NOP),
            Mode::Generalized => Value::History(Vec::new()),
        }
    }

    pub fn history(&self) -> &[Command] {
        match self {
            Value::Single(c) => std::slice::from_ref(c),
            Value::History(h) => h,
        }
    }

    /// True when one value extends the other.
    pub fn prefix_related(&self, other: &Value) -> bool {
        let (a, b) = (self.history(), other.history());
        let k = a.len().min(b.len());
        a[..k] == b[..k]
    }

    pub fn is_prefix_of(&self, other: &Value) -> bool {
        let (a, b) = (self.history(), other.history());
        a.len() <= b.len() && a == &b[..a.len()]
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Single(c) => write!(f, "{c}"),
            Value::History(h) => {
                f.write_str("<")?;
                for (i, c) in h.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(">")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Proposal {
    pub tag: Tag,
    pub value: Value,
}

impl fmt::Display for Proposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.tag, self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    P1a,
    P1b,
    P2a,
    P2b,
    Decision,
    Heartbeat,
}

impl MessageKind {
    pub const ALL: [MessageKind; 6] = [
        MessageKind::P1a,
        MessageKind::P1b,
        MessageKind::P2a,
        MessageKind::P2b,
        MessageKind::Decision,
        MessageKind::Heartbeat,
    ];

    pub fn is_reply(self) -> bool {
        matches!(self, MessageKind::P1b | MessageKind::P2b)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageKind::P1a => "p1a",
            MessageKind::P1b => "p1b",
            MessageKind::P2a => "p2a",
            MessageKind::P2b => "p2b",
            MessageKind::Decision => "decision",
            MessageKind::Heartbeat => "heartbeat",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Message {
    P1a { from: ProcessorId, tag: Tag },
    P1b { from: ProcessorId, tag: Tag, last: Option<Proposal> },
    P2a { from: ProcessorId, tag: Tag, value: Value },
    P2b { from: ProcessorId, tag: Tag, record: Vec<Option<Proposal>> },
    Decision { from: ProcessorId, tag: Tag, value: Value },
    Heartbeat { from: ProcessorId },
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::P1a { .. } => MessageKind::P1a,
            Message::P1b { .. } => MessageKind::P1b,
            Message::P2a { .. } => MessageKind::P2a,
            Message::P2b { .. } => MessageKind::P2b,
            Message::Decision { .. } => MessageKind::Decision,
            Message::Heartbeat { .. } => MessageKind::Heartbeat,
        }
    }

    pub fn sender(&self) -> ProcessorId {
        match self {
            Message::P1a { from, .. }
            | Message::P1b { from, .. }
            | Message::P2a { from, .. }
            | Message::P2b { from, .. }
            | Message::Decision { from, .. }
            | Message::Heartbeat { from } => *from,
        }
    }

    /// The tag the message travels with.
    pub fn tag(&self) -> Option<&Tag> {
        match self {
            Message::P1a { tag, .. }
            | Message::P1b { tag, .. }
            | Message::P2a { tag, .. }
            | Message::P2b { tag, .. }
            | Message::Decision { tag, .. } => Some(tag),
            Message::Heartbeat { .. } => None,
        }
    }

    /// Proposals carried as payload.
    pub fn proposals(&self) -> Vec<&Proposal> {
        match self {
            Message::P1b { last, .. } => last.iter().collect(),
            Message::P2b { record, .. } => record.iter().flatten().collect(),
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} from {}", self.kind(), self.sender())?;
        if let Some(tag) = self.tag() {
            write!(f, " {tag}")?;
        }
        match self {
            Message::P2a { value, .. } | Message::Decision { value, .. } => write!(f, " {value}"),
            Message::P1b { last: Some(p), .. } => write!(f, " last {p}"),
            Message::P2b { record, .. } => {
                for (i, r) in record.iter().enumerate() {
                    if let Some(p) = r {
                        write!(f, " r{}={p}", i + 1)?;
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Outcome of a proposer phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Nok,
}

/// Observable side effects of a transition, consumed by the monitor.
#[derive(Debug, Clone, PartialEq)]
pub enum Note {
    /// The processor tag changed to this value.
    Tag(Tag),
    /// A fresh label was produced for the processor's own entry.
    Produced(Production),
    /// The delivered p2a or decision was stored in `r[slot]`.
    Accepted { slot: ProcessorId, proposal: Proposal },
    /// The delivered decision was learned.
    Decided { tag: Tag, value: Value },
    /// A reply entered the responder set of the current phase.
    Counted { from: ProcessorId, positive: bool },
    /// A phase request was broadcast; `retry` marks a retransmission.
    Began { phase: Phase, retry: bool },
    /// A phase ended.
    Finished { phase: Phase, outcome: Outcome },
}

/// Messages and notes emitted by a transition.
#[derive(Debug, Default, Clone)]
pub struct Output {
    pub sends: Vec<(ProcessorId, Message)>,
    pub notes: Vec<Note>,
}

impl Output {
    pub fn clear(&mut self) {
        self.sends.clear();
        self.notes.clear();
    }
}

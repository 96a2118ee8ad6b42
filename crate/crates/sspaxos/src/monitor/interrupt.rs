use std::fmt;

use crate::labeling::Label;
use crate::tags::{Exhaustion, ProcessorId, Slot, Tag, TagSpace};

/// Change of first valid entry, or of its label, at one processor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterruptKind {
    /// `[μ,←]`: the first valid entry moves left to `μ`, or keeps `μ` and
    /// changes label.
    Left(ProcessorId),
    /// `[μ,→]`: the first valid entry moves right. `exhausted` is set when
    /// the abandoned entry kept its label and reached `2^b`.
    Right { to: Slot, exhausted: bool },
    /// `[λ,max]`: own entry relabeled after a counter reached `2^b`.
    Max,
    /// `[λ,cl]`: own entry relabeled for any other reason.
    Cl,
}

impl InterruptKind {
    /// The interrupt ends an epoch through counter exhaustion.
    pub fn is_exhaustion(self) -> bool {
        matches!(self, InterruptKind::Max | InterruptKind::Right { exhausted: true, .. })
    }
}

impl fmt::Display for InterruptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InterruptKind::Left(mu) => write!(f, "[{mu},<-]"),
            InterruptKind::Right { to, exhausted } => {
                write!(f, "[{to},->]")?;
                if *exhausted {
                    f.write_str(" exhausted")?;
                }
                Ok(())
            }
            InterruptKind::Max => f.write_str("[self,max]"),
            InterruptKind::Cl => f.write_str("[self,cl]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interrupt {
    pub at: ProcessorId,
    pub index: u64,
    pub kind: InterruptKind,
}

/// Classifies the transition `prev → next` of `owner`'s tag. `cause` is
/// the reason of a label produced for `owner`'s entry in the same step.
pub fn classify_interrupt(
    space: &TagSpace,
    owner: ProcessorId,
    prev: &Tag,
    next: &Tag,
    cause: Option<Exhaustion>,
) -> Option<InterruptKind> {
    let (p, n) = (space.chi(prev), space.chi(next));
    if n < p {
        return n.id().map(InterruptKind::Left);
    }
    if n > p {
        let exhausted = p.id().is_some_and(|mu| {
            let e = &next[mu];
            e.label == prev[mu].label && (e.step == space.top() || e.trial == space.top())
        });
        return Some(InterruptKind::Right { to: n, exhausted });
    }
    let mu = n.id()?;
    if prev[mu].label == next[mu].label {
        return None;
    }
    Some(if mu != owner {
        InterruptKind::Left(mu)
    } else if cause == Some(Exhaustion::Counter) {
        InterruptKind::Max
    } else {
        InterruptKind::Cl
    })
}

/// First valid entry and its label.
pub fn characteristic(space: &TagSpace, tag: &Tag) -> (Slot, Option<Label>) {
    let slot = space.chi(tag);
    (slot, slot.id().map(|mu| tag[mu].label.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tags::DeploymentParams;

    fn space() -> TagSpace {
        DeploymentParams::derive(3, 1, 1, 4).unwrap().tag_space()
    }

    fn id(i: u16) -> ProcessorId {
        ProcessorId(i)
    }

    fn base() -> Tag {
        Tag::initial(3, id(3))
    }

    #[test]
    fn leftward_move() {
        let mut prev = base();
        prev[id(1)].trial = 16;
        prev[id(2)].trial = 16;
        let next = base();
        assert_eq!(classify_interrupt(&space(), id(3), &prev, &next, None), Some(InterruptKind::Left(id(1))));
    }

    #[test]
    fn rightward_move_by_exhaustion() {
        let prev = base();
        let mut next = base();
        next[id(1)].trial = 16;
        next[id(2)].trial = 16;
        let kind = classify_interrupt(&space(), id(3), &prev, &next, None);
        assert_eq!(kind, Some(InterruptKind::Right { to: Slot::At(id(3)), exhausted: true }));
        next[id(1)].label = Label::new(2, [1]);
        let kind = classify_interrupt(&space(), id(3), &prev, &next, None);
        assert_eq!(kind, Some(InterruptKind::Right { to: Slot::At(id(3)), exhausted: false }));
    }

    #[test]
    fn own_label_change_by_cause() {
        let mut prev = base();
        prev[id(1)].cancel = Some(Label::new(2, [1]));
        prev[id(2)].cancel = Some(Label::new(2, [1]));
        let mut next = prev.clone();
        next[id(3)].label = Label::new(2, [1]);
        let s = space();
        assert_eq!(classify_interrupt(&s, id(3), &prev, &next, Some(Exhaustion::Counter)), Some(InterruptKind::Max));
        assert_eq!(classify_interrupt(&s, id(3), &prev, &next, Some(Exhaustion::Canceled)), Some(InterruptKind::Cl));
    }

    #[test]
    fn same_entry_new_label_elsewhere_is_leftward() {
        let prev = base();
        let mut next = base();
        next[id(1)].label = Label::new(2, [1]);
        assert_eq!(classify_interrupt(&space(), id(3), &prev, &next, None), Some(InterruptKind::Left(id(1))));
    }

    #[test]
    fn counters_alone_are_not_interrupts() {
        let prev = base();
        let mut next = base();
        next[id(1)].step = 5;
        assert_eq!(classify_interrupt(&space(), id(3), &prev, &next, None), None);
    }
}

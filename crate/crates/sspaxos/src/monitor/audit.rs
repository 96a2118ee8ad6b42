use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::labeling::Label;
use crate::protocol::{Mode, Value};
use crate::tags::{ProcessorId, Slot, Tag, TagSpace};

/// `(μ, l, s)` of a tag: first valid entry, its label and its step.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Characteristic {
    pub mu: Slot,
    pub label: Option<Label>,
    pub step: u32,
}

impl Characteristic {
    pub fn of(space: &TagSpace, tag: &Tag) -> Self {
        match space.chi(tag) {
            Slot::At(mu) => Characteristic {
                mu: Slot::At(mu),
                label: Some(tag[mu].label.clone()),
                step: tag[mu].step,
            },
            Slot::Omega => Characteristic {
                mu: Slot::Omega,
                label: None,
                step: 0,
            },
        }
    }

    pub fn matches(&self, mu: ProcessorId, label: &Label) -> bool {
        self.mu == Slot::At(mu) && self.label.as_ref() == Some(label)
    }
}

/// A decision learned at one processor.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionEvent {
    pub at: ProcessorId,
    pub index: u64,
    pub char: Characteristic,
    pub value: Value,
    pub tainted: bool,
}

/// An acceptance whose lineage includes a fake message.
#[derive(Debug, Clone, PartialEq)]
pub struct TaintedAcceptance {
    pub at: ProcessorId,
    pub index: u64,
    pub char: Characteristic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Two decisions of the same step carry different values.
    Divergent { step: u32, first: Value, second: Value },
    /// Two decided histories are not prefix-related.
    Unrelated { first: Value, second: Value },
    /// A learner's later value does not extend an earlier one.
    Unstable { learner: ProcessorId, earlier: Value, later: Value },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Divergent { step, first, second } => {
                write!(f, "step {step} decided both {first} and {second}")
            }
            Violation::Unrelated { first, second } => {
                write!(f, "histories {first} and {second} are not prefix-related")
            }
            Violation::Unstable { learner, earlier, later } => {
                write!(f, "learner {learner} went from {earlier} to {later}")
            }
        }
    }
}

fn relevant<'a>(
    decisions: &'a [DecisionEvent],
    mu: ProcessorId,
    label: &'a Label,
    h: u32,
) -> impl Iterator<Item = &'a DecisionEvent> {
    decisions
        .iter()
        .filter(move |d| !d.tainted && d.char.matches(mu, label) && d.char.step >= h)
}

/// Untainted decisions with characteristic `(mu, label, s ≥ h)` agree per
/// step; in generalized mode they are also pairwise prefix-related.
pub fn check_safety(decisions: &[DecisionEvent], mu: ProcessorId, label: &Label, h: u32, mode: Mode) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut by_step: BTreeMap<u32, &Value> = BTreeMap::new();
    for d in relevant(decisions, mu, label, h) {
        match by_step.get(&d.char.step) {
            Some(&v) if v != &d.value => out.push(Violation::Divergent {
                step: d.char.step,
                first: v.clone(),
                second: d.value.clone(),
            }),
            Some(_) => {}
            None => {
                by_step.insert(d.char.step, &d.value);
            }
        }
    }
    if mode == Mode::Generalized {
        let values: Vec<&Value> = by_step.values().copied().collect();
        for (i, a) in values.iter().enumerate() {
            for b in &values[i + 1..] {
                if !a.is_prefix_of(b) {
                    out.push(Violation::Unrelated {
                        first: (*a).clone(),
                        second: (*b).clone(),
                    });
                }
            }
        }
    }
    out
}

/// Each learner's untainted values, in learning order, extend each other
/// whenever the step does not decrease.
pub fn check_stability(decisions: &[DecisionEvent], mu: ProcessorId, label: &Label, h: u32) -> Vec<Violation> {
    let mut per_learner: BTreeMap<ProcessorId, Vec<&DecisionEvent>> = BTreeMap::new();
    for d in relevant(decisions, mu, label, h) {
        per_learner.entry(d.at).or_default().push(d);
    }
    let mut out = Vec::new();
    for (learner, seq) in per_learner {
        for (i, a) in seq.iter().enumerate() {
            for b in &seq[i + 1..] {
                if a.char.step <= b.char.step && !a.value.is_prefix_of(&b.value) {
                    out.push(Violation::Unstable {
                        learner,
                        earlier: a.value.clone(),
                        later: b.value.clone(),
                    });
                }
            }
        }
    }
    out
}

/// Steps of tainted acceptances with characteristic `(mu, label, ·)`.
pub fn unsafe_steps(acceptances: &[TaintedAcceptance], mu: ProcessorId, label: &Label) -> BTreeSet<u32> {
    acceptances
        .iter()
        .filter(|a| a.char.matches(mu, label))
        .map(|a| a.char.step)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Command;

    fn id(i: u16) -> ProcessorId {
        ProcessorId(i)
    }

    fn decision(at: u16, step: u32, value: Value, tainted: bool) -> DecisionEvent {
        DecisionEvent {
            at: id(at),
            index: 0,
            char: Characteristic {
                mu: Slot::At(id(1)),
                label: Some(Label::initial()),
                step,
            },
            value,
            tainted,
        }
    }

    fn single(c: u32) -> Value {
        Value::Single(Command(c))
    }

    fn hist(cs: &[u32]) -> Value {
        Value::History(cs.iter().copied().map(Command).collect())
    }

    #[test]
    fn same_step_same_value_is_safe() {
        let ds = [decision(1, 3, single(5), false), decision(2, 3, single(5), false)];
        assert!(check_safety(&ds, id(1), &Label::initial(), 0, Mode::Repeated).is_empty());
    }

    #[test]
    fn divergence_is_reported_unless_tainted_or_below_h() {
        let l = Label::initial();
        let ds = [decision(1, 3, single(5), false), decision(2, 3, single(6), false)];
        assert_eq!(check_safety(&ds, id(1), &l, 0, Mode::Repeated).len(), 1);
        assert!(check_safety(&ds, id(1), &l, 4, Mode::Repeated).is_empty());
        let ds = [decision(1, 3, single(5), false), decision(2, 3, single(6), true)];
        assert!(check_safety(&ds, id(1), &l, 0, Mode::Repeated).is_empty());
    }

    #[test]
    fn growing_histories_are_consistent() {
        let l = Label::initial();
        let ds = [decision(1, 2, hist(&[1]), false), decision(1, 3, hist(&[1, 2]), false)];
        assert!(check_safety(&ds, id(1), &l, 0, Mode::Generalized).is_empty());
        assert!(check_stability(&ds, id(1), &l, 0).is_empty());
        let ds = [decision(1, 2, hist(&[1, 2]), false), decision(1, 3, hist(&[3]), false)];
        assert_eq!(check_safety(&ds, id(1), &l, 0, Mode::Generalized).len(), 1);
        assert_eq!(check_stability(&ds, id(1), &l, 0).len(), 1);
    }

    #[test]
    fn unsafe_steps_collects_matching_acceptances() {
        let l = Label::initial();
        let acc = |step| TaintedAcceptance {
            at: id(2),
            index: 0,
            char: Characteristic {
                mu: Slot::At(id(1)),
                label: Some(l.clone()),
                step,
            },
        };
        assert!(unsafe_steps(&[], id(1), &l).is_empty());
        assert_eq!(unsafe_steps(&[acc(7)], id(1), &l), BTreeSet::from([7]));
        assert!(unsafe_steps(&[acc(7)], id(2), &l).is_empty());
    }
}

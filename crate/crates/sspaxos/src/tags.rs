//! Bounded tags: per-processor vectors of labeled step/trial entries, their
//! comparison, fifo histories and the maintenance procedures used by the
//! protocol.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::labeling::{Label, Labeling};

/// Processor identifier, numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessorId(pub u16);

impl ProcessorId {
    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }

    pub fn from_index(i: usize) -> Self {
        ProcessorId(u16::try_from(i + 1).expect("processor index fits u16"))
    }
}

impl fmt::Display for ProcessorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Position of the first valid entry: an identifier, or the sentinel above all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    At(ProcessorId),
    Omega,
}

impl Slot {
    pub fn id(self) -> Option<ProcessorId> {
        match self {
            Slot::At(id) => Some(id),
            Slot::Omega => None,
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::At(id) => write!(f, "{id}"),
            Slot::Omega => f.write_str("w"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("at least one processor is required")]
    NoProcessors,
    #[error("n = {n} cannot tolerate f = {f} crashes (needs n >= 2f + 1)")]
    Resilience { n: usize, f: usize },
    #[error("channel capacity must be at least 1")]
    Capacity,
    #[error("bit bound {0} is outside 2..=30")]
    Bits(u32),
    #[error("label scheme: {0}")]
    Labeling(#[from] crate::labeling::LabelError),
}

/// Deployment constants and the storage limits derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeploymentParams {
    pub n: usize,
    pub f: usize,
    pub capacity: usize,
    pub bits: u32,
    /// Tag storage limit.
    pub k: usize,
    /// Canceling-label storage limit.
    pub k_cl: usize,
    /// Canceling-label history size, also the labeling dimension.
    pub m: usize,
}

impl DeploymentParams {
    pub fn derive(n: usize, f: usize, capacity: usize, bits: u32) -> Result<Self, ParamError> {
        if n == 0 {
            return Err(ParamError::NoProcessors);
        }
        if n < 2 * f + 1 {
            return Err(ParamError::Resilience { n, f });
        }
        if capacity == 0 {
            return Err(ParamError::Capacity);
        }
        if !(2..=30).contains(&bits) {
            return Err(ParamError::Bits(bits));
        }
        let k = n + capacity * n * (n - 1) / 2;
        let k_cl = (n + 1) * k;
        let m = (k + 1) * k_cl;
        Labeling::new(m)?;
        Ok(DeploymentParams {
            n,
            f,
            capacity,
            bits,
            k,
            k_cl,
            m,
        })
    }

    /// The saturation value `2^b`.
    pub fn top(&self) -> u32 {
        1 << self.bits
    }

    pub fn quorum(&self) -> usize {
        self.n - self.f
    }

    pub fn labeling(&self) -> Labeling {
        Labeling::new(self.m).expect("checked at derivation")
    }

    pub fn tag_space(&self) -> TagSpace {
        TagSpace::new(self.top(), self.labeling())
    }

    pub fn ids(&self) -> impl Iterator<Item = ProcessorId> {
        (0..self.n).map(ProcessorId::from_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TagEntry {
    pub label: Label,
    pub step: u32,
    pub trial: u32,
    pub owner: ProcessorId,
    pub cancel: Option<Label>,
}

impl TagEntry {
    pub fn fresh(label: Label, owner: ProcessorId) -> Self {
        TagEntry {
            label,
            step: 0,
            trial: 0,
            owner,
            cancel: None,
        }
    }

    /// Lexicographic order on `(label, step, trial, owner)`; `None` when
    /// the labels differ and neither dominates the other.
    pub fn lex_cmp(&self, other: &TagEntry) -> Option<Ordering> {
        if self.label == other.label {
            Some((self.step, self.trial, self.owner).cmp(&(other.step, other.trial, other.owner)))
        } else if self.label.precedes(&other.label) {
            Some(Ordering::Less)
        } else if other.label.precedes(&self.label) {
            Some(Ordering::Greater)
        } else {
            None
        }
    }

    pub fn same_core(&self, other: &TagEntry) -> bool {
        self.label == other.label
            && self.step == other.step
            && self.trial == other.trial
            && self.owner == other.owner
    }
}

impl fmt::Display for TagEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {} ", self.label, self.step, self.trial, self.owner)?;
        match &self.cancel {
            Some(cl) => write!(f, "{cl}"),
            None => f.write_str("-"),
        }
    }
}

/// One entry per processor, indexed by identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tag {
    entries: Vec<TagEntry>,
}

impl Tag {
    pub fn new(entries: Vec<TagEntry>) -> Self {
        assert!(!entries.is_empty(), "a tag needs at least one entry");
        Tag { entries }
    }

    /// Every entry at `(initial label, 0, 0)` owned by `owner`.
    pub fn initial(n: usize, owner: ProcessorId) -> Self {
        Tag::new(vec![TagEntry::fresh(Label::initial(), owner); n])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TagEntry] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (ProcessorId, &TagEntry)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (ProcessorId::from_index(i), e))
    }
}

impl std::ops::Index<ProcessorId> for Tag {
    type Output = TagEntry;

    fn index(&self, id: ProcessorId) -> &TagEntry {
        &self.entries[id.index()]
    }
}

impl std::ops::IndexMut<ProcessorId> for Tag {
    fn index_mut(&mut self, id: ProcessorId) -> &mut TagEntry {
        &mut self.entries[id.index()]
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagOrder {
    Less,
    Equiv,
    Greater,
    Incomparable,
}

impl TagOrder {
    /// `≼`: less or equivalent.
    pub fn is_le(self) -> bool {
        matches!(self, TagOrder::Less | TagOrder::Equiv)
    }
}

/// Bounded, duplicate-free history, most recent first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FifoHistory<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T: PartialEq> FifoHistory<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "history capacity must be positive");
        FifoHistory {
            items: VecDeque::new(),
            capacity,
        }
    }

    /// Builds a history from items listed most recent first, keeping the
    /// first occurrence of each value and at most `capacity` of them.
    pub fn from_items(capacity: usize, items: impl IntoIterator<Item = T>) -> Self {
        let mut h = FifoHistory::new(capacity);
        for v in items {
            if h.items.len() < capacity && !h.items.contains(&v) {
                h.items.push_back(v);
            }
        }
        h
    }

    pub fn push(&mut self, v: T) {
        if self.items.contains(&v) {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_back();
        }
        self.items.push_front(v);
    }

    pub fn contains(&self, v: &T) -> bool {
        self.items.contains(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

/// Why an entry had to be replaced by a freshly produced label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exhaustion {
    /// Step or trial reached `2^b`.
    Counter,
    /// The entry carried a canceling label.
    Canceled,
}

/// A label produced by `check_entry`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub entry: ProcessorId,
    pub old: Label,
    pub new: Label,
    pub cause: Exhaustion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Increment {
    Step,
    Trial,
}

/// Tag operations for a fixed bit bound and labeling scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagSpace {
    top: u32,
    labeling: Labeling,
}

impl TagSpace {
    pub fn new(top: u32, labeling: Labeling) -> Self {
        TagSpace { top, labeling }
    }

    pub fn top(&self) -> u32 {
        self.top
    }

    pub fn labeling(&self) -> Labeling {
        self.labeling
    }

    pub fn is_valid(&self, e: &TagEntry) -> bool {
        e.cancel.is_none() && e.step < self.top && e.trial < self.top
    }

    /// First valid entry.
    pub fn chi(&self, a: &Tag) -> Slot {
        a.iter()
            .find(|(_, e)| self.is_valid(e))
            .map_or(Slot::Omega, |(id, _)| Slot::At(id))
    }

    pub fn compare(&self, a: &Tag, b: &Tag) -> TagOrder {
        match (self.chi(a), self.chi(b)) {
            (Slot::Omega, Slot::Omega) => TagOrder::Incomparable,
            (ca, cb) if ca > cb => TagOrder::Less,
            (ca, cb) if ca < cb => TagOrder::Greater,
            (Slot::At(mu), _) => match a[mu].lex_cmp(&b[mu]) {
                Some(Ordering::Less) => TagOrder::Less,
                Some(Ordering::Equal) => TagOrder::Equiv,
                Some(Ordering::Greater) => TagOrder::Greater,
                None => TagOrder::Incomparable,
            },
            (Slot::Omega, _) => unreachable!("handled by the ordering arms"),
        }
    }

    /// `a ≼ b`.
    pub fn le(&self, a: &Tag, b: &Tag) -> bool {
        self.compare(a, b).is_le()
    }

    /// Drops canceling labels that no longer cancel and claims every entry for `owner`.
    pub fn clean(&self, owner: ProcessorId, a: &mut Tag) {
        for e in &mut a.entries {
            if e.cancel.as_ref().is_some_and(|cl| cl.precedes_or_eq(&e.label)) {
                e.cancel = None;
            }
            e.owner = owner;
        }
    }

    /// Symmetric exchange of canceling labels and exhausted counters.
    pub fn fill_cl(&self, x: &mut Tag, y: &mut Tag) {
        let (xc, yc) = (x.clone(), y.clone());
        self.absorb(x, &yc);
        self.absorb(y, &xc);
    }

    fn absorb(&self, x: &mut Tag, frozen: &Tag) {
        for (e, other) in x.entries.iter_mut().zip(&frozen.entries) {
            if let Some(cl) = canceler(other, &e.label) {
                e.cancel = Some(cl.clone());
            }
            if other.label == e.label && (other.step == self.top || other.trial == self.top) {
                e.step = self.top;
                e.trial = self.top;
            }
        }
    }

    /// Replaces an invalid entry `owner` of `x` by a label dominating the history.
    pub fn check_entry(
        &self,
        owner: ProcessorId,
        x: &mut Tag,
        history: &mut FifoHistory<Label>,
    ) -> Option<Production> {
        let e = &x[owner];
        if self.is_valid(e) {
            return None;
        }
        let cause = if e.cancel.is_some() {
            Exhaustion::Canceled
        } else {
            Exhaustion::Counter
        };
        let old = e.label.clone();
        history.push(old.clone());
        let bound = self.labeling.dimension();
        let new = self
            .labeling
            .next(history.iter().take(bound))
            .expect("history is bounded by the dimension");
        x[owner] = TagEntry::fresh(new.clone(), owner);
        history.push(new.clone());
        Some(Production {
            entry: owner,
            old,
            new,
            cause,
        })
    }

    /// Step increment.
    pub fn inc_step(
        &self,
        owner: ProcessorId,
        x: &Tag,
        history: &mut FifoHistory<Label>,
    ) -> (Tag, Option<Production>) {
        self.increment(owner, x, history, Increment::Step)
    }

    /// Trial increment.
    pub fn inc_trial(
        &self,
        owner: ProcessorId,
        x: &Tag,
        history: &mut FifoHistory<Label>,
    ) -> (Tag, Option<Production>) {
        self.increment(owner, x, history, Increment::Trial)
    }

    fn increment(
        &self,
        owner: ProcessorId,
        x: &Tag,
        history: &mut FifoHistory<Label>,
        kind: Increment,
    ) -> (Tag, Option<Production>) {
        let mut y = x.clone();
        self.clean(owner, &mut y);
        if let Slot::At(mu) = self.chi(&y) {
            if mu <= owner {
                let e = &mut y[mu];
                match kind {
                    Increment::Step => {
                        e.step = (e.step + 1).min(self.top);
                        e.trial = 0;
                    }
                    Increment::Trial => e.trial = (e.trial + 1).min(self.top),
                }
            }
        }
        let produced = self.check_entry(owner, &mut y, history);
        (y, produced)
    }
}

/// The label or canceling label of `source` that cancels `target`, label first.
pub fn canceler<'a>(source: &'a TagEntry, target: &Label) -> Option<&'a Label> {
    std::iter::once(&source.label)
        .chain(source.cancel.as_ref())
        .find(|l| l.cancels(target))
}

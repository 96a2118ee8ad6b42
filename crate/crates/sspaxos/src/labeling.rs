//! Finite labeling scheme.
//!
//! A label is a sting together with a bounded set of antistings drawn from
//! `{1, ..., q}` with `q = d² + 1`. Dominance is not transitive, so callers
//! must never chain comparisons.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("label dimension must be positive")]
    ZeroDimension,
    #[error("dimension {0} is too large for the label domain")]
    DimensionTooLarge(usize),
    #[error("{given} labels exceed the scheme dimension {d}")]
    DimensionExceeded { given: usize, d: usize },
    #[error("value {value} lies outside the label domain 1..={q}")]
    OutOfDomain { value: u32, q: u32 },
    #[error("label carries {given} antistings but the dimension is {d}")]
    TooManyAntistings { given: usize, d: usize },
    #[error("malformed label text `{0}`")]
    Parse(String),
}

/// A bounded label. Antistings are kept sorted and free of duplicates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    sting: u32,
    antistings: Arc<[u32]>,
}

impl Label {
    pub fn new(sting: u32, antistings: impl IntoIterator<Item = u32>) -> Self {
        let mut set: Vec<u32> = antistings.into_iter().collect();
        set.sort_unstable();
        set.dedup();
        Label {
            sting,
            antistings: set.into(),
        }
    }

    /// The label produced from an empty history.
    pub fn initial() -> Self {
        Label::new(1, [])
    }

    pub fn sting(&self) -> u32 {
        self.sting
    }

    pub fn antistings(&self) -> &[u32] {
        &self.antistings
    }

    pub fn has_antisting(&self, value: u32) -> bool {
        self.antistings.binary_search(&value).is_ok()
    }

    /// Strict dominance: `self ≺ other`.
    pub fn precedes(&self, other: &Label) -> bool {
        other.has_antisting(self.sting) && !self.has_antisting(other.sting)
    }

    /// Reflexive closure of [`Label::precedes`].
    pub fn precedes_or_eq(&self, other: &Label) -> bool {
        self == other || self.precedes(other)
    }

    /// True when `self` cancels `other`, i.e. `self` is not below or equal to it.
    pub fn cancels(&self, other: &Label) -> bool {
        !self.precedes_or_eq(other)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}|", self.sting)?;
        for (i, a) in self.antistings.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl std::str::FromStr for Label {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LabelError::Parse(s.to_string());
        let inner = s
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let (sting, rest) = inner.split_once('|').ok_or_else(bad)?;
        let sting = sting.trim().parse().map_err(|_| bad())?;
        let antistings = rest
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<u32>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Label::new(sting, antistings))
    }
}

/// Scheme dimension `d` and domain size `q = d² + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Labeling {
    d: usize,
    q: u32,
}

impl Labeling {
    pub fn new(d: usize) -> Result<Self, LabelError> {
        if d == 0 {
            return Err(LabelError::ZeroDimension);
        }
        let q = (d as u64)
            .checked_mul(d as u64)
            .map(|sq| sq + 1)
            .filter(|&q| q <= u32::MAX as u64)
            .ok_or(LabelError::DimensionTooLarge(d))?;
        Ok(Labeling { d, q: q as u32 })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn domain(&self) -> u32 {
        self.q
    }

    pub fn validate(&self, label: &Label) -> Result<(), LabelError> {
        if label.antistings.len() > self.d {
            return Err(LabelError::TooManyAntistings {
                given: label.antistings.len(),
                d: self.d,
            });
        }
        std::iter::once(&label.sting)
            .chain(label.antistings.iter())
            .find(|&&v| v == 0 || v > self.q)
            .map_or(Ok(()), |&value| {
                Err(LabelError::OutOfDomain { value, q: self.q })
            })
    }

    /// `label_less` checked against this scheme.
    pub fn less(&self, a: &Label, b: &Label) -> Result<bool, LabelError> {
        self.validate(a)?;
        self.validate(b)?;
        Ok(a.precedes(b))
    }

    /// Label increment: a label dominating every label of `labels`.
    ///
    /// `labels` is treated as a set, so duplicates count once.
    pub fn next<'a, I>(&self, labels: I) -> Result<Label, LabelError>
    where
        I: IntoIterator<Item = &'a Label>,
    {
        let mut set: Vec<&Label> = labels.into_iter().collect();
        set.sort_unstable();
        set.dedup();
        if set.len() > self.d {
            return Err(LabelError::DimensionExceeded {
                given: set.len(),
                d: self.d,
            });
        }
        let mut taken: Vec<u32> = set
            .iter()
            .flat_map(|l| l.antistings.iter().copied())
            .collect();
        taken.sort_unstable();
        taken.dedup();
        let mut sting = 1u32;
        for v in taken {
            if v == sting {
                sting += 1;
            } else if v > sting {
                break;
            }
        }
        Ok(Label::new(sting, set.iter().map(|l| l.sting)))
    }
}

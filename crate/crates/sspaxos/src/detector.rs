//! Heartbeat failure detector feeding the proposer gate.

use crate::tags::ProcessorId;

/// Per-processor heartbeat counters bounded by a threshold `W`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DetectorState {
    levels: Vec<u32>,
    threshold: u32,
}

impl DetectorState {
    pub fn new(n: usize, threshold: u32) -> Self {
        DetectorState::from_levels(vec![0; n], threshold)
    }

    /// Arbitrary levels are clamped into `[0, W]`.
    pub fn from_levels(levels: Vec<u32>, threshold: u32) -> Self {
        assert!(threshold > 0, "detector threshold must be positive");
        let levels = levels.into_iter().map(|l| l.min(threshold)).collect();
        DetectorState { levels, threshold }
    }

    /// The default threshold `2·n·C`.
    pub fn default_threshold(n: usize, capacity: usize) -> u32 {
        u32::try_from(2 * n * capacity).unwrap_or(u32::MAX).max(1)
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn on_heartbeat(&mut self, from: ProcessorId) {
        let w = self.threshold;
        for (i, level) in self.levels.iter_mut().enumerate() {
            if i == from.index() {
                *level = 0;
            } else if *level < w {
                *level += 1;
            }
        }
    }

    pub fn suspects(&self) -> Vec<ProcessorId> {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == self.threshold)
            .map(|(i, _)| ProcessorId::from_index(i))
            .collect()
    }

    pub fn is_suspected(&self, id: ProcessorId) -> bool {
        self.levels[id.index()] == self.threshold
    }

    /// True iff `me` is the smallest unsuspected identifier.
    pub fn theta(&self, me: ProcessorId) -> bool {
        self.levels
            .iter()
            .position(|&l| l < self.threshold)
            .is_some_and(|i| ProcessorId::from_index(i) == me)
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Command;

/// Deterministic source of proposer inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputSource {
    /// Cycles through a fixed list; an empty list yields `nop`.
    Cycle { items: Vec<Command>, next: usize },
    /// Draws commands from a seeded generator.
    Seeded(Box<ChaCha8Rng>),
}

impl InputSource {
    pub fn cycle(items: Vec<Command>) -> Self {
        InputSource::Cycle { items, next: 0 }
    }

    pub fn seeded(seed: u64) -> Self {
        InputSource::Seeded(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    pub fn next_command(&mut self) -> Command {
        match self {
            InputSource::Cycle { items, next } => {
                if items.is_empty() {
                    return Command::NOP;
                }
                let c = items[*next % items.len()];
                *next = (*next + 1) % items.len();
                c
            }
            InputSource::Seeded(rng) => Command(rng.gen_range(1..1_000_000)),
        }
    }
}

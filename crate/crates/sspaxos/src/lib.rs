//! Practically self-stabilizing Paxos.
//!
//! Bounded labels and tags, acceptor and proposer state machines, a heartbeat
//! failure detector, a deterministic simulator of bounded lossy channels and
//! a monitor that audits simulated executions.

pub mod cli;
pub mod detector;
pub mod labeling;
pub mod monitor;
pub mod protocol;
pub mod simnet;
pub mod tags;

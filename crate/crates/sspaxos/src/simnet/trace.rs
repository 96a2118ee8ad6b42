//! Line-delimited protocol trace. Monitor notes are left out so that the
//! trace is the same with and without a monitor attached.

use std::fmt::Write;

use super::{Effect, StepRecord};

/// One line per event.
pub fn format_step(rec: &StepRecord) -> String {
    let mut line = format!("{} {}", rec.index, rec.event);
    for effect in &rec.effects {
        match effect {
            Effect::Sent(env) => {
                let _ = write!(line, " | send #{} {}->{} {}", env.uid, env.from, env.to, env.msg);
            }
            Effect::Dropped(uid) => {
                let _ = write!(line, " | drop #{uid}");
            }
            Effect::Delivered { uid, from, to, kind, sink } => {
                let _ = write!(line, " | recv #{uid} {from}->{to} {kind}");
                if *sink {
                    line.push_str(" sink");
                }
            }
            Effect::Crashed(id) => {
                let _ = write!(line, " | crashed {id}");
            }
            Effect::Note { .. } => {}
        }
    }
    line
}

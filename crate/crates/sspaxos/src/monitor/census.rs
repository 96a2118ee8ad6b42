use std::collections::HashSet;

use crate::labeling::Label;
use crate::protocol::Message;
use crate::simnet::Network;
use crate::tags::{ProcessorId, Tag};

/// Tag and label counts of one configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Census {
    /// Processor tags plus one per tag-carrying message in flight.
    pub primary: usize,
    /// `primary` plus tags embedded in records, payloads and proposer state.
    pub embedded: usize,
    /// Distinct candidate canceling labels per entry.
    pub cl_candidates: Vec<usize>,
}

fn payload_tags(msg: &Message) -> impl Iterator<Item = &Tag> {
    msg.proposals().into_iter().map(|p| &p.tag)
}

pub fn census(net: &Network) -> Census {
    let n = net.params().n;
    let primary_tags: Vec<&Tag> = net
        .nodes()
        .iter()
        .map(|node| &node.state.acceptor.tag)
        .chain(net.inflight().filter_map(|e| e.msg.tag()))
        .collect();
    let embedded = primary_tags.len()
        + net
            .nodes()
            .iter()
            .map(|node| {
                let st = &node.state;
                st.acceptor.record.iter().flatten().count()
                    + 1
                    + st.proposer.gathered.len()
            })
            .sum::<usize>()
        + net.inflight().map(|e| payload_tags(&e.msg).count()).sum::<usize>();
    let cl_candidates = (0..n)
        .map(ProcessorId::from_index)
        .map(|mu| {
            let mut seen: HashSet<&Label> = primary_tags.iter().map(|t| &t[mu].label).collect();
            for node in net.nodes() {
                seen.extend(node.state.acceptor.history[mu.index()].iter());
            }
            seen.len()
        })
        .collect();
    Census {
        primary: primary_tags.len(),
        embedded,
        cl_candidates,
    }
}

/// Largest `max(step, trial)` at entry `mu` among all tags of the
/// configuration whose `mu` label is `label`, or `None` without such tag.
pub fn label_height(net: &Network, mu: ProcessorId, label: &Label) -> Option<u32> {
    let mut tags: Vec<&Tag> = Vec::new();
    for node in net.nodes() {
        let st = &node.state;
        tags.push(&st.acceptor.tag);
        tags.extend(st.acceptor.record.iter().flatten().map(|p| &p.tag));
        tags.push(&st.proposer.sent);
        tags.extend(st.proposer.gathered.iter().map(|p| &p.tag));
    }
    for env in net.inflight() {
        tags.extend(env.msg.tag());
        tags.extend(payload_tags(&env.msg));
    }
    tags.into_iter()
        .map(|t| &t[mu])
        .filter(|e| &e.label == label)
        .map(|e| e.step.max(e.trial))
        .max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::Scenario;

    #[test]
    fn clean_start_counts_one_tag_per_processor() {
        let net = Network::new(&Scenario::parse("").unwrap(), 0).unwrap();
        let c = census(&net);
        assert_eq!(c.primary, 3);
        assert_eq!(c.embedded, 6);
        assert_eq!(c.cl_candidates, vec![1, 1, 1]);
        let h = label_height(&net, ProcessorId(1), &Label::initial());
        assert_eq!(h, Some(0));
    }

    #[test]
    fn full_channels_stay_within_k() {
        let sc = Scenario::parse("[init]\nmode = \"adversarial\"").unwrap();
        for seed in 0..20 {
            let net = Network::new(&sc, seed).unwrap();
            let c = census(&net);
            assert!(c.primary <= net.params().k);
            assert!(c.cl_candidates.iter().all(|&x| x <= net.params().k_cl));
        }
    }
}

use proptest::collection::{btree_set, vec};
use proptest::prelude::*;

use sspaxos::detector::DetectorState;
use sspaxos::labeling::{Label, Labeling};
use sspaxos::monitor::census;
use sspaxos::protocol::{compose, Command, Value};
use sspaxos::simnet::{Network, Scenario};
use sspaxos::tags::{DeploymentParams, FifoHistory, ProcessorId, Slot, Tag, TagEntry, TagOrder};

const Q: u32 = 17;

fn label() -> impl Strategy<Value = Label> {
    (1..=Q, btree_set(1..=Q, 0..=4)).prop_map(|(s, a)| Label::new(s, a))
}

fn params() -> DeploymentParams {
    DeploymentParams::derive(3, 1, 1, 4).expect("desk params")
}

fn entry(labels: Vec<Label>) -> impl Strategy<Value = TagEntry> {
    let top = params().top();
    (
        proptest::sample::select(labels.clone()),
        0..=top,
        0..=top,
        1..=3u16,
        proptest::option::of(proptest::sample::select(labels)),
    )
        .prop_map(|(label, step, trial, owner, cancel)| TagEntry {
            label,
            step,
            trial,
            owner: ProcessorId(owner),
            cancel,
        })
}

/// Tags over a small shared label pool so comparisons often meet.
fn tag() -> impl Strategy<Value = Tag> {
    let pool = vec![
        Label::initial(),
        Label::new(2, [1]),
        Label::new(3, [2]),
        Label::new(1, [3]),
        Label::new(4, [1, 2]),
    ];
    vec(entry(pool), 3).prop_map(Tag::new)
}

fn scenario(adversarial: bool, drop_newest: bool) -> Scenario {
    let init = if adversarial { "adversarial" } else { "clean" };
    let overflow = if drop_newest { "drop-newest" } else { "drop-oldest" };
    Scenario::parse(&format!(
        "[init]\nmode = \"{init}\"\n[schedule]\noverflow = \"{overflow}\"\n[run]\nmax_events = 400\n"
    ))
    .expect("scenario")
}

proptest! {
    #[test]
    fn dominance_is_irreflexive_and_antisymmetric(a in label(), b in label()) {
        prop_assert!(!a.precedes(&a));
        prop_assert!(!(a.precedes(&b) && b.precedes(&a)));
    }

    #[test]
    fn next_dominates_its_inputs(set in vec(label(), 0..=4)) {
        let scheme = Labeling::new(4).unwrap();
        let next = scheme.next(&set).unwrap();
        prop_assert!(scheme.validate(&next).is_ok());
        for l in &set {
            prop_assert!(l.precedes(&next), "{} not below {}", l, next);
        }
    }

    #[test]
    fn label_text_round_trips(a in label()) {
        prop_assert_eq!(a.to_string().parse::<Label>().unwrap(), a);
    }

    #[test]
    fn fifo_history_keeps_recent_distinct_items(cap in 1usize..6, items in vec(0u8..8, 0..40)) {
        let mut h = FifoHistory::new(cap);
        for &v in &items {
            h.push(v);
            prop_assert!(h.contains(&v));
            prop_assert!(h.len() <= cap);
        }
        let seen: Vec<&u8> = h.iter().collect();
        let mut dedup = seen.clone();
        dedup.sort();
        dedup.dedup();
        prop_assert_eq!(dedup.len(), seen.len());
    }

    #[test]
    fn tag_order_is_antisymmetric(a in tag(), b in tag()) {
        let space = params().tag_space();
        let flipped = match space.compare(&a, &b) {
            TagOrder::Less => TagOrder::Greater,
            TagOrder::Greater => TagOrder::Less,
            same => same,
        };
        prop_assert_eq!(space.compare(&b, &a), flipped);
    }

    #[test]
    fn increments_leave_the_owner_entry_valid(a in tag(), owner in 1..=3u16, trial in any::<bool>()) {
        let space = params().tag_space();
        let owner = ProcessorId(owner);
        let mut history = FifoHistory::new(params().k);
        let (next, _) = if trial {
            space.inc_trial(owner, &a, &mut history)
        } else {
            space.inc_step(owner, &a, &mut history)
        };
        prop_assert!(space.is_valid(&next[owner]));
        prop_assert!(next.iter().all(|(_, e)| e.owner == owner));
    }

    #[test]
    fn clean_drops_labels_that_do_not_cancel(a in tag(), owner in 1..=3u16) {
        let space = params().tag_space();
        let mut x = a;
        space.clean(ProcessorId(owner), &mut x);
        for (_, e) in x.iter() {
            prop_assert!(e.cancel.as_ref().is_none_or(|cl| !cl.precedes_or_eq(&e.label)));
        }
    }

    #[test]
    fn check_entry_moves_the_first_valid_entry_left(a in tag(), owner in 1..=3u16) {
        let space = params().tag_space();
        let owner = ProcessorId(owner);
        let mut x = a;
        space.check_entry(owner, &mut x, &mut FifoHistory::new(params().m));
        prop_assert!(space.chi(&x) <= Slot::At(owner));
    }

    #[test]
    fn fill_cl_twice_keeps_validity_and_order(a in tag(), b in tag()) {
        let space = params().tag_space();
        let (mut x, mut y) = (a, b);
        space.fill_cl(&mut x, &mut y);
        let (x1, y1) = (x.clone(), y.clone());
        space.fill_cl(&mut x, &mut y);
        let validity = |t: &Tag| t.iter().map(|(_, e)| space.is_valid(e)).collect::<Vec<_>>();
        prop_assert_eq!(validity(&x), validity(&x1));
        prop_assert_eq!(validity(&y), validity(&y1));
        prop_assert_eq!(space.compare(&x, &y), space.compare(&x1, &y1));
    }

    #[test]
    fn theta_picks_the_smallest_trusted_id(levels in vec(0u32..=4, 3..6)) {
        let d = DetectorState::from_levels(levels.clone(), 4);
        let leaders: Vec<usize> = (0..levels.len())
            .filter(|&i| d.theta(ProcessorId::from_index(i)))
            .collect();
        let expected: Vec<usize> = levels.iter().position(|&l| l < 4).into_iter().collect();
        prop_assert_eq!(leaders, expected);
    }

    #[test]
    fn compose_matches_the_step(step in 0u32..10, base in vec(0u32..5, 0..12), cmd in 0u32..5) {
        let base: Vec<Command> = base.into_iter().map(Command).collect();
        let p = compose(step, &base, Command(cmd));
        prop_assert_eq!(p.len(), step as usize);
        let v = Value::History(p.clone());
        prop_assert!(v.is_prefix_of(&v));
        prop_assert!(Value::History(p[..p.len() / 2].to_vec()).is_prefix_of(&v));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn channels_respect_capacity_and_census(seed in any::<u64>(), adversarial in any::<bool>(), newest in any::<bool>()) {
        let sc = scenario(adversarial, newest);
        let mut net = Network::new(&sc, seed).unwrap();
        let p = *net.params();
        for _ in 0..sc.run.max_events {
            let Some(_) = net.step() else { break };
            prop_assert!(net.channels().iter().all(|c| c.inflight.len() <= p.capacity));
            let c = census(&net);
            prop_assert!(c.primary <= p.k);
            prop_assert!(c.cl_candidates.iter().all(|&x| x <= p.k_cl));
        }
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>(), adversarial in any::<bool>()) {
        let sc = scenario(adversarial, false);
        let mut a = Network::new(&sc, seed).unwrap();
        let mut b = Network::new(&sc, seed).unwrap();
        for _ in 0..200 {
            prop_assert_eq!(a.step(), b.step());
        }
        prop_assert_eq!(a.dump(), b.dump());
    }
}

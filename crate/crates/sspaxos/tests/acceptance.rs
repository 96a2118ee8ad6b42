//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sspaxos::cli::{run_seed, Sink};
use sspaxos::labeling::{Label, Labeling};
use sspaxos::monitor::{Characteristic, Monitor, Report};
use sspaxos::protocol::AcceptorState;
use sspaxos::simnet::{Network, Scenario};
use sspaxos::tags::{DeploymentParams, ProcessorId, Tag, TagEntry};

const SEEDS: std::ops::RangeInclusive<u64> = 1..=100;
const STABILIZE_BUDGET: u64 = 2_000_000;
const ZONE_HORIZON: u64 = 20_000;
const BASELINE_BUDGET: u64 = 500_000;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

/// Runs `sc` for `seed` under the monitor until `stop` holds or `budget` events.
fn drive(sc: &Scenario, seed: u64, budget: u64, mut stop: impl FnMut(&Monitor) -> bool) -> (Network, Monitor) {
    let mut net = Network::new(sc, seed).expect("scenario builds");
    let mut monitor = Monitor::new(&net);
    resume(&mut net, &mut monitor, budget, &mut stop);
    (net, monitor)
}

fn resume(net: &mut Network, monitor: &mut Monitor, budget: u64, stop: &mut impl FnMut(&Monitor) -> bool) {
    while net.event_index() < budget && !stop(monitor) {
        let Some(rec) = net.step() else { break };
        monitor.observe(&rec, net);
        monitor.take_annotations();
    }
}

fn scenario(text: &str) -> Scenario {
    Scenario::parse(text).expect("scenario parses")
}

/// Every asserted invariant of the reports, seed-tagged.
fn failures<'a>(reports: impl IntoIterator<Item = &'a (u64, Report)>) -> Vec<String> {
    reports
        .into_iter()
        .flat_map(|(seed, r)| r.violations().into_iter().map(move |v| format!("seed {seed}: {v}")))
        .collect()
}

fn first_failure(f: &[String]) -> String {
    f.first().map_or(String::new(), |s| format!("; first: {s}"))
}

fn all_labels(q: u32, d: usize) -> Vec<Label> {
    let values: Vec<u32> = (1..=q).collect();
    let mut subsets: Vec<Vec<u32>> = vec![Vec::new()];
    for &v in &values {
        let grown: Vec<Vec<u32>> = subsets
            .iter()
            .filter(|s| s.len() < d)
            .map(|s| s.iter().copied().chain([v]).collect())
            .collect();
        subsets.extend(grown);
    }
    values
        .iter()
        .flat_map(|&s| subsets.iter().map(move |a| Label::new(s, a.iter().copied())))
        .collect()
}

fn axioms_hold(scheme: &Labeling, set: &[&Label]) -> Result<(), String> {
    for a in set {
        if a.precedes(a) {
            return Err(format!("{a} precedes itself"));
        }
        for b in set {
            if a.precedes(b) && b.precedes(a) {
                return Err(format!("{a} and {b} precede each other"));
            }
        }
    }
    let next = scheme.next(set.iter().copied()).map_err(|e| e.to_string())?;
    scheme.validate(&next).map_err(|e| e.to_string())?;
    match set.iter().find(|l| !l.precedes(&next)) {
        Some(l) => Err(format!("next {next} does not dominate {l}")),
        None => Ok(()),
    }
}

fn random_label(rng: &mut ChaCha8Rng, scheme: &Labeling) -> Label {
    let q = scheme.domain();
    let width = rng.gen_range(0..=scheme.dimension().min(16));
    Label::new(rng.gen_range(1..=q), (0..width).map(|_| rng.gen_range(1..=q)))
}

fn criterion_1() -> Verdict {
    let small = Labeling::new(2).expect("d = 2");
    let labels = all_labels(small.domain(), 2);
    let mut cases = 0usize;
    let mut error = None;
    'outer: for (i, a) in labels.iter().enumerate() {
        for r in [vec![a], vec![]] {
            cases += 1;
            if let Err(e) = axioms_hold(&small, &r) {
                error = Some(e);
                break 'outer;
            }
        }
        for b in &labels[i + 1..] {
            cases += 1;
            if let Err(e) = axioms_hold(&small, &[a, b]) {
                error = Some(e);
                break 'outer;
            }
        }
    }
    let params = DeploymentParams::derive(3, 1, 1, 4).expect("desk params");
    let scheme = params.labeling();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        if error.is_some() {
            break;
        }
        let size = rng.gen_range(0..=scheme.dimension().min(24));
        let set: Vec<Label> = (0..size).map(|_| random_label(&mut rng, &scheme)).collect();
        let refs: Vec<&Label> = set.iter().collect();
        if let Err(e) = axioms_hold(&scheme, &refs) {
            error = Some(e);
        }
    }
    match error {
        None => Verdict::new(
            true,
            format!(
                "{} labels at d=2, {cases} exhaustive sets; 10000 random sets at d={}",
                labels.len(),
                scheme.dimension()
            ),
        ),
        Some(e) => Verdict::new(false, e),
    }
}

fn criterion_2(reports: &[(u64, Report)]) -> Verdict {
    let over: Vec<String> = reports
        .iter()
        .filter(|(_, r)| r.over_k > 0 || r.over_k_cl > 0)
        .map(|(s, r)| format!("seed {s}: {} over K, {} over Kcl", r.over_k, r.over_k_cl))
        .collect();
    let primary = reports.iter().map(|(_, r)| r.max_primary).max().unwrap_or(0);
    let cl = reports.iter().map(|(_, r)| r.max_cl).max().unwrap_or(0);
    Verdict::new(
        over.is_empty(),
        format!(
            "{} runs, max primary census {primary}, max cl candidates {cl}{}",
            reports.len(),
            first_failure(&over)
        ),
    )
}

fn cycle_readoption(params: &DeploymentParams, length: u32) -> bool {
    let space = params.tag_space();
    let (owner, me) = (ProcessorId(1), ProcessorId(2));
    let cycle: Vec<Label> = (1..=length)
        .map(|i| Label::new(i, [if i == 1 { length } else { i - 1 }]))
        .collect();
    let with = |base: &Tag, label: &Label| {
        let mut t = base.clone();
        t[owner] = TagEntry::fresh(label.clone(), owner);
        t
    };
    let mut acceptor = AcceptorState::initial(params, me);
    acceptor.tag = with(&acceptor.tag, &cycle[0]);
    for label in cycle.iter().cycle().skip(1).take(cycle.len()) {
        let b = with(&acceptor.tag, label);
        acceptor.on_p1a(&space, me, &b, &mut Vec::new());
    }
    !space.is_valid(&acceptor.tag[owner])
}

fn criterion_3(reports: &[(u64, Report)]) -> Verdict {
    let params = DeploymentParams::derive(3, 1, 1, 4).expect("desk params");
    let broken: Vec<u32> = (3..=params.k as u32).filter(|&t| !cycle_readoption(&params, t)).collect();
    let mut silent = 0usize;
    let mut exceeded = Vec::new();
    for (seed, r) in reports {
        for &(lambda, mu, count, bound) in &r.left_counts {
            if r.productions[mu.index()] == 0 {
                silent += 1;
                if count > r.params.k {
                    exceeded.push(format!("seed {seed}: {count} [{mu},<-] at {lambda} above K={}", r.params.k));
                }
            }
            if count as u128 > bound {
                exceeded.push(format!("seed {seed}: {count} [{mu},<-] at {lambda} above {bound}"));
            }
        }
    }
    let pass = broken.is_empty() && exceeded.is_empty();
    let detail = if broken.is_empty() {
        format!(
            "cycles of length 3..={} end with an invalid entry; {silent} (λ, μ) pairs with silent μ within K{}",
            params.k,
            first_failure(&exceeded)
        )
    } else {
        format!("cycles of lengths {broken:?} left a valid entry")
    };
    Verdict::new(pass, detail)
}

struct Stabilization {
    reports: Vec<(u64, Report)>,
    detected: Vec<(u64, Option<u64>)>,
}

fn stabilization_runs() -> Stabilization {
    let sc = scenario(
        "[params]\nn = 3\nf = 1\nC = 1\nb = 4\n[init]\nmode = \"adversarial\"\n[theta]\nstatic_proposers = [1]\n",
    );
    let mut reports = Vec::new();
    let mut detected = Vec::new();
    for seed in SEEDS {
        let mut stop = |m: &Monitor| m.first_safe_epoch(4).is_some() && m.events() >= ZONE_HORIZON;
        let (mut net, mut monitor) = drive(&sc, seed, STABILIZE_BUDGET, &mut stop);
        if monitor.first_safe_epoch(4).is_none() {
            resume(&mut net, &mut monitor, 2 * STABILIZE_BUDGET, &mut stop);
        }
        detected.push((seed, monitor.first_safe_epoch(4).and_then(|e| e.end)));
        reports.push((seed, monitor.report()));
    }
    Stabilization { reports, detected }
}

fn criterion_4(runs: &Stabilization) -> Verdict {
    let within = runs.detected.iter().filter(|(_, at)| at.is_some_and(|e| e < STABILIZE_BUDGET)).count();
    let doubled = runs.detected.iter().filter(|(_, at)| at.is_some()).count();
    let slowest = runs.detected.iter().filter_map(|(_, at)| *at).max().unwrap_or(0);
    let misses: Vec<u64> = runs.detected.iter().filter(|(_, at)| at.is_none()).map(|(s, _)| *s).collect();
    let min_h = runs
        .reports
        .iter()
        .filter_map(|(_, r)| r.safe_epochs().filter_map(|e| e.safe_h()).min())
        .max()
        .unwrap_or(0);
    Verdict::new(
        within >= 99 || doubled >= 99,
        format!(
            "{within}/100 seeds within {STABILIZE_BUDGET} events ({doubled}/100 with doubled budget), \
             latest detection at event {slowest}, worst per-seed minimal h {min_h}, misses {misses:?}"
        ),
    )
}

fn criterion_5(runs: &Stabilization) -> Verdict {
    let audits: Vec<_> = runs
        .reports
        .iter()
        .flat_map(|(s, r)| r.audits.iter().map(move |a| (*s, a)))
        .filter(|(_, a)| a.precondition && a.zone.is_some())
        .collect();
    let checked: usize = audits.iter().map(|(_, a)| a.checked).sum();
    let bad: Vec<String> = audits
        .iter()
        .flat_map(|(s, a)| a.violations.iter().map(move |v| format!("seed {s} epoch {}: {v}", a.epoch)))
        .collect();
    Verdict::new(
        bad.is_empty() && checked > 0,
        format!("{} zones audited, {checked} untainted decisions checked{}", audits.len(), first_failure(&bad)),
    )
}

/// Steps of one `(μ, label)` increase at every live processor. With
/// `contiguous` they increase by one and cover every step below `top`;
/// otherwise the live set agrees on at least `top` decided characteristics.
fn liveness(monitor: &Monitor, live: &[ProcessorId], top: u32, contiguous: bool) -> Result<(), String> {
    let mut decided: Vec<BTreeSet<&Characteristic>> = Vec::new();
    for &p in live {
        let mut prev: Option<&Characteristic> = None;
        let mut mine = BTreeSet::new();
        for d in monitor.decisions().iter().filter(|d| d.at == p) {
            if let Some(c) = prev {
                let same = (c.mu, &c.label) == (d.char.mu, &d.char.label);
                let gap = if contiguous { d.char.step != c.step + 1 } else { d.char.step <= c.step };
                if same && gap {
                    return Err(format!("{p} decided step {} after {}", d.char.step, c.step));
                }
            }
            prev = Some(&d.char);
            mine.insert(&d.char);
        }
        if contiguous {
            if let Some(missing) = (0..top).find(|&s| !mine.iter().any(|c| c.step == s)) {
                return Err(format!("{p} never decided step {missing}"));
            }
        } else if mine.len() < top as usize {
            return Err(format!("{p} decided only {} steps", mine.len()));
        }
        decided.push(mine);
    }
    match decided.windows(2).position(|w| w[0] != w[1]) {
        Some(i) if !contiguous => Err(format!("{} and {} decided different steps", live[i], live[i + 1])),
        _ => Ok(()),
    }
}

struct LivenessRuns {
    reports: Vec<(u64, Report)>,
    errors: Vec<String>,
    slowest: u64,
}

fn liveness_runs(sc: &Scenario, contiguous: bool) -> LivenessRuns {
    let params = sc.deployment().expect("params");
    let top = params.top();
    let crashed: BTreeSet<u16> = sc.schedule.crashes.iter().map(|c| c.id).collect();
    let live: Vec<ProcessorId> = params.ids().filter(|p| !crashed.contains(&p.0)).collect();
    let mut out = LivenessRuns {
        reports: Vec::new(),
        errors: Vec::new(),
        slowest: 0,
    };
    for seed in SEEDS {
        let mut seen = 0;
        let stop = |m: &Monitor| {
            let count = m.decisions().len();
            let changed = count != seen;
            seen = count;
            changed && liveness(m, &live, top, contiguous).is_ok()
        };
        let (net, monitor) = drive(sc, seed, BASELINE_BUDGET, stop);
        out.slowest = out.slowest.max(net.event_index());
        if let Err(e) = liveness(&monitor, &live, top, contiguous) {
            out.errors.push(format!("seed {seed}: {e} within {} events", net.event_index()));
        }
        out.reports.push((seed, monitor.report()));
    }
    out.errors.extend(failures(&out.reports));
    out
}

fn criterion_6(runs: &LivenessRuns) -> Verdict {
    Verdict::new(
        runs.errors.is_empty(),
        format!(
            "{} clean seeds decided steps 0..16 at every processor, slowest after {} events{}",
            runs.reports.len(),
            runs.slowest,
            first_failure(&runs.errors)
        ),
    )
}

fn criterion_7(variants: &[(&str, &LivenessRuns)]) -> Verdict {
    let errors: Vec<String> = variants
        .iter()
        .flat_map(|(name, r)| r.errors.iter().map(move |e| format!("{name} {e}")))
        .collect();
    let detail: Vec<String> = variants
        .iter()
        .map(|(name, r)| format!("{name}: {} seeds agreed on 16 ordered steps, slowest {} events", r.reports.len(), r.slowest))
        .collect();
    Verdict::new(errors.is_empty(), format!("{}{}", detail.join("; "), first_failure(&errors)))
}

fn criterion_8(reports: &[(u64, Report)]) -> Verdict {
    let over: Vec<String> = reports
        .iter()
        .filter_map(|(s, r)| {
            let bound = r.wait_bound?;
            (r.max_wait_replies > bound).then(|| format!("seed {s}: {} replies, bound {bound}", r.max_wait_replies))
        })
        .collect();
    let worst = reports
        .iter()
        .filter(|(_, r)| r.wait_bound.is_some())
        .map(|(_, r)| (r.max_wait_replies, r.wait_bound.unwrap_or(0)))
        .max()
        .unwrap_or((0, 0));
    let checked = reports.iter().filter(|(_, r)| r.wait_bound.is_some()).count();
    Verdict::new(
        over.is_empty() && checked > 0,
        format!("{checked} runs, worst wait {} replies against n(C+2)={}{}", worst.0, worst.1, first_failure(&over)),
    )
}

fn criterion_9() -> Verdict {
    let variants = [
        ("n=3 C=1", "[params]\nn = 3\nf = 1\nC = 1\nb = 4\n"),
        ("n=5 C=2", "[params]\nn = 5\nf = 2\nC = 2\nb = 5\n"),
    ];
    let mut errors = Vec::new();
    let mut latest = 0;
    let mut runs = 0;
    for (name, params) in variants {
        let sc = scenario(&format!(
            "{params}[init]\nmode = \"adversarial\"\n[schedule]\nfairness = [\"quorum\", \"heartbeat\"]\n\
             [theta]\nmode = \"detector\"\n[run]\nmax_events = 3000\n"
        ));
        for seed in SEEDS {
            let (_, monitor) = drive(&sc, seed, sc.run.max_events, |_| false);
            runs += 1;
            match monitor.detector_stable_at() {
                None => errors.push(format!("{name} seed {seed}: heartbeats never reached every pair twice")),
                Some(at) => latest = latest.max(at),
            }
            if monitor.detector_violations() > 0 {
                errors.push(format!(
                    "{name} seed {seed}: {} configurations with a suspected live processor or wrong leader",
                    monitor.detector_violations()
                ));
            }
        }
    }
    Verdict::new(
        errors.is_empty(),
        format!("{runs} runs from arbitrary detector state, latest stabilization at event {latest}{}", first_failure(&errors)),
    )
}

fn criterion_10() -> (Verdict, Vec<(u64, Report)>) {
    let sc = scenario(
        "[params]\nn = 3\nf = 1\nC = 2\nb = 4\n[init]\nmode = \"adversarial\"\n[run]\nmode = \"generalized\"\n",
    );
    let reports: Vec<(u64, Report)> = SEEDS
        .map(|seed| (seed, drive(&sc, seed, ZONE_HORIZON, |_| false).1.report()))
        .collect();
    let audits: Vec<_> = reports
        .iter()
        .flat_map(|(_, r)| &r.audits)
        .filter(|a| a.precondition && a.zone.is_some())
        .collect();
    let checked: usize = audits.iter().map(|a| a.checked).sum();
    let bad = failures(&reports);
    let verdict = Verdict::new(
        bad.is_empty() && checked > 0,
        format!("{} zones audited, {checked} untainted histories checked{}", audits.len(), first_failure(&bad)),
    );
    (verdict, reports)
}

fn criterion_11() -> Verdict {
    let scenarios = [
        ("adversarial", "[init]\nmode = \"adversarial\"\n[run]\nmax_events = 1000\n"),
        (
            "detector",
            "[params]\nn = 5\nf = 2\nC = 2\nb = 5\n[init]\nmode = \"adversarial\"\n\
             [schedule]\nfairness = [\"quorum\", \"heartbeat\"]\ncrashes = [{ at = 200, id = 1 }]\n\
             [theta]\nmode = \"detector\"\n[run]\nmax_events = 1000\n",
        ),
    ];
    let mut errors = Vec::new();
    let mut runs = 0;
    for (name, text) in scenarios {
        let sc = scenario(text);
        for seed in SEEDS {
            let trace = |monitored| {
                let mut t = Sink::Memory(Vec::new());
                let mut notes = Sink::Discard;
                run_seed(&sc, name, seed, monitored, &mut t, &mut notes).expect("run");
                t
            };
            let (a, b, c) = (trace(true), trace(true), trace(false));
            runs += 1;
            if a.lines() != b.lines() {
                errors.push(format!("{name} seed {seed}: repeated runs differ"));
            }
            if a.lines() != c.lines() {
                errors.push(format!("{name} seed {seed}: monitoring changed the trace"));
            }
        }
    }
    Verdict::new(
        errors.is_empty(),
        format!("{runs} seed/scenario pairs, each run twice monitored and once unmonitored{}", first_failure(&errors)),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut verdicts: BTreeMap<u32, (&str, Verdict)> = BTreeMap::new();
    verdicts.insert(1, ("labeling axioms", criterion_1()));

    let stabilization = stabilization_runs();
    let baseline = liveness_runs(&scenario("[params]\nn = 3\nf = 1\nC = 1\nb = 4\n"), true);
    let static_crash = liveness_runs(&scenario(
        "[params]\nn = 5\nf = 2\nC = 1\nb = 4\n[schedule]\ncrashes = [{ at = 40, id = 4 }, { at = 80, id = 5 }]\n",
    ), false);
    let detector_crash = liveness_runs(&scenario(
        "[params]\nn = 3\nf = 1\nC = 1\nb = 4\n[schedule]\nfairness = [\"quorum\", \"heartbeat\"]\n\
         crashes = [{ at = 50, id = 1 }]\n[theta]\nmode = \"detector\"\n",
    ), false);
    let (generalized, generalized_reports) = criterion_10();

    let all: Vec<(u64, Report)> = stabilization
        .reports
        .iter()
        .chain(&baseline.reports)
        .chain(&static_crash.reports)
        .chain(&detector_crash.reports)
        .chain(&generalized_reports)
        .cloned()
        .collect();

    verdicts.insert(2, ("storage bounds", criterion_2(&all)));
    verdicts.insert(3, ("label cycles and interrupt bound", criterion_3(&all)));
    verdicts.insert(4, ("stabilization", criterion_4(&stabilization)));
    verdicts.insert(5, ("post-stabilization safety", criterion_5(&stabilization)));
    verdicts.insert(6, ("fault-free baseline", criterion_6(&baseline)));
    verdicts.insert(
        7,
        (
            "crash resilience",
            criterion_7(&[("static n=5 f=2", &static_crash), ("detector n=3 f=1", &detector_crash)]),
        ),
    );
    verdicts.insert(8, ("proposer termination", criterion_8(&all)));
    verdicts.insert(9, ("failure detector", criterion_9()));
    verdicts.insert(10, ("generalized consistency", generalized));
    verdicts.insert(11, ("determinism and non-invasiveness", criterion_11()));

    let mut ok = true;
    for (n, (name, v)) in &verdicts {
        ok &= v.pass;
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {n}: {status} {name}: {}", v.detail);
    }
    println!("acceptance finished in {:.1}s", started.elapsed().as_secs_f64());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

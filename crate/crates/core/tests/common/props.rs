//! Property bodies shared by the proptest suite and the acceptance harness.

use flowseal::analysis::{analyze, AnalysisOptions};
use flowseal::lineage::{chase, compatible, injective_fd, FdSet, InjectiveFd, DEFAULT_CHASE_LIMIT};
use flowseal::model::{collapse_cycles, AttrSet, Gate, LogicalDataflow, StreamLabel, StreamSpec};
use flowseal::sim::{execute, instantiate, sample_schedules, CoordinationMode};
use proptest::prelude::*;
use proptest::sample::Index;

use super::{escalations, expected_severity, sink_severities};

pub type Outcome = Result<(), TestCaseError>;

pub fn severity_is_total(a: StreamLabel, b: StreamLabel) -> Outcome {
    prop_assert_eq!(a.severity(), expected_severity(&a));
    let ordered = [a.severity() < b.severity(), a.severity() == b.severity(), a.severity() > b.severity()];
    prop_assert_eq!(ordered.iter().filter(|x| **x).count(), 1);
    Ok(())
}

pub fn max_severity_ignores_order(mut labels: Vec<StreamLabel>, seed: u64) -> Outcome {
    let first = StreamLabel::max_severity(&labels).cloned();
    let top = labels.iter().map(StreamLabel::severity).max();
    prop_assert_eq!(first.as_ref().map(StreamLabel::severity), top);
    let k = (seed as usize) % labels.len();
    labels.rotate_left(k);
    labels.reverse();
    prop_assert_eq!(StreamLabel::max_severity(&labels).cloned(), first);
    Ok(())
}

pub fn collapse_is_idempotent(df: LogicalDataflow) -> Outcome {
    let once = collapse_cycles(&df);
    prop_assert_eq!(collapse_cycles(&once), once.clone());
    prop_assert!(analyze(&once, &FdSet::new()).is_ok());
    Ok(())
}

pub fn injective_fd_is_reflexive(fds: FdSet, x: AttrSet) -> Outcome {
    prop_assert!(injective_fd(&fds, &x, &x));
    Ok(())
}

pub fn injective_fd_is_transitive(fds: FdSet, a: AttrSet) -> Outcome {
    let reach = chase(&fds, &a, DEFAULT_CHASE_LIMIT);
    for b in &reach {
        for c in chase(&fds, b, DEFAULT_CHASE_LIMIT) {
            prop_assert!(injective_fd(&fds, &a, &c), "{:?} -> {:?} -> {:?}", a, b, c);
        }
    }
    Ok(())
}

pub fn injective_fd_is_monotone(fds: FdSet, extra: (AttrSet, AttrSet), a: AttrSet, b: AttrSet) -> Outcome {
    let bigger = fds.clone().with(InjectiveFd::declared(extra.0, extra.1));
    if injective_fd(&fds, &a, &b) {
        prop_assert!(injective_fd(&bigger, &a, &b));
    }
    Ok(())
}

pub fn compatible_agrees_with_subsets(fds: FdSet, p: AttrSet, seal: AttrSet) -> Outcome {
    // Oracle: try every nonempty subset of the partition.
    let items: Vec<&String> = p.iter().collect();
    let oracle = (1u32..(1 << items.len())).any(|mask| {
        let sub: AttrSet = items.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, a)| (*a).clone()).collect();
        injective_fd(&fds, &seal, &sub)
    });
    prop_assert_eq!(compatible(&Gate::Keys(p), &seal, &fds), oracle);
    Ok(())
}

pub fn compatible_is_monotone(fds: FdSet, p: AttrSet, x: AttrSet, seal: AttrSet) -> Outcome {
    let wider: AttrSet = p.union(&x).cloned().collect();
    if compatible(&Gate::Keys(p), &seal, &fds) {
        prop_assert!(compatible(&Gate::Keys(wider), &seal, &fds));
    }
    prop_assert!(!compatible(&Gate::Wildcard, &seal, &fds));
    Ok(())
}

pub fn escalation_is_monotone(df: LogicalDataflow, pick: Index, step: Index) -> Outcome {
    let fds = FdSet::new();
    let sources: Vec<&StreamSpec> = df.sources().collect();
    prop_assume!(!sources.is_empty());
    let s = sources[pick.index(sources.len())];
    let base = s.seal.clone().map_or(StreamLabel::Async, StreamLabel::Seal);
    let ups = escalations(&base);
    prop_assume!(!ups.is_empty());
    let before = sink_severities(&df, &fds, &AnalysisOptions::default());
    let mut opts = AnalysisOptions::default();
    opts.source_labels.insert(s.name.clone(), ups[step.index(ups.len())].clone());
    let after = sink_severities(&df, &fds, &opts);
    for (sink, sev) in &before {
        prop_assert!(after.get(sink).is_some_and(|a| a >= sev), "{}: {} -> {:?}", sink, sev, after.get(sink));
    }
    Ok(())
}

pub fn schedules_replay(seed: u64) -> Outcome {
    let (df, fx) = flowseal::fixtures::poor_race(CoordinationMode::None);
    let inst = instantiate(&df, &fx.topology, None).unwrap();
    let a = sample_schedules(&inst, 5, seed).unwrap();
    prop_assert_eq!(&a, &sample_schedules(&inst, 5, seed).unwrap());
    for s in &a {
        prop_assert_eq!(execute(&inst, s).unwrap(), execute(&inst, s).unwrap());
    }
    Ok(())
}

pub fn confluent_stays_async(df: LogicalDataflow) -> Outcome {
    let report = analyze(&df, &FdSet::new()).unwrap();
    for (stream, l) in &report.stream_labels {
        prop_assert!(l.severity() <= StreamLabel::Async.severity(), "{}: {}", stream, l);
    }
    Ok(())
}

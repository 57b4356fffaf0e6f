//! Generators shared by the property suites.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use flowseal::analysis::{analyze_with, AnalysisOptions};
use flowseal::lineage::{FdSet, InjectiveFd};
use flowseal::model::{AttrSet, ComponentSpec, Endpoint, Gate, LogicalDataflow, PathAnnotation, PathKind, StreamLabel, StreamSpec};
use proptest::prelude::*;

pub mod props;

pub const ATTRS: [&str; 4] = ["a", "b", "c", "d"];

pub fn attr_set() -> impl Strategy<Value = AttrSet> {
    prop::sample::subsequence(ATTRS.to_vec(), 0..=ATTRS.len())
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

pub fn nonempty_attr_set() -> impl Strategy<Value = AttrSet> {
    prop::sample::subsequence(ATTRS.to_vec(), 1..=ATTRS.len())
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

pub fn fd_set() -> impl Strategy<Value = FdSet> {
    prop::collection::vec((nonempty_attr_set(), nonempty_attr_set()), 0..4)
        .prop_map(|v| v.into_iter().map(|(d, e)| InjectiveFd::declared(d, e)).collect())
}

pub fn label() -> impl Strategy<Value = StreamLabel> {
    prop_oneof![
        nonempty_attr_set().prop_map(|a| StreamLabel::NDRead(Gate::Keys(a))),
        Just(StreamLabel::NDRead(Gate::Wildcard)),
        Just(StreamLabel::Taint),
        nonempty_attr_set().prop_map(StreamLabel::Seal),
        Just(StreamLabel::Async),
        Just(StreamLabel::Run),
        Just(StreamLabel::Inst),
        Just(StreamLabel::Diverge),
    ]
}

pub fn gate() -> impl Strategy<Value = Gate> {
    prop_oneof![4 => nonempty_attr_set().prop_map(Gate::Keys), 1 => Just(Gate::Wildcard)]
}

pub fn annotation(from: String, to: String, confluent_only: bool) -> BoxedStrategy<PathAnnotation> {
    let kinds = if confluent_only { vec![PathKind::CR, PathKind::CW] } else { vec![PathKind::CR, PathKind::CW, PathKind::OR, PathKind::OW] };
    (prop::sample::select(kinds), gate())
        .prop_map(move |(kind, g)| PathAnnotation {
            from: from.clone(),
            to: to.clone(),
            kind,
            gate: (!kind.is_confluent()).then_some(g),
        })
        .boxed()
}

#[derive(Clone, Debug)]
pub struct Shape {
    pub n: usize,
    /// Per component: (input port index, output port index) pairs.
    pub paths: Vec<Vec<(usize, usize)>>,
    pub rep: Vec<bool>,
    /// Per component input port: `None` for a source, otherwise the
    /// (component, output port) feeding it.
    pub wiring: Vec<Vec<Option<(usize, usize)>>>,
    pub seals: Vec<Option<AttrSet>>,
}

/// Random graphs of up to five components with two ports on each side.
/// `acyclic` only wires earlier components into later ones.
pub fn dataflow(acyclic: bool, confluent_only: bool) -> impl Strategy<Value = LogicalDataflow> {
    (1usize..=5)
        .prop_flat_map(move |n| {
            let paths = prop::collection::vec(
                prop::collection::btree_set((0usize..2, 0usize..2), 1..=4).prop_map(|s| s.into_iter().collect::<Vec<_>>()),
                n,
            );
            let rep = prop::collection::vec(any::<bool>(), n);
            let wiring = (0..n)
                .map(|i| {
                    let upstream = if acyclic { i } else { n };
                    let choice = if upstream == 0 {
                        Just(None).boxed()
                    } else {
                        prop_oneof![1 => Just(None), 2 => (0..upstream, 0usize..2).prop_map(Some)].boxed()
                    };
                    prop::collection::vec(choice, 2)
                })
                .collect::<Vec<_>>();
            let seals = prop::collection::vec(prop::option::of(nonempty_attr_set()), 2 * n);
            (Just(n), paths, rep, wiring, seals)
        })
        .prop_map(|(n, paths, rep, wiring, seals)| Shape { n, paths, rep, wiring, seals })
        .prop_flat_map(move |shape| {
            let anns: Vec<BoxedStrategy<PathAnnotation>> = shape
                .paths
                .iter()
                .flat_map(|ps| ps.iter().map(|(i, o)| annotation(format!("i{i}"), format!("o{o}"), confluent_only)))
                .collect();
            (Just(shape), anns)
        })
        .prop_map(|(shape, anns)| build(&shape, anns))
}

pub fn build(shape: &Shape, anns: Vec<PathAnnotation>) -> LogicalDataflow {
    let mut anns = anns.into_iter();
    let mut df = LogicalDataflow::new();
    for c in 0..shape.n {
        let paths: Vec<PathAnnotation> = shape.paths[c].iter().map(|_| anns.next().unwrap()).collect();
        let mut spec = ComponentSpec::new(&format!("C{c}"), paths);
        spec.rep = shape.rep[c];
        df = df.with_component(spec);
    }
    let mut fed: BTreeSet<(usize, usize)> = BTreeSet::new();
    for c in 0..shape.n {
        let inputs: BTreeSet<usize> = shape.paths[c].iter().map(|(i, _)| *i).collect();
        for i in inputs {
            let to = Endpoint::new(&format!("C{c}"), &format!("i{i}"));
            match shape.wiring[c][i] {
                Some((u, o)) if shape.paths[u].iter().any(|(_, out)| *out == o) => {
                    fed.insert((u, o));
                    df = df.with_stream(StreamSpec::edge(
                        &format!("s{u}_{o}_{c}_{i}"),
                        Endpoint::new(&format!("C{u}"), &format!("o{o}")),
                        to,
                    ));
                }
                _ => {
                    let mut s = StreamSpec::source(&format!("src{c}_{i}"), to);
                    s.seal = shape.seals[2 * c + i].clone();
                    df = df.with_stream(s);
                }
            }
        }
    }
    for c in 0..shape.n {
        let outputs: BTreeSet<usize> = shape.paths[c].iter().map(|(_, o)| *o).collect();
        for o in outputs.into_iter().filter(|o| !fed.contains(&(c, *o))) {
            df = df.with_stream(StreamSpec::sink(&format!("out{c}_{o}"), Endpoint::new(&format!("C{c}"), &format!("o{o}"))));
        }
    }
    df
}

/// Severity table, written out independently of the implementation.
pub fn expected_severity(l: &StreamLabel) -> u8 {
    match l.name() {
        "NDRead" | "Taint" => 0,
        "Seal" => 1,
        "Async" => 2,
        "Run" => 3,
        "Inst" => 4,
        "Diverge" => 5,
        other => panic!("unexpected label {other}"),
    }
}

pub fn escalations(l: &StreamLabel) -> Vec<StreamLabel> {
    [StreamLabel::Async, StreamLabel::Run, StreamLabel::Inst, StreamLabel::Diverge]
        .into_iter()
        .filter(|x| x.severity() > l.severity())
        .collect()
}

pub fn sink_severities(df: &LogicalDataflow, fds: &FdSet, opts: &AnalysisOptions) -> BTreeMap<String, u8> {
    let report = analyze_with(df, fds, opts).unwrap();
    report.sinks.iter().filter_map(|s| report.label(s).map(|l| (s.clone(), l.severity()))).collect()
}


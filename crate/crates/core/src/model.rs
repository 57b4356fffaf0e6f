//! Annotated logical dataflows.
//!
//! A [`LogicalDataflow`] is a set of components joined by streams. Each
//! component declares C.O.W.R. path annotations from its input interfaces to
//! its output interfaces; streams may carry a seal key and a schema. This
//! module also owns the label lattice, validation, cycle collapsing and
//! source-to-sink path enumeration.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::lineage::FdSet;

pub type Attribute = String;
pub type AttrSet = BTreeSet<Attribute>;

/// Build an attribute set from string slices.
pub fn attrs<I, S>(names: I) -> AttrSet
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    names.into_iter().map(Into::into).collect()
}

pub(crate) fn fmt_attrs(set: &AttrSet) -> String {
    set.iter().map(String::as_str).collect::<Vec<_>>().join(",")
}

/// Partition subscript of an order-sensitive path.
///
/// `Wildcard` sorts before every key set so that tie-breaking by "first gate"
/// prefers it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    /// Each record is its own partition.
    Wildcard,
    Keys(AttrSet),
}

impl Gate {
    pub fn keys<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Gate::Keys(attrs(names))
    }

    pub fn attributes(&self) -> Option<&AttrSet> {
        match self {
            Gate::Wildcard => None,
            Gate::Keys(set) => Some(set),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Wildcard => f.write_str("*"),
            Gate::Keys(set) => write!(f, "{}", fmt_attrs(set)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PathKind {
    CR,
    CW,
    OR,
    OW,
}

impl PathKind {
    /// Annotation severity: CR=1 < CW=2 < OR=3 < OW=4.
    pub fn severity(self) -> u8 {
        match self {
            PathKind::CR => 1,
            PathKind::CW => 2,
            PathKind::OR => 3,
            PathKind::OW => 4,
        }
    }

    pub fn is_confluent(self) -> bool {
        matches!(self, PathKind::CR | PathKind::CW)
    }

    pub fn is_write(self) -> bool {
        matches!(self, PathKind::CW | PathKind::OW)
    }

    pub fn needs_gate(self) -> bool {
        !self.is_confluent()
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PathKind::CR => "CR",
            PathKind::CW => "CW",
            PathKind::OR => "OR",
            PathKind::OW => "OW",
        };
        f.write_str(s)
    }
}

/// A C.O.W.R. annotation on one input-to-output path through a component.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathAnnotation {
    pub from: String,
    pub to: String,
    pub kind: PathKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<Gate>,
}

impl PathAnnotation {
    pub fn confluent(from: &str, to: &str, kind: PathKind) -> Self {
        debug_assert!(kind.is_confluent());
        PathAnnotation { from: from.into(), to: to.into(), kind, gate: None }
    }

    pub fn ordered(from: &str, to: &str, kind: PathKind, gate: Gate) -> Self {
        debug_assert!(!kind.is_confluent());
        PathAnnotation { from: from.into(), to: to.into(), kind, gate: Some(gate) }
    }

    /// The gate used for analysis. A missing gate on an order-sensitive path
    /// is a validation error; analysis reads it as a wildcard.
    pub fn effective_gate(&self) -> Gate {
        self.gate.clone().unwrap_or(Gate::Wildcard)
    }

    /// Total order used when collapsing cycles: higher kind severity wins,
    /// ties go to the lexicographically first gate.
    fn collapse_rank(&self, other: &Self) -> Ordering {
        self.kind
            .severity()
            .cmp(&other.kind.severity())
            .then_with(|| other.gate.cmp(&self.gate))
    }

    pub fn label(&self) -> String {
        match &self.gate {
            Some(g) => format!("{}{{{}}}", self.kind, g),
            None => self.kind.to_string(),
        }
    }
}

impl fmt::Display for PathAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{} {}", self.from, self.to, self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    pub paths: Vec<PathAnnotation>,
    #[serde(default)]
    pub rep: bool,
}

impl ComponentSpec {
    pub fn new(name: &str, paths: Vec<PathAnnotation>) -> Self {
        ComponentSpec { name: name.into(), paths, rep: false }
    }

    pub fn replicated(mut self) -> Self {
        self.rep = true;
        self
    }

    pub fn inputs(&self) -> BTreeSet<&str> {
        self.paths.iter().map(|p| p.from.as_str()).collect()
    }

    pub fn outputs(&self) -> BTreeSet<&str> {
        self.paths.iter().map(|p| p.to.as_str()).collect()
    }

    pub fn is_confluent(&self) -> bool {
        self.paths.iter().all(|p| p.kind.is_confluent())
    }
}

/// One end of a stream: a port on a named component.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub component: String,
    pub port: String,
}

impl Endpoint {
    pub fn new(component: &str, port: &str) -> Self {
        Endpoint { component: component.into(), port: port.into() }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.port)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interface {
    pub component: String,
    pub port: String,
    pub direction: Direction,
}

impl Interface {
    pub fn input(component: &str, port: &str) -> Self {
        Interface { component: component.into(), port: port.into(), direction: Direction::Input }
    }

    pub fn output(component: &str, port: &str) -> Self {
        Interface { component: component.into(), port: port.into(), direction: Direction::Output }
    }
}

impl fmt::Display for Interface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arrow = match self.direction {
            Direction::Input => "in",
            Direction::Output => "out",
        };
        write!(f, "{}.{}[{}]", self.component, self.port, arrow)
    }
}

/// A logical stream. `producer == None` marks an external source and
/// `consumer == None` a sink.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub producer: Option<Endpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consumer: Option<Endpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seal: Option<AttrSet>,
    /// `None` leaves the schema open: every attribute passes by identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<AttrSet>,
    #[serde(default)]
    pub rep: bool,
}

impl StreamSpec {
    pub fn new(name: &str, producer: Option<Endpoint>, consumer: Option<Endpoint>) -> Self {
        StreamSpec { name: name.into(), producer, consumer, seal: None, schema: None, rep: false }
    }

    pub fn source(name: &str, consumer: Endpoint) -> Self {
        Self::new(name, None, Some(consumer))
    }

    pub fn sink(name: &str, producer: Endpoint) -> Self {
        Self::new(name, Some(producer), None)
    }

    pub fn edge(name: &str, producer: Endpoint, consumer: Endpoint) -> Self {
        Self::new(name, Some(producer), Some(consumer))
    }

    pub fn sealed<I, S>(mut self, key: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.seal = Some(attrs(key));
        self
    }

    pub fn with_schema<I, S>(mut self, schema: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.schema = Some(attrs(schema));
        self
    }

    pub fn is_source(&self) -> bool {
        self.producer.is_none()
    }

    pub fn is_sink(&self) -> bool {
        self.consumer.is_none()
    }
}

/// Stream labels ordered by severity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "label", content = "attrs")]
pub enum StreamLabel {
    NDRead(Gate),
    Taint,
    Seal(AttrSet),
    Async,
    Run,
    Inst,
    Diverge,
}

impl StreamLabel {
    pub fn seal<I, S>(key: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        StreamLabel::Seal(attrs(key))
    }

    pub fn severity(&self) -> u8 {
        match self {
            StreamLabel::NDRead(_) | StreamLabel::Taint => 0,
            StreamLabel::Seal(_) => 1,
            StreamLabel::Async => 2,
            StreamLabel::Run => 3,
            StreamLabel::Inst => 4,
            StreamLabel::Diverge => 5,
        }
    }

    /// NDRead and Taint never appear in a final report.
    pub fn is_internal(&self) -> bool {
        matches!(self, StreamLabel::NDRead(_) | StreamLabel::Taint)
    }

    /// True for labels that signal an anomaly (Run and above).
    pub fn is_anomalous(&self) -> bool {
        self.severity() > StreamLabel::Async.severity()
    }

    pub fn name(&self) -> &'static str {
        match self {
            StreamLabel::NDRead(_) => "NDRead",
            StreamLabel::Taint => "Taint",
            StreamLabel::Seal(_) => "Seal",
            StreamLabel::Async => "Async",
            StreamLabel::Run => "Run",
            StreamLabel::Inst => "Inst",
            StreamLabel::Diverge => "Diverge",
        }
    }

    /// The most severe label of a collection; ties resolve to the smallest
    /// label in derived order so the choice is deterministic.
    pub fn max_severity<'a, I>(labels: I) -> Option<&'a StreamLabel>
    where
        I: IntoIterator<Item = &'a StreamLabel>,
    {
        labels
            .into_iter()
            .max_by(|a, b| a.severity().cmp(&b.severity()).then_with(|| b.cmp(a)))
    }
}

impl fmt::Display for StreamLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamLabel::NDRead(g) => write!(f, "NDRead{{{g}}}"),
            StreamLabel::Seal(k) => write!(f, "Seal{{{}}}", fmt_attrs(k)),
            other => f.write_str(other.name()),
        }
    }
}

/// The analysis subject.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalDataflow {
    pub components: BTreeMap<String, ComponentSpec>,
    pub streams: Vec<StreamSpec>,
}

impl LogicalDataflow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_component(mut self, component: ComponentSpec) -> Self {
        self.components.insert(component.name.clone(), component);
        self
    }

    pub fn with_stream(mut self, stream: StreamSpec) -> Self {
        self.streams.push(stream);
        self
    }

    pub fn stream(&self, name: &str) -> Option<&StreamSpec> {
        self.streams.iter().find(|s| s.name == name)
    }

    pub fn stream_mut(&mut self, name: &str) -> Option<&mut StreamSpec> {
        self.streams.iter_mut().find(|s| s.name == name)
    }

    pub fn sources(&self) -> impl Iterator<Item = &StreamSpec> {
        self.streams.iter().filter(|s| s.is_source())
    }

    pub fn sinks(&self) -> impl Iterator<Item = &StreamSpec> {
        self.streams.iter().filter(|s| s.is_sink())
    }

    /// Streams entering `component.port`.
    pub fn streams_into<'a>(&'a self, component: &'a str, port: &'a str) -> impl Iterator<Item = &'a StreamSpec> {
        self.streams.iter().filter(move |s| {
            s.consumer.as_ref().is_some_and(|c| c.component == component && c.port == port)
        })
    }

    /// Streams leaving `component.port`.
    pub fn streams_from<'a>(&'a self, component: &'a str, port: &'a str) -> impl Iterator<Item = &'a StreamSpec> {
        self.streams.iter().filter(move |s| {
            s.producer.as_ref().is_some_and(|p| p.component == component && p.port == port)
        })
    }

    /// A component is treated as replicated when it carries the Rep flag or
    /// any of its input streams does.
    pub fn effective_rep(&self, component: &str) -> bool {
        self.components.get(component).is_some_and(|c| c.rep)
            || self
                .streams
                .iter()
                .any(|s| s.rep && s.consumer.as_ref().is_some_and(|c| c.component == component))
    }

    /// Output interfaces with no outgoing stream.
    pub fn unconnected_outputs(&self) -> Vec<Endpoint> {
        let mut out = Vec::new();
        for c in self.components.values() {
            for port in c.outputs() {
                if self.streams_from(&c.name, port).next().is_none() {
                    out.push(Endpoint::new(&c.name, port));
                }
            }
        }
        out
    }
}

/// Graph over interfaces: stream edges join an output to an input, path
/// edges join an input to an output of the same component.
pub(crate) struct InterfaceGraph {
    pub graph: DiGraph<Interface, ()>,
}

impl InterfaceGraph {
    pub fn build(df: &LogicalDataflow) -> Self {
        let mut graph = DiGraph::new();
        let mut index = BTreeMap::new();
        let mut node = |graph: &mut DiGraph<Interface, ()>, iface: Interface| {
            *index.entry(iface.clone()).or_insert_with(|| graph.add_node(iface))
        };
        for c in df.components.values() {
            for p in &c.paths {
                let a = node(&mut graph, Interface::input(&c.name, &p.from));
                let b = node(&mut graph, Interface::output(&c.name, &p.to));
                graph.update_edge(a, b, ());
            }
        }
        for s in &df.streams {
            if let (Some(p), Some(c)) = (&s.producer, &s.consumer) {
                let a = node(&mut graph, Interface::output(&p.component, &p.port));
                let b = node(&mut graph, Interface::input(&c.component, &c.port));
                graph.update_edge(a, b, ());
            }
        }
        InterfaceGraph { graph }
    }

    /// Deterministic topological order (Kahn's algorithm with an ordered
    /// ready set). Returns `None` if the graph has a cycle.
    pub fn topo_order(&self) -> Option<Vec<Interface>> {
        let g = &self.graph;
        let mut indegree: BTreeMap<NodeIndex, usize> =
            g.node_indices().map(|n| (n, g.neighbors_directed(n, petgraph::Incoming).count())).collect();
        let mut ready: BTreeSet<(Interface, NodeIndex)> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| (g[*n].clone(), *n))
            .collect();
        let mut order = Vec::with_capacity(g.node_count());
        while let Some(first) = ready.iter().next().cloned() {
            ready.remove(&first);
            let (iface, n) = first;
            order.push(iface);
            for m in g.neighbors_directed(n, petgraph::Outgoing) {
                let d = indegree.get_mut(&m).expect("node indexed");
                *d -= 1;
                if *d == 0 {
                    ready.insert((g[m].clone(), m));
                }
            }
        }
        (order.len() == g.node_count()).then_some(order)
    }
}

/// A broken invariant found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoComponents,
    EmptyAttribute { location: String },
    MissingGate { component: String, path: String },
    GateOnConfluentPath { component: String, path: String },
    UnknownGateAttribute { component: String, path: String, attribute: String },
    SealNotInSchema { stream: String, attribute: String },
    DuplicateStream { stream: String },
    UnknownComponent { stream: String, component: String },
    UnknownPort { stream: String, endpoint: String },
    IsolatedStream { stream: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoComponents => write!(f, "no components"),
            Violation::EmptyAttribute { location } => write!(f, "empty attribute name in {location}"),
            Violation::MissingGate { component, path } => {
                write!(f, "{component}: order-sensitive path {path} has no subscript")
            }
            Violation::GateOnConfluentPath { component, path } => {
                write!(f, "{component}: confluent path {path} carries a subscript")
            }
            Violation::UnknownGateAttribute { component, path, attribute } => write!(
                f,
                "{component}: subscript attribute `{attribute}` of {path} is not in any input schema or FD"
            ),
            Violation::SealNotInSchema { stream, attribute } => {
                write!(f, "stream {stream}: seal attribute `{attribute}` is not in its schema")
            }
            Violation::DuplicateStream { stream } => write!(f, "stream {stream} is declared twice"),
            Violation::UnknownComponent { stream, component } => {
                write!(f, "stream {stream} references unknown component {component}")
            }
            Violation::UnknownPort { stream, endpoint } => {
                write!(f, "stream {stream} references unannotated port {endpoint}")
            }
            Violation::IsolatedStream { stream } => {
                write!(f, "stream {stream} has neither producer nor consumer")
            }
        }
    }
}

/// Check the dataflow's structural invariants. An empty result means the
/// dataflow is well-formed.
pub fn validate(df: &LogicalDataflow, fds: &FdSet) -> Vec<Violation> {
    let mut out = Vec::new();
    if df.components.is_empty() {
        out.push(Violation::NoComponents);
    }

    let fd_attrs = fds.mentioned_attributes();
    for c in df.components.values() {
        for p in &c.paths {
            match (&p.gate, p.kind.needs_gate()) {
                (None, true) => out.push(Violation::MissingGate { component: c.name.clone(), path: p.to_string() }),
                (Some(_), false) => {
                    out.push(Violation::GateOnConfluentPath { component: c.name.clone(), path: p.to_string() })
                }
                _ => {}
            }
            if let Some(Gate::Keys(keys)) = &p.gate {
                let schemas: Vec<&AttrSet> =
                    df.streams_into(&c.name, &p.from).filter_map(|s| s.schema.as_ref()).collect();
                for k in keys {
                    if k.is_empty() {
                        out.push(Violation::EmptyAttribute { location: format!("{}: {}", c.name, p) });
                        continue;
                    }
                    let in_schema = schemas.is_empty() || schemas.iter().any(|s| s.contains(k));
                    if !in_schema && !fd_attrs.contains(k.as_str()) {
                        out.push(Violation::UnknownGateAttribute {
                            component: c.name.clone(),
                            path: p.to_string(),
                            attribute: k.clone(),
                        });
                    }
                }
            }
        }
    }

    let mut seen = BTreeSet::new();
    for s in &df.streams {
        if !seen.insert(s.name.as_str()) {
            out.push(Violation::DuplicateStream { stream: s.name.clone() });
        }
        if s.producer.is_none() && s.consumer.is_none() {
            out.push(Violation::IsolatedStream { stream: s.name.clone() });
        }
        for attr in s.schema.iter().flatten().chain(s.seal.iter().flatten()) {
            if attr.is_empty() {
                out.push(Violation::EmptyAttribute { location: format!("stream {}", s.name) });
            }
        }
        if let (Some(seal), Some(schema)) = (&s.seal, &s.schema) {
            for k in seal.difference(schema) {
                out.push(Violation::SealNotInSchema { stream: s.name.clone(), attribute: k.clone() });
            }
        }
        let ends = [(s.producer.as_ref(), Direction::Output), (s.consumer.as_ref(), Direction::Input)];
        for (end, dir) in ends {
            let Some(end) = end else { continue };
            match df.components.get(&end.component) {
                None => out.push(Violation::UnknownComponent {
                    stream: s.name.clone(),
                    component: end.component.clone(),
                }),
                Some(c) => {
                    let ports = match dir {
                        Direction::Input => c.inputs(),
                        Direction::Output => c.outputs(),
                    };
                    if !ports.contains(end.port.as_str()) {
                        out.push(Violation::UnknownPort { stream: s.name.clone(), endpoint: end.to_string() });
                    }
                }
            }
        }
    }
    out
}

/// Record of one collapsed cycle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapsedGroup {
    pub node: String,
    pub members: Vec<String>,
    pub removed_streams: Vec<String>,
}

/// Replace every cycle of the interface graph by a single component.
///
/// Cycles are detected over interfaces, so two components that feed each
/// other through unrelated ports do not form a cycle. Components sharing a
/// strongly connected interface set are merged into one node; streams
/// internal to the group are dropped. For every external (input, output)
/// pair the new node carries the most severe member annotation lying on some
/// route between them.
pub fn collapse_cycles(df: &LogicalDataflow) -> LogicalDataflow {
    collapse_cycles_with_groups(df).0
}

pub fn collapse_cycles_with_groups(df: &LogicalDataflow) -> (LogicalDataflow, Vec<CollapsedGroup>) {
    let ig = InterfaceGraph::build(df);
    let mut groups = UnionFind::new(df.components.keys().cloned());
    let mut cyclic: BTreeSet<String> = BTreeSet::new();
    for scc in tarjan_scc(&ig.graph) {
        if scc.len() < 2 {
            continue;
        }
        let members: BTreeSet<&str> = scc.iter().map(|n| ig.graph[*n].component.as_str()).collect();
        let mut it = members.iter();
        let first = it.next().expect("nonempty scc");
        cyclic.insert(first.to_string());
        for m in it {
            groups.union(first, m);
            cyclic.insert(m.to_string());
        }
    }
    if cyclic.is_empty() {
        return (df.clone(), Vec::new());
    }

    let mut by_root: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for name in &cyclic {
        by_root.entry(groups.find(name)).or_default().insert(name.clone());
    }

    let mut out = LogicalDataflow::new();
    let mut rename: BTreeMap<Endpoint, Endpoint> = BTreeMap::new();
    let mut internal: BTreeSet<String> = BTreeSet::new();
    let mut notes = Vec::new();
    let mut grouped: BTreeSet<String> = BTreeSet::new();

    for members in by_root.values() {
        grouped.extend(members.iter().cloned());
        let node = members.iter().cloned().collect::<Vec<_>>().join("+");
        let single = members.len() == 1;
        let port_name = |component: &str, port: &str| {
            if single {
                port.to_string()
            } else {
                format!("{component}.{port}")
            }
        };
        let is_member = |e: &Option<Endpoint>| e.as_ref().is_some_and(|e| members.contains(&e.component));
        let removed: Vec<String> = df
            .streams
            .iter()
            .filter(|s| is_member(&s.producer) && is_member(&s.consumer))
            .map(|s| s.name.clone())
            .collect();
        internal.extend(removed.iter().cloned());

        // Reachability within the group: member paths plus internal streams.
        let mut adj: BTreeMap<Interface, BTreeSet<Interface>> = BTreeMap::new();
        let mut member_paths = Vec::new();
        for m in members {
            let c = &df.components[m];
            for p in &c.paths {
                let a = Interface::input(m, &p.from);
                let b = Interface::output(m, &p.to);
                adj.entry(a.clone()).or_default().insert(b.clone());
                member_paths.push((a, b, p));
            }
        }
        for s in df.streams.iter().filter(|s| removed.contains(&s.name)) {
            let (p, c) = (s.producer.as_ref().unwrap(), s.consumer.as_ref().unwrap());
            adj.entry(Interface::output(&p.component, &p.port))
                .or_default()
                .insert(Interface::input(&c.component, &c.port));
        }
        let reach = |from: &Interface| -> BTreeSet<Interface> {
            let mut seen = BTreeSet::from([from.clone()]);
            let mut queue = VecDeque::from([from.clone()]);
            while let Some(x) = queue.pop_front() {
                for y in adj.get(&x).into_iter().flatten() {
                    if seen.insert(y.clone()) {
                        queue.push_back(y.clone());
                    }
                }
            }
            seen
        };

        let external_input = |m: &str, port: &str| {
            let mut incoming = df.streams_into(m, port).peekable();
            incoming.peek().is_none() || df.streams_into(m, port).any(|s| !removed.contains(&s.name))
        };
        let external_output = |m: &str, port: &str| {
            let mut outgoing = df.streams_from(m, port).peekable();
            outgoing.peek().is_none() || df.streams_from(m, port).any(|s| !removed.contains(&s.name))
        };

        let mut ins = Vec::new();
        let mut outs = Vec::new();
        for m in members {
            let c = &df.components[m];
            for port in c.inputs() {
                if external_input(m, port) {
                    ins.push(Interface::input(m, port));
                }
            }
            for port in c.outputs() {
                if external_output(m, port) {
                    outs.push(Interface::output(m, port));
                }
            }
        }
        let reach_map: BTreeMap<Interface, BTreeSet<Interface>> = adj
            .keys()
            .chain(member_paths.iter().map(|(_, b, _)| b))
            .map(|i| (i.clone(), reach(i)))
            .collect();

        let mut paths = Vec::new();
        for i in &ins {
            let from_i = &reach_map[i];
            for o in &outs {
                if !from_i.contains(o) {
                    continue;
                }
                let best = member_paths
                    .iter()
                    .filter(|(a, b, _)| from_i.contains(a) && reach_map[b].contains(o))
                    .map(|(_, _, p)| *p)
                    .max_by(|x, y| x.collapse_rank(y));
                if let Some(best) = best {
                    paths.push(PathAnnotation {
                        from: port_name(&i.component, &i.port),
                        to: port_name(&o.component, &o.port),
                        kind: best.kind,
                        gate: best.gate.clone(),
                    });
                }
            }
        }
        paths.sort();
        let rep = members.iter().any(|m| df.components[m].rep);
        out.components.insert(node.clone(), ComponentSpec { name: node.clone(), paths, rep });
        for m in members {
            let c = &df.components[m];
            for port in c.inputs().into_iter().chain(c.outputs()) {
                rename.insert(Endpoint::new(m, port), Endpoint::new(&node, &port_name(m, port)));
            }
        }
        notes.push(CollapsedGroup { node, members: members.iter().cloned().collect(), removed_streams: removed });
    }

    for (name, c) in &df.components {
        if !grouped.contains(name) {
            out.components.insert(name.clone(), c.clone());
        }
    }
    for s in &df.streams {
        if internal.contains(&s.name) {
            continue;
        }
        let mut s = s.clone();
        for end in [&mut s.producer, &mut s.consumer].into_iter().flatten() {
            if let Some(r) = rename.get(end) {
                *end = r.clone();
            }
        }
        out.streams.push(s);
    }
    (out, notes)
}

struct UnionFind {
    parent: BTreeMap<String, String>,
}

impl UnionFind {
    fn new(items: impl Iterator<Item = String>) -> Self {
        UnionFind { parent: items.map(|i| (i.clone(), i)).collect() }
    }

    fn find(&mut self, x: &str) -> String {
        let p = self.parent.get(x).cloned().unwrap_or_else(|| x.to_string());
        if p == x {
            return p;
        }
        let root = self.find(&p);
        self.parent.insert(x.to_string(), root.clone());
        root
    }

    fn union(&mut self, a: &str, b: &str) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent.insert(hi, lo);
        }
    }
}

/// One hop of a source-to-sink path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "hop", rename_all = "snake_case")]
pub enum Hop {
    Stream { name: String },
    Component { component: String, annotation: PathAnnotation },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfacePath {
    pub hops: Vec<Hop>,
}

impl fmt::Display for InterfacePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .hops
            .iter()
            .map(|h| match h {
                Hop::Stream { name } => name.clone(),
                Hop::Component { component, annotation } => {
                    format!("{component}[{}->{} {}]", annotation.from, annotation.to, annotation.label())
                }
            })
            .collect();
        f.write_str(&parts.join(" -> "))
    }
}

/// Enumerate every source-to-sink path of an acyclic dataflow.
///
/// Sources are external input streams plus component inputs that no stream
/// feeds; sinks are streams without a consumer plus unconnected outputs.
/// Output order is lexicographic by component then port.
pub fn enumerate_paths(df: &LogicalDataflow) -> Vec<InterfacePath> {
    let mut starts: Vec<(Endpoint, Option<String>)> = df
        .sources()
        .filter_map(|s| s.consumer.clone().map(|c| (c, Some(s.name.clone()))))
        .collect();
    for c in df.components.values() {
        for port in c.inputs() {
            if df.streams_into(&c.name, port).next().is_none() {
                starts.push((Endpoint::new(&c.name, port), None));
            }
        }
    }
    starts.sort();

    let mut out = Vec::new();
    for (entry, stream) in starts {
        let mut hops = Vec::new();
        if let Some(s) = stream {
            hops.push(Hop::Stream { name: s });
        }
        walk(df, &entry, &mut hops, &mut out, df.components.len() + df.streams.len());
    }
    out
}

fn walk(df: &LogicalDataflow, at: &Endpoint, hops: &mut Vec<Hop>, out: &mut Vec<InterfacePath>, budget: usize) {
    let Some(c) = df.components.get(&at.component) else {
        out.push(InterfacePath { hops: hops.clone() });
        return;
    };
    if budget == 0 {
        // Only reachable on cyclic input.
        return;
    }
    let mut paths: Vec<&PathAnnotation> = c.paths.iter().filter(|p| p.from == at.port).collect();
    paths.sort_by(|a, b| a.to.cmp(&b.to).then_with(|| a.cmp(b)));
    for p in paths {
        hops.push(Hop::Component { component: c.name.clone(), annotation: p.clone() });
        let mut next: Vec<&StreamSpec> = df.streams_from(&c.name, &p.to).collect();
        next.sort_by(|a, b| a.consumer.cmp(&b.consumer).then_with(|| a.name.cmp(&b.name)));
        if next.is_empty() {
            out.push(InterfacePath { hops: hops.clone() });
        }
        for s in next {
            hops.push(Hop::Stream { name: s.name.clone() });
            match &s.consumer {
                None => out.push(InterfacePath { hops: hops.clone() }),
                Some(consumer) => walk(df, consumer, hops, out, budget - 1),
            }
            hops.pop();
        }
        hops.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn severity_matches_label_table() {
        let table = [
            (StreamLabel::NDRead(Gate::Wildcard), 0),
            (StreamLabel::Taint, 0),
            (StreamLabel::seal(["k"]), 1),
            (StreamLabel::Async, 2),
            (StreamLabel::Run, 3),
            (StreamLabel::Inst, 4),
            (StreamLabel::Diverge, 5),
        ];
        for (label, s) in table {
            assert_eq!(label.severity(), s, "{label}");
        }
        assert!(StreamLabel::Taint.is_internal());
        assert!(!StreamLabel::Async.is_internal());
    }

    #[test]
    fn wordcount_is_well_formed() {
        let df = fixtures::wordcount(false);
        assert!(validate(&df, &FdSet::default()).is_empty());
    }

    #[test]
    fn seal_outside_schema_is_one_violation() {
        let mut df = fixtures::wordcount(false);
        let s = df.stream_mut("tweets").unwrap();
        s.schema = Some(attrs(["text", "batch"]));
        s.seal = Some(attrs(["window"]));
        let v = validate(&df, &FdSet::default());
        assert_eq!(v, vec![Violation::SealNotInSchema { stream: "tweets".into(), attribute: "window".into() }]);
    }

    #[test]
    fn ungated_or_path_is_one_violation() {
        let df = LogicalDataflow::new()
            .with_component(ComponentSpec::new(
                "R",
                vec![PathAnnotation { from: "a".into(), to: "b".into(), kind: PathKind::OR, gate: None }],
            ))
            .with_stream(StreamSpec::source("a", Endpoint::new("R", "a")))
            .with_stream(StreamSpec::sink("b", Endpoint::new("R", "b")));
        let v = validate(&df, &FdSet::default());
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::MissingGate { .. }));
    }

    #[test]
    fn dangling_endpoints_are_reported() {
        let df = fixtures::wordcount(false)
            .with_stream(StreamSpec::edge("x", Endpoint::new("Nope", "o"), Endpoint::new("Count", "zzz")));
        let v = validate(&df, &FdSet::default());
        assert_eq!(v.len(), 2, "{v:?}");
    }

    #[test]
    fn empty_dataflow_has_no_components() {
        assert_eq!(validate(&LogicalDataflow::new(), &FdSet::default()), vec![Violation::NoComponents]);
    }

    #[test]
    fn cache_self_edge_collapses_in_place() {
        let df = fixtures::ad_network(fixtures::Query::Thresh, None);
        let (out, groups) = collapse_cycles_with_groups(&df);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].node, "Cache");
        assert_eq!(groups[0].removed_streams, vec!["gossip".to_string()]);
        assert!(out.stream("gossip").is_none());
        let cache = &out.components["Cache"];
        let resp = cache.paths.iter().find(|p| p.from == "response" && p.to == "response").unwrap();
        assert_eq!(resp.kind, PathKind::CW);
        // Report is untouched: Cache provides no route from r back to q.
        assert_eq!(out.components["Report"], df.components["Report"]);
        assert!(InterfaceGraph::build(&out).topo_order().is_some());
    }

    #[test]
    fn acyclic_graph_is_unchanged() {
        let df = fixtures::wordcount(true);
        assert_eq!(collapse_cycles(&df), df);
    }

    #[test]
    fn two_node_cycle_takes_most_severe_annotation() {
        let df = LogicalDataflow::new()
            .with_component(ComponentSpec::new("A", vec![PathAnnotation::confluent("x", "y", PathKind::CR)]))
            .with_component(ComponentSpec::new(
                "B",
                vec![PathAnnotation::ordered("y", "x", PathKind::OW, Gate::keys(["g"]))],
            ))
            .with_stream(StreamSpec::source("in", Endpoint::new("A", "x")))
            .with_stream(StreamSpec::edge("ab", Endpoint::new("A", "y"), Endpoint::new("B", "y")))
            .with_stream(StreamSpec::edge("ba", Endpoint::new("B", "x"), Endpoint::new("A", "x")))
            .with_stream(StreamSpec::sink("out", Endpoint::new("A", "y")));
        let out = collapse_cycles(&df);
        assert_eq!(out.components.len(), 1);
        let node = &out.components["A+B"];
        assert_eq!(node.paths.len(), 1);
        assert_eq!(node.paths[0].kind, PathKind::OW);
        assert_eq!(node.paths[0].gate, Some(Gate::keys(["g"])));
        assert_eq!(out.streams.len(), 2);
        assert_eq!(collapse_cycles(&out), out);
    }

    #[test]
    fn collapse_tie_prefers_first_gate() {
        let df = LogicalDataflow::new()
            .with_component(ComponentSpec::new(
                "A",
                vec![PathAnnotation::ordered("x", "y", PathKind::OW, Gate::keys(["b"]))],
            ))
            .with_component(ComponentSpec::new(
                "B",
                vec![PathAnnotation::ordered("y", "x", PathKind::OW, Gate::keys(["a"]))],
            ))
            .with_stream(StreamSpec::source("in", Endpoint::new("A", "x")))
            .with_stream(StreamSpec::edge("ab", Endpoint::new("A", "y"), Endpoint::new("B", "y")))
            .with_stream(StreamSpec::edge("ba", Endpoint::new("B", "x"), Endpoint::new("A", "x")))
            .with_stream(StreamSpec::sink("out", Endpoint::new("A", "y")));
        let out = collapse_cycles(&df);
        assert_eq!(out.components["A+B"].paths[0].gate, Some(Gate::keys(["a"])));
    }

    #[test]
    fn ad_network_paths() {
        let df = collapse_cycles(&fixtures::ad_network(fixtures::Query::Poor, None));
        let paths = enumerate_paths(&df);
        let rendered: Vec<String> = paths.iter().map(ToString::to_string).collect();
        // The collapsed Cache reaches response from request around the
        // gossip loop, so that pair picks up the loop's CW.
        assert_eq!(
            rendered,
            vec![
                "request -> Cache[request->request CR] -> q -> Report[request->response OR{id}] -> r -> Cache[response->response CW] -> answer",
                "request -> Cache[request->response CW] -> answer",
                "c -> Report[click->response CW] -> r -> Cache[response->response CW] -> answer",
            ]
        );
    }

    #[test]
    fn single_component_has_one_path() {
        let df = LogicalDataflow::new()
            .with_component(ComponentSpec::new("A", vec![PathAnnotation::confluent("i", "o", PathKind::CR)]));
        assert_eq!(enumerate_paths(&df).len(), 1);
    }

    #[test]
    fn wordcount_has_one_path() {
        let paths = enumerate_paths(&fixtures::wordcount(false));
        assert_eq!(paths.len(), 1);
        assert_eq!(
            paths[0].to_string(),
            "tweets -> Splitter[tweets->words CR] -> words -> Count[words->counts OW{batch,word}] -> counts -> Commit[counts->db CW] -> db"
        );
    }
}

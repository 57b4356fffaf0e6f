//! Label inference and reconciliation.
//!
//! Each component path rewrites its input stream label into a set of labels
//! ([`infer_path`]); the sets of all paths ending at one output interface are
//! pooled and reduced to a single external label ([`reconcile`]). [`analyze`]
//! runs both steps over a whole dataflow in topological order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lineage::{compatible, FdSet};
use crate::model::{
    collapse_cycles_with_groups, AttrSet, CollapsedGroup, Direction, Gate, InterfaceGraph, LogicalDataflow,
    PathAnnotation, PathKind, StreamLabel,
};

/// Inference rules. Display is the rule's tag in derivation traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// {Async, Run} through OR_gate derives NDRead_gate.
    NdRead,
    /// {Async, Run} through OW_gate derives Taint.
    OrderedWrite,
    /// Inst through CW or OW_gate derives Taint.
    InstWrite,
    /// Seal_key through OW_gate with an incompatible gate derives Taint.
    IncompatibleSeal,
    /// Seal_key through a compatible OR/OW path becomes Async.
    SealConsumed,
    /// The input label passes through unchanged.
    Preserve,
}

impl Rule {
    pub fn tag(self) -> &'static str {
        match self {
            Rule::NdRead => "(1)",
            Rule::OrderedWrite => "(2)",
            Rule::InstWrite => "(3)",
            Rule::IncompatibleSeal => "(4)",
            Rule::SealConsumed => "(s)",
            Rule::Preserve => "(p)",
        }
    }

    pub const ALL: [Rule; 6] =
        [Rule::NdRead, Rule::OrderedWrite, Rule::InstWrite, Rule::IncompatibleSeal, Rule::SealConsumed, Rule::Preserve];

    pub fn summary(self) -> &'static str {
        match self {
            Rule::NdRead => "Async/Run through OR gives NDRead",
            Rule::OrderedWrite => "Async/Run through OW gives Taint",
            Rule::InstWrite => "Inst through CW/OW gives Taint",
            Rule::IncompatibleSeal => "Seal through incompatible OW gives Taint",
            Rule::SealConsumed => "Seal through compatible OR/OW gives Async",
            Rule::Preserve => "label preserved",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inference {
    pub labels: Vec<StreamLabel>,
    pub rules: Vec<Rule>,
}

/// Rewrite `input` along `ann`. The result holds the surviving input label
/// (or what a consumed seal became) followed by every derived label.
pub fn infer_path(input: &StreamLabel, ann: &PathAnnotation, fds: &FdSet) -> Inference {
    use StreamLabel::*;
    let gate = ann.effective_gate();
    let mut input = input.clone();
    let mut rules = Vec::new();

    if let Seal(key) = &input {
        if ann.kind.is_confluent() {
            return Inference { labels: vec![input], rules: vec![Rule::Preserve] };
        }
        if compatible(&gate, key, fds) {
            return Inference { labels: vec![Async], rules: vec![Rule::SealConsumed] };
        }
        if ann.kind == PathKind::OW {
            return Inference { labels: vec![Async, Taint], rules: vec![Rule::IncompatibleSeal] };
        }
        // An incompatible seal is no help to a read: treat it as Async.
        input = Async;
    }

    let derived = match (&input, ann.kind) {
        (Async | Run, PathKind::OR) => Some((NDRead(gate), Rule::NdRead)),
        (Async | Run, PathKind::OW) => Some((Taint, Rule::OrderedWrite)),
        (Inst, PathKind::CW | PathKind::OW) => Some((Taint, Rule::InstWrite)),
        _ => None,
    };
    let mut labels = vec![input];
    match derived {
        Some((l, r)) => {
            labels.push(l);
            rules.push(r);
        }
        None => rules.push(Rule::Preserve),
    }
    Inference { labels, rules }
}

/// A pooled label together with the input port it entered through.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelEntry {
    pub label: StreamLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

/// The multiset of labels reconciled at one output interface.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSet {
    pub entries: Vec<LabelEntry>,
}

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, label: StreamLabel, origin: Option<&str>) {
        self.entries.push(LabelEntry { label, origin: origin.map(str::to_string) });
    }

    pub fn labels(&self) -> impl Iterator<Item = &StreamLabel> {
        self.entries.iter().map(|e| &e.label)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromIterator<StreamLabel> for LabelSet {
    fn from_iter<T: IntoIterator<Item = StreamLabel>>(iter: T) -> Self {
        LabelSet { entries: iter.into_iter().map(|label| LabelEntry { label, origin: None }).collect() }
    }
}

/// An NDRead is protected when every other pooled label is the same NDRead
/// or a seal compatible with its gate. Labels that entered through the same
/// port as the read itself describe the read's own input and are skipped.
pub fn protected(gate: &Gate, origin: Option<&str>, labels: &LabelSet, fds: &FdSet) -> bool {
    labels
        .entries
        .iter()
        .filter(|e| origin.is_none() || e.origin.as_deref() != origin)
        .all(|e| match &e.label {
            StreamLabel::NDRead(g) => g == gate,
            StreamLabel::Seal(key) => compatible(gate, key, fds),
            _ => false,
        })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reconciliation {
    pub label: StreamLabel,
    /// Labels added for Taint and unprotected NDReads.
    pub added: Vec<StreamLabel>,
    /// Gates of NDReads found protected.
    pub protected: Vec<Gate>,
}

/// Reduce a pooled label set to one external label.
pub fn reconcile(labels: &LabelSet, rep: bool, fds: &FdSet) -> Result<StreamLabel> {
    reconcile_traced(labels, rep, fds)
        .map(|r| r.label)
        .ok_or_else(|| Error::EmptyReconciliation { component: "?".into(), port: "?".into() })
}

pub fn reconcile_traced(labels: &LabelSet, rep: bool, fds: &FdSet) -> Option<Reconciliation> {
    let mut added = Vec::new();
    let mut prot = Vec::new();
    if labels.labels().any(|l| *l == StreamLabel::Taint) {
        added.push(if rep { StreamLabel::Diverge } else { StreamLabel::Run });
    }
    let reads: BTreeSet<(&Gate, Option<&str>)> = labels
        .entries
        .iter()
        .filter_map(|e| match &e.label {
            StreamLabel::NDRead(g) => Some((g, e.origin.as_deref())),
            _ => None,
        })
        .collect();
    for (gate, origin) in reads {
        if protected(gate, origin, labels, fds) {
            prot.push(gate.clone());
        } else {
            added.push(if rep { StreamLabel::Inst } else { StreamLabel::Run });
        }
    }
    let external: Vec<&StreamLabel> =
        labels.labels().chain(added.iter()).filter(|l| !l.is_internal()).collect();
    let best = StreamLabel::max_severity(external.iter().copied())?.clone();
    let label = match &best {
        StreamLabel::Seal(k) => {
            let mixed = external.iter().any(|l| matches!(l, StreamLabel::Seal(other) if other != k));
            if mixed {
                StreamLabel::Async
            } else {
                best
            }
        }
        _ => best,
    };
    Some(Reconciliation { label, added, protected: prot })
}

/// One path's contribution at an output interface.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathInference {
    /// Input stream feeding the path, `None` for an unconnected input.
    pub stream: Option<String>,
    pub path: PathAnnotation,
    pub input: StreamLabel,
    pub rules: Vec<Rule>,
    pub output: Vec<StreamLabel>,
}

impl fmt::Display for PathInference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let out: Vec<String> = self.output.iter().map(ToString::to_string).collect();
        let rules: Vec<&str> = self.rules.iter().map(|r| r.tag()).collect();
        write!(
            f,
            "{}: {}, {} {} ⇒ {}",
            self.stream.as_deref().unwrap_or("-"),
            self.input,
            self.path.label(),
            rules.join(""),
            out.join(", ")
        )
    }
}

/// Inference and reconciliation at one output interface.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub component: String,
    pub port: String,
    pub rep: bool,
    /// True when the component's inputs are totally ordered, which removes
    /// cross-instance effects from reconciliation.
    pub ordered: bool,
    pub inferences: Vec<PathInference>,
    pub pooled: LabelSet,
    pub reconciliation: Reconciliation,
}

impl Derivation {
    /// Whether reconciliation found Taint or an unprotected NDRead.
    pub fn is_anomalous(&self) -> bool {
        !self.reconciliation.added.is_empty()
    }

    /// Whether some seal made this output safe.
    pub fn relied_on_seal(&self) -> bool {
        self.inferences.iter().any(|i| i.rules.contains(&Rule::SealConsumed))
            || !self.reconciliation.protected.is_empty()
    }

    pub fn trace(&self) -> Vec<String> {
        let mut lines: Vec<String> = self.inferences.iter().map(|i| format!("  {i}")).collect();
        let mut extras = Vec::new();
        if self.rep {
            extras.push("Rep".to_string());
        }
        if self.ordered {
            extras.push("ordered".to_string());
        }
        for a in &self.reconciliation.added {
            extras.push(format!("+{a}"));
        }
        for g in &self.reconciliation.protected {
            extras.push(format!("protected NDRead{{{g}}}"));
        }
        let extras = if extras.is_empty() { String::new() } else { format!(" [{}]", extras.join(", ")) };
        lines.push(format!("  {}.{} ⇒ {}{}", self.component, self.port, self.reconciliation.label, extras));
        lines
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Label overrides for source streams.
    #[serde(default)]
    pub source_labels: BTreeMap<String, StreamLabel>,
    /// Components whose inputs are delivered in one total order.
    #[serde(default)]
    pub ordered: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub stream_labels: BTreeMap<String, StreamLabel>,
    /// Labels of output interfaces, keyed `Component.port`.
    pub interface_labels: BTreeMap<String, StreamLabel>,
    pub derivations: Vec<Derivation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataflow_label: Option<StreamLabel>,
    pub sinks: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unlabeled: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collapsed: Vec<CollapsedGroup>,
}

impl AnalysisReport {
    pub fn label(&self, stream: &str) -> Option<&StreamLabel> {
        self.stream_labels.get(stream)
    }

    pub fn derivations_for<'a>(&'a self, component: &'a str) -> impl Iterator<Item = &'a Derivation> {
        self.derivations.iter().filter(move |d| d.component == component)
    }

    /// True iff every sink label is at most Async.
    pub fn is_safe(&self) -> bool {
        self.dataflow_label.as_ref().is_none_or(|l| !l.is_anomalous())
    }

    pub fn trace(&self) -> Vec<String> {
        let mut out = Vec::new();
        for d in &self.derivations {
            out.push(format!("{}.{}:", d.component, d.port));
            out.extend(d.trace());
        }
        out
    }
}

/// Label every stream of `df`, with unannotated sources read as Async.
pub fn analyze(df: &LogicalDataflow, fds: &FdSet) -> Result<AnalysisReport> {
    analyze_with(df, fds, &AnalysisOptions::default())
}

pub fn analyze_with(df: &LogicalDataflow, fds: &FdSet, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let (df, collapsed) = collapse_cycles_with_groups(df);
    let order = InterfaceGraph::build(&df).topo_order().ok_or(Error::Cyclic)?;

    let mut stream_labels: BTreeMap<String, StreamLabel> = BTreeMap::new();
    for s in df.sources() {
        let label = opts.source_labels.get(&s.name).cloned().unwrap_or_else(|| match &s.seal {
            Some(k) => StreamLabel::Seal(k.clone()),
            None => StreamLabel::Async,
        });
        stream_labels.insert(s.name.clone(), label);
    }

    let mut interface_labels = BTreeMap::new();
    let mut derivations = Vec::new();
    for iface in order.iter().filter(|i| i.direction == Direction::Output) {
        let Some(component) = df.components.get(&iface.component) else { continue };
        let ordered = opts.ordered.contains(&component.name)
            || collapsed
                .iter()
                .any(|g| g.node == component.name && g.members.iter().any(|m| opts.ordered.contains(m)));
        let rep = df.effective_rep(&component.name);

        let mut local_fds = fds.clone();
        for s in df.streams.iter().filter(|s| s.consumer.as_ref().is_some_and(|c| c.component == component.name))
        {
            for fd in fds.localize(&s.name).iter() {
                local_fds.insert(fd.clone());
            }
        }

        let mut pooled = LabelSet::new();
        let mut inferences = Vec::new();
        let mut paths: Vec<&PathAnnotation> = component.paths.iter().filter(|p| p.to == iface.port).collect();
        paths.sort();
        for p in paths {
            let mut inputs: Vec<(Option<String>, StreamLabel)> = df
                .streams_into(&component.name, &p.from)
                .filter_map(|s| stream_labels.get(&s.name).map(|l| (Some(s.name.clone()), l.clone())))
                .collect();
            if df.streams_into(&component.name, &p.from).next().is_none() {
                inputs.push((None, StreamLabel::Async));
            }
            for (stream, input) in inputs {
                let inf = infer_path(&input, p, &local_fds);
                for l in &inf.labels {
                    pooled.push(l.clone(), Some(&p.from));
                }
                inferences.push(PathInference { stream, path: p.clone(), input, rules: inf.rules, output: inf.labels });
            }
        }
        if pooled.is_empty() {
            continue;
        }
        let reconciliation = reconcile_traced(&pooled, rep && !ordered, &local_fds).ok_or_else(|| {
            Error::EmptyReconciliation { component: component.name.clone(), port: iface.port.clone() }
        })?;
        let label = reconciliation.label.clone();
        interface_labels.insert(format!("{}.{}", component.name, iface.port), label.clone());
        for s in df.streams_from(&component.name, &iface.port) {
            stream_labels.insert(s.name.clone(), outgoing_label(&label, s.schema.as_ref()));
        }
        derivations.push(Derivation {
            component: component.name.clone(),
            port: iface.port.clone(),
            rep,
            ordered,
            inferences,
            pooled,
            reconciliation,
        });
    }

    let unlabeled: Vec<String> =
        df.streams.iter().filter(|s| !stream_labels.contains_key(&s.name)).map(|s| s.name.clone()).collect();
    let mut sink_labels: Vec<&StreamLabel> = Vec::new();
    let mut sinks = Vec::new();
    for s in df.sinks() {
        sinks.push(s.name.clone());
        if let Some(l) = stream_labels.get(&s.name) {
            sink_labels.push(l);
        }
    }
    for end in df.unconnected_outputs() {
        if let Some(l) = interface_labels.get(&end.to_string()) {
            sink_labels.push(l);
        }
    }
    let dataflow_label = StreamLabel::max_severity(sink_labels).cloned();
    Ok(AnalysisReport { stream_labels, interface_labels, derivations, dataflow_label, sinks, unlabeled, collapsed })
}

/// A seal only survives onto a stream whose schema still carries its key.
fn outgoing_label(label: &StreamLabel, schema: Option<&AttrSet>) -> StreamLabel {
    match (label, schema) {
        (StreamLabel::Seal(k), Some(schema)) if !k.is_subset(schema) => StreamLabel::Async,
        _ => label.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, Query};
    use crate::model::attrs;

    fn none() -> FdSet {
        FdSet::new()
    }

    fn ow(g: &[&str]) -> PathAnnotation {
        PathAnnotation::ordered("i", "o", PathKind::OW, Gate::keys(g.iter().copied()))
    }

    fn or(g: &[&str]) -> PathAnnotation {
        PathAnnotation::ordered("i", "o", PathKind::OR, Gate::keys(g.iter().copied()))
    }

    #[test]
    fn async_through_ordered_write_taints() {
        let inf = infer_path(&StreamLabel::Async, &ow(&["word", "batch"]), &none());
        assert_eq!(inf.labels, vec![StreamLabel::Async, StreamLabel::Taint]);
        assert_eq!(inf.rules, vec![Rule::OrderedWrite]);
    }

    #[test]
    fn async_through_cr_is_preserved() {
        let p = PathAnnotation::confluent("i", "o", PathKind::CR);
        let inf = infer_path(&StreamLabel::Async, &p, &none());
        assert_eq!(inf.labels, vec![StreamLabel::Async]);
        assert_eq!(inf.rules, vec![Rule::Preserve]);
    }

    #[test]
    fn compatible_seal_is_consumed() {
        let inf = infer_path(&StreamLabel::seal(["batch"]), &ow(&["word", "batch"]), &none());
        assert_eq!(inf.labels, vec![StreamLabel::Async]);
        assert_eq!(inf.rules, vec![Rule::SealConsumed]);
    }

    #[test]
    fn inst_through_cw_taints() {
        let p = PathAnnotation::confluent("i", "o", PathKind::CW);
        let inf = infer_path(&StreamLabel::Inst, &p, &none());
        assert_eq!(inf.labels, vec![StreamLabel::Inst, StreamLabel::Taint]);
        assert_eq!(inf.rules, vec![Rule::InstWrite]);
    }

    #[test]
    fn incompatible_seal_through_ow_taints() {
        let inf = infer_path(&StreamLabel::seal(["campaign"]), &ow(&["id"]), &none());
        assert!(inf.labels.contains(&StreamLabel::Taint));
        assert_eq!(inf.rules, vec![Rule::IncompatibleSeal]);
    }

    #[test]
    fn incompatible_seal_through_or_reads_nondeterministically() {
        let inf = infer_path(&StreamLabel::seal(["campaign"]), &or(&["id"]), &none());
        assert_eq!(inf.labels, vec![StreamLabel::Async, StreamLabel::NDRead(Gate::keys(["id"]))]);
    }

    #[test]
    fn protection_examples() {
        let g = Gate::keys(["id", "campaign"]);
        let set: LabelSet = [StreamLabel::NDRead(g.clone()), StreamLabel::seal(["campaign"])].into_iter().collect();
        assert!(protected(&g, None, &set, &none()));

        let id = Gate::keys(["id"]);
        let set: LabelSet = [StreamLabel::NDRead(id.clone()), StreamLabel::Async].into_iter().collect();
        assert!(!protected(&id, None, &set, &none()));

        let set: LabelSet = [StreamLabel::NDRead(id.clone())].into_iter().collect();
        assert!(protected(&id, None, &set, &none()));
    }

    #[test]
    fn reconciliation_examples() {
        let set: LabelSet = [StreamLabel::Async, StreamLabel::Taint].into_iter().collect();
        assert_eq!(reconcile(&set, false, &none()).unwrap(), StreamLabel::Run);

        let set: LabelSet = [StreamLabel::Async, StreamLabel::NDRead(Gate::keys(["id"]))].into_iter().collect();
        assert_eq!(reconcile(&set, true, &none()).unwrap(), StreamLabel::Inst);

        let g = Gate::keys(["id", "campaign"]);
        let mut set = LabelSet::new();
        set.push(StreamLabel::seal(["campaign"]), Some("click"));
        set.push(StreamLabel::Async, Some("request"));
        set.push(StreamLabel::NDRead(g), Some("request"));
        assert_eq!(reconcile(&set, true, &none()).unwrap(), StreamLabel::Async);

        let set: LabelSet = [StreamLabel::Inst, StreamLabel::Taint].into_iter().collect();
        assert_eq!(reconcile(&set, true, &none()).unwrap(), StreamLabel::Diverge);
    }

    #[test]
    fn lone_taint_still_yields_a_label() {
        let set: LabelSet = [StreamLabel::Taint].into_iter().collect();
        assert_eq!(reconcile_traced(&set, true, &none()).unwrap().label, StreamLabel::Diverge);
        let empty = LabelSet::new();
        assert!(reconcile(&empty, false, &none()).is_err());
    }

    #[test]
    fn mixed_seal_keys_reconcile_to_async() {
        let set: LabelSet = [StreamLabel::seal(["a"]), StreamLabel::seal(["b"])].into_iter().collect();
        assert_eq!(reconcile(&set, false, &none()).unwrap(), StreamLabel::Async);
        let set: LabelSet = [StreamLabel::seal(["a"]), StreamLabel::seal(["a"])].into_iter().collect();
        assert_eq!(reconcile(&set, false, &none()).unwrap(), StreamLabel::seal(["a"]));
    }

    #[test]
    fn wordcount_labels() {
        let r = analyze(&fixtures::wordcount(false), &none()).unwrap();
        assert_eq!(r.label("db"), Some(&StreamLabel::Run));
        assert_eq!(r.label("words"), Some(&StreamLabel::Async));
        let r = analyze(&fixtures::wordcount(true), &none()).unwrap();
        assert_eq!(r.label("words"), Some(&StreamLabel::seal(["batch"])));
        assert_eq!(r.label("db"), Some(&StreamLabel::Async));
        assert!(r.is_safe());
    }

    #[test]
    fn ad_network_labels() {
        let cases = [
            (Query::Thresh, None, StreamLabel::Async),
            (Query::Poor, None, StreamLabel::Diverge),
            (Query::Campaign, Some(&["campaign"][..]), StreamLabel::Async),
            (Query::Window, Some(&["window"][..]), StreamLabel::Async),
            (Query::Campaign, None, StreamLabel::Diverge),
            (Query::Poor, Some(&["campaign"][..]), StreamLabel::Diverge),
        ];
        for (q, seal, expect) in cases {
            let r = analyze(&fixtures::ad_network(q, seal), &none()).unwrap();
            assert_eq!(r.dataflow_label.as_ref(), Some(&expect), "{q:?} {seal:?}");
        }
    }

    #[test]
    fn poor_trace_names_rules() {
        let r = analyze(&fixtures::ad_network(Query::Poor, None), &none()).unwrap();
        let text = r.trace().join("\n");
        assert!(text.contains("Async, OR{id} (1) ⇒ Async, NDRead{id}"), "{text}");
        assert!(text.contains("Inst, CW (3) ⇒ Inst, Taint"), "{text}");
        assert!(text.contains("Cache.response ⇒ Diverge"), "{text}");
    }

    #[test]
    fn ordering_leaves_run() {
        let opts = AnalysisOptions { ordered: ["Report".to_string()].into(), ..Default::default() };
        let r = analyze_with(&fixtures::ad_network(Query::Poor, None), &none(), &opts).unwrap();
        assert_eq!(r.dataflow_label, Some(StreamLabel::Run));
    }

    #[test]
    fn seal_dropped_when_schema_lacks_key() {
        let mut df = fixtures::wordcount(true);
        df.stream_mut("words").unwrap().schema = Some(attrs(["word"]));
        let r = analyze(&df, &none()).unwrap();
        assert_eq!(r.label("words"), Some(&StreamLabel::Async));
        assert_eq!(r.label("db"), Some(&StreamLabel::Run));
    }

    #[test]
    fn source_override_raises_label() {
        let mut opts = AnalysisOptions::default();
        opts.source_labels.insert("c".into(), StreamLabel::Inst);
        let r = analyze_with(&fixtures::ad_network(Query::Thresh, None), &none(), &opts).unwrap();
        assert_eq!(r.dataflow_label, Some(StreamLabel::Diverge));
    }
}
